#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace bltqr {

/// One observed (subject, visit) pair.
struct VisitRecord {
    std::size_t subject = 0; // 0-based
    std::size_t visit = 0;   // 0-based
    double outcome = 0.0;
    double time = 0.0; // time from baseline
    DenseTensor image;
};

/// Longitudinal sample. A missing visit simply has no record; all model sums
/// range over the records that exist.
struct Dataset {
    std::size_t n_subjects = 0;
    std::size_t n_visits = 0;
    std::vector<std::size_t> image_dims;
    std::vector<VisitRecord> records;
    std::vector<std::vector<double>> covariates; // [subject][k], empty when none

    std::size_t n_covariates() const { return covariates.empty() ? 0 : covariates.front().size(); }

    void validate() const {
        if (n_subjects == 0) throw std::invalid_argument("Dataset: no subjects");
        if (n_visits == 0) throw std::invalid_argument("Dataset: no visits");
        if (image_dims.size() != 2 && image_dims.size() != 3)
            throw std::invalid_argument("Dataset: image order must be 2 or 3");
        if (!covariates.empty()) {
            if (covariates.size() != n_subjects)
                throw std::invalid_argument("Dataset: covariate rows != subject count");
            for (const auto& row : covariates)
                if (row.size() != covariates.front().size())
                    throw std::invalid_argument("Dataset: ragged covariate rows");
        }
        std::map<std::pair<std::size_t, std::size_t>, bool> seen;
        for (const auto& rec : records) {
            if (rec.subject >= n_subjects)
                throw std::invalid_argument("Dataset: subject index out of range");
            if (rec.visit >= n_visits)
                throw std::invalid_argument("Dataset: visit index out of range");
            if (rec.image.dims() != image_dims)
                throw std::invalid_argument("Dataset: record image dims differ from dataset dims");
            if (!seen.emplace(std::make_pair(rec.subject, rec.visit), true).second)
                throw std::invalid_argument("Dataset: duplicate (subject, visit) record");
        }
    }

    bool observed(std::size_t subject, std::size_t visit) const {
        return find(subject, visit) != nullptr;
    }

    const VisitRecord* find(std::size_t subject, std::size_t visit) const {
        for (const auto& rec : records)
            if (rec.subject == subject && rec.visit == visit) return &rec;
        return nullptr;
    }

    std::size_t record_index(std::size_t subject, std::size_t visit) const {
        for (std::size_t m = 0; m < records.size(); ++m)
            if (records[m].subject == subject && records[m].visit == visit) return m;
        throw std::invalid_argument("Dataset: (subject " + std::to_string(subject) + ", visit " +
                                    std::to_string(visit) + ") not observed");
    }

    std::vector<std::vector<std::size_t>> records_by_visit() const {
        std::vector<std::vector<std::size_t>> out(n_visits);
        for (std::size_t m = 0; m < records.size(); ++m) out[records[m].visit].push_back(m);
        return out;
    }

    std::vector<std::vector<std::size_t>> records_by_subject() const {
        std::vector<std::vector<std::size_t>> out(n_subjects);
        for (std::size_t m = 0; m < records.size(); ++m) out[records[m].subject].push_back(m);
        return out;
    }
};

} // namespace bltqr
