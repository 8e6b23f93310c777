#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "distributions.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace bltqr {

/// Synthetic-data scenario. The truth is a deterministic function of
/// (scenario_id, dims, seed): a scenario shape placed at a visit-dependent
/// location with a visit-dependent magnitude, plus scattered sparse voxels
/// at the last visit. Images are iid standard normal and the noise is
/// ALD(0, noise_scale, quantile) (standard normal for the misspecified
/// generator). Shapes are defined in relative coordinates so any image size
/// works; defaults are 48x48 for scenarios 1-4 and 30x30x30 for scenario 5.
struct ScenarioSpec {
    int scenario_id = 1; // 1 rectangle, 2 cross, 3 triangle, 4 circle, 5 cube (3-D)
    std::vector<std::size_t> dims;
    std::size_t n_train = 250;
    std::size_t n_test = 50;
    std::size_t n_visits = 3;
    double quantile = 0.5;
    double noise_scale = 1.0; // 0 disables noise
    std::uint64_t seed = 0;
    std::size_t n_sparse = 10;  // isolated voxels added at the last visit
    double sparse_lo = 1.2;     // sparse-voxel magnitude range
    double sparse_hi = 2.0;

    static ScenarioSpec defaults(int id) {
        ScenarioSpec s;
        s.scenario_id = id;
        s.dims = (id == 5) ? std::vector<std::size_t>{30, 30, 30} : std::vector<std::size_t>{48, 48};
        return s;
    }

    void validate() const {
        if (scenario_id < 1 || scenario_id > 5)
            throw std::invalid_argument("scenario id must lie in 1..5, got " +
                                        std::to_string(scenario_id));
        const std::size_t want = (scenario_id == 5) ? 3 : 2;
        if (dims.size() != want)
            throw std::invalid_argument("scenario " + std::to_string(scenario_id) + " needs " +
                                        std::to_string(want) + "-D dims");
        if (n_visits == 0) throw std::invalid_argument("scenario needs at least one visit");
        if (!(quantile > 0.0 && quantile < 1.0))
            throw std::invalid_argument("scenario quantile must lie in (0,1)");
        if (noise_scale < 0.0) throw std::invalid_argument("noise scale must be nonnegative");
        if (!(sparse_lo <= sparse_hi) || sparse_lo < 0.0)
            throw std::invalid_argument("bad sparse-voxel magnitude range");
    }
};

namespace detail {

// Shape centers shift by exactly 1/8 of the image per visit, so supports at
// the standard sizes translate by a whole number of cells.
inline double visit_center(std::size_t visit) {
    return std::min(0.30 + 0.125 * static_cast<double>(visit), 0.80);
}

inline double visit_magnitude(int scenario_id, std::size_t visit) {
    if (scenario_id == 5) return visit >= 2 ? 1.5 : 1.0;
    static constexpr double mags[] = {0.8, 1.0, 1.5};
    return mags[std::min<std::size_t>(visit, 2)];
}

inline bool in_shape(int scenario_id, double u0, double u1, double c) {
    switch (scenario_id) {
    case 1: return std::fabs(u0 - c) <= 0.12 && std::fabs(u1 - c - 0.02) <= 0.14;
    case 2:
        return (std::fabs(u0 - c) <= 0.05 && std::fabs(u1 - c) <= 0.16) ||
               (std::fabs(u0 - c) <= 0.16 && std::fabs(u1 - c) <= 0.05);
    case 3: {
        const double a = u0 - (c - 0.10), b = u1 - (c - 0.10);
        return a >= 0.0 && b >= 0.0 && a + b <= 0.22;
    }
    case 4: {
        const double d0 = u0 - c, d1 = u1 - c;
        return d0 * d0 + d1 * d1 <= 0.13 * 0.13;
    }
    default: return false;
    }
}

} // namespace detail

/// Ground-truth coefficient tensor for one visit (0-based).
inline DenseTensor true_signal(const ScenarioSpec& spec, std::size_t visit) {
    spec.validate();
    if (visit >= spec.n_visits) throw std::out_of_range("true_signal: visit out of range");
    DenseTensor out(spec.dims);
    const double c = detail::visit_center(visit);
    const double mag = detail::visit_magnitude(spec.scenario_id, visit);

    if (spec.scenario_id == 5) {
        for (std::size_t i = 0; i < spec.dims[0]; ++i) {
            const double u0 = (static_cast<double>(i) + 0.5) / static_cast<double>(spec.dims[0]);
            for (std::size_t j = 0; j < spec.dims[1]; ++j) {
                const double u1 = (static_cast<double>(j) + 0.5) / static_cast<double>(spec.dims[1]);
                for (std::size_t k = 0; k < spec.dims[2]; ++k) {
                    const double u2 =
                        (static_cast<double>(k) + 0.5) / static_cast<double>(spec.dims[2]);
                    if (std::fabs(u0 - c) <= 0.12 && std::fabs(u1 - c) <= 0.12 &&
                        std::fabs(u2 - c) <= 0.12)
                        out(i, j, k) = mag;
                }
            }
        }
    } else {
        for (std::size_t i = 0; i < spec.dims[0]; ++i) {
            const double u0 = (static_cast<double>(i) + 0.5) / static_cast<double>(spec.dims[0]);
            for (std::size_t j = 0; j < spec.dims[1]; ++j) {
                const double u1 = (static_cast<double>(j) + 0.5) / static_cast<double>(spec.dims[1]);
                if (detail::in_shape(spec.scenario_id, u0, u1, c)) out(i, j) = mag;
            }
        }
    }

    // Sparse signals outside the main shape, last visit only.
    if (visit + 1 == spec.n_visits && spec.n_visits > 1 && spec.n_sparse > 0) {
        RngStream rng = RngStream(spec.seed).substream(900 + static_cast<std::uint64_t>(spec.scenario_id));
        std::set<std::size_t> chosen;
        while (chosen.size() < spec.n_sparse) {
            const std::size_t cell =
                static_cast<std::size_t>(rng.uniform01() * static_cast<double>(out.size())) %
                out.size();
            if (out[cell] == 0.0 && chosen.insert(cell).second)
                out[cell] = rng.uniform(spec.sparse_lo, spec.sparse_hi);
        }
    }
    return out;
}

struct SimulatedData {
    Dataset train;
    Dataset test;
    std::vector<DenseTensor> truth; // per visit
};

namespace detail {

inline SimulatedData generate_impl(const ScenarioSpec& spec, bool gaussian_noise) {
    spec.validate();
    SimulatedData out;
    out.truth.reserve(spec.n_visits);
    for (std::size_t t = 0; t < spec.n_visits; ++t) out.truth.push_back(true_signal(spec, t));

    RngStream image_rng = RngStream(spec.seed).substream(1);
    RngStream noise_rng = RngStream(spec.seed).substream(2);

    auto build = [&](std::size_t n, std::size_t first_subject) {
        Dataset d;
        d.n_subjects = first_subject + n;
        d.n_visits = spec.n_visits;
        d.image_dims = spec.dims;
        d.records.reserve(n * spec.n_visits);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t t = 0; t < spec.n_visits; ++t) {
                VisitRecord rec;
                rec.subject = first_subject + i;
                rec.visit = t;
                rec.time = 0.5 * static_cast<double>(t);
                rec.image = DenseTensor(spec.dims);
                for (double& cell : rec.image.values()) cell = sample_normal(0.0, 1.0, image_rng);
                rec.outcome = inner_product(rec.image, out.truth[t]);
                if (spec.noise_scale > 0.0) {
                    rec.outcome += gaussian_noise
                                       ? sample_normal(0.0, spec.noise_scale, noise_rng)
                                       : sample_ald(0.0, spec.noise_scale, spec.quantile, noise_rng);
                }
                d.records.push_back(std::move(rec));
            }
        }
        return d;
    };

    // Test subjects take ids beyond the training range, so prediction treats
    // them as unseen.
    out.train = build(spec.n_train, 0);
    out.test = build(spec.n_test, spec.n_train);
    return out;
}

} // namespace detail

inline SimulatedData generate(const ScenarioSpec& spec) { return detail::generate_impl(spec, false); }

/// Same design with standard normal noise in place of the ALD errors.
inline SimulatedData generate_misspecified(const ScenarioSpec& spec) {
    return detail::generate_impl(spec, true);
}

} // namespace bltqr
