#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"

namespace bltqr {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct SamplerConfig {
    std::size_t iterations = 7000;
    std::size_t burn_in = 2500;
    std::size_t thin = 1;
    std::uint64_t seed = 0;
    ModelVariant variant = ModelVariant::Full;

    void validate() const {
        if (!(burn_in < iterations))
            throw std::invalid_argument("SamplerConfig: burn_in must be smaller than iterations");
        if (thin == 0) throw std::invalid_argument("SamplerConfig: thin must be at least 1");
    }

    std::size_t stored_draws() const { return (iterations - burn_in + thin - 1) / thin; }
};

struct ChainManifest {
    std::string version = kLibraryVersion;
    SamplerConfig config;
    Hyperparams hyper;
    std::vector<std::size_t> image_dims;
    std::size_t n_visits = 0;
    std::size_t n_subjects = 0;
    std::size_t n_covariates = 0;
    std::string data_dir; // where the training data was read from, if any
    bool masked = false;
    double fit_seconds = 0.0; // informational only; excluded from reproducibility
};

/// Post-burn-in thinned draws. Coefficient draws hold the materialized total
/// effect per visit (shared + visit-specific) at cell level, flattened
/// row-major. Inclusion flags are flattened component-major, then mode, then
/// element, and are present only for variants with visit-specific effects.
struct ChainOutput {
    ChainManifest manifest;
    std::vector<std::vector<std::vector<double>>> coef_draws;        // [visit][draw][cell]
    std::vector<double> sigma_draws;
    std::vector<double> intercept_draws;
    std::vector<double> slope_draws;
    std::vector<std::vector<double>> subject_intercept_draws;        // [draw][subject]
    std::vector<std::vector<double>> covariate_draws;                // [draw][k]
    std::vector<std::vector<std::vector<std::uint8_t>>> include_draws; // [visit][draw][flat]

    std::size_t draw_count() const { return sigma_draws.size(); }
    std::size_t visit_count() const { return coef_draws.size(); }
    std::size_t cell_count() const {
        std::size_t n = 1;
        for (std::size_t d : manifest.image_dims) n *= d;
        return n;
    }
};

} // namespace bltqr
