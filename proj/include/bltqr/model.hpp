#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "distributions.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace bltqr {

/// ALD mixture constants for quantile level q.
struct ThetaRho {
    double theta;
    double rho;
};

inline ThetaRho theta_rho(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("theta_rho: q must lie in (0,1)");
    return {ald_theta(q), std::sqrt(ald_rho_sq(q))};
}

struct Hyperparams {
    double quantile = 0.5;
    std::size_t rank_shared = 2; // CP rank of the visit-invariant effect
    std::size_t rank_visit = 2;  // CP rank of each visit-specific effect

    std::vector<double> dirichlet_weight;       // per-component concentration, shared effect
    std::vector<double> dirichlet_weight_visit; // per-component concentration, visit effects

    double a_lambda = 3.0;
    double b_lambda = 1.0;
    double a_tau = 1.0;
    double b_tau = 1.0;       // gamma rate of the shared global scale
    double b_tau_visit = 1.0; // gamma rate of each visit-level global scale
    double a_zeta = 1.0;
    double b_zeta = 1.0;
    double spike = 1e-4; // point-mass location of the spike scale

    double sigma_prior_shape = 1.0; // n0
    double sigma_prior_scale = 1.0; // s0
    double subject_intercept_var = 1.0;
    double slope_var = 1.0;
    double covariate_var = 1.0;

    /// Defaults for a D-way image: concentration 1/R, a_lambda = 3,
    /// b_lambda = a_lambda^(1/(2D)), a_tau = 1, b_tau = (1/R) R^(1/D),
    /// a_zeta = b_zeta = 1, spike 1e-4.
    static Hyperparams defaults(double q, std::size_t rank_shared, std::size_t rank_visit,
                                std::size_t order) {
        Hyperparams h;
        h.quantile = q;
        h.rank_shared = rank_shared;
        h.rank_visit = rank_visit;
        const double d = static_cast<double>(order);
        h.dirichlet_weight.assign(rank_shared, 1.0 / static_cast<double>(rank_shared));
        h.dirichlet_weight_visit.assign(rank_visit, 1.0 / static_cast<double>(rank_visit));
        h.b_lambda = std::pow(h.a_lambda, 1.0 / (2.0 * d));
        h.b_tau = h.dirichlet_weight.front() * std::pow(static_cast<double>(rank_shared), 1.0 / d);
        h.b_tau_visit =
            h.dirichlet_weight_visit.front() * std::pow(static_cast<double>(rank_visit), 1.0 / d);
        return h;
    }

    void validate() const {
        if (!(quantile > 0.0 && quantile < 1.0))
            throw std::invalid_argument("Hyperparams: quantile must lie in (0,1)");
        if (rank_shared == 0 || rank_visit == 0)
            throw std::invalid_argument("Hyperparams: ranks must be positive");
        if (dirichlet_weight.size() != rank_shared || dirichlet_weight_visit.size() != rank_visit)
            throw std::invalid_argument("Hyperparams: concentration vector length != rank");
        for (double a : dirichlet_weight)
            if (!(a > 0.0)) throw std::invalid_argument("Hyperparams: concentration must be positive");
        for (double a : dirichlet_weight_visit)
            if (!(a > 0.0)) throw std::invalid_argument("Hyperparams: concentration must be positive");
        for (double v : {a_lambda, b_lambda, a_tau, b_tau, b_tau_visit, a_zeta, b_zeta, spike,
                         sigma_prior_shape, sigma_prior_scale, subject_intercept_var, slope_var,
                         covariate_var})
            if (!(v > 0.0)) throw std::invalid_argument("Hyperparams: all scale/shape values must be positive");
    }
};

/// M-DGDP shrinkage state for one CP coefficient: per-element local scales,
/// per-margin rates, Dirichlet component weights and a global scale.
struct ShrinkageBlock {
    ParafacCoef coef;
    std::vector<std::vector<std::vector<double>>> local_scale; // [r][j][k]
    std::vector<std::vector<double>> local_rate;               // [r][j]
    std::vector<double> weight;                                // phi, sums to 1
    double global_scale = 1.0;                                 // tau
    double concentration = 1.0;                                // current common Dirichlet weight

    void resize(std::size_t rank, const std::vector<std::size_t>& dims) {
        coef = ParafacCoef(rank, dims);
        local_scale.assign(rank, {});
        local_rate.assign(rank, std::vector<double>(dims.size(), 1.0));
        for (auto& comp : local_scale) {
            comp.resize(dims.size());
            for (std::size_t j = 0; j < dims.size(); ++j) comp[j].assign(dims[j], 1.0);
        }
        weight.assign(rank, 1.0 / static_cast<double>(rank));
    }
};

/// Adds the spike-and-slab selection state for a visit-specific effect.
struct SelectionBlock : ShrinkageBlock {
    std::vector<std::vector<std::vector<std::uint8_t>>> include; // [r][j][k]
    std::vector<std::vector<double>> include_prob;               // [r][j]

    void resize_selection(std::size_t rank, const std::vector<std::size_t>& dims, double spike,
                          double zeta0) {
        resize(rank, dims);
        include.assign(rank, {});
        include_prob.assign(rank, std::vector<double>(dims.size(), zeta0));
        for (std::size_t r = 0; r < rank; ++r) {
            include[r].resize(dims.size());
            for (std::size_t j = 0; j < dims.size(); ++j) {
                include[r][j].assign(dims[j], 0);
                local_scale[r][j].assign(dims[j], spike);
            }
        }
    }
};

/// Complete latent state of one sampler instance.
struct McmcState {
    double sigma = 1.0;
    std::vector<double> mixing; // latent mixing variable per record, dataset order
    double intercept = 0.0;
    std::vector<double> subject_intercept;
    double slope = 0.0;
    std::vector<double> covariate_coef;
    ShrinkageBlock shared;            // visit-invariant effect
    std::vector<SelectionBlock> visit; // visit-specific effects, one per visit
    double theta = 0.0;
    double rho = 2.8284271247461903; // sqrt(8), the q = 0.5 value
};

enum class ModelVariant {
    Full,      // shared + visit-specific effects
    VisitOnly, // shared effect fixed at zero
    SharedOnly // visit-specific effects fixed at zero
};

inline std::string to_string(ModelVariant v) {
    switch (v) {
    case ModelVariant::Full: return "bltqr";
    case ModelVariant::VisitOnly: return "csb1";
    case ModelVariant::SharedOnly: return "csb2";
    }
    throw std::logic_error("unknown variant");
}

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "bltqr") return ModelVariant::Full;
    if (s == "csb1") return ModelVariant::VisitOnly;
    if (s == "csb2") return ModelVariant::SharedOnly;
    throw std::invalid_argument("unknown model variant '" + s + "' (expected bltqr, csb1 or csb2)");
}

/// Sparse-null starting point: margins drawn N(0, 0.01) for active blocks,
/// all selection flags at the spike, unit scales, zero regression terms.
inline McmcState init_state(const Dataset& data, const Hyperparams& hyper, ModelVariant variant,
                            RngStream& rng) {
    McmcState st;
    st.sigma = 1.0;
    st.mixing.assign(data.records.size(), 1.0);
    st.intercept = 0.0;
    st.slope = 0.0;
    st.subject_intercept.assign(data.n_subjects, 0.0);
    st.covariate_coef.assign(data.n_covariates(), 0.0);
    const ThetaRho tr = theta_rho(hyper.quantile);
    st.theta = tr.theta;
    st.rho = tr.rho;

    st.shared.resize(hyper.rank_shared, data.image_dims);
    st.shared.concentration = hyper.dirichlet_weight.front();
    const double zeta0 = hyper.a_zeta / (hyper.a_zeta + hyper.b_zeta);
    st.visit.resize(data.n_visits);
    for (auto& blk : st.visit) {
        blk.resize_selection(hyper.rank_visit, data.image_dims, hyper.spike, zeta0);
        blk.concentration = hyper.dirichlet_weight_visit.front();
    }

    if (variant != ModelVariant::VisitOnly) {
        for (std::size_t r = 0; r < hyper.rank_shared; ++r)
            for (std::size_t j = 0; j < data.image_dims.size(); ++j)
                for (double& v : st.shared.coef.margin(r, j)) v = sample_normal(0.0, 0.1, rng);
    }
    if (variant != ModelVariant::SharedOnly) {
        for (auto& blk : st.visit)
            for (std::size_t r = 0; r < hyper.rank_visit; ++r)
                for (std::size_t j = 0; j < data.image_dims.size(); ++j)
                    for (double& v : blk.coef.margin(r, j)) v = sample_normal(0.0, 0.1, rng);
    }
    return st;
}

/// Full linear predictor for one observed pair, recomputed from scratch:
/// intercepts + slope*time + covariates + <X, shared> + <X, visit effect>,
/// plus theta*mixing when requested. O(image size) per call; the sampler
/// keeps incremental caches instead.
inline double linear_predictor(const McmcState& st, const Dataset& data, std::size_t subject,
                               std::size_t visit, bool include_theta_nu) {
    const std::size_t m = data.record_index(subject, visit);
    const VisitRecord& rec = data.records[m];
    double mu = st.intercept + st.subject_intercept[subject] + st.slope * rec.time;
    if (!st.covariate_coef.empty()) {
        const auto& z = data.covariates[subject];
        for (std::size_t k = 0; k < z.size(); ++k) mu += z[k] * st.covariate_coef[k];
    }
    mu += inner_product(rec.image, materialize(st.shared.coef));
    mu += inner_product(rec.image, materialize(st.visit[visit].coef));
    if (include_theta_nu) mu += st.theta * st.mixing[m];
    return mu;
}

} // namespace bltqr
