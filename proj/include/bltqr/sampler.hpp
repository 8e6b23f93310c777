#pragma once

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chain.hpp"
#include "data.hpp"
#include "distributions.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "tensor.hpp"

namespace bltqr {

namespace detail {
// phi_r tau floors, so a collapsed component cannot produce a singular prior
// precision in the margin update.
inline constexpr double kScaleFloor = 1e-12;
inline constexpr double kMarginEnergyFloor = 1e-100;
} // namespace detail

/// One-chain Gibbs/Metropolis sampler. A sweep updates every block in a fixed
/// order: sigma, mixing, intercept, subject intercepts, slope, shared-effect
/// globals and margins, then per visit the globals, the inclusion move and the
/// margins, then the inclusion probabilities and the covariate coefficients.
/// The chain is strictly sequential; run several instances with distinct
/// seeds for parallel chains.
class GibbsSampler {
public:
    GibbsSampler(const Dataset& data, const Hyperparams& hyper, const SamplerConfig& config)
        : data_(&data), hyper_(hyper), config_(config), rng_(config.seed) {
        data.validate();
        hyper.validate();
        config.validate();
        by_visit_ = data.records_by_visit();
        by_subject_ = data.records_by_subject();
        state_ = init_state(data, hyper, config.variant, rng_);
        refresh_residuals();
    }

    const Dataset& data() const { return *data_; }
    const Hyperparams& hyper() const { return hyper_; }
    const SamplerConfig& config() const { return config_; }
    McmcState& state() { return state_; }
    const McmcState& state() const { return state_; }
    RngStream& rng() { return rng_; }

    /// Rebuild every incremental cache from the current state. Call after
    /// editing the state directly.
    void refresh_residuals() {
        const std::size_t n_obs = data_->records.size();
        const std::size_t r_sh = state_.shared.coef.rank();
        const std::size_t r_vi = hyper_.rank_visit;
        shared_comp_.assign(r_sh, std::vector<double>(n_obs, 0.0));
        visit_comp_.assign(data_->n_visits, {});
        for (std::size_t t = 0; t < data_->n_visits; ++t)
            visit_comp_[t].assign(r_vi, std::vector<double>(by_visit_[t].size(), 0.0));

        resid_.assign(n_obs, 0.0);
        for (std::size_t m = 0; m < n_obs; ++m) {
            const VisitRecord& rec = data_->records[m];
            double base = state_.intercept + state_.subject_intercept[rec.subject] +
                          state_.slope * rec.time;
            if (!state_.covariate_coef.empty()) {
                const auto& z = data_->covariates[rec.subject];
                for (std::size_t k = 0; k < z.size(); ++k) base += z[k] * state_.covariate_coef[k];
            }
            resid_[m] = rec.outcome - base;
        }
        std::vector<double> v;
        for (std::size_t r = 0; r < r_sh; ++r) {
            for (std::size_t m = 0; m < n_obs; ++m) {
                component_design(data_->records[m].image, state_.shared.coef, r, 0, v);
                const double c = dot(v, state_.shared.coef.margin(r, 0));
                shared_comp_[r][m] = c;
                resid_[m] -= c;
            }
        }
        for (std::size_t t = 0; t < data_->n_visits; ++t) {
            for (std::size_t r = 0; r < r_vi; ++r) {
                for (std::size_t lm = 0; lm < by_visit_[t].size(); ++lm) {
                    const std::size_t m = by_visit_[t][lm];
                    component_design(data_->records[m].image, state_.visit[t].coef, r, 0, v);
                    const double c = dot(v, state_.visit[t].coef.margin(r, 0));
                    visit_comp_[t][r][lm] = c;
                    resid_[m] -= c;
                }
            }
        }
    }

    // --- scalar blocks -----------------------------------------------------

    void update_sigma() {
        const double rho2 = state_.rho * state_.rho;
        double b = hyper_.sigma_prior_scale;
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const double e = resid_[m] - state_.theta * state_.mixing[m];
            b += e * e / (rho2 * state_.mixing[m]) + 2.0 * state_.mixing[m];
        }
        const double a = hyper_.sigma_prior_shape + 3.0 * static_cast<double>(resid_.size());
        if (!(b > 0.0)) throw std::runtime_error("update_sigma: nonpositive scale term");
        state_.sigma = sample_inverse_gamma(0.5 * a, 0.5 * b, rng_);
    }

    void update_mixing() {
        const double rho2 = state_.rho * state_.rho;
        const double psi = state_.theta * state_.theta / (rho2 * state_.sigma) + 2.0 / state_.sigma;
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const double chi = resid_[m] * resid_[m] / (rho2 * state_.sigma);
            state_.mixing[m] = sample_gig({0.5, chi, psi}, rng_);
        }
    }

    void update_intercept() {
        const double rho2 = state_.rho * state_.rho;
        double prec = 0.0, lin = 0.0;
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const double w = 1.0 / (rho2 * state_.sigma * state_.mixing[m]);
            const double ytil = resid_[m] + state_.intercept - state_.theta * state_.mixing[m];
            prec += w;
            lin += ytil * w;
        }
        if (prec <= 0.0) return; // no data: the flat-prior conditional is improper
        const double b0 = sample_normal(lin / prec, std::sqrt(1.0 / prec), rng_);
        const double delta = b0 - state_.intercept;
        state_.intercept = b0;
        for (double& r : resid_) r -= delta;
    }

    void update_subject_intercepts() {
        const double rho2 = state_.rho * state_.rho;
        for (std::size_t i = 0; i < data_->n_subjects; ++i) {
            double prec = 1.0 / hyper_.subject_intercept_var, lin = 0.0;
            for (std::size_t m : by_subject_[i]) {
                const double w = 1.0 / (rho2 * state_.sigma * state_.mixing[m]);
                const double ytil =
                    resid_[m] + state_.subject_intercept[i] - state_.theta * state_.mixing[m];
                prec += w;
                lin += ytil * w;
            }
            const double draw = sample_normal(lin / prec, std::sqrt(1.0 / prec), rng_);
            const double delta = draw - state_.subject_intercept[i];
            state_.subject_intercept[i] = draw;
            for (std::size_t m : by_subject_[i]) resid_[m] -= delta;
        }
    }

    void update_slope() {
        const double rho2 = state_.rho * state_.rho;
        double prec = 1.0 / hyper_.slope_var, lin = 0.0;
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const VisitRecord& rec = data_->records[m];
            const double w = 1.0 / (rho2 * state_.sigma * state_.mixing[m]);
            const double ytil =
                resid_[m] + state_.slope * rec.time - state_.theta * state_.mixing[m];
            prec += rec.time * rec.time * w;
            lin += ytil * rec.time * w;
        }
        const double draw = sample_normal(lin / prec, std::sqrt(1.0 / prec), rng_);
        const double delta = draw - state_.slope;
        state_.slope = draw;
        for (std::size_t m = 0; m < resid_.size(); ++m)
            resid_[m] -= delta * data_->records[m].time;
    }

    void update_covariate_coefs() {
        const std::size_t p = state_.covariate_coef.size();
        if (p == 0) return;
        const double rho2 = state_.rho * state_.rho;
        std::vector<double> prec(p * p, 0.0), rhs(p, 0.0);
        for (std::size_t k = 0; k < p; ++k) prec[k * p + k] = 1.0 / hyper_.covariate_var;
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const auto& z = data_->covariates[data_->records[m].subject];
            const double w = 1.0 / (rho2 * state_.sigma * state_.mixing[m]);
            double zeta = 0.0;
            for (std::size_t k = 0; k < p; ++k) zeta += z[k] * state_.covariate_coef[k];
            const double ytil = resid_[m] + zeta - state_.theta * state_.mixing[m];
            for (std::size_t a = 0; a < p; ++a) {
                rhs[a] += z[a] * ytil * w;
                for (std::size_t b = 0; b <= a; ++b) prec[a * p + b] += z[a] * z[b] * w;
            }
        }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a + 1; b < p; ++b) prec[a * p + b] = prec[b * p + a];
        std::vector<double> draw = sample_gaussian_precision(std::move(prec), std::move(rhs), p, rng_);
        for (std::size_t m = 0; m < resid_.size(); ++m) {
            const auto& z = data_->covariates[data_->records[m].subject];
            double delta = 0.0;
            for (std::size_t k = 0; k < p; ++k) delta += z[k] * (draw[k] - state_.covariate_coef[k]);
            resid_[m] -= delta;
        }
        state_.covariate_coef = std::move(draw);
    }

    // --- CP-coefficient blocks ----------------------------------------------

    void update_shared_globals() { update_cp_globals(state_.shared, hyper_.b_tau); }
    void update_visit_globals(std::size_t t) {
        update_cp_globals(state_.visit.at(t), hyper_.b_tau_visit);
    }

    /// Back-fitting sweep over every (component, mode) margin of the shared
    /// effect: rate draw, local-scale draws, then the conjugate margin draw.
    void update_shared_margins() {
        ShrinkageBlock& blk = state_.shared;
        for (std::size_t r = 0; r < blk.coef.rank(); ++r) {
            for (std::size_t j = 0; j < blk.coef.order(); ++j) {
                draw_shared_local_scales(r, j);
                draw_shared_margin(r, j);
            }
        }
    }

    void draw_shared_local_scales(std::size_t r, std::size_t j) {
        ShrinkageBlock& blk = state_.shared;
        const auto& margin = blk.coef.margin(r, j);
        const double pt = phi_tau(blk, r);
        double l1 = 0.0;
        for (double v : margin) l1 += std::fabs(v);
        blk.local_rate[r][j] = sample_gamma(hyper_.a_lambda + static_cast<double>(margin.size()),
                                            hyper_.b_lambda + l1 / std::sqrt(pt), rng_);
        const double psi = blk.local_rate[r][j] * blk.local_rate[r][j];
        for (std::size_t k = 0; k < margin.size(); ++k)
            blk.local_scale[r][j][k] = sample_gig({0.5, margin[k] * margin[k] / pt, psi}, rng_);
    }

    void draw_shared_margin(std::size_t r, std::size_t j) {
        draw_margin_conjugate(state_.shared, r, j, all_obs(), shared_comp_[r]);
    }

    void update_visit_margins(std::size_t t) {
        SelectionBlock& blk = state_.visit.at(t);
        for (std::size_t r = 0; r < blk.coef.rank(); ++r) {
            for (std::size_t j = 0; j < blk.coef.order(); ++j) {
                draw_visit_local_scales(t, r, j);
                draw_visit_margin(t, r, j);
            }
        }
    }

    /// Rate draw over the full margin, then slab-scale conditionals; spike
    /// elements stay at the spike value (inclusion flips happen in the
    /// Metropolis move).
    void draw_visit_local_scales(std::size_t t, std::size_t r, std::size_t j) {
        SelectionBlock& blk = state_.visit.at(t);
        const auto& margin = blk.coef.margin(r, j);
        const double pt = phi_tau(blk, r);
        double l1 = 0.0;
        for (double v : margin) l1 += std::fabs(v);
        blk.local_rate[r][j] = sample_gamma(hyper_.a_lambda + static_cast<double>(margin.size()),
                                            hyper_.b_lambda + l1 / std::sqrt(pt), rng_);
        const double psi = blk.local_rate[r][j] * blk.local_rate[r][j];
        for (std::size_t k = 0; k < margin.size(); ++k) {
            if (blk.include[r][j][k])
                blk.local_scale[r][j][k] = sample_gig({0.5, margin[k] * margin[k] / pt, psi}, rng_);
            else
                blk.local_scale[r][j][k] = hyper_.spike;
        }
    }

    void draw_visit_margin(std::size_t t, std::size_t r, std::size_t j) {
        draw_margin_conjugate(state_.visit.at(t), r, j, by_visit_[t], visit_comp_[t][r]);
    }

    /// Joint Metropolis move on (inclusion flags, local scales): one
    /// add/delete/swap proposal per (component, mode) block. Scales for
    /// flipped elements are proposed from their conditional prior, so only
    /// the margin normal terms, the Bernoulli prior and the move asymmetry
    /// enter the acceptance ratio.
    void update_visit_inclusion(std::size_t t) {
        SelectionBlock& blk = state_.visit.at(t);
        for (std::size_t r = 0; r < blk.coef.rank(); ++r)
            for (std::size_t j = 0; j < blk.coef.order(); ++j) propose_inclusion_flip(blk, r, j);
    }

    void update_include_probs(std::size_t t) {
        SelectionBlock& blk = state_.visit.at(t);
        for (std::size_t r = 0; r < blk.coef.rank(); ++r) {
            for (std::size_t j = 0; j < blk.coef.order(); ++j) {
                const auto& flags = blk.include[r][j];
                double n1 = 0.0;
                for (std::uint8_t f : flags) n1 += f;
                const double n0 = static_cast<double>(flags.size()) - n1;
                blk.include_prob[r][j] = sample_beta(hyper_.a_zeta + n1, hyper_.b_zeta + n0, rng_);
            }
        }
    }

    // --- chain driver -------------------------------------------------------

    void sweep() {
        update_sigma();
        update_mixing();
        update_intercept();
        update_subject_intercepts();
        update_slope();
        if (config_.variant != ModelVariant::VisitOnly) {
            update_shared_globals();
            update_shared_margins();
        }
        if (config_.variant != ModelVariant::SharedOnly) {
            for (std::size_t t = 0; t < data_->n_visits; ++t) {
                update_visit_globals(t);
                update_visit_inclusion(t);
                update_visit_margins(t);
            }
            for (std::size_t t = 0; t < data_->n_visits; ++t) update_include_probs(t);
        }
        update_covariate_coefs();
        ++sweep_count_;
        // Incremental residuals drift; recompute periodically.
        if (sweep_count_ % 100 == 0) refresh_residuals();
        check_state_invariants();
    }

    ChainOutput run() {
        const auto start = std::chrono::steady_clock::now();
        ChainOutput out;
        out.manifest.config = config_;
        out.manifest.hyper = hyper_;
        out.manifest.image_dims = data_->image_dims;
        out.manifest.n_visits = data_->n_visits;
        out.manifest.n_subjects = data_->n_subjects;
        out.manifest.n_covariates = data_->n_covariates();
        out.coef_draws.resize(data_->n_visits);
        if (config_.variant != ModelVariant::SharedOnly)
            out.include_draws.resize(data_->n_visits);

        for (std::size_t it = 0; it < config_.iterations; ++it) {
            try {
                sweep();
            } catch (const std::exception& e) {
                throw std::runtime_error("sweep " + std::to_string(it) + ": " + e.what());
            }
            if (it >= config_.burn_in && (it - config_.burn_in) % config_.thin == 0) store_draw(out);
        }
        out.manifest.fit_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return out;
    }

private:
    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    static double phi_tau(const ShrinkageBlock& blk, std::size_t r) {
        return std::max(blk.weight[r], detail::kScaleFloor) *
               std::max(blk.global_scale, detail::kScaleFloor);
    }

    static void component_design(const DenseTensor& x, const ParafacCoef& c, std::size_t r,
                                 std::size_t j, std::vector<double>& v) {
        std::vector<const std::vector<double>*> margins(c.order());
        for (std::size_t l = 0; l < c.order(); ++l) margins[l] = &c.margin(r, l);
        detail::design_vector_into(x, margins, j, v);
    }

    const std::vector<std::size_t>& all_obs() {
        if (all_obs_.size() != data_->records.size()) {
            all_obs_.resize(data_->records.size());
            for (std::size_t m = 0; m < all_obs_.size(); ++m) all_obs_[m] = m;
        }
        return all_obs_;
    }

    /// Conjugate normal draw for margin (r, j) of a CP block. `obs` lists the
    /// record indices entering the likelihood; `comp` holds that component's
    /// cached contribution, one slot per listed record.
    void draw_margin_conjugate(ShrinkageBlock& blk, std::size_t r, std::size_t j,
                               const std::vector<std::size_t>& obs, std::vector<double>& comp) {
        const std::size_t pj = blk.coef.margin(r, j).size();
        const double rho2 = state_.rho * state_.rho;
        const double pt = phi_tau(blk, r);

        std::vector<double> prec(pj * pj, 0.0), rhs(pj, 0.0);
        for (std::size_t k = 0; k < pj; ++k)
            prec[k * pj + k] = 1.0 / std::max(pt * blk.local_scale[r][j][k], 1e-300);

        // Design vectors are cached for the whole block update; they are
        // invalidated as soon as any other margin of this component moves.
        design_cache_.assign(obs.size() * pj, 0.0);
        std::vector<double> v;
        for (std::size_t idx = 0; idx < obs.size(); ++idx) {
            const std::size_t m = obs[idx];
            component_design(data_->records[m].image, blk.coef, r, j, v);
            std::copy(v.begin(), v.end(), design_cache_.begin() + idx * pj);
            const double w = 1.0 / (rho2 * state_.sigma * state_.mixing[m]);
            const double ytil = resid_[m] + comp[idx] - state_.theta * state_.mixing[m];
            for (std::size_t a = 0; a < pj; ++a) {
                const double va = v[a];
                rhs[a] += va * ytil * w;
                const double vw = va * w;
                for (std::size_t b = 0; b <= a; ++b) prec[a * pj + b] += vw * v[b];
            }
        }
        for (std::size_t a = 0; a < pj; ++a)
            for (std::size_t b = a + 1; b < pj; ++b) prec[a * pj + b] = prec[b * pj + a];

        std::vector<double> draw =
            sample_gaussian_precision(std::move(prec), std::move(rhs), pj, rng_);

        for (std::size_t idx = 0; idx < obs.size(); ++idx) {
            const double* vc = design_cache_.data() + idx * pj;
            double c = 0.0;
            for (std::size_t k = 0; k < pj; ++k) c += vc[k] * draw[k];
            resid_[obs[idx]] += comp[idx] - c;
            comp[idx] = c;
        }
        blk.coef.margin(r, j) = std::move(draw);
    }

    /// Compositional update of (concentration, weights, global scale) given
    /// the margins and local scales: griddy draw of the common concentration
    /// from its marginal over a fixed 10-point grid on [R^-D, R^-0.1], then
    /// independent GIG intermediates normalized into weights and their sum.
    void update_cp_globals(ShrinkageBlock& blk, double b_tau) {
        const std::size_t rank = blk.coef.rank();
        const std::size_t order = blk.coef.order();
        double pbar = 0.0;
        for (std::size_t j = 0; j < order; ++j)
            pbar += static_cast<double>(blk.coef.margin(0, j).size());

        std::vector<double> energy(rank, 0.0); // sum_j sum_k margin^2 / local scale
        for (std::size_t r = 0; r < rank; ++r) {
            double c = 0.0;
            for (std::size_t j = 0; j < order; ++j) {
                const auto& margin = blk.coef.margin(r, j);
                for (std::size_t k = 0; k < margin.size(); ++k)
                    c += margin[k] * margin[k] / blk.local_scale[r][j][k];
            }
            energy[r] = std::max(c, detail::kMarginEnergyFloor);
        }

        if (rank > 1) {
            constexpr std::size_t kGridSize = 10;
            const double lo = std::pow(static_cast<double>(rank), -static_cast<double>(order));
            const double hi = std::pow(static_cast<double>(rank), -0.10);
            std::vector<double> logw(kGridSize);
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t g = 0; g < kGridSize; ++g) {
                const double a = lo + (hi - lo) * static_cast<double>(g) /
                                          static_cast<double>(kGridSize - 1);
                double lw = static_cast<double>(rank) * (a * std::log(b_tau) - std::lgamma(a));
                for (std::size_t r = 0; r < rank; ++r)
                    lw += log_gig_norm(a - 0.5 * pbar, energy[r], 2.0 * b_tau);
                logw[g] = lw;
                best = std::max(best, lw);
            }
            double total = 0.0;
            for (double& w : logw) {
                w = std::exp(w - best);
                total += w;
            }
            double u = rng_.uniform01() * total;
            std::size_t pick = kGridSize - 1;
            for (std::size_t g = 0; g < kGridSize; ++g) {
                if (u < logw[g]) {
                    pick = g;
                    break;
                }
                u -= logw[g];
            }
            blk.concentration =
                lo + (hi - lo) * static_cast<double>(pick) / static_cast<double>(kGridSize - 1);
        } else {
            blk.concentration = 1.0;
        }

        double total = 0.0;
        std::vector<double> psi(rank);
        for (std::size_t r = 0; r < rank; ++r) {
            psi[r] = sample_gig({blk.concentration - 0.5 * pbar, energy[r], 2.0 * b_tau}, rng_);
            total += psi[r];
        }
        blk.global_scale = total;
        for (std::size_t r = 0; r < rank; ++r) blk.weight[r] = psi[r] / total;
    }

    void propose_inclusion_flip(SelectionBlock& blk, std::size_t r, std::size_t j) {
        auto& flags = blk.include[r][j];
        auto& scales = blk.local_scale[r][j];
        const auto& margin = blk.coef.margin(r, j);
        const std::size_t pj = flags.size();

        std::vector<std::size_t> ones, zeros;
        for (std::size_t k = 0; k < pj; ++k) (flags[k] ? ones : zeros).push_back(k);

        enum Move { Add, Delete, Swap };
        std::vector<Move> feasible;
        if (!zeros.empty()) feasible.push_back(Add);
        if (!ones.empty()) feasible.push_back(Delete);
        if (!zeros.empty() && !ones.empty()) feasible.push_back(Swap);
        if (feasible.empty()) return;

        const Move move = feasible[static_cast<std::size_t>(rng_.uniform01() *
                                                            static_cast<double>(feasible.size())) %
                                   feasible.size()];
        std::size_t add_k = pj, del_k = pj;
        if (move == Add || move == Swap)
            add_k = zeros[static_cast<std::size_t>(rng_.uniform01() *
                                                   static_cast<double>(zeros.size())) %
                          zeros.size()];
        if (move == Delete || move == Swap)
            del_k = ones[static_cast<std::size_t>(rng_.uniform01() *
                                                  static_cast<double>(ones.size())) %
                         ones.size()];

        const double pt = phi_tau(blk, r);
        const double rate = blk.local_rate[r][j] * blk.local_rate[r][j] / 2.0; // slab Exp rate
        const double zeta = blk.include_prob[r][j];
        const double log_odds_on = std::log(zeta) - std::log1p(-zeta);

        auto log_normal_term = [&](double x, double scale) {
            const double var = std::max(pt * scale, 1e-300);
            return -0.5 * (std::log(var) + x * x / var);
        };

        double log_ratio = 0.0;
        double w_add = 0.0;
        if (move == Add || move == Swap) {
            w_add = sample_exponential(rate, rng_);
            log_ratio += log_normal_term(margin[add_k], w_add) -
                         log_normal_term(margin[add_k], scales[add_k]);
            log_ratio += log_odds_on;
        }
        if (move == Delete || move == Swap) {
            log_ratio += log_normal_term(margin[del_k], hyper_.spike) -
                         log_normal_term(margin[del_k], scales[del_k]);
            log_ratio -= log_odds_on;
        }

        // Move-selection asymmetry (add/delete change the flag counts).
        const double n1 = static_cast<double>(ones.size());
        const double n0 = static_cast<double>(zeros.size());
        const double moves_now = static_cast<double>(feasible.size());
        auto feasible_count = [pj](double ones_after) {
            const double zeros_after = static_cast<double>(pj) - ones_after;
            double c = 0.0;
            if (zeros_after > 0.0) c += 1.0;
            if (ones_after > 0.0) c += 1.0;
            if (zeros_after > 0.0 && ones_after > 0.0) c += 1.0;
            return c;
        };
        if (move == Add) {
            // forward: (1/moves_now)(1/n0); reverse: delete with (1/moves_after)(1/(n1+1))
            log_ratio += std::log(moves_now * n0) - std::log(feasible_count(n1 + 1.0) * (n1 + 1.0));
        } else if (move == Delete) {
            log_ratio += std::log(moves_now * n1) - std::log(feasible_count(n1 - 1.0) * (n0 + 1.0));
        }
        // Swap keeps both counts; the proposal is symmetric.

        if (std::log(rng_.uniform_pos()) < log_ratio) {
            if (move == Add || move == Swap) {
                flags[add_k] = 1;
                scales[add_k] = w_add;
            }
            if (move == Delete || move == Swap) {
                flags[del_k] = 0;
                scales[del_k] = hyper_.spike;
            }
        }
    }

    void store_draw(ChainOutput& out) {
        DenseTensor shared = materialize(state_.shared.coef);
        for (std::size_t t = 0; t < data_->n_visits; ++t) {
            DenseTensor total = shared;
            if (config_.variant != ModelVariant::SharedOnly) {
                const DenseTensor vt = materialize(state_.visit[t].coef);
                for (std::size_t c = 0; c < total.size(); ++c) total[c] += vt[c];
            }
            out.coef_draws[t].push_back(total.values());
            if (config_.variant != ModelVariant::SharedOnly) {
                std::vector<std::uint8_t> flat;
                const SelectionBlock& blk = state_.visit[t];
                for (std::size_t r = 0; r < blk.coef.rank(); ++r)
                    for (std::size_t j = 0; j < blk.coef.order(); ++j)
                        flat.insert(flat.end(), blk.include[r][j].begin(), blk.include[r][j].end());
                out.include_draws[t].push_back(std::move(flat));
            }
        }
        out.sigma_draws.push_back(state_.sigma);
        out.intercept_draws.push_back(state_.intercept);
        out.slope_draws.push_back(state_.slope);
        out.subject_intercept_draws.push_back(state_.subject_intercept);
        if (!state_.covariate_coef.empty()) out.covariate_draws.push_back(state_.covariate_coef);
    }

    void check_state_invariants() const {
#ifndef NDEBUG
        assert(state_.sigma > 0.0);
        for (double v : state_.mixing) assert(v > 0.0);
        auto check_block = [](const ShrinkageBlock& blk) {
            double sum = 0.0;
            for (double w : blk.weight) {
                assert(w >= 0.0);
                sum += w;
            }
            assert(std::fabs(sum - 1.0) < 1e-12);
            assert(blk.global_scale > 0.0);
            for (const auto& comp : blk.local_scale)
                for (const auto& mode : comp)
                    for (double w : mode) assert(w > 0.0);
        };
        check_block(state_.shared);
        for (const auto& blk : state_.visit) {
            check_block(blk);
            for (std::size_t r = 0; r < blk.coef.rank(); ++r)
                for (std::size_t j = 0; j < blk.coef.order(); ++j)
                    for (std::size_t k = 0; k < blk.include[r][j].size(); ++k)
                        assert((blk.include[r][j][k] == 0) ==
                               (blk.local_scale[r][j][k] == hyper_.spike));
        }
#endif
    }

    const Dataset* data_;
    Hyperparams hyper_;
    SamplerConfig config_;
    RngStream rng_;
    McmcState state_;

    std::vector<std::vector<std::size_t>> by_visit_;
    std::vector<std::vector<std::size_t>> by_subject_;
    std::vector<std::size_t> all_obs_;
    std::vector<double> resid_;                            // outcome minus predictor, no theta*nu
    std::vector<std::vector<double>> shared_comp_;         // [r][record]
    std::vector<std::vector<std::vector<double>>> visit_comp_; // [t][r][visit-local record]
    std::vector<double> design_cache_;
    std::size_t sweep_count_ = 0;
};

/// Convenience wrapper: construct, run, return the stored draws.
inline ChainOutput run_chain(const SamplerConfig& config, const Dataset& data,
                             const Hyperparams& hyper) {
    GibbsSampler sampler(data, hyper, config);
    return sampler.run();
}

} // namespace bltqr
