#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "chain.hpp"
#include "data.hpp"
#include "metrics.hpp"
#include "tensor.hpp"

namespace bltqr {

namespace detail {

/// Linear-interpolation empirical quantile (R type 7) of an unsorted sample.
inline double empirical_quantile(std::vector<double> x, double p) {
    if (x.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
    std::sort(x.begin(), x.end());
    const double h = p * static_cast<double>(x.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= x.size()) return x.back();
    const double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

} // namespace detail

/// Per-visit voxel selection: point estimate, credible band and the
/// significance mask (band excludes zero).
struct SelectionMap {
    DenseTensor estimate;
    DenseTensor lower;
    DenseTensor upper;
    std::vector<std::uint8_t> selected;

    std::size_t selected_count() const {
        std::size_t n = 0;
        for (std::uint8_t s : selected) n += s;
        return n;
    }
};

namespace detail {

struct BandInputs {
    std::vector<double> estimate;               // per cell posterior mean
    std::vector<std::vector<double>> cell_draws; // [cell][draw]
};

inline BandInputs collect_cells(const ChainOutput& chain, std::size_t visit) {
    if (visit >= chain.visit_count()) throw std::out_of_range("band: visit out of range");
    const auto& draws = chain.coef_draws[visit];
    if (draws.size() < 20)
        throw std::invalid_argument("band: need at least 20 stored draws, have " +
                                    std::to_string(draws.size()));
    const std::size_t cells = draws.front().size();
    BandInputs in;
    in.estimate.assign(cells, 0.0);
    in.cell_draws.assign(cells, std::vector<double>(draws.size()));
    for (std::size_t k = 0; k < draws.size(); ++k)
        for (std::size_t c = 0; c < cells; ++c) {
            in.cell_draws[c][k] = draws[k][c];
            in.estimate[c] += draws[k][c];
        }
    for (double& e : in.estimate) e /= static_cast<double>(draws.size());
    return in;
}

inline SelectionMap finish_map(const ChainOutput& chain, std::vector<double> estimate,
                               std::vector<double> lower, std::vector<double> upper,
                               const std::vector<std::uint8_t>* mask) {
    const std::size_t cells = estimate.size();
    SelectionMap out;
    out.selected.assign(cells, 0);
    for (std::size_t c = 0; c < cells; ++c) {
        if (mask && !(*mask)[c]) {
            estimate[c] = lower[c] = upper[c] = 0.0;
            continue;
        }
        out.selected[c] = (lower[c] > 0.0 || upper[c] < 0.0) ? 1 : 0;
    }
    out.estimate = DenseTensor(chain.manifest.image_dims, std::move(estimate));
    out.lower = DenseTensor(chain.manifest.image_dims, std::move(lower));
    out.upper = DenseTensor(chain.manifest.image_dims, std::move(upper));
    return out;
}

} // namespace detail

/// Simultaneous credible bands via maximal deviations: the pointwise quantile
/// bands are inflated by the largest deviation across voxels, giving a
/// multiplicity-adjusted selection rule. When a mask is supplied the maxima
/// run over in-mask voxels only and everything outside is zeroed.
inline SelectionMap mdev_bands(const ChainOutput& chain, std::size_t visit, double alpha,
                               const std::vector<std::uint8_t>* mask = nullptr) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("mdev_bands: alpha in (0,1)");
    auto in = detail::collect_cells(chain, visit);
    const std::size_t cells = in.estimate.size();
    if (mask && mask->size() != cells)
        throw std::invalid_argument("mdev_bands: mask length mismatch");

    double dev_lo = 0.0, dev_hi = 0.0;
    bool any = false;
    std::vector<double> qlo(cells), qhi(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        if (mask && !(*mask)[c]) continue;
        qlo[c] = detail::empirical_quantile(in.cell_draws[c], alpha / 2.0);
        qhi[c] = detail::empirical_quantile(in.cell_draws[c], 1.0 - alpha / 2.0);
        dev_lo = std::max(dev_lo, in.estimate[c] - qlo[c]);
        dev_hi = std::max(dev_hi, qhi[c] - in.estimate[c]);
        any = true;
    }
    if (!any) throw std::invalid_argument("mdev_bands: mask excludes every voxel");

    std::vector<double> lower(cells), upper(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        lower[c] = in.estimate[c] - dev_lo;
        upper[c] = in.estimate[c] + dev_hi;
    }
    return detail::finish_map(chain, std::move(in.estimate), std::move(lower), std::move(upper),
                              mask);
}

/// Per-voxel equal-tailed credible intervals (no multiplicity adjustment).
inline SelectionMap pointwise_bands(const ChainOutput& chain, std::size_t visit, double alpha,
                                    const std::vector<std::uint8_t>* mask = nullptr) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("pointwise_bands: alpha in (0,1)");
    auto in = detail::collect_cells(chain, visit);
    const std::size_t cells = in.estimate.size();
    if (mask && mask->size() != cells)
        throw std::invalid_argument("pointwise_bands: mask length mismatch");
    std::vector<double> lower(cells, 0.0), upper(cells, 0.0);
    for (std::size_t c = 0; c < cells; ++c) {
        if (mask && !(*mask)[c]) continue;
        lower[c] = detail::empirical_quantile(in.cell_draws[c], alpha / 2.0);
        upper[c] = detail::empirical_quantile(in.cell_draws[c], 1.0 - alpha / 2.0);
    }
    return detail::finish_map(chain, std::move(in.estimate), std::move(lower), std::move(upper),
                              mask);
}

/// Plug-in quantile prediction: posterior mean of the linear predictor
/// (without the mixing term). Subjects whose id falls inside the training
/// range reuse their sampled intercepts; new subjects get the prior mean 0.
inline std::vector<double> predict_quantile(const ChainOutput& chain, const Dataset& new_data) {
    new_data.validate();
    if (new_data.image_dims != chain.manifest.image_dims)
        throw std::invalid_argument("predict_quantile: image dims differ from the fitted chain");
    if (new_data.n_visits > chain.visit_count())
        throw std::invalid_argument("predict_quantile: dataset has more visits than the chain");
    if (new_data.n_covariates() != chain.manifest.n_covariates)
        throw std::invalid_argument("predict_quantile: covariate count differs from the chain");
    const std::size_t k_draws = chain.draw_count();
    if (k_draws == 0) throw std::invalid_argument("predict_quantile: empty chain");

    std::vector<double> out(new_data.records.size(), 0.0);
    for (std::size_t m = 0; m < new_data.records.size(); ++m) {
        const VisitRecord& rec = new_data.records[m];
        const bool known = rec.subject < chain.manifest.n_subjects;
        double acc = 0.0;
        for (std::size_t k = 0; k < k_draws; ++k) {
            double mu = chain.intercept_draws[k] + chain.slope_draws[k] * rec.time;
            if (known) mu += chain.subject_intercept_draws[k][rec.subject];
            if (!chain.covariate_draws.empty()) {
                const auto& z = new_data.covariates[rec.subject];
                for (std::size_t c = 0; c < z.size(); ++c)
                    mu += z[c] * chain.covariate_draws[k][c];
            }
            const auto& coef = chain.coef_draws[rec.visit][k];
            const double* x = rec.image.data();
            double ip = 0.0;
            for (std::size_t c = 0; c < coef.size(); ++c) ip += x[c] * coef[c];
            acc += mu + ip;
        }
        out[m] = acc / static_cast<double>(k_draws);
    }
    return out;
}

namespace detail {

inline double ald_log_density(double y, double mu, double sigma, double q) {
    return std::log(q * (1.0 - q) / sigma) - check_loss(y, mu, q) / sigma;
}

struct DicParts {
    double dic = 0.0;
    double mean_deviance = 0.0;
    double effective_params = 0.0;
};

inline DicParts dic_parts(const ChainOutput& chain, const Dataset& data) {
    data.validate();
    const std::size_t k_draws = chain.draw_count();
    if (k_draws == 0) throw std::invalid_argument("dic: empty chain");
    if (data.image_dims != chain.manifest.image_dims)
        throw std::invalid_argument("dic: image dims differ from the fitted chain");
    const double q = chain.manifest.hyper.quantile;

    const std::size_t cells = chain.cell_count();
    const std::size_t visits = chain.visit_count();
    std::vector<std::vector<double>> mean_coef(visits, std::vector<double>(cells, 0.0));
    for (std::size_t t = 0; t < visits; ++t)
        for (std::size_t k = 0; k < k_draws; ++k)
            for (std::size_t c = 0; c < cells; ++c) mean_coef[t][c] += chain.coef_draws[t][k][c];
    for (auto& v : mean_coef)
        for (double& c : v) c /= static_cast<double>(k_draws);

    double mean_sigma = 0.0, mean_b0 = 0.0, mean_b1 = 0.0;
    std::vector<double> mean_bi(chain.manifest.n_subjects, 0.0);
    std::vector<double> mean_eta(chain.manifest.n_covariates, 0.0);
    for (std::size_t k = 0; k < k_draws; ++k) {
        mean_sigma += chain.sigma_draws[k];
        mean_b0 += chain.intercept_draws[k];
        mean_b1 += chain.slope_draws[k];
        for (std::size_t i = 0; i < mean_bi.size(); ++i)
            mean_bi[i] += chain.subject_intercept_draws[k][i];
        for (std::size_t c = 0; c < mean_eta.size(); ++c)
            mean_eta[c] += chain.covariate_draws[k][c];
    }
    mean_sigma /= static_cast<double>(k_draws);
    mean_b0 /= static_cast<double>(k_draws);
    mean_b1 /= static_cast<double>(k_draws);
    for (double& v : mean_bi) v /= static_cast<double>(k_draws);
    for (double& v : mean_eta) v /= static_cast<double>(k_draws);

    auto deviance = [&](double sigma, double b0, double b1, const std::vector<double>& bi,
                        const std::vector<double>& eta,
                        const std::vector<std::vector<double>>& coef) {
        double d = 0.0;
        for (const VisitRecord& rec : data.records) {
            double mu = b0 + b1 * rec.time;
            if (rec.subject < bi.size()) mu += bi[rec.subject];
            if (!eta.empty()) {
                const auto& z = data.covariates[rec.subject];
                for (std::size_t c = 0; c < z.size(); ++c) mu += z[c] * eta[c];
            }
            const auto& g = coef[rec.visit];
            const double* x = rec.image.data();
            double ip = 0.0;
            for (std::size_t c = 0; c < g.size(); ++c) ip += x[c] * g[c];
            d += detail::ald_log_density(rec.outcome, mu + ip, sigma, q);
        }
        return -2.0 * d;
    };

    double dbar = 0.0;
    std::vector<std::vector<double>> coef_k(visits);
    for (std::size_t k = 0; k < k_draws; ++k) {
        for (std::size_t t = 0; t < visits; ++t) coef_k[t] = chain.coef_draws[t][k];
        dbar += deviance(chain.sigma_draws[k], chain.intercept_draws[k], chain.slope_draws[k],
                         chain.subject_intercept_draws[k],
                         chain.covariate_draws.empty() ? mean_eta : chain.covariate_draws[k],
                         coef_k);
    }
    dbar /= static_cast<double>(k_draws);
    const double dhat = deviance(mean_sigma, mean_b0, mean_b1, mean_bi, mean_eta, mean_coef);

    DicParts out;
    out.mean_deviance = dbar;
    out.effective_params = dbar - dhat;
    out.dic = dbar + out.effective_params;
    return out;
}

} // namespace detail

/// Deviance information criterion with the collapsed ALD likelihood (the
/// mixing variable integrated out) and the posterior-mean plug-in.
inline double dic(const ChainOutput& chain, const Dataset& data) {
    return detail::dic_parts(chain, data).dic;
}

struct GewekeResult {
    std::vector<double> z;
    double pass_fraction = 0.0; // share with |z| < 1.96
};

namespace detail {

inline double batch_means_variance_of_mean(const double* x, std::size_t n) {
    const std::size_t batches = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(n))));
    const std::size_t len = n / batches;
    if (len == 0 || batches < 2) return 0.0;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < len; ++i) means[b] += x[b * len + i];
        means[b] /= static_cast<double>(len);
    }
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= static_cast<double>(batches);
    double ss = 0.0;
    for (double m : means) ss += (m - grand) * (m - grand);
    return ss / static_cast<double>(batches - 1) / static_cast<double>(batches);
}

} // namespace detail

/// Geweke convergence scores on a parameter-major matrix of chains: compare
/// the first 10% against the last 50% of each chain, with batch-means
/// variances.
inline GewekeResult geweke_matrix(const std::vector<std::vector<double>>& chains) {
    GewekeResult out;
    out.z.reserve(chains.size());
    std::size_t pass = 0;
    for (const auto& c : chains) {
        const std::size_t n = c.size();
        if (n < 20) throw std::invalid_argument("geweke: chain too short (need 20 draws)");
        const std::size_t n1 = std::max<std::size_t>(4, n / 10);
        const std::size_t n2 = n / 2;
        const double* first = c.data();
        const double* last = c.data() + (n - n2);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < n1; ++i) m1 += first[i];
        for (std::size_t i = 0; i < n2; ++i) m2 += last[i];
        m1 /= static_cast<double>(n1);
        m2 /= static_cast<double>(n2);
        const double v = detail::batch_means_variance_of_mean(first, n1) +
                         detail::batch_means_variance_of_mean(last, n2);
        double z;
        if (v > 0.0)
            z = (m1 - m2) / std::sqrt(v);
        else
            z = (m1 == m2) ? 0.0 : std::numeric_limits<double>::infinity();
        out.z.push_back(z);
        if (std::fabs(z) < 1.96) ++pass;
    }
    out.pass_fraction =
        chains.empty() ? 0.0 : static_cast<double>(pass) / static_cast<double>(chains.size());
    return out;
}

/// Geweke scores for a stored chain: every coefficient cell per visit plus
/// sigma, intercept and slope.
inline GewekeResult geweke(const ChainOutput& chain) {
    const std::size_t k_draws = chain.draw_count();
    const std::size_t cells = chain.cell_count();
    std::vector<std::vector<double>> chains;
    chains.reserve(chain.visit_count() * cells + 3);
    for (std::size_t t = 0; t < chain.visit_count(); ++t) {
        for (std::size_t c = 0; c < cells; ++c) {
            std::vector<double> series(k_draws);
            for (std::size_t k = 0; k < k_draws; ++k) series[k] = chain.coef_draws[t][k][c];
            chains.push_back(std::move(series));
        }
    }
    chains.push_back(chain.sigma_draws);
    chains.push_back(chain.intercept_draws);
    chains.push_back(chain.slope_draws);
    return geweke_matrix(chains);
}

} // namespace bltqr
