#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tensor.hpp"

namespace bltqr {

inline double relative_error(const DenseTensor& est, const DenseTensor& truth) {
    if (est.dims() != truth.dims()) throw std::invalid_argument("relative_error: shape mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        num += std::fabs(est[i] - truth[i]);
        den += std::fabs(truth[i]);
    }
    if (den == 0.0) throw std::invalid_argument("relative_error: truth is identically zero");
    return num / den;
}

inline double rmse(const DenseTensor& est, const DenseTensor& truth) {
    if (est.dims() != truth.dims()) throw std::invalid_argument("rmse: shape mismatch");
    double ss = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const double d = est[i] - truth[i];
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(est.size()));
}

inline double correlation(const DenseTensor& est, const DenseTensor& truth) {
    if (est.dims() != truth.dims()) throw std::invalid_argument("correlation: shape mismatch");
    const std::size_t n = est.size();
    double me = 0.0, mt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        me += est[i];
        mt += truth[i];
    }
    me /= static_cast<double>(n);
    mt /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = est[i] - me, b = truth[i] - mt;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

/// Confusion-matrix summary with the nonzero voxels as the positive class.
/// Ratios with a degenerate denominator come back as NaN markers.
struct SelectionScores {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
};

inline SelectionScores selection_metrics(const std::vector<std::uint8_t>& selected,
                                         const std::vector<std::uint8_t>& truth_support) {
    if (selected.size() != truth_support.size())
        throw std::invalid_argument("selection_metrics: length mismatch");
    SelectionScores s;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const bool sel = selected[i] != 0, pos = truth_support[i] != 0;
        if (sel && pos) ++s.tp;
        else if (sel && !pos) ++s.fp;
        else if (!sel && pos) ++s.fn;
        else ++s.tn;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double tp = static_cast<double>(s.tp), fp = static_cast<double>(s.fp);
    const double tn = static_cast<double>(s.tn), fn = static_cast<double>(s.fn);
    s.sensitivity = (tp + fn > 0.0) ? tp / (tp + fn) : nan;
    s.specificity = (tn + fp > 0.0) ? tn / (tn + fp) : nan;
    s.f1 = (2.0 * tp + fp + fn > 0.0) ? 2.0 * tp / (2.0 * tp + fp + fn) : nan;
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    s.mcc = (denom > 0.0) ? (tp * tn - fp * fn) / std::sqrt(denom) : nan;
    return s;
}

inline std::vector<std::uint8_t> support_mask(const DenseTensor& truth) {
    std::vector<std::uint8_t> mask(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) mask[i] = truth[i] != 0.0 ? 1 : 0;
    return mask;
}

/// Check (pinball) loss of a quantile prediction.
inline double check_loss(double y, double predicted, double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("check_loss: q must lie in (0,1)");
    const double e = y - predicted;
    return e > 0.0 ? q * e : (1.0 - q) * (-e);
}

} // namespace bltqr
