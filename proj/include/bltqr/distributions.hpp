#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace bltqr {

inline constexpr double kTwoPi = 6.283185307179586476925287;

inline double sample_normal(double mean, double sd, RngStream& rng) {
    // Box-Muller, cosine branch only, so each draw consumes exactly two
    // uniforms regardless of call history.
    const double u1 = rng.uniform_pos();
    const double u2 = rng.uniform01();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

inline double sample_exponential(double rate, RngStream& rng) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be positive");
    return -std::log(rng.uniform_pos()) / rate;
}

/// Gamma(shape, rate) with mean shape/rate, Marsaglia-Tsang method.
inline double sample_gamma(double shape, double rate, RngStream& rng) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw std::invalid_argument("gamma: shape and rate must be positive");
    if (shape < 1.0) {
        const double u = rng.uniform_pos();
        return sample_gamma(shape + 1.0, rate, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_normal(0.0, 1.0, rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

/// Inverse gamma with mean scale/(shape-1) for shape > 1.
inline double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("inverse_gamma: shape and scale must be positive");
    return 1.0 / sample_gamma(shape, scale, rng);
}

inline double sample_beta(double a, double b, RngStream& rng) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("beta: parameters must be positive");
    const double x = sample_gamma(a, 1.0, rng);
    const double y = sample_gamma(b, 1.0, rng);
    return x / (x + y);
}

inline bool sample_bernoulli(double p, RngStream& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli: p must lie in [0,1]");
    return rng.uniform01() < p;
}

inline std::vector<double> sample_dirichlet(const std::vector<double>& alphas, RngStream& rng) {
    if (alphas.empty()) throw std::invalid_argument("dirichlet: empty parameter vector");
    std::vector<double> out(alphas.size());
    double total = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) throw std::invalid_argument("dirichlet: parameters must be positive");
        out[i] = sample_gamma(alphas[i], 1.0, rng);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

// Asymmetric Laplace mixture constants. The q-th quantile of ALD(mu, sigma, q)
// sits exactly at mu; the exponential-normal mixture below reproduces it.
inline double ald_theta(double q) { return (1.0 - 2.0 * q) / (q * (1.0 - q)); }
inline double ald_rho_sq(double q) { return 2.0 / (q * (1.0 - q)); }

inline double sample_ald(double location, double scale, double q, RngStream& rng) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("ald: quantile level must lie in (0,1)");
    if (!(scale > 0.0)) throw std::invalid_argument("ald: scale must be positive");
    const double m = sample_exponential(1.0, rng);
    const double u = sample_normal(0.0, 1.0, rng);
    return location + ald_theta(q) * scale * m + std::sqrt(ald_rho_sq(q) * scale * scale * m) * u;
}

/// Generalized inverse Gaussian, density proportional to
///   x^(order-1) * exp(-(chi/x + psi*x) / 2),  x > 0.
struct GigParams {
    double order = 0.5;
    double chi = 1.0;
    double psi = 1.0;
};

namespace detail {

inline double gig_mode(double lambda, double omega) {
    if (lambda >= 1.0)
        return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Draws below operate on the standardized two-parameter form with density
// proportional to x^(lambda-1) exp(-omega (x + 1/x) / 2), lambda >= 0.
// They return a negative sentinel when the rejection guard trips.

// Ratio-of-uniforms with shift by the mode (Dagpunar 1989, Lehner 1989).
// Used for lambda > 2 or omega > 3.
inline double gig_rou_shift(double lambda, double omega, RngStream& rng, std::size_t guard) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

    // Cubic roots locate the bounding rectangle of (x - xm) sqrt(f(x)).
    const double a = -(2.0 * (lambda + 1.0) / omega + xm);
    const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    const double c = xm;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * kTwoPi / 2.0) - a / 3.0;
    const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
    const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

    for (std::size_t it = 0; it < guard; ++it) {
        const double u = rng.uniform(uminus, uplus);
        const double v = rng.uniform_pos();
        const double x = u / v + xm;
        if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
    return -1.0;
}

// Ratio-of-uniforms without shift (Dagpunar 1988, 4.6.2).
inline double gig_rou_noshift(double lambda, double omega, RngStream& rng, std::size_t guard) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);

    for (std::size_t it = 0; it < guard; ++it) {
        const double u = rng.uniform(0.0, um);
        const double v = rng.uniform_pos();
        const double x = u / v;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
    }
    return -1.0;
}

// Piecewise constant hat over the log-concave part (Hoermann & Leydold 2014).
// Valid for 0 <= lambda < 1 and 0 < omega <= 1.
inline double gig_hat(double lambda, double omega, RngStream& rng, std::size_t guard) {
    const double xm = gig_mode(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));

    double k1 = 0.0, k2 = 0.0;
    double area0 = k0 * x0, area1 = 0.0, area2 = 0.0;
    if (x0 >= 2.0 / omega) {
        k2 = std::pow(x0, lambda - 1.0);
        area2 = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
    } else {
        k1 = std::exp(-omega);
        area1 = (lambda == 0.0)
                    ? k1 * std::log(2.0 / (omega * omega))
                    : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
        k2 = std::pow(2.0 / omega, lambda - 1.0);
        area2 = k2 * 2.0 * std::exp(-1.0) / omega;
    }
    const double total = area0 + area1 + area2;

    for (std::size_t it = 0; it < guard; ++it) {
        double v = rng.uniform(0.0, total);
        double x, hx;
        if (v <= area0) {
            x = x0 * v / area0;
            hx = k0;
        } else if ((v -= area0) <= area1) {
            x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
            hx = k1 * std::pow(x, lambda - 1.0);
        } else {
            v -= area1;
            const double a = std::max(x0, 2.0 / omega);
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * a) - omega / (2.0 * k2) * v);
            hx = k2 * std::exp(-omega / 2.0 * x);
        }
        const double u = rng.uniform(0.0, hx);
        if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
    }
    return -1.0;
}

// Numeric inverse CDF of the standardized density; fallback when a rejection
// guard trips on pathological parameters.
inline double gig_inverse_cdf(double lambda, double omega, double u01) {
    // Work on u = log x; g(u) = lambda*u - omega*cosh(u) (includes Jacobian).
    const double ustar = std::asinh(lambda / omega);
    auto g = [&](double u) { return lambda * u - omega * std::cosh(u); };
    const double gpeak = g(ustar);
    double half = 1.0;
    while (g(ustar - half) > gpeak - 42.0 || g(ustar + half) > gpeak - 42.0) {
        half *= 2.0;
        if (half > 1e6) break;
    }
    constexpr std::size_t n = 4096;
    const double lo = ustar - half, hi = ustar + half;
    const double step = (hi - lo) / static_cast<double>(n - 1);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i)
        weight[i] = std::exp(g(lo + step * static_cast<double>(i)) - gpeak);
    std::vector<double> cum(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        cum[i] = cum[i - 1] + 0.5 * (weight[i - 1] + weight[i]);
    const double target = u01 * cum.back();
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const std::size_t idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - cum.begin()));
    const double seg = cum[idx] - cum[idx - 1];
    const double frac = seg > 0.0 ? (target - cum[idx - 1]) / seg : 0.0;
    return std::exp(lo + step * (static_cast<double>(idx - 1) + frac));
}

} // namespace detail

inline void validate_gig(const GigParams& p) {
    if (!std::isfinite(p.order) || !std::isfinite(p.chi) || !std::isfinite(p.psi) ||
        p.chi < 0.0 || p.psi < 0.0 || (p.chi == 0.0 && p.order <= 0.0) ||
        (p.psi == 0.0 && p.order >= 0.0) || (p.chi == 0.0 && p.psi == 0.0)) {
        throw std::invalid_argument("gig: improper parameters (order=" + std::to_string(p.order) +
                                    ", chi=" + std::to_string(p.chi) +
                                    ", psi=" + std::to_string(p.psi) + ")");
    }
}

inline double sample_gig(const GigParams& p, RngStream& rng) {
    validate_gig(p);
    if (p.chi == 0.0) return sample_gamma(p.order, 0.5 * p.psi, rng);
    if (p.psi == 0.0) return 1.0 / sample_gamma(-p.order, 0.5 * p.chi, rng);

    const double lambda = std::fabs(p.order);
    const double scale = std::sqrt(p.chi / p.psi);
    const double omega = std::sqrt(p.chi * p.psi);

    constexpr std::size_t kGuard = 10000;
    double x;
    if (lambda > 2.0 || omega > 3.0)
        x = detail::gig_rou_shift(lambda, omega, rng, kGuard);
    else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
        x = detail::gig_rou_noshift(lambda, omega, rng, kGuard);
    else
        x = detail::gig_hat(lambda, omega, rng, kGuard);
    if (!(x > 0.0)) x = detail::gig_inverse_cdf(lambda, omega, rng.uniform01());

    return p.order < 0.0 ? scale / x : scale * x;
}

/// log of the GIG normalizing integral
///   integral_0^inf x^(order-1) exp(-(chi/x + psi*x)/2) dx,
/// evaluated by log-space trapezoid quadrature (closed gamma forms at the
/// chi=0 / psi=0 boundaries).
inline double log_gig_norm(double order, double chi, double psi) {
    if (chi < 0.0 || psi < 0.0 || (chi == 0.0 && order <= 0.0) || (psi == 0.0 && order >= 0.0))
        throw std::invalid_argument("log_gig_norm: improper parameters");
    if (chi == 0.0) return std::lgamma(order) - order * std::log(0.5 * psi);
    if (psi == 0.0) return std::lgamma(-order) + order * std::log(0.5 * chi);

    // On u = log x the integrand exponent is g(u) = order*u - (chi e^-u + psi e^u)/2,
    // maximized at e^u = (order + sqrt(order^2 + chi*psi)) / psi. The negative-
    // order branch uses the conjugate form, which does not cancel for tiny chi.
    auto g = [&](double u) { return order * u - 0.5 * (chi * std::exp(-u) + psi * std::exp(u)); };
    const double root = std::sqrt(order * order + chi * psi);
    const double xstar = order >= 0.0 ? (order + root) / psi : chi / (root - order);
    const double ustar = std::log(xstar);
    const double gpeak = g(ustar);
    double half = 1.0;
    while (g(ustar - half) > gpeak - 42.0 || g(ustar + half) > gpeak - 42.0) {
        half *= 2.0;
        if (half > 1e6) break;
    }
    constexpr std::size_t n = 768;
    const double lo = ustar - half;
    const double step = 2.0 * half / static_cast<double>(n - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        sum += w * std::exp(g(lo + step * static_cast<double>(i)) - gpeak);
    }
    return gpeak + std::log(sum * step);
}

} // namespace bltqr
