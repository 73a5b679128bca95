#include "reserve_mdn/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rmdn {

double normal_log_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -kLogSqrtTwoPi - std::log(sigma) - 0.5 * z * z;
}

double normal_cdf(double x, double mu, double sigma) {
    return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

double log_sum_exp(const double* v, std::size_t n) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) hi = std::max(hi, v[k]);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += std::exp(v[k] - hi);
    return hi + std::log(s);
}

double mixture_log_pdf(const MixtureParams& p, double x) {
    std::vector<double> terms(p.size());
    for (std::size_t k = 0; k < p.size(); ++k)
        terms[k] = std::log(p.alpha[k]) + normal_log_pdf(x, p.mu[k], p.sigma[k]);
    return log_sum_exp(terms.data(), terms.size());
}

double mixture_pdf(const MixtureParams& p, double x) {
    double f = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) f += p.alpha[k] * std::exp(normal_log_pdf(x, p.mu[k], p.sigma[k]));
    return f;
}

double mixture_cdf(const MixtureParams& p, double x) {
    double F = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) F += p.alpha[k] * normal_cdf(x, p.mu[k], p.sigma[k]);
    return F;
}

double mixture_mean(const MixtureParams& p) {
    double m = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) m += p.alpha[k] * p.mu[k];
    return m;
}

}  // namespace rmdn
