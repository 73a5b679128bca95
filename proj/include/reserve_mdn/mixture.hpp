#pragma once

#include "reserve_mdn/triangle.hpp"

#include <vector>

namespace rmdn {

/// Per-cell mixture-Gaussian parameters as produced by the network heads.
/// Units are the normalised response (of x or of ln x, per `scale`).
struct MixtureParams {
    std::vector<double> alpha;
    std::vector<double> mu;
    std::vector<double> sigma;
    ScaleKind scale = ScaleKind::raw;

    std::size_t size() const noexcept { return alpha.size(); }
};

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

double normal_log_pdf(double x, double mu, double sigma);
double normal_cdf(double x, double mu, double sigma);

/// sum_k alpha_k phi(x | mu_k, sigma_k)
double mixture_pdf(const MixtureParams& p, double x);
/// ln of mixture_pdf via log-sum-exp; finite whenever every sigma_k > 0.
double mixture_log_pdf(const MixtureParams& p, double x);
double mixture_cdf(const MixtureParams& p, double x);
/// sum_k alpha_k mu_k
double mixture_mean(const MixtureParams& p);

/// Stable log(sum(exp(v))).
double log_sum_exp(const double* v, std::size_t n);

}  // namespace rmdn
