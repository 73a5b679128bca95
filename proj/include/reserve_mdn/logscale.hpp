#pragma once

#include "reserve_mdn/mixture.hpp"
#include "reserve_mdn/rng.hpp"
#include "reserve_mdn/triangle.hpp"

#include <span>
#include <utility>
#include <vector>

namespace rmdn {

/// Mixture of lognormals in currency units: Y = exp(X), X a Gaussian mixture
/// with weights alpha, means m and standard deviations s (log-currency).
struct LogMixture {
    std::vector<double> alpha;
    std::vector<double> m;
    std::vector<double> s;

    std::size_t size() const noexcept { return alpha.size(); }
};

/// Which sample the sigma cap's variance is taken over.
enum class CapBasis { raw, log };

const char* to_string(CapBasis basis);
CapBasis cap_basis_from_string(const std::string& text);

/// 2 sqrt(sample variance) of the observed amounts (or of their logs).
double sigma_cap(std::span<const double> observed, CapBasis basis = CapBasis::raw);

/// s_k <- min(s_k, cap).
LogMixture apply_cap(LogMixture lm, double cap);

/// Denormalises a log-scale network output: m = mu std + mean, s = min(sigma std, cap).
LogMixture to_log_mixture(const MixtureParams& params, const Normalizer& normalizer, double cap);

/// (1/y) sum_k alpha_k phi(ln y | m_k, s_k); zero for y <= 0.
double log_mixture_pdf(const LogMixture& lm, double y);
/// ln of log_mixture_pdf; -inf for y <= 0.
double log_mixture_log_pdf(const LogMixture& lm, double y);
double log_mixture_cdf(const LogMixture& lm, double y);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Mean sum alpha_k exp(m_k + s_k^2/2); variance from the mixture second moment.
Moments log_mixture_moments(const LogMixture& lm);

/// Draws Y directly: pick a component, then a lognormal variate.
double sample_log_mixture(const LogMixture& lm, Rng& rng);
/// Draws X from a Gaussian mixture (any units).
double sample_gaussian_mixture(const MixtureParams& p, Rng& rng);

}  // namespace rmdn
