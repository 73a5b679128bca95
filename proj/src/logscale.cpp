#include "reserve_mdn/logscale.hpp"

#include "reserve_mdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace rmdn {

const char* to_string(CapBasis basis) { return basis == CapBasis::raw ? "raw" : "log"; }

CapBasis cap_basis_from_string(const std::string& text) {
    if (text == "raw") return CapBasis::raw;
    if (text == "log") return CapBasis::log;
    throw InputError("unknown sigma cap basis '" + text + "' (expected raw or log)");
}

double sigma_cap(std::span<const double> observed, CapBasis basis) {
    if (observed.size() < 2) throw InputError("sigma cap needs at least two observations");
    std::vector<double> v(observed.begin(), observed.end());
    if (basis == CapBasis::log) {
        for (auto& x : v) {
            if (!(x > 0.0)) throw InputError("log sigma cap requires positive amounts");
            x = std::log(x);
        }
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    return var > 0.0 ? 2.0 * std::sqrt(var) : std::numeric_limits<double>::infinity();
}

LogMixture apply_cap(LogMixture lm, double cap) {
    for (auto& s : lm.s) s = std::min(s, cap);
    return lm;
}

LogMixture to_log_mixture(const MixtureParams& params, const Normalizer& normalizer, double cap) {
    if (params.scale != ScaleKind::log || normalizer.scale != ScaleKind::log)
        throw InputError("to_log_mixture needs log-scale parameters and normaliser");
    LogMixture lm;
    lm.alpha = params.alpha;
    lm.m.resize(params.size());
    lm.s.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        lm.m[k] = params.mu[k] * normalizer.std + normalizer.mean;
        lm.s[k] = std::min(params.sigma[k] * normalizer.std, cap);
    }
    return lm;
}

double log_mixture_log_pdf(const LogMixture& lm, double y) {
    if (!(y > 0.0)) return -std::numeric_limits<double>::infinity();
    const double ly = std::log(y);
    std::vector<double> terms(lm.size());
    for (std::size_t k = 0; k < lm.size(); ++k) terms[k] = std::log(lm.alpha[k]) + normal_log_pdf(ly, lm.m[k], lm.s[k]);
    return log_sum_exp(terms.data(), terms.size()) - ly;
}

double log_mixture_pdf(const LogMixture& lm, double y) {
    if (!(y > 0.0)) return 0.0;
    return std::exp(log_mixture_log_pdf(lm, y));
}

double log_mixture_cdf(const LogMixture& lm, double y) {
    if (!(y > 0.0)) return 0.0;
    const double ly = std::log(y);
    double F = 0.0;
    for (std::size_t k = 0; k < lm.size(); ++k) F += lm.alpha[k] * normal_cdf(ly, lm.m[k], lm.s[k]);
    return F;
}

Moments log_mixture_moments(const LogMixture& lm) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < lm.size(); ++k) {
        const double s2 = lm.s[k] * lm.s[k];
        m1 += lm.alpha[k] * std::exp(lm.m[k] + 0.5 * s2);
        m2 += lm.alpha[k] * std::exp(2.0 * lm.m[k] + 2.0 * s2);
    }
    return {m1, std::max(0.0, m2 - m1 * m1)};
}

namespace {

std::size_t pick_component(const std::vector<double>& alpha, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < alpha.size(); ++k) {
        acc += alpha[k];
        if (r < acc) return k;
    }
    return alpha.size() - 1;
}

}  // namespace

double sample_log_mixture(const LogMixture& lm, Rng& rng) {
    const auto k = pick_component(lm.alpha, rng);
    std::lognormal_distribution<double> d(lm.m[k], lm.s[k]);
    return d(rng);
}

double sample_gaussian_mixture(const MixtureParams& p, Rng& rng) {
    const auto k = pick_component(p.alpha, rng);
    std::normal_distribution<double> d(p.mu[k], p.sigma[k]);
    return d(rng);
}

}  // namespace rmdn
