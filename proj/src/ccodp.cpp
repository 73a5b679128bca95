#include "reserve_mdn/ccodp.hpp"

#include "reserve_mdn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace rmdn {

CcOdpFit fit_ccodp(const IncrementalTriangle& tri, int dim) {
    const int m = dim;
    if (m < 1 || m > tri.n()) throw InputError("ccODP region dimension out of range");

    // Cumulative claims, row-major over the region's upper triangle.
    std::vector<std::vector<double>> cum(m);
    std::vector<double> col_total(m, 0.0);
    for (int i = 1; i <= m; ++i) {
        double run = 0.0;
        for (int j = 1; i + j <= m + 1; ++j) {
            const double x = tri.at({i, j});
            run += x;
            cum[i - 1].push_back(run);
            col_total[j - 1] += x;
        }
        if (!(run > 0.0))
            throw ModelError("nonpositive row total for accident period " + std::to_string(i));
    }
    for (int j = 1; j <= m; ++j)
        if (!(col_total[j - 1] > 0.0))
            throw ModelError("nonpositive column total for development period " + std::to_string(j));

    // Volume-weighted development factors f_j, j = 1..m-1.
    std::vector<double> factor(std::max(m - 1, 0));
    for (int j = 1; j < m; ++j) {
        double num = 0.0, den = 0.0;
        for (int i = 1; i <= m - j; ++i) {
            num += cum[i - 1][j];
            den += cum[i - 1][j - 1];
        }
        if (!(den > 0.0)) throw ModelError("development factor undefined at period " + std::to_string(j));
        factor[j - 1] = num / den;
    }

    // Proportion of ultimate developed by period j.
    std::vector<double> developed(m, 1.0);
    for (int j = m - 1; j >= 1; --j) developed[j - 1] = developed[j] / factor[j - 1];

    CcOdpFit fit;
    fit.B.resize(m);
    fit.A.resize(m);
    for (int j = 1; j <= m; ++j) fit.B[j - 1] = developed[j - 1] - (j > 1 ? developed[j - 2] : 0.0);
    for (int i = 1; i <= m; ++i) fit.A[i - 1] = cum[i - 1].back() / developed[m - i];

    for (int k = 0; k < m; ++k) {
        if (!(fit.A[k] > 0.0) || !std::isfinite(fit.A[k]))
            throw ModelError("nonpositive accident effect at period " + std::to_string(k + 1));
        if (!(fit.B[k] > 0.0) || !std::isfinite(fit.B[k]))
            throw ModelError("nonpositive development effect at period " + std::to_string(k + 1));
    }

    double chi2 = 0.0, total = 0.0;
    int cells = 0;
    for (int i = 1; i <= m; ++i)
        for (int j = 1; i + j <= m + 1; ++j) {
            const double x = tri.at({i, j});
            const double mu = fit.mean(i, j);
            chi2 += (x - mu) * (x - mu) / mu;
            total += x;
            ++cells;
        }
    const int dof = cells - (2 * m - 1);
    const double floor = 1e-8 * total / cells;
    fit.D = dof > 0 ? std::max(chi2 / dof, floor) : floor;
    return fit;
}

CcOdpFit adjust_latest_accident(const CcOdpFit& fit) {
    const int n = fit.n();
    if (n < 4) throw InputError("latest-accident adjustment needs n >= 4");
    double mean_log = 0.0;
    for (const double a : fit.A) mean_log += std::log(a);
    mean_log /= n;
    CcOdpFit out = fit;
    if (std::log(fit.A[n - 1]) < mean_log) {
        const double avg =
            (std::log(fit.A[n - 4]) + std::log(fit.A[n - 3]) + std::log(fit.A[n - 2])) / 3.0;
        out.A[n - 1] = std::exp(avg);
    }
    return out;
}

namespace {

// ln of the ODP quasi-density in the Poisson variable t = x / D with rate
// lambda = m / D. Uses a Stirling expansion around t = lambda for large t so
// that very large rates do not lose all precision to cancellation.
double log_density_t(double lambda, double t) {
    if (t < 10.0) return -lambda + t * std::log(lambda) - std::lgamma(t + 1.0);
    const double u = t - lambda;
    const double t2 = t * t;
    const double stirling = 1.0 / (12.0 * t) - 1.0 / (360.0 * t * t2) + 1.0 / (1260.0 * t2 * t2 * t);
    return u - t * std::log1p(u / lambda) - 0.5 * std::log(2.0 * std::numbers::pi * t) - stirling;
}

}  // namespace

double ccodp_log_density(double mean, double dispersion, double x) {
    if (x < 0.0) return -std::numeric_limits<double>::infinity();
    const double lambda = mean / dispersion;
    return log_density_t(lambda, x / dispersion) - std::log(dispersion);
}

double ccodp_density(const CcOdpFit& fit, int i, int j, double x) {
    return std::exp(ccodp_log_density(fit.mean(i, j), fit.D, x));
}

double odp_quantile(double mean, double dispersion, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0,1)");
    const double lambda = mean / dispersion;
    const double sd = std::sqrt(lambda);
    const double lo = std::max(0.0, lambda - 40.0 * sd - 10.0);
    const double hi = lambda + 40.0 * sd + 10.0;
    constexpr int intervals = 8000;
    const double h = (hi - lo) / intervals;

    std::vector<double> cdf(intervals + 1, 0.0);
    double prev = std::exp(log_density_t(lambda, lo));
    for (int k = 1; k <= intervals; ++k) {
        const double cur = std::exp(log_density_t(lambda, lo + k * h));
        cdf[k] = cdf[k - 1] + 0.5 * h * (prev + cur);
        prev = cur;
    }
    const double target = q * cdf.back();
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
    const auto k = static_cast<int>(std::distance(cdf.begin(), it));
    if (k == 0) return lo * dispersion;
    const double frac = (target - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
    return (lo + (k - 1 + frac) * h) * dispersion;
}

double ccodp_quantile(const CcOdpFit& fit, int i, int j, double q) {
    return odp_quantile(fit.mean(i, j), fit.D, q);
}

double ccodp_reserve_mean(const CcOdpFit& fit) {
    double total = 0.0;
    for (const auto c : lower_cells(fit.n())) total += fit.mean(c);
    return total;
}

}  // namespace rmdn
