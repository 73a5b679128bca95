#pragma once

#include "reserve_mdn/triangle.hpp"

#include <vector>

namespace rmdn {

/// Cross-classified over-dispersed Poisson fit: E[X_ij] = A_i B_j,
/// Var[X_ij] = D A_i B_j, with sum_j B_j = 1.
struct CcOdpFit {
    std::vector<double> A;  // accident effects, length n
    std::vector<double> B;  // development effects, length n
    double D = 1.0;         // dispersion

    int n() const noexcept { return static_cast<int>(A.size()); }
    double mean(int i, int j) const { return A.at(i - 1) * B.at(j - 1); }
    double mean(Cell c) const { return mean(c.i, c.j); }
};

/// Closed-form fit on the upper triangle of dimension `dim` (top-left
/// `dim` x `dim` block of `tri`). The result has length `dim`. Fitted means
/// coincide with the chain-ladder fitted values; D is Pearson chi-square over
/// residual degrees of freedom, floored at 1e-8 times the mean cell value.
CcOdpFit fit_ccodp(const IncrementalTriangle& tri, int dim);
inline CcOdpFit fit_ccodp(const IncrementalTriangle& tri) { return fit_ccodp(tri, tri.n()); }

/// Replaces ln A_n by the mean of the previous three log accident effects
/// when it is strictly below the mean over all accident periods.
CcOdpFit adjust_latest_accident(const CcOdpFit& fit);

/// Continuous ODP quasi-density exp(-m/D) (m/D)^(x/D) / (Gamma(x/D + 1) D).
double ccodp_density(const CcOdpFit& fit, int i, int j, double x);
double ccodp_log_density(double mean, double dispersion, double x);

/// Smallest x with CDF(x) >= q, CDF by numerical integration of the density.
double ccodp_quantile(const CcOdpFit& fit, int i, int j, double q);
double odp_quantile(double mean, double dispersion, double q);

/// Fitted mean of every lower-triangle cell summed (the reserve estimate).
double ccodp_reserve_mean(const CcOdpFit& fit);

}  // namespace rmdn
