#pragma once

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/forecast.hpp"
#include "reserve_mdn/triangle.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rmdn {

inline constexpr double kLogScoreFloor = -50.0;

/// sqrt(mean squared difference). Throws InputError on empty or misaligned input.
double rmse(std::span<const double> predicted, std::span<const double> actual);

/// max(floor, ln f); NaN counts as the floor.
double floored_log_density(double log_density);
/// Mean of the floored log densities.
double log_score(std::span<const double> log_densities);

/// (1(actual < qhat) - q)(qhat - actual)
double pinball(double qhat, double actual, double q);
double quantile_score(std::span<const double> qhat, std::span<const double> actual, double q);

struct CellScore {
    Cell cell;
    double actual = 0.0;
    double mean = 0.0;
    double log_density = 0.0;  // unfloored
    double q75 = 0.0;
    double q95 = 0.0;
};

/// Scores of one model on the realised lower triangle of one triangle.
struct EvaluationReport {
    std::string model;
    double rmse_cells = 0.0;
    double log_score = 0.0;
    double qs75_cells = 0.0;
    double qs95_cells = 0.0;
    double reserve_actual = 0.0;
    double reserve_mean = 0.0;
    double reserve_q75 = 0.0;
    double reserve_q95 = 0.0;
    std::vector<CellScore> cells;

    double reserve_error() const { return reserve_mean - reserve_actual; }
    double qs75_reserve() const { return pinball(reserve_q75, reserve_actual, 0.75); }
    double qs95_reserve() const { return pinball(reserve_q95, reserve_actual, 0.95); }
};

struct EvaluationOptions {
    std::size_t nsim = 100000;  // reserve Monte Carlo draws
    std::uint64_t seed = 0;
};

/// `full` must carry every lower-triangle cell.
EvaluationReport evaluate_model(const EnsembleModel& model, const IncrementalTriangle& full,
                                const EvaluationOptions& options = {});
EvaluationReport evaluate_ccodp(const CcOdpFit& fit, const IncrementalTriangle& full);

struct MetricRow {
    std::string metric;
    bool higher_is_better = false;
    double model_value = 0.0;
    double baseline_value = 0.0;
    double pct_of_baseline = 0.0;  // mean over triangles of 100 model/baseline; NaN for the log score
    double mean_difference = 0.0;  // mean over triangles of model - baseline
    double outperformance_pct = 0.0;  // strict improvement, per triangle
};

/// Per-metric comparison of `model` against `baseline` over the same triangles.
std::vector<MetricRow> aggregate(std::span<const EvaluationReport> model, std::span<const EvaluationReport> baseline);

void save_comparison(const std::filesystem::path& path, const std::vector<MetricRow>& rows,
                     const std::string& model_name, const std::string& baseline_name);
/// One row per (triangle, model).
void save_reports(const std::filesystem::path& path, std::span<const EvaluationReport> reports);
void save_cell_scores(const std::filesystem::path& path, const EvaluationReport& report);

}  // namespace rmdn
