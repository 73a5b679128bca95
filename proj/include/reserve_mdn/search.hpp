#pragma once

#include "reserve_mdn/forecast.hpp"
#include "reserve_mdn/network.hpp"
#include "reserve_mdn/partition.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rmdn {

enum class Stage { lambda_w, lambda_sigma, dropout, layers, neurons_components, done };
const char* to_string(Stage stage);

struct SearchGrids {
    std::vector<double> lambda_w{0.0, 0.0001, 0.001, 0.01, 0.1};
    std::vector<double> lambda_sigma{0.0, 0.0001, 0.001, 0.01, 0.1};
    std::vector<double> dropout{0.0, 0.1, 0.2};
    std::vector<int> neurons{20, 40, 60, 80, 100};
    std::vector<int> layers{1, 2, 3, 4};
    int max_components = 8;

    /// Sorts every grid ascending and rejects empty grids.
    void normalize();
};

/// Starting point of the search: lambda_w = lambda_sigma = p = 0, 60 neurons, 2 layers, 2 components.
MdnConfig initial_theta(MdnConfig base = {});

struct TestErrorReport {
    double err_p1 = 0.0;
    double err_p2 = 0.0;
    double err_total = 0.0;
    std::size_t test_p1 = 0;
    std::size_t test_p2 = 0;
    int runs = 0;
};

/// (n1 e1 + n2 e2) / (n1 + n2)
double combine_test_errors(std::size_t n1, double e1, std::size_t n2, double e2);

/// Index of the lowest error; ties go to the earliest (simplest) candidate.
std::size_t argmin_tiebreak(std::span<const double> errors);

struct TraceRecord {
    Stage stage = Stage::lambda_w;
    MdnConfig config;
    TestErrorReport report;
    bool cached = false;
};

struct SearchState {
    MdnConfig theta;
    Stage stage = Stage::lambda_w;
    std::vector<TraceRecord> trace;
};

/// Scores a batch of candidate configurations; may evaluate them in parallel.
using BatchEvaluator = std::function<std::vector<TestErrorReport>(std::span<const MdnConfig>)>;

struct SearchOptions {
    int runs = 3;  // T
    std::uint64_t seed = 0;
    int jobs = 1;
    CapBasis cap_basis = CapBasis::raw;
};

/// Negative mean log density (currency scale, floored at the log-score
/// floor) of one trained network over `cells`.
double test_nll(const EnsembleModel& model, const IncrementalTriangle& tri, std::span<const Cell> cells);

/// Trains T runs on each of P1 and P2 and combines their test errors.
TestErrorReport test_error(const MdnConfig& config, const IncrementalTriangle& tri, const SearchOptions& options);

/// Evaluator that runs test_error for every candidate, spreading
/// candidates x partitions x runs over `options.jobs` threads.
BatchEvaluator rolling_origin_evaluator(const IncrementalTriangle& tri, const SearchOptions& options);

/// The staged coordinate search: lambda_w, lambda_sigma, dropout and layers
/// by grid argmin, then the coupled (neurons, components) step that raises K
/// until E(n_K, K) < E(n_{K+1}, K + 1) or the component ceiling is hit.
/// Evaluations are memoised per configuration.
std::pair<MdnConfig, SearchState> select_hyperparameters(SearchGrids grids, const MdnConfig& initial,
                                                         const BatchEvaluator& evaluate);

void save_trace(const std::filesystem::path& path, const SearchState& state);

}  // namespace rmdn
