#pragma once

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/kernels.hpp"
#include "reserve_mdn/logscale.hpp"
#include "reserve_mdn/partition.hpp"
#include "reserve_mdn/resmdn.hpp"
#include "reserve_mdn/train.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rmdn {

enum class ModelKind { mdn, resmdn };
const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& text);

enum class PartitionScheme { rolling, adjusted };
const char* to_string(PartitionScheme scheme);
PartitionScheme partition_scheme_from_string(const std::string& text);

/// Predictive distribution of one cell in currency units: either a Gaussian
/// mixture (`gauss`, scale raw) or a mixture of lognormals (`logm`).
struct CellDistribution {
    ScaleKind scale = ScaleKind::raw;
    MixtureParams gauss;
    LogMixture logm;

    std::size_t size() const noexcept { return scale == ScaleKind::raw ? gauss.size() : logm.size(); }
    double pdf(double x) const;
    double log_pdf(double x) const;
    double cdf(double x) const;
    Moments moments() const;
    double mean() const { return moments().mean; }
    double sample(Rng& rng) const;
    /// Appends `other`'s components with their weights multiplied by `weight`.
    void append(const CellDistribution& other, double weight);
};

/// Smallest x with cdf(x) >= q, by bisection down to a relative bracket
/// width of 1e-8.
double mixture_quantile(const CellDistribution& dist, double q);

/// Trained networks sharing one configuration, normaliser and (for the
/// ResMDN) one frozen ccODP backbone.
struct EnsembleModel {
    ModelKind kind = ModelKind::mdn;
    MdnConfig config;
    int n = 0;
    Normalizer normalizer;
    double sigma_cap = 0.0;  // log-scale only
    CapBasis cap_basis = CapBasis::raw;
    CcOdpFit backbone;  // ResMDN only
    std::shared_ptr<const GlmEmbedding> embedding;
    std::vector<NetworkWeights> members;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> member_splits;
    std::vector<int> best_epochs;
    std::vector<double> best_val_losses;

    LossContext context() const;
};

/// Currency-unit distribution of one member at one cell.
CellDistribution member_distribution(const EnsembleModel& model, std::size_t member, Cell cell);
/// Equal-weight mixture over all members.
CellDistribution predict_cell(const EnsembleModel& model, Cell cell);

struct FitOptions {
    PartitionScheme scheme = PartitionScheme::rolling;
    std::uint64_t partition_seed = 0;  // adjusted scheme only
    CapBasis cap_basis = CapBasis::raw;
    int jobs = 1;
};

/// Empty model carrying the normaliser, cap and backbone for training on
/// `train_cells` of `tri`.
EnsembleModel prepare_model(const MdnConfig& config, ModelKind kind, const IncrementalTriangle& tri,
                            std::span<const Cell> train_cells, CapBasis cap_basis);

/// Trains one network on `split` and appends it to `model`. Constraints are
/// split half/half between training and validation from `seed`.
void add_member(EnsembleModel& model, const IncrementalTriangle& tri, const DataSplit& split,
                const ConstraintSet& constraints, std::uint64_t seed);

/// One network per seed on the final-fit split (rolling scheme) or on
/// ADJ3 for the first three seeds and ADJ4 for the rest (adjusted scheme).
EnsembleModel fit_final(const MdnConfig& config, ModelKind kind, const IncrementalTriangle& tri,
                        const ConstraintSet& constraints, std::span<const std::uint64_t> seeds,
                        const FitOptions& options = {});

/// Five seeds derived from one.
std::vector<std::uint64_t> member_seeds(std::uint64_t seed, int count = 5);

struct ReserveDistribution {
    std::vector<double> samples;
    double mean = 0.0;
    double std = 0.0;
    std::vector<std::pair<double, double>> quantiles;  // (level, value)
};

inline constexpr double kReserveLevels[4] = {0.25, 0.5, 0.75, 0.95};

/// Summary statistics of `samples` (empirical quantiles by nearest rank).
ReserveDistribution summarize_reserves(std::vector<double> samples);

/// Total reserve draws: every lower-triangle cell sampled independently and
/// summed. Draws are grouped in fixed-size chunks with their own rng
/// streams, so the serial and parallel paths return identical samples.
ReserveDistribution simulate_reserves(std::span<const CellDistribution> cells, std::size_t nsim,
                                      std::uint64_t seed, kernels::Exec exec = kernels::Exec::parallel);
ReserveDistribution simulate_reserves(const EnsembleModel& model, std::size_t nsim, std::uint64_t seed,
                                      kernels::Exec exec = kernels::Exec::parallel);

/// Sum of the analytic means of the lower-triangle cells.
double analytic_reserve_mean(const EnsembleModel& model);

/// Model directory: model.json plus one weight CSV per member.
void save_model(const std::filesystem::path& dir, const EnsembleModel& model);
EnsembleModel load_model(const std::filesystem::path& dir);

/// Per-cell summary: accident, development, region, mean, std, q25, q50, q75, q95.
void save_predictions(const std::filesystem::path& path, const EnsembleModel& model);
/// Density curves of the given cells on an even grid over their 0.1%..99.9% range.
void save_density_curves(const std::filesystem::path& path, const EnsembleModel& model,
                         std::span<const Cell> cells, int points = 200);
void save_reserve_samples(const std::filesystem::path& path, const ReserveDistribution& dist);
void save_reserve_summary(const std::filesystem::path& path, const ReserveDistribution& dist);

}  // namespace rmdn
