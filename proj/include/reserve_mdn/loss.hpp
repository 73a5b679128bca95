#pragma once

#include "reserve_mdn/network.hpp"
#include "reserve_mdn/triangle.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace rmdn {

class GlmEmbedding;

/// Bounds on the central estimate of one lower-triangle cell, in currency.
struct ConstraintEntry {
    Cell cell;
    double lower = 0.0;
    double upper = 0.0;  // may be +inf
};
using ConstraintSet = std::vector<ConstraintEntry>;

/// Checks lower <= upper and that every cell lies in the lower triangle.
void validate_constraints(const ConstraintSet& constraints, int n);
/// `accident,development,lower,upper` file; `inf` is accepted for upper.
ConstraintSet load_constraints(const std::filesystem::path& path, int n);
void save_constraints(const std::filesystem::path& path, const ConstraintSet& constraints);
/// Lower bound 0, no upper bound, on every lower-triangle cell with j > n - periods.
ConstraintSet nonnegative_tail_constraints(int n, int periods);
/// Random half/half split (training gets the extra entry when odd).
std::pair<ConstraintSet, ConstraintSet> split_constraints(const ConstraintSet& constraints, std::uint64_t seed);

/// Everything the loss needs besides the weights and the rows.
struct LossContext {
    MdnConfig config;
    int n = 0;
    Normalizer normalizer;
    /// Mean observed cell value; squared violations are divided by its square.
    double constraint_scale = 1.0;
    const GlmEmbedding* embedding = nullptr;
};

/// Rows of one loss evaluation: observed cells with normalised targets,
/// followed by constraint cells. Dropout masks are indexed in that order.
struct Batch {
    std::vector<Cell> cells;
    std::vector<double> targets;
    ConstraintSet constraints;

    std::size_t rows() const noexcept { return cells.size() + constraints.size(); }
};

Batch make_batch(const IncrementalTriangle& tri, std::span<const Cell> cells, const Normalizer& normalizer,
                 ConstraintSet constraints = {});

/// Itemised loss. `total` is the sum of the other fields.
struct LossBreakdown {
    double nll = 0.0;
    double mse = 0.0;
    double weight_penalty = 0.0;
    double sigma_penalty = 0.0;
    double constraint_penalty = 0.0;
    double total() const noexcept { return nll + mse + weight_penalty + sigma_penalty + constraint_penalty; }
};

/// Coefficients applied to each per-row term; derived from the config for
/// the training and validation objectives.
struct TermWeights {
    double nll = 0.0;         // multiplies -ln f per observed row
    double mse = 0.0;         // multiplies (E - y)^2 per observed row
    double sigma = 0.0;       // multiplies sum_k sigma_k^2 per observed row
    double constraint = 0.0;  // multiplies squared violation / scale^2 per constraint row
    double weight_l2 = 0.0;   // multiplies w.w
};

TermWeights training_weights(const LossContext& ctx, const Batch& batch);
TermWeights validation_weights(const LossContext& ctx, const Batch& batch);

/// Mean NLL + mse_weight * mean squared error of the mixture mean (normalised
/// scale) + lambda_w w.w + lambda_sigma sum sigma^2 + lambda_C / |C| sum of
/// squared bound violations of the raw-scale predicted mean.
LossBreakdown training_loss(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                            const DropoutMasks* masks = nullptr);
double training_loss_value(const LossContext& ctx, const NetworkWeights& w, const Batch& batch,
                           const DropoutMasks* masks = nullptr);

/// Analytic gradient of training_loss; returns the loss value alongside.
double gradient(const LossContext& ctx, const NetworkWeights& w, const Batch& batch, std::vector<double>& grad,
                const DropoutMasks* masks = nullptr);

/// NLL plus the constraint penalty on the validation constraint cells,
/// evaluated in eval mode (no weight, sigma or MSE terms).
double validation_loss(const LossContext& ctx, const NetworkWeights& w, const Batch& batch);

/// Raw-currency mean of a normalised-scale mixture.
double raw_mean(const MixtureParams& p, const Normalizer& normalizer);

}  // namespace rmdn
