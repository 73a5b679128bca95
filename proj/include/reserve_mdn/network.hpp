#pragma once

#include "reserve_mdn/mixture.hpp"
#include "reserve_mdn/rng.hpp"
#include "reserve_mdn/triangle.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rmdn {

/// Hyper-parameters and training controls of one MDN / ResMDN fit.
struct MdnConfig {
    double lambda_w = 0.0;      // L2 penalty on weights (biases excluded)
    double lambda_sigma = 0.0;  // activity penalty on sigma^2 over training cells
    double dropout = 0.0;       // inverted-dropout rate on hidden activations
    int neurons = 60;
    int layers = 2;
    int components = 2;
    double mse_weight = 0.0;  // weight of the squared error of the mixture mean
    ScaleKind scale = ScaleKind::raw;
    int max_epochs = 10000;
    int patience = 1000;
    double learning_rate = 0.001;
    double lambda_c = 10.0;  // projection-constraint penalty

    /// Throws InputError on an out-of-range field.
    void validate() const;
};

/// Offsets of each parameter block inside the flat parameter vector.
/// Blocks are stored layer-major: hidden layers 0..L-1 (W then b), then the
/// alpha, mu and sigma heads (W then b). Every W is row-major with one row per
/// output unit.
struct NetworkLayout {
    int layers = 0;
    int neurons = 0;
    int components = 0;
    static constexpr int inputs = 2;

    std::vector<std::size_t> hidden_w, hidden_b;
    std::size_t head_w[3] = {0, 0, 0};
    std::size_t head_b[3] = {0, 0, 0};
    std::size_t size = 0;

    NetworkLayout() = default;
    NetworkLayout(int layers, int neurons, int components);
    int fan_in(int layer) const noexcept { return layer == 0 ? inputs : neurons; }
    friend bool operator==(const NetworkLayout&, const NetworkLayout&) = default;
};

enum Head : int { kAlpha = 0, kMu = 1, kSigma = 2 };

/// Layered weights of the fully connected MDN (or the ResMDN's fully
/// connected module), stored as one flat vector for the optimiser.
struct NetworkWeights {
    NetworkLayout layout;
    std::vector<double> params;

    NetworkWeights() = default;
    explicit NetworkWeights(const NetworkLayout& l) : layout(l), params(l.size, 0.0) {}

    /// True for entries that are weights (subject to the L2 penalty).
    std::vector<std::uint8_t> weight_mask() const;
    /// Sum of squared weights, biases excluded.
    double weight_square_norm() const;
};

NetworkWeights make_weights(const MdnConfig& config);
/// Glorot-uniform weights, zero biases.
NetworkWeights init_glorot(const MdnConfig& config, std::uint64_t seed);

/// Dropout keep-masks (0 or 1/(1-p)) for a batch of rows; empty means eval mode.
struct DropoutMasks {
    int width = 0;  // layers * neurons per row
    std::vector<double> scale;

    bool active() const noexcept { return !scale.empty(); }
    const double* row(std::size_t r) const { return scale.data() + r * static_cast<std::size_t>(width); }
};

DropoutMasks draw_dropout_masks(const MdnConfig& config, std::size_t rows, Rng& rng);

class GlmEmbedding;

/// Head pre-activations (z^alpha, z^mu, z^sigma), each of length K.
struct HeadOutputs {
    std::vector<double> z[3];
};

/// Pre-activation head outputs of the fully connected module for one cell.
/// `mask` may be null (eval mode) or point at layers*neurons keep-scales.
HeadOutputs head_outputs(const NetworkWeights& w, int n, Cell cell, const double* mask = nullptr);

/// Applies the output activations: softmax / identity / exp, after adding
/// the embedding's (ln alpha, mu, ln sigma) when `embedding` is non-null.
MixtureParams activate(const HeadOutputs& z, ScaleKind scale, const GlmEmbedding* embedding, Cell cell);

enum class Mode { train, eval };

/// Full forward pass. In train mode with dropout > 0 a fresh inverted
/// dropout mask is drawn from `rng`; eval mode is deterministic.
MixtureParams forward(const NetworkWeights& w, const MdnConfig& config, int n, Cell cell, Mode mode, Rng& rng,
                      const GlmEmbedding* embedding = nullptr);
MixtureParams forward(const NetworkWeights& w, const MdnConfig& config, int n, Cell cell,
                      const GlmEmbedding* embedding = nullptr);

/// Flat CSV snapshot: `block,index,value` rows in layout order, preceded by
/// a `layout` row carrying (layers, neurons, components).
void save_weights(const std::filesystem::path& path, const NetworkWeights& w);
NetworkWeights load_weights(const std::filesystem::path& path);

}  // namespace rmdn
