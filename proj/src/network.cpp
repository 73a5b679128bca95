#include "reserve_mdn/network.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/resmdn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rmdn {

void MdnConfig::validate() const {
    if (!(lambda_w >= 0.0) || !(lambda_sigma >= 0.0) || !(lambda_c >= 0.0) || !(mse_weight >= 0.0))
        throw InputError("penalties and loss weights must be nonnegative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must lie in [0,1)");
    if (neurons < 1 || layers < 1 || components < 1)
        throw InputError("neurons, layers and components must be positive");
    if (max_epochs < 1 || patience < 1) throw InputError("max_epochs and patience must be positive");
    if (!(learning_rate >= 0.0)) throw InputError("learning rate must be nonnegative");
}

NetworkLayout::NetworkLayout(int layers_, int neurons_, int components_)
    : layers(layers_), neurons(neurons_), components(components_) {
    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
        hidden_w.push_back(off);
        off += static_cast<std::size_t>(neurons) * fan_in(l);
        hidden_b.push_back(off);
        off += neurons;
    }
    for (int h = 0; h < 3; ++h) {
        head_w[h] = off;
        off += static_cast<std::size_t>(components) * neurons;
        head_b[h] = off;
        off += components;
    }
    size = off;
}

std::vector<std::uint8_t> NetworkWeights::weight_mask() const {
    std::vector<std::uint8_t> mask(params.size(), 0);
    const auto& L = layout;
    for (int l = 0; l < L.layers; ++l)
        std::fill_n(mask.begin() + L.hidden_w[l], static_cast<std::size_t>(L.neurons) * L.fan_in(l), 1);
    for (int h = 0; h < 3; ++h)
        std::fill_n(mask.begin() + L.head_w[h], static_cast<std::size_t>(L.components) * L.neurons, 1);
    return mask;
}

double NetworkWeights::weight_square_norm() const {
    const auto mask = weight_mask();
    double s = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k)
        if (mask[k]) s += params[k] * params[k];
    return s;
}

NetworkWeights make_weights(const MdnConfig& config) {
    config.validate();
    return NetworkWeights(NetworkLayout(config.layers, config.neurons, config.components));
}

NetworkWeights init_glorot(const MdnConfig& config, std::uint64_t seed) {
    auto w = make_weights(config);
    auto rng = make_stream(seed, 0x1a17);
    const auto& L = w.layout;
    auto fill = [&](std::size_t off, int fan_out, int fan_in) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (std::size_t k = 0; k < static_cast<std::size_t>(fan_out) * fan_in; ++k) w.params[off + k] = u(rng);
    };
    for (int l = 0; l < L.layers; ++l) fill(L.hidden_w[l], L.neurons, L.fan_in(l));
    for (int h = 0; h < 3; ++h) fill(L.head_w[h], L.components, L.neurons);
    return w;
}

DropoutMasks draw_dropout_masks(const MdnConfig& config, std::size_t rows, Rng& rng) {
    DropoutMasks m;
    if (config.dropout <= 0.0) return m;
    m.width = config.layers * config.neurons;
    m.scale.resize(rows * static_cast<std::size_t>(m.width));
    std::bernoulli_distribution keep(1.0 - config.dropout);
    const double inv = 1.0 / (1.0 - config.dropout);
    for (auto& s : m.scale) s = keep(rng) ? inv : 0.0;
    return m;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

HeadOutputs head_outputs(const NetworkWeights& w, int n, Cell cell, const double* mask) {
    const auto& L = w.layout;
    const double* p = w.params.data();
    std::vector<double> in{scale_period(cell.i, n), scale_period(cell.j, n)};
    std::vector<double> out(L.neurons);
    for (int l = 0; l < L.layers; ++l) {
        const int fi = L.fan_in(l);
        const double* W = p + L.hidden_w[l];
        const double* b = p + L.hidden_b[l];
        for (int a = 0; a < L.neurons; ++a) {
            double s = b[a];
            for (int c = 0; c < fi; ++c) s += W[a * fi + c] * in[c];
            out[a] = sigmoid(s);
            if (mask) out[a] *= mask[l * L.neurons + a];
        }
        in.swap(out);
        out.assign(L.neurons, 0.0);
    }
    HeadOutputs z;
    for (int h = 0; h < 3; ++h) {
        z.z[h].resize(L.components);
        const double* W = p + L.head_w[h];
        const double* b = p + L.head_b[h];
        for (int k = 0; k < L.components; ++k) {
            double s = b[k];
            for (int a = 0; a < L.neurons; ++a) s += W[k * L.neurons + a] * in[a];
            z.z[h][k] = s;
        }
    }
    return z;
}

MixtureParams activate(const HeadOutputs& z, ScaleKind scale, const GlmEmbedding* embedding, Cell cell) {
    const std::size_t K = z.z[kAlpha].size();
    MixtureParams out;
    out.scale = scale;
    out.alpha.resize(K);
    out.mu.resize(K);
    out.sigma.resize(K);
    std::vector<double> logits(K);
    for (std::size_t k = 0; k < K; ++k) {
        logits[k] = z.z[kAlpha][k] + (embedding ? embedding->ln_alpha(cell)[k] : 0.0);
        out.mu[k] = z.z[kMu][k] + (embedding ? embedding->mu(cell)[k] : 0.0);
        out.sigma[k] = std::exp(z.z[kSigma][k] + (embedding ? embedding->ln_sigma(cell)[k] : 0.0));
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += (out.alpha[k] = std::exp(logits[k] - top));
    for (auto& a : out.alpha) a /= total;
    return out;
}

MixtureParams forward(const NetworkWeights& w, const MdnConfig& config, int n, Cell cell, Mode mode, Rng& rng,
                      const GlmEmbedding* embedding) {
    if (w.layout != NetworkLayout(config.layers, config.neurons, config.components))
        throw ModelError("weights do not match the configured network shape");
    if (cell.i < 1 || cell.j < 1 || cell.i > n || cell.j > n) throw InputError("cell outside the square");
    DropoutMasks masks;
    if (mode == Mode::train) masks = draw_dropout_masks(config, 1, rng);
    const auto z = head_outputs(w, n, cell, masks.active() ? masks.row(0) : nullptr);
    return activate(z, config.scale, embedding, cell);
}

MixtureParams forward(const NetworkWeights& w, const MdnConfig& config, int n, Cell cell,
                      const GlmEmbedding* embedding) {
    Rng unused(0);
    return forward(w, config, n, cell, Mode::eval, unused, embedding);
}

namespace {

const char* kHeadNames[3] = {"alpha", "mu", "sigma"};

}  // namespace

void save_weights(const std::filesystem::path& path, const NetworkWeights& w) {
    const auto& L = w.layout;
    csv::Writer out(path);
    out.row({"block", "row", "col", "value"});
    out.values("layout", 0, 0, static_cast<double>(L.layers));
    out.values("layout", 1, 0, static_cast<double>(L.neurons));
    out.values("layout", 2, 0, static_cast<double>(L.components));
    auto dump = [&](const std::string& name, std::size_t off, int rows, int cols) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) out.values(name, r, c, w.params[off + r * cols + c]);
    };
    for (int l = 0; l < L.layers; ++l) {
        dump("hidden" + std::to_string(l) + ".w", L.hidden_w[l], L.neurons, L.fan_in(l));
        dump("hidden" + std::to_string(l) + ".b", L.hidden_b[l], L.neurons, 1);
    }
    for (int h = 0; h < 3; ++h) {
        dump(std::string(kHeadNames[h]) + ".w", L.head_w[h], L.components, L.neurons);
        dump(std::string(kHeadNames[h]) + ".b", L.head_b[h], L.components, 1);
    }
}

NetworkWeights load_weights(const std::filesystem::path& path) {
    const auto t = csv::read(path);
    const auto cb = t.column("block"), cv = t.column("value");
    int dims[3] = {0, 0, 0};
    std::size_t r = 0;
    for (; r < t.rows.size() && t.rows[r][cb] == "layout"; ++r) {
        const auto k = csv::to_long(t.rows[r][t.column("row")], "layout row");
        if (k < 0 || k > 2) throw InputError("bad layout row in " + path.string());
        dims[k] = static_cast<int>(csv::to_double(t.rows[r][cv], "layout value"));
    }
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw InputError("missing layout in " + path.string());
    NetworkWeights w(NetworkLayout(dims[0], dims[1], dims[2]));
    if (t.rows.size() - r != w.params.size())
        throw InputError("weight count mismatch in " + path.string());
    for (std::size_t k = 0; k < w.params.size(); ++k) w.params[k] = csv::to_double(t.rows[r + k][cv], "weight");
    return w;
}

}  // namespace rmdn
