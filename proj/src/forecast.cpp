#include "reserve_mdn/forecast.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <random>

namespace rmdn {

const char* to_string(ModelKind kind) { return kind == ModelKind::mdn ? "mdn" : "resmdn"; }

ModelKind model_kind_from_string(const std::string& text) {
    if (text == "mdn") return ModelKind::mdn;
    if (text == "resmdn") return ModelKind::resmdn;
    throw InputError("unknown model kind '" + text + "' (expected mdn or resmdn)");
}

const char* to_string(PartitionScheme scheme) { return scheme == PartitionScheme::rolling ? "rolling" : "adjusted"; }

PartitionScheme partition_scheme_from_string(const std::string& text) {
    if (text == "rolling") return PartitionScheme::rolling;
    if (text == "adjusted") return PartitionScheme::adjusted;
    throw InputError("unknown partition scheme '" + text + "' (expected rolling or adjusted)");
}

// ---------------------------------------------------------------------------
// Cell distributions

double CellDistribution::pdf(double x) const {
    return scale == ScaleKind::raw ? mixture_pdf(gauss, x) : log_mixture_pdf(logm, x);
}

double CellDistribution::log_pdf(double x) const {
    return scale == ScaleKind::raw ? mixture_log_pdf(gauss, x) : log_mixture_log_pdf(logm, x);
}

double CellDistribution::cdf(double x) const {
    return scale == ScaleKind::raw ? mixture_cdf(gauss, x) : log_mixture_cdf(logm, x);
}

Moments CellDistribution::moments() const {
    if (scale == ScaleKind::log) return log_mixture_moments(logm);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < gauss.size(); ++k) {
        m1 += gauss.alpha[k] * gauss.mu[k];
        m2 += gauss.alpha[k] * (gauss.sigma[k] * gauss.sigma[k] + gauss.mu[k] * gauss.mu[k]);
    }
    return {m1, std::max(0.0, m2 - m1 * m1)};
}

double CellDistribution::sample(Rng& rng) const {
    return scale == ScaleKind::raw ? sample_gaussian_mixture(gauss, rng) : sample_log_mixture(logm, rng);
}

void CellDistribution::append(const CellDistribution& other, double weight) {
    if (size() == 0) scale = other.scale;
    if (other.scale != scale) throw ModelError("cannot mix Gaussian and log-Gaussian components");
    gauss.scale = ScaleKind::raw;
    if (scale == ScaleKind::raw) {
        for (std::size_t k = 0; k < other.gauss.size(); ++k) {
            gauss.alpha.push_back(weight * other.gauss.alpha[k]);
            gauss.mu.push_back(other.gauss.mu[k]);
            gauss.sigma.push_back(other.gauss.sigma[k]);
        }
    } else {
        for (std::size_t k = 0; k < other.logm.size(); ++k) {
            logm.alpha.push_back(weight * other.logm.alpha[k]);
            logm.m.push_back(other.logm.m[k]);
            logm.s.push_back(other.logm.s[k]);
        }
    }
}

double mixture_quantile(const CellDistribution& dist, double q) {
    if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0,1)");
    if (dist.size() == 0) throw ModelError("empty distribution");
    const bool log = dist.scale == ScaleKind::log;
    // Bracket on the underlying Gaussian scale (ln y for log mixtures).
    const auto& mu = log ? dist.logm.m : dist.gauss.mu;
    const auto& sd = log ? dist.logm.s : dist.gauss.sigma;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, spread = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        lo = std::min(lo, mu[k] - 40.0 * sd[k]);
        hi = std::max(hi, mu[k] + 40.0 * sd[k]);
        spread = std::max(spread, sd[k]);
    }
    auto F = [&](double t) { return log ? dist.cdf(std::exp(t)) : dist.cdf(t); };
    while (F(lo) >= q) lo -= (hi - lo);
    while (F(hi) < q) hi += (hi - lo);
    for (int it = 0; it < 2000; ++it) {
        const double x_lo = log ? std::exp(lo) : lo;
        const double x_hi = log ? std::exp(hi) : hi;
        const double width = x_hi - x_lo;
        if (width <= 1e-13 * std::max(std::abs(x_lo), std::abs(x_hi)) || width <= 1e-14 * spread) break;
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (F(mid) >= q ? hi : lo) = mid;
    }
    return log ? std::exp(hi) : hi;
}

// ---------------------------------------------------------------------------
// Ensembles

LossContext EnsembleModel::context() const {
    LossContext ctx;
    ctx.config = config;
    ctx.n = n;
    ctx.normalizer = normalizer;
    ctx.embedding = embedding.get();
    return ctx;
}

CellDistribution member_distribution(const EnsembleModel& model, std::size_t member, Cell cell) {
    const auto p = forward(model.members.at(member), model.config, model.n, cell, model.embedding.get());
    CellDistribution d;
    d.scale = model.config.scale;
    if (d.scale == ScaleKind::raw) {
        const auto& nz = model.normalizer;
        d.gauss.scale = ScaleKind::raw;
        d.gauss.alpha = p.alpha;
        d.gauss.mu.resize(p.size());
        d.gauss.sigma.resize(p.size());
        for (std::size_t k = 0; k < p.size(); ++k) {
            d.gauss.mu[k] = nz.mean + nz.std * p.mu[k];
            d.gauss.sigma[k] = nz.std * p.sigma[k];
        }
    } else {
        d.logm = to_log_mixture(p, model.normalizer, model.sigma_cap);
    }
    return d;
}

CellDistribution predict_cell(const EnsembleModel& model, Cell cell) {
    if (model.members.empty()) throw ModelError("model has no members");
    CellDistribution d;
    const double w = 1.0 / static_cast<double>(model.members.size());
    for (std::size_t z = 0; z < model.members.size(); ++z) d.append(member_distribution(model, z, cell), w);
    return d;
}

EnsembleModel prepare_model(const MdnConfig& config, ModelKind kind, const IncrementalTriangle& tri,
                            std::span<const Cell> train_cells, CapBasis cap_basis) {
    config.validate();
    EnsembleModel m;
    m.kind = kind;
    m.config = config;
    m.n = tri.n();
    m.cap_basis = cap_basis;
    m.normalizer = fit_normalizer(tri.values(train_cells), config.scale);
    const auto observed = tri.values(upper_cells(tri.n()));
    m.sigma_cap = config.scale == ScaleKind::log ? sigma_cap(observed, cap_basis)
                                                 : std::numeric_limits<double>::infinity();
    if (kind == ModelKind::resmdn) {
        if (config.scale != ScaleKind::raw) throw InputError("the ResMDN is defined on the raw scale only");
        m.backbone = adjust_latest_accident(fit_ccodp(tri.upper()));
        m.embedding = std::make_shared<const GlmEmbedding>(build_embedding(m.backbone, config, m.normalizer));
    }
    return m;
}

namespace {

struct MemberResult {
    NetworkWeights weights;
    int best_epoch = 0;
    double best_val = 0.0;
    std::uint64_t seed = 0;
};

MemberResult train_member(const EnsembleModel& model, const IncrementalTriangle& tri, const DataSplit& split,
                          const ConstraintSet& constraints, std::uint64_t seed) {
    const auto ctx_base = model.context();
    LossContext ctx = ctx_base;
    ctx.constraint_scale = tri.upper_mean();
    const auto [c_train, c_val] = split_constraints(constraints, derive_seed(seed, 0xc5));
    const auto train_batch = make_batch(tri, split.train, model.normalizer, c_train);
    const auto val_batch = make_batch(tri, split.val, model.normalizer, c_val);
    auto r = train(ctx, train_batch, val_batch, seed);
    return {std::move(r.weights), r.best_epoch, r.best_val_loss, r.seed};
}

}  // namespace

void add_member(EnsembleModel& model, const IncrementalTriangle& tri, const DataSplit& split,
                const ConstraintSet& constraints, std::uint64_t seed) {
    auto r = train_member(model, tri, split, constraints, seed);
    model.members.push_back(std::move(r.weights));
    model.seeds.push_back(r.seed);
    model.member_splits.push_back(split.name);
    model.best_epochs.push_back(r.best_epoch);
    model.best_val_losses.push_back(r.best_val);
}

std::vector<std::uint64_t> member_seeds(std::uint64_t seed, int count) {
    std::vector<std::uint64_t> s;
    for (int z = 0; z < count; ++z) s.push_back(derive_seed(seed, 0xe0 + z));
    return s;
}

EnsembleModel fit_final(const MdnConfig& config, ModelKind kind, const IncrementalTriangle& tri,
                        const ConstraintSet& constraints, std::span<const std::uint64_t> seeds,
                        const FitOptions& options) {
    if (seeds.empty()) throw InputError("an ensemble needs at least one seed");
    if (!tri.complete_upper()) throw InputError("triangle upper region is incomplete");
    validate_constraints(constraints, tri.n());
    const auto upper = tri.upper();

    std::vector<DataSplit> splits;
    if (options.scheme == PartitionScheme::rolling) {
        splits.assign(seeds.size(), final_fit_split(tri.n()));
    } else {
        const auto adj = adjusted_partitions(tri.n(), options.partition_seed);
        for (std::size_t z = 0; z < seeds.size(); ++z) splits.push_back(z < 3 ? adj[2] : adj[3]);
    }

    auto model = prepare_model(config, kind, upper, splits.front().train, options.cap_basis);
    std::vector<MemberResult> results(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    const int members = static_cast<int>(seeds.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.jobs))
    for (int z = 0; z < members; ++z) {
        try {
            results[z] = train_member(model, upper, splits[z], constraints, seeds[z]);
        } catch (...) {
            errors[z] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (int z = 0; z < members; ++z) {
        model.members.push_back(std::move(results[z].weights));
        model.seeds.push_back(results[z].seed);
        model.member_splits.push_back(splits[z].name);
        model.best_epochs.push_back(results[z].best_epoch);
        model.best_val_losses.push_back(results[z].best_val);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Reserves

ReserveDistribution summarize_reserves(std::vector<double> samples) {
    ReserveDistribution r;
    if (samples.empty()) throw InputError("no reserve samples");
    double s = 0.0;
    for (double x : samples) s += x;
    r.mean = s / static_cast<double>(samples.size());
    double ss = 0.0;
    for (double x : samples) ss += (x - r.mean) * (x - r.mean);
    r.std = samples.size() > 1 ? std::sqrt(ss / static_cast<double>(samples.size() - 1)) : 0.0;
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    for (double q : kReserveLevels) {
        const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
        r.quantiles.emplace_back(q, sorted[std::max<std::size_t>(rank, 1) - 1]);
    }
    r.samples = std::move(samples);
    return r;
}

namespace {

constexpr std::size_t kSimChunk = 4096;

void simulate_chunk(std::span<const CellDistribution> cells, std::uint64_t seed, std::size_t chunk,
                    std::size_t begin, std::size_t end, double* out) {
    auto rng = make_stream(seed, 0x5100000 + chunk);
    for (std::size_t s = begin; s < end; ++s) {
        double total = 0.0;
        for (const auto& c : cells) total += c.sample(rng);
        out[s] = total;
    }
}

}  // namespace

ReserveDistribution simulate_reserves(std::span<const CellDistribution> cells, std::size_t nsim,
                                      std::uint64_t seed, kernels::Exec exec) {
    if (nsim < 1) throw InputError("nsim must be positive");
    std::vector<double> samples(nsim);
    const std::size_t chunks = (nsim + kSimChunk - 1) / kSimChunk;
    if (exec == kernels::Exec::serial) {
        for (std::size_t c = 0; c < chunks; ++c)
            simulate_chunk(cells, seed, c, c * kSimChunk, std::min(nsim, (c + 1) * kSimChunk), samples.data());
    } else {
        const auto n_chunks = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static)
        for (long long c = 0; c < n_chunks; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            simulate_chunk(cells, seed, cc, cc * kSimChunk, std::min(nsim, (cc + 1) * kSimChunk), samples.data());
        }
    }
    return summarize_reserves(std::move(samples));
}

ReserveDistribution simulate_reserves(const EnsembleModel& model, std::size_t nsim, std::uint64_t seed,
                                      kernels::Exec exec) {
    std::vector<CellDistribution> cells;
    for (const auto c : lower_cells(model.n)) cells.push_back(predict_cell(model, c));
    return simulate_reserves(cells, nsim, seed, exec);
}

double analytic_reserve_mean(const EnsembleModel& model) {
    double total = 0.0;
    for (const auto c : lower_cells(model.n)) total += predict_cell(model, c).mean();
    return total;
}

// ---------------------------------------------------------------------------
// Persistence and tables

void save_model(const std::filesystem::path& dir, const EnsembleModel& model) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["kind"] = to_string(model.kind);
    j["config"] = to_json(model.config);
    j["n"] = model.n;
    j["normalizer"] = to_json(model.normalizer);
    j["sigma_cap"] = std::isfinite(model.sigma_cap) ? nlohmann::json(model.sigma_cap) : nlohmann::json("inf");
    j["cap_basis"] = to_string(model.cap_basis);
    if (model.kind == ModelKind::resmdn) j["backbone"] = to_json(model.backbone);
    j["members"] = nlohmann::json::array();
    for (std::size_t z = 0; z < model.members.size(); ++z) {
        const std::string file = "member" + std::to_string(z + 1) + ".csv";
        save_weights(dir / file, model.members[z]);
        j["members"].push_back({{"weights", file},
                                {"seed", model.seeds.at(z)},
                                {"split", model.member_splits.at(z)},
                                {"best_epoch", model.best_epochs.at(z)},
                                {"best_val_loss", model.best_val_losses.at(z)}});
    }
    std::ofstream(dir / "model.json") << j.dump(2) << '\n';
}

EnsembleModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw InputError("cannot open " + (dir / "model.json").string());
    nlohmann::json j;
    try {
        in >> j;
        EnsembleModel m;
        m.kind = model_kind_from_string(j.at("kind").get<std::string>());
        m.config = config_from_json(j.at("config"));
        m.n = j.at("n").get<int>();
        m.normalizer = normalizer_from_json(j.at("normalizer"));
        m.sigma_cap = j.at("sigma_cap").is_string() ? std::numeric_limits<double>::infinity()
                                                    : j.at("sigma_cap").get<double>();
        m.cap_basis = cap_basis_from_string(j.value("cap_basis", std::string("raw")));
        if (m.kind == ModelKind::resmdn) {
            m.backbone = ccodp_from_json(j.at("backbone"));
            m.embedding = std::make_shared<const GlmEmbedding>(build_embedding(m.backbone, m.config, m.normalizer));
        }
        for (const auto& mem : j.at("members")) {
            auto w = load_weights(dir / mem.at("weights").get<std::string>());
            if (w.layout != NetworkLayout(m.config.layers, m.config.neurons, m.config.components))
                throw ModelError("member weights do not match the model configuration");
            m.members.push_back(std::move(w));
            m.seeds.push_back(mem.at("seed").get<std::uint64_t>());
            m.member_splits.push_back(mem.at("split").get<std::string>());
            m.best_epochs.push_back(mem.at("best_epoch").get<int>());
            m.best_val_losses.push_back(mem.at("best_val_loss").get<double>());
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad model file " + (dir / "model.json").string() + ": " + e.what());
    }
}

void save_predictions(const std::filesystem::path& path, const EnsembleModel& model) {
    csv::Writer out(path);
    out.row({"accident", "development", "region", "mean", "std", "q25", "q50", "q75", "q95"});
    for (int i = 1; i <= model.n; ++i)
        for (int j = 1; j <= model.n; ++j) {
            const Cell c{i, j};
            const auto d = predict_cell(model, c);
            const auto mo = d.moments();
            out.values(i, j, in_upper(c, model.n) ? "upper" : "lower", mo.mean, std::sqrt(mo.variance),
                       mixture_quantile(d, 0.25), mixture_quantile(d, 0.5), mixture_quantile(d, 0.75),
                       mixture_quantile(d, 0.95));
        }
}

void save_density_curves(const std::filesystem::path& path, const EnsembleModel& model,
                         std::span<const Cell> cells, int points) {
    csv::Writer out(path);
    out.row({"accident", "development", "x", "density"});
    for (const auto c : cells) {
        const auto d = predict_cell(model, c);
        const double lo = mixture_quantile(d, 0.001), hi = mixture_quantile(d, 0.999);
        for (int k = 0; k < points; ++k) {
            const double x = lo + (hi - lo) * k / std::max(1, points - 1);
            out.values(c.i, c.j, x, d.pdf(x));
        }
    }
}

void save_reserve_samples(const std::filesystem::path& path, const ReserveDistribution& dist) {
    csv::Writer out(path);
    out.row({"draw", "reserve"});
    for (std::size_t k = 0; k < dist.samples.size(); ++k) out.values(k + 1, dist.samples[k]);
}

void save_reserve_summary(const std::filesystem::path& path, const ReserveDistribution& dist) {
    csv::Writer out(path);
    out.row({"statistic", "value"});
    out.values("mean", dist.mean);
    out.values("std", dist.std);
    for (const auto& [q, v] : dist.quantiles) out.values("q" + std::to_string(static_cast<int>(q * 100 + 0.5)), v);
}

}  // namespace rmdn
