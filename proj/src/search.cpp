#include "reserve_mdn/search.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <tuple>

namespace rmdn {

const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::lambda_w: return "lambda_w";
        case Stage::lambda_sigma: return "lambda_sigma";
        case Stage::dropout: return "dropout";
        case Stage::layers: return "layers";
        case Stage::neurons_components: return "neurons_components";
        case Stage::done: return "done";
    }
    return "?";
}

void SearchGrids::normalize() {
    auto tidy = [](auto& v, const char* name) {
        if (v.empty()) throw InputError(std::string("empty search grid for ") + name);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    tidy(lambda_w, "lambda_w");
    tidy(lambda_sigma, "lambda_sigma");
    tidy(dropout, "dropout");
    tidy(neurons, "neurons");
    tidy(layers, "layers");
    if (max_components < 1) throw InputError("component ceiling must be positive");
}

MdnConfig initial_theta(MdnConfig base) {
    base.lambda_w = 0.0;
    base.lambda_sigma = 0.0;
    base.dropout = 0.0;
    base.neurons = 60;
    base.layers = 2;
    base.components = 2;
    return base;
}

double combine_test_errors(std::size_t n1, double e1, std::size_t n2, double e2) {
    if (n1 + n2 == 0) throw InputError("no test cells");
    return (static_cast<double>(n1) * e1 + static_cast<double>(n2) * e2) / static_cast<double>(n1 + n2);
}

std::size_t argmin_tiebreak(std::span<const double> errors) {
    if (errors.empty()) throw InputError("argmin over no candidates");
    std::size_t best = 0;
    for (std::size_t k = 1; k < errors.size(); ++k)
        if (errors[k] < errors[best]) best = k;
    return best;
}

double test_nll(const EnsembleModel& model, const IncrementalTriangle& tri, std::span<const Cell> cells) {
    if (cells.empty()) throw InputError("empty test set");
    double s = 0.0;
    for (const auto c : cells) s -= floored_log_density(member_distribution(model, 0, c).log_pdf(tri.at(c)));
    return s / static_cast<double>(cells.size());
}

namespace {

// One training run of one candidate on one partition.
double run_job(const MdnConfig& config, const IncrementalTriangle& tri, const DataSplit& split, std::uint64_t seed,
               CapBasis cap) {
    auto model = prepare_model(config, ModelKind::mdn, tri, split.train, cap);
    add_member(model, tri, split, {}, seed);
    return test_nll(model, tri, split.test);
}

std::uint64_t run_seed(std::uint64_t seed, int partition, int run) {
    return derive_seed(derive_seed(seed, 0x7e57 + partition), run);
}

std::vector<TestErrorReport> evaluate_batch(std::span<const MdnConfig> configs, const IncrementalTriangle& tri,
                                            const SearchOptions& options) {
    if (options.runs < 1) throw InputError("T must be at least 1");
    const auto upper = tri.upper();
    const auto [p1, p2] = rolling_origin(tri.n());
    const DataSplit* parts[2] = {&p1, &p2};
    const int T = options.runs;
    const int jobs = static_cast<int>(configs.size()) * 2 * T;
    std::vector<double> err(jobs, 0.0);
    std::vector<std::exception_ptr> fail(jobs);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, options.jobs))
    for (int k = 0; k < jobs; ++k) {
        const int cand = k / (2 * T), part = (k / T) % 2, run = k % T;
        try {
            err[k] = run_job(configs[cand], upper, *parts[part], run_seed(options.seed, part, run), options.cap_basis);
        } catch (...) {
            fail[k] = std::current_exception();
        }
    }
    for (const auto& f : fail)
        if (f) std::rethrow_exception(f);
    std::vector<TestErrorReport> out(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
        auto& r = out[c];
        r.runs = T;
        r.test_p1 = p1.test.size();
        r.test_p2 = p2.test.size();
        for (int run = 0; run < T; ++run) {
            r.err_p1 += err[(c * 2 + 0) * T + run] / T;
            r.err_p2 += err[(c * 2 + 1) * T + run] / T;
        }
        r.err_total = combine_test_errors(r.test_p1, r.err_p1, r.test_p2, r.err_p2);
    }
    return out;
}

using Key = std::tuple<double, double, double, int, int, int>;

Key key_of(const MdnConfig& c) { return {c.lambda_w, c.lambda_sigma, c.dropout, c.layers, c.neurons, c.components}; }

}  // namespace

TestErrorReport test_error(const MdnConfig& config, const IncrementalTriangle& tri, const SearchOptions& options) {
    return evaluate_batch(std::span<const MdnConfig>(&config, 1), tri, options).front();
}

BatchEvaluator rolling_origin_evaluator(const IncrementalTriangle& tri, const SearchOptions& options) {
    return [tri, options](std::span<const MdnConfig> configs) { return evaluate_batch(configs, tri, options); };
}

std::pair<MdnConfig, SearchState> select_hyperparameters(SearchGrids grids, const MdnConfig& initial,
                                                         const BatchEvaluator& evaluate) {
    grids.normalize();
    initial.validate();
    SearchState state;
    state.theta = initial;
    std::map<Key, TestErrorReport> memo;

    // Scores candidates (evaluating only the unseen ones) and appends them to the trace.
    auto score = [&](const std::vector<MdnConfig>& cands) {
        std::vector<MdnConfig> fresh;
        for (const auto& c : cands)
            if (!memo.count(key_of(c)) &&
                std::none_of(fresh.begin(), fresh.end(), [&](const MdnConfig& f) { return key_of(f) == key_of(c); }))
                fresh.push_back(c);
        if (!fresh.empty()) {
            const auto reports = evaluate(fresh);
            if (reports.size() != fresh.size()) throw ModelError("evaluator returned the wrong number of reports");
            for (std::size_t k = 0; k < fresh.size(); ++k) {
                if (!std::isfinite(reports[k].err_total)) throw TrainingError("non-finite test error");
                memo.emplace(key_of(fresh[k]), reports[k]);
            }
        }
        std::vector<double> errs;
        for (const auto& c : cands) {
            const auto& r = memo.at(key_of(c));
            const bool cached = std::find_if(fresh.begin(), fresh.end(), [&](const MdnConfig& f) {
                                    return key_of(f) == key_of(c);
                                }) == fresh.end();
            state.trace.push_back({state.stage, c, r, cached});
            errs.push_back(r.err_total);
        }
        return errs;
    };
    auto sweep = [&](Stage stage, const auto& grid, auto set) {
        state.stage = stage;
        std::vector<MdnConfig> cands;
        for (const auto& v : grid) {
            auto c = state.theta;
            set(c, v);
            cands.push_back(c);
        }
        const auto errs = score(cands);
        state.theta = cands[argmin_tiebreak(errs)];
    };

    sweep(Stage::lambda_w, grids.lambda_w, [](MdnConfig& c, double v) { c.lambda_w = v; });
    sweep(Stage::lambda_sigma, grids.lambda_sigma, [](MdnConfig& c, double v) { c.lambda_sigma = v; });
    sweep(Stage::dropout, grids.dropout, [](MdnConfig& c, double v) { c.dropout = v; });
    sweep(Stage::layers, grids.layers, [](MdnConfig& c, int v) { c.layers = v; });

    state.stage = Stage::neurons_components;
    auto best_for_k = [&](int K) {
        std::vector<MdnConfig> cands;
        for (int nn : grids.neurons) {
            auto c = state.theta;
            c.neurons = nn;
            c.components = K;
            cands.push_back(c);
        }
        const auto errs = score(cands);
        const auto b = argmin_tiebreak(errs);
        return std::pair{cands[b], errs[b]};
    };
    auto [cur, e_cur] = best_for_k(1);
    for (int K = 1; K < grids.max_components; ++K) {
        auto [next, e_next] = best_for_k(K + 1);
        if (e_cur < e_next) break;
        cur = next;
        e_cur = e_next;
    }
    state.theta = cur;
    state.stage = Stage::done;
    return {state.theta, state};
}

void save_trace(const std::filesystem::path& path, const SearchState& state) {
    csv::Writer out(path);
    out.row({"step", "stage", "lambda_w", "lambda_sigma", "dropout", "layers", "neurons", "components", "err_p1",
             "err_p2", "err_total", "cached"});
    int step = 0;
    for (const auto& t : state.trace)
        out.values(++step, to_string(t.stage), t.config.lambda_w, t.config.lambda_sigma, t.config.dropout,
                   t.config.layers, t.config.neurons, t.config.components, t.report.err_p1, t.report.err_p2,
                   t.report.err_total, t.cached ? 1 : 0);
}

}  // namespace rmdn
