#include "reserve_mdn/cli.hpp"

#include "reserve_mdn/ccodp.hpp"
#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"
#include "reserve_mdn/json_io.hpp"
#include "reserve_mdn/partition.hpp"
#include "reserve_mdn/resmdn.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace rmdn::cli {

namespace fs = std::filesystem;

namespace {

struct KeySpec {
    const char* key;
    const char* fallback;
    bool path;  // value (or comma list of values) holds file system paths
    const char* help;
};

// "auto" defaults are resolved per command in with_defaults.
constexpr KeySpec kKeys[] = {
    {"run.seed", "0", false, "root seed of every random stream"},
    {"run.out", "reserve_mdn_out", true, "output directory"},
    {"data.triangle", "", true, "triangle CSV (accident,development,amount)"},
    {"data.n", "0", false, "triangle dimension; 0 infers it from the file (simulate: 40)"},
    {"data.constraints", "", true, "constraint CSV (accident,development,lower,upper)"},
    {"data.tail_constraints", "0", false, "non-negativity bounds on the last N development periods"},
    {"simulate.environment", "processing_speedup", false,
     "simple_short_tail | processing_speedup | inflation_shock | high_volatility"},
    {"simulate.references", "0", false, "simulated triangles behind the reference surface (0 skips it)"},
    {"model.scheme", "rolling", false, "rolling | adjusted"},
    {"model.members", "5", false, "ensemble size"},
    {"model.cap_basis", "raw", false, "log-scale sigma cap basis: raw | log"},
    {"model.dir", "", true, "fitted model directory (predict, reserve-dist)"},
    {"mdn.from", "", true, "JSON configuration (search selection or model.json) filling unset mdn keys"},
    {"mdn.lambda_w", "0", false, "L2 weight penalty"},
    {"mdn.lambda_sigma", "0", false, "sigma activity penalty"},
    {"mdn.dropout", "0", false, "dropout rate"},
    {"mdn.neurons", "60", false, "neurons per hidden layer"},
    {"mdn.layers", "2", false, "hidden layers"},
    {"mdn.components", "2", false, "mixture components"},
    {"mdn.mse_weight", "0", false, "weight of the squared error of the mixture mean"},
    {"mdn.scale", "raw", false, "raw | log"},
    {"mdn.max_epochs", "auto", false, "epoch cap (auto: 10000 for search, 20000 for final fits)"},
    {"mdn.patience", "1000", false, "early-stopping patience"},
    {"mdn.learning_rate", "0.001", false, "Adam learning rate"},
    {"mdn.lambda_c", "10", false, "constraint penalty"},
    {"search.runs", "3", false, "training runs per partition"},
    {"search.lambda_w", "0,0.0001,0.001,0.01,0.1", false, "grid"},
    {"search.lambda_sigma", "0,0.0001,0.001,0.01,0.1", false, "grid"},
    {"search.dropout", "0,0.1,0.2", false, "grid"},
    {"search.neurons", "20,40,60,80,100", false, "grid"},
    {"search.layers", "1,2,3,4", false, "grid"},
    {"search.max_components", "8", false, "component ceiling"},
    {"predict.density_cells", "auto", false, "cells as i:j list (auto: (n,2) and (n,n/2))"},
    {"predict.density_points", "200", false, "grid points per density curve"},
    {"evaluate.models", "", true, "model directories, one per triangle"},
    {"evaluate.actuals", "", true, "full-square triangles, one per model"},
    {"evaluate.baseline", "ccodp", true, "ccodp, or model directories to compare against"},
    {"evaluate.nsim", "100000", false, "reserve Monte Carlo draws"},
    {"reserve.nsim", "100000", false, "reserve Monte Carlo draws"},
};

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
    return out;
}

std::string absolutise(const std::string& value, const fs::path& base, const std::string& key) {
    if (key == "evaluate.baseline" && trim(value) == "ccodp") return "ccodp";
    std::vector<std::string> parts;
    for (const auto& p : split_list(value)) {
        fs::path path(p);
        parts.push_back(fs::weakly_canonical(path.is_absolute() ? path : base / path).string());
    }
    return join(parts);
}

std::string json_scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number()) return csv::format(v.get<double>());
    throw InputError("unsupported configuration value " + v.dump());
}

const std::string& get(const Settings& s, const std::string& key) {
    const auto it = s.find(key);
    if (it == s.end()) throw InputError("missing configuration key " + key);
    return it->second;
}

long get_long(const Settings& s, const std::string& key) { return csv::to_long(get(s, key), key); }
double get_double(const Settings& s, const std::string& key) { return csv::to_double(get(s, key), key); }

template <typename T>
std::vector<T> get_grid(const Settings& s, const std::string& key) {
    std::vector<T> out;
    for (const auto& item : split_list(get(s, key))) {
        if constexpr (std::is_integral_v<T>)
            out.push_back(static_cast<T>(csv::to_long(item, key)));
        else
            out.push_back(csv::to_double(item, key));
    }
    return out;
}

std::vector<fs::path> get_paths(const Settings& s, const std::string& key) {
    std::vector<fs::path> out;
    for (const auto& item : split_list(get(s, key))) out.emplace_back(item);
    return out;
}

std::vector<Cell> parse_cells(const std::string& text) {
    std::vector<Cell> out;
    std::string spaced = text;
    std::replace(spaced.begin(), spaced.end(), ',', ' ');
    std::stringstream in(spaced);
    std::string item;
    while (in >> item) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw InputError("density cell '" + item + "' is not of the form i:j");
        out.push_back({static_cast<int>(csv::to_long(item.substr(0, colon), "density cell accident")),
                       static_cast<int>(csv::to_long(item.substr(colon + 1), "density cell development"))});
    }
    return out;
}

/// Dimension of a triangle file: the largest accident period it lists.
int infer_dimension(const fs::path& path) {
    const auto table = csv::read(path);
    const auto col = table.column("accident");
    long n = 0;
    for (const auto& row : table.rows) n = std::max(n, csv::to_long(row.at(col), "accident"));
    if (n < 1) throw InputError(path.string() + " holds no cells");
    return static_cast<int>(n);
}

IncrementalTriangle load_input_triangle(const RunConfig& cfg) {
    if (cfg.triangle.empty()) throw InputError("no triangle given (data.triangle or --triangle)");
    return load_triangle(cfg.triangle, cfg.n > 0 ? cfg.n : infer_dimension(cfg.triangle));
}

void require_network_dimension(int n) {
    if (n < 8) throw InputError("network models need a triangle of dimension >= 8, got " + std::to_string(n));
}

ConstraintSet gather_constraints(const RunConfig& cfg, int n) {
    ConstraintSet cons;
    if (!cfg.constraints.empty()) cons = load_constraints(cfg.constraints, n);
    if (cfg.tail_constraints > 0) {
        auto tail = nonnegative_tail_constraints(n, cfg.tail_constraints);
        cons.insert(cons.end(), tail.begin(), tail.end());
    }
    validate_constraints(cons, n);
    return cons;
}

EnsembleModel load_input_model(const RunConfig& cfg) {
    if (cfg.model_dir.empty()) throw InputError("no model directory given (model.dir or --model)");
    return load_model(cfg.model_dir);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void save_ccodp_params(const fs::path& path, const CcOdpFit& fit) {
    csv::Writer out(path);
    out.row({"parameter", "index", "value"});
    for (int i = 1; i <= fit.n(); ++i) out.values("A", i, fit.A[i - 1]);
    for (int j = 1; j <= fit.n(); ++j) out.values("B", j, fit.B[j - 1]);
    out.values("D", 0, fit.D);
}

void save_ccodp_fitted(const fs::path& path, const CcOdpFit& fit) {
    csv::Writer out(path);
    out.row({"accident", "development", "region", "mean", "std"});
    const int n = fit.n();
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            const double m = fit.mean(i, j);
            out.values(i, j, in_upper({i, j}, n) ? "upper" : "lower", m, std::sqrt(fit.D * m));
        }
}

nlohmann::json environment_json(const EnvironmentSpec& s) {
    return {{"kind", to_string(s.kind)},
            {"n", s.n},
            {"exposure", s.exposure},
            {"shape", s.shape},
            {"slow_scale", s.slow_scale},
            {"fast_scale", s.fast_scale},
            {"speedup_start", s.speedup_start},
            {"speedup_end", s.speedup_end},
            {"dq2_spike", s.dq2_spike},
            {"shock_start", s.shock_start},
            {"shock_rate", s.shock_rate},
            {"noise", {{"kind", s.noise.kind == NoiseSpec::Kind::odp ? "odp" : "gamma"},
                       {"parameter", s.noise.parameter}}},
            {"seed", s.seed}};
}

void save_members(const fs::path& path, const EnsembleModel& model) {
    csv::Writer out(path);
    out.row({"member", "seed", "split", "best_epoch", "best_val_loss"});
    for (std::size_t z = 0; z < model.members.size(); ++z)
        out.values(z + 1, std::to_string(model.seeds[z]), model.member_splits[z], model.best_epochs[z],
                   model.best_val_losses[z]);
}

std::vector<Cell> density_cells_for(const RunConfig& cfg, int n) {
    if (!cfg.density_cells.empty()) return cfg.density_cells;
    std::vector<Cell> cells{{n, 2}};
    if (n / 2 > 2) cells.push_back({n, n / 2});
    return cells;
}

nlohmann::json seeds_json(const std::vector<std::uint64_t>& seeds) {
    auto arr = nlohmann::json::array();
    for (auto s : seeds) arr.push_back(s);
    return arr;
}

// Each command writes into `out` and records its files in `result`.

void cmd_simulate(const RunConfig& cfg, RunResult& r) {
    const int n = cfg.n > 0 ? cfg.n : 40;
    const auto spec = make_environment(cfg.environment, n, cfg.seed);
    const auto full = generate(spec);
    save_triangle(cfg.out / "triangle_full.csv", full);
    save_triangle(cfg.out / "triangle.csv", full.upper());
    write_json(cfg.out / "environment.json", environment_json(spec));
    r.artifacts = {"triangle_full.csv", "triangle.csv", "environment.json"};
    if (cfg.references > 0) {
        const auto ref = empirical_reference(spec, cfg.references);
        save_reference(cfg.out / "reference.csv", spec, ref);
        csv::Writer out(cfg.out / "reference_reserves.csv");
        out.row({"simulation", "reserve"});
        for (std::size_t s = 0; s < ref.reserves.size(); ++s) out.values(s + 1, ref.reserves[s]);
        r.artifacts.insert(r.artifacts.end(), {"reference.csv", "reference_reserves.csv"});
    }
    r.seeds["environment"] = cfg.seed;
}

void cmd_fit_ccodp(const RunConfig& cfg, RunResult& r) {
    const auto tri = load_input_triangle(cfg).upper();
    const auto fit = fit_ccodp(tri);
    save_ccodp_params(cfg.out / "ccodp_params.csv", fit);
    save_ccodp_fitted(cfg.out / "ccodp_fitted.csv", fit);
    nlohmann::json j{{"fit", to_json(fit)}, {"reserve_mean", ccodp_reserve_mean(fit)}};
    r.artifacts = {"ccodp_params.csv", "ccodp_fitted.csv"};
    if (fit.n() >= 4) {
        const auto adjusted = adjust_latest_accident(fit);
        save_ccodp_params(cfg.out / "ccodp_adjusted_params.csv", adjusted);
        save_ccodp_fitted(cfg.out / "ccodp_adjusted_fitted.csv", adjusted);
        j["adjusted"] = to_json(adjusted);
        j["adjusted_reserve_mean"] = ccodp_reserve_mean(adjusted);
        r.artifacts.insert(r.artifacts.end(), {"ccodp_adjusted_params.csv", "ccodp_adjusted_fitted.csv"});
    }
    write_json(cfg.out / "ccodp.json", j);
    r.artifacts.push_back("ccodp.json");
}

void cmd_partition(const RunConfig& cfg, RunResult& r) {
    int n = cfg.n;
    if (n <= 0 && !cfg.triangle.empty()) n = infer_dimension(cfg.triangle);
    if (n <= 0) throw InputError("partition needs data.n (or a triangle to infer it from)");
    std::vector<DataSplit> splits;
    if (cfg.scheme == PartitionScheme::rolling) {
        auto [p1, p2] = rolling_origin(n);
        splits = {p1, p2, final_fit_split(n)};
    } else {
        splits = adjusted_partitions(n, cfg.seed);
        r.seeds["partition"] = cfg.seed;
    }
    save_splits(cfg.out / "splits.csv", splits);
    r.artifacts = {"splits.csv"};
}

void cmd_search(const RunConfig& cfg, int jobs, RunResult& r) {
    const auto tri = load_input_triangle(cfg).upper();
    require_network_dimension(tri.n());
    SearchOptions opt;
    opt.runs = cfg.search_runs;
    opt.seed = cfg.seed;
    opt.jobs = jobs;
    opt.cap_basis = cfg.cap_basis;
    auto [selected, state] = select_hyperparameters(cfg.grids, initial_theta(cfg.mdn), rolling_origin_evaluator(tri, opt));
    save_trace(cfg.out / "trace.csv", state);
    write_json(cfg.out / "selected.json", to_json(selected));
    {
        std::ofstream ini(cfg.out / "selected.ini");
        ini << "[mdn]\n";
        for (const auto& [k, v] : to_json(selected).items()) ini << k << " = " << json_scalar(v) << '\n';
    }
    r.artifacts = {"trace.csv", "selected.json", "selected.ini"};
    r.seeds["search"] = cfg.seed;
}

void cmd_fit(const RunConfig& cfg, ModelKind kind, int jobs, RunResult& r) {
    const auto tri = load_input_triangle(cfg).upper();
    require_network_dimension(tri.n());
    const auto cons = gather_constraints(cfg, tri.n());
    const auto seeds = member_seeds(cfg.seed, cfg.members);
    FitOptions opt;
    opt.scheme = cfg.scheme;
    opt.partition_seed = derive_seed(cfg.seed, 0xa5);
    opt.cap_basis = cfg.cap_basis;
    opt.jobs = jobs;
    const auto model = fit_final(cfg.mdn, kind, tri, cons, seeds, opt);
    save_model(cfg.out / "model", model);
    save_predictions(cfg.out / "predictions.csv", model);
    save_members(cfg.out / "members.csv", model);
    r.artifacts = {"model/model.json", "predictions.csv", "members.csv"};
    for (std::size_t z = 0; z < model.members.size(); ++z) r.artifacts.push_back("model/member" + std::to_string(z + 1) + ".csv");
    if (!cons.empty()) {
        save_constraints(cfg.out / "constraints.csv", cons);
        r.artifacts.push_back("constraints.csv");
    }
    if (kind == ModelKind::resmdn) {
        save_embedding(cfg.out / "embedding.csv", *model.embedding);
        r.artifacts.push_back("embedding.csv");
        for (std::size_t z = 0; z < model.members.size(); ++z) {
            const auto name = "boost_member" + std::to_string(z + 1) + ".csv";
            save_boost_report(cfg.out / name, boost_report(model.members[z], *model.embedding));
            r.artifacts.push_back(name);
        }
    }
    r.seeds["members"] = seeds_json(seeds);
    if (cfg.scheme == PartitionScheme::adjusted) r.seeds["partition"] = opt.partition_seed;
}

void cmd_predict(const RunConfig& cfg, RunResult& r) {
    const auto model = load_input_model(cfg);
    save_predictions(cfg.out / "predictions.csv", model);
    const auto cells = density_cells_for(cfg, model.n);
    for (const auto c : cells)
        if (c.i < 1 || c.j < 1 || c.i > model.n || c.j > model.n)
            throw InputError("density cell outside the " + std::to_string(model.n) + "x" + std::to_string(model.n) + " square");
    save_density_curves(cfg.out / "density.csv", model, cells, cfg.density_points);
    r.artifacts = {"predictions.csv", "density.csv"};
}

void cmd_evaluate(const RunConfig& cfg, RunResult& r) {
    if (cfg.eval_models.empty()) throw InputError("evaluate needs evaluate.models");
    if (cfg.eval_models.size() != cfg.eval_actuals.size())
        throw InputError("evaluate.models and evaluate.actuals differ in length");
    if (!cfg.eval_baselines.empty() && cfg.eval_baselines.size() != cfg.eval_models.size())
        throw InputError("evaluate.baseline lists a different number of models");
    std::vector<EvaluationReport> model_reports, baseline_reports;
    EvaluationOptions opt;
    opt.nsim = cfg.eval_nsim;
    opt.seed = cfg.seed;
    std::string model_name, baseline_name = cfg.eval_baselines.empty() ? "ccodp" : "baseline";
    for (std::size_t t = 0; t < cfg.eval_models.size(); ++t) {
        const auto model = load_model(cfg.eval_models[t]);
        const auto full = load_triangle(cfg.eval_actuals[t], model.n);
        if (!full.complete_square()) throw InputError(cfg.eval_actuals[t].string() + " does not hold the full square");
        model_reports.push_back(evaluate_model(model, full, opt));
        model_name = model_reports.back().model;
        if (cfg.eval_baselines.empty()) {
            baseline_reports.push_back(evaluate_ccodp(adjust_latest_accident(fit_ccodp(full.upper())), full));
        } else {
            const auto base = load_model(cfg.eval_baselines[t]);
            if (base.n != model.n) throw InputError("baseline model dimension differs from the model's");
            baseline_reports.push_back(evaluate_model(base, full, opt));
        }
        const auto tag = std::to_string(t + 1);
        save_cell_scores(cfg.out / ("cells_model_" + tag + ".csv"), model_reports.back());
        save_cell_scores(cfg.out / ("cells_baseline_" + tag + ".csv"), baseline_reports.back());
        r.artifacts.push_back("cells_model_" + tag + ".csv");
        r.artifacts.push_back("cells_baseline_" + tag + ".csv");
    }
    save_reports(cfg.out / "scores_model.csv", model_reports);
    save_reports(cfg.out / "scores_baseline.csv", baseline_reports);
    save_comparison(cfg.out / "comparison.csv", aggregate(model_reports, baseline_reports), model_name, baseline_name);
    r.artifacts.insert(r.artifacts.end(), {"scores_model.csv", "scores_baseline.csv", "comparison.csv"});
    r.seeds["reserve_simulation"] = cfg.seed;
}

void cmd_reserve_dist(const RunConfig& cfg, RunResult& r) {
    const auto model = load_input_model(cfg);
    const auto dist = simulate_reserves(model, cfg.reserve_nsim, cfg.seed);
    save_reserve_samples(cfg.out / "reserve_samples.csv", dist);
    save_reserve_summary(cfg.out / "reserve_summary.csv", dist);
    r.artifacts = {"reserve_samples.csv", "reserve_summary.csv"};
    r.seeds["reserve_simulation"] = cfg.seed;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

nlohmann::json settings_json(const Settings& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : s) {
        const auto dot = key.find('.');
        j[key.substr(0, dot)][key.substr(dot + 1)] = value;
    }
    return j;
}

Settings settings_from_json(const nlohmann::json& j) {
    Settings s;
    for (const auto& [section, keys] : j.items())
        for (const auto& [key, value] : keys.items()) s[section + "." + key] = value.get<std::string>();
    return s;
}

int exit_status(const std::string& kind) {
    if (kind == "input" || kind == "usage") return 2;
    if (kind == "model") return 3;
    if (kind == "training") return 4;
    return 1;
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::simulate: return "simulate";
        case Command::fit_ccodp: return "fit-ccodp";
        case Command::partition: return "partition";
        case Command::search: return "search";
        case Command::fit_mdn: return "fit-mdn";
        case Command::fit_resmdn: return "fit-resmdn";
        case Command::predict: return "predict";
        case Command::evaluate: return "evaluate";
        case Command::reserve_dist: return "reserve-dist";
    }
    return "?";
}

Command command_from_string(const std::string& text) {
    for (auto c : {Command::simulate, Command::fit_ccodp, Command::partition, Command::search, Command::fit_mdn,
                   Command::fit_resmdn, Command::predict, Command::evaluate, Command::reserve_dist})
        if (text == to_string(c)) return c;
    throw InputError("unknown command '" + text + "'");
}

Settings load_ini(const fs::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw InputError(std::string("bad configuration file: ") + e.what());
    }
    Settings raw;
    for (const auto& [section, keys] : tree) {
        if (keys.empty()) throw InputError("configuration key '" + section + "' is outside a [section]");
        for (const auto& [key, value] : keys) raw[section + "." + key] = trim(value.data());
    }
    Settings out;
    merge(out, raw, fs::absolute(path).parent_path());
    return out;
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw InputError("expected section.key=value, got '" + text + "'");
    auto key = trim(text.substr(0, eq));
    if (key.find('.') == std::string::npos) throw InputError("key '" + key + "' lacks a section");
    return {key, trim(text.substr(eq + 1))};
}

void merge(Settings& base, const Settings& overrides, const fs::path& relative_to) {
    for (const auto& [key, value] : overrides) {
        const auto* spec = find_key(key);
        if (!spec) throw InputError("unknown configuration key '" + key + "'");
        base[key] = spec->path && !value.empty() ? absolutise(value, relative_to, key) : value;
    }
}

Settings with_defaults(Settings s, Command command) {
    for (const auto& [key, value] : s)
        if (!find_key(key)) throw InputError("unknown configuration key '" + key + "'");
    const bool mdn_incomplete = std::any_of(std::begin(kKeys), std::end(kKeys), [&](const KeySpec& k) {
        return std::string_view(k.key).starts_with("mdn.") && !s.count(k.key);
    });
    if (auto it = s.find("mdn.from"); mdn_incomplete && it != s.end() && !it->second.empty()) {
        std::ifstream in(it->second);
        if (!in) throw InputError("cannot open " + it->second);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InputError("bad JSON in " + it->second + ": " + e.what());
        }
        if (j.contains("config") && j.at("config").is_object()) j = j.at("config");
        for (const auto& [k, v] : j.items()) {
            const auto key = "mdn." + k;
            if (find_key(key) && !s.count(key)) s[key] = json_scalar(v);
        }
    }
    for (const auto& k : kKeys)
        if (!s.count(k.key)) s[k.key] = k.fallback;
    auto& epochs = s["mdn.max_epochs"];
    if (epochs == "auto")
        epochs = (command == Command::fit_mdn || command == Command::fit_resmdn) ? "20000" : "10000";
    if (s["predict.density_cells"] == "auto") s["predict.density_cells"] = "";
    return s;
}

std::string describe_schema() {
    std::ostringstream out;
    std::string section;
    for (const auto& k : kKeys) {
        const std::string key = k.key;
        const auto dot = key.find('.');
        if (key.substr(0, dot) != section) {
            section = key.substr(0, dot);
            out << "[" << section << "]\n";
        }
        out << "  " << std::left << std::setw(18) << key.substr(dot + 1) << " default '" << k.fallback << "'  "
            << k.help << '\n';
    }
    return out.str();
}

RunConfig parse_run_config(const Settings& s) {
    RunConfig c;
    c.seed = static_cast<std::uint64_t>(std::stoull(get(s, "run.seed")));
    c.out = get(s, "run.out");
    if (c.out.empty()) throw InputError("run.out is empty");
    c.triangle = get(s, "data.triangle");
    c.n = static_cast<int>(get_long(s, "data.n"));
    c.constraints = get(s, "data.constraints");
    c.tail_constraints = static_cast<int>(get_long(s, "data.tail_constraints"));
    c.environment = environment_kind_from_string(get(s, "simulate.environment"));
    c.references = static_cast<int>(get_long(s, "simulate.references"));
    c.scheme = partition_scheme_from_string(get(s, "model.scheme"));
    c.members = static_cast<int>(get_long(s, "model.members"));
    c.cap_basis = cap_basis_from_string(get(s, "model.cap_basis"));
    c.model_dir = get(s, "model.dir");

    c.mdn.lambda_w = get_double(s, "mdn.lambda_w");
    c.mdn.lambda_sigma = get_double(s, "mdn.lambda_sigma");
    c.mdn.dropout = get_double(s, "mdn.dropout");
    c.mdn.neurons = static_cast<int>(get_long(s, "mdn.neurons"));
    c.mdn.layers = static_cast<int>(get_long(s, "mdn.layers"));
    c.mdn.components = static_cast<int>(get_long(s, "mdn.components"));
    c.mdn.mse_weight = get_double(s, "mdn.mse_weight");
    c.mdn.scale = scale_kind_from_string(get(s, "mdn.scale"));
    c.mdn.max_epochs = static_cast<int>(get_long(s, "mdn.max_epochs"));
    c.mdn.patience = static_cast<int>(get_long(s, "mdn.patience"));
    c.mdn.learning_rate = get_double(s, "mdn.learning_rate");
    c.mdn.lambda_c = get_double(s, "mdn.lambda_c");
    c.mdn.validate();

    c.search_runs = static_cast<int>(get_long(s, "search.runs"));
    c.grids.lambda_w = get_grid<double>(s, "search.lambda_w");
    c.grids.lambda_sigma = get_grid<double>(s, "search.lambda_sigma");
    c.grids.dropout = get_grid<double>(s, "search.dropout");
    c.grids.neurons = get_grid<int>(s, "search.neurons");
    c.grids.layers = get_grid<int>(s, "search.layers");
    c.grids.max_components = static_cast<int>(get_long(s, "search.max_components"));
    c.grids.normalize();

    c.density_cells = parse_cells(get(s, "predict.density_cells"));
    c.density_points = static_cast<int>(get_long(s, "predict.density_points"));

    c.eval_models = get_paths(s, "evaluate.models");
    c.eval_actuals = get_paths(s, "evaluate.actuals");
    if (get(s, "evaluate.baseline") != "ccodp") c.eval_baselines = get_paths(s, "evaluate.baseline");
    c.eval_nsim = static_cast<std::size_t>(get_long(s, "evaluate.nsim"));
    c.reserve_nsim = static_cast<std::size_t>(get_long(s, "reserve.nsim"));

    if (c.n < 0) throw InputError("data.n must be >= 0");
    if (c.tail_constraints < 0) throw InputError("data.tail_constraints must be >= 0");
    if (c.references < 0) throw InputError("simulate.references must be >= 0");
    if (c.members < 1) throw InputError("model.members must be >= 1");
    if (c.search_runs < 1) throw InputError("search.runs must be >= 1");
    if (c.density_points < 2) throw InputError("predict.density_points must be >= 2");
    if (c.eval_nsim < 1 || c.reserve_nsim < 1) throw InputError("nsim must be >= 1");
    return c;
}

RunResult run(Command command, const Settings& settings, int jobs) {
    const auto started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = parse_run_config(settings);
    fs::create_directories(cfg.out);
    omp_set_num_threads(jobs);

    RunResult r;
    switch (command) {
        case Command::simulate: cmd_simulate(cfg, r); break;
        case Command::fit_ccodp: cmd_fit_ccodp(cfg, r); break;
        case Command::partition: cmd_partition(cfg, r); break;
        case Command::search: cmd_search(cfg, jobs, r); break;
        case Command::fit_mdn: cmd_fit(cfg, ModelKind::mdn, jobs, r); break;
        case Command::fit_resmdn: cmd_fit(cfg, ModelKind::resmdn, jobs, r); break;
        case Command::predict: cmd_predict(cfg, r); break;
        case Command::evaluate: cmd_evaluate(cfg, r); break;
        case Command::reserve_dist: cmd_reserve_dist(cfg, r); break;
    }
    r.seeds["run"] = cfg.seed;

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json manifest{
        {"tool", "reserve_mdn"},
        {"version", RESERVE_MDN_VERSION},
        {"command", to_string(command)},
        {"config", settings_json(settings)},
        {"seeds", r.seeds},
        {"jobs", jobs},
        {"libraries",
         {{"openmp", _OPENMP},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}}},
        {"started_utc", started},
        {"wall_seconds", wall},
        {"artifacts", r.artifacts},
    };
    write_json(cfg.out / "manifest.json", manifest);
    return r;
}

RunResult replay(const fs::path& manifest_path, const fs::path& out, int jobs) {
    std::ifstream in(manifest_path);
    if (!in) throw InputError("cannot open " + manifest_path.string());
    nlohmann::json m;
    Settings settings;
    Command command;
    try {
        in >> m;
        command = command_from_string(m.at("command").get<std::string>());
        settings = settings_from_json(m.at("config"));
    } catch (const nlohmann::json::exception& e) {
        throw InputError("bad manifest " + manifest_path.string() + ": " + e.what());
    }
    if (!out.empty()) settings["run.out"] = fs::absolute(out).string();
    return run(command, with_defaults(settings, command), jobs);
}

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("RESERVE_MDN_JOBS"); env && *env) {
        const long j = csv::to_long(env, "RESERVE_MDN_JOBS");
        if (j < 1) throw InputError("RESERVE_MDN_JOBS must be >= 1");
        return static_cast<int>(j);
    }
    return std::max(1, omp_get_max_threads());
}

int main(int argc, char** argv) {
    CLI::App app{"Loss reserving with mixture density networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", RESERVE_MDN_VERSION);

    struct Flags {
        std::string config, out, triangle, model;
        std::vector<std::string> set;
        long long seed = -1;
        int n = 0;
        int jobs = 0;
    } flags;
    std::string manifest;
    bool schema = false;

    std::vector<std::pair<CLI::App*, Command>> commands;
    const std::pair<Command, const char*> listing[] = {
        {Command::simulate, "simulate a triangle from an environment archetype"},
        {Command::fit_ccodp, "fit the cross-classified ODP benchmark"},
        {Command::partition, "emit rolling-origin or adjusted data splits"},
        {Command::search, "staged hyperparameter search on the rolling-origin partitions"},
        {Command::fit_mdn, "fit the final MDN ensemble"},
        {Command::fit_resmdn, "fit the final ResMDN ensemble on the ccODP backbone"},
        {Command::predict, "per-cell predictive summaries and density curves of a fitted model"},
        {Command::evaluate, "score models against realised lower triangles"},
        {Command::reserve_dist, "Monte Carlo distribution of the total reserve"},
    };
    for (const auto& [command, help] : listing) {
        auto* sub = app.add_subcommand(to_string(command), help);
        sub->add_option("--config", flags.config, "INI configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "root seed (run.seed)");
        sub->add_option("--jobs", flags.jobs, "worker threads (fallback: RESERVE_MDN_JOBS)");
        sub->add_option("--out", flags.out, "output directory (run.out)");
        sub->add_option("--triangle", flags.triangle, "triangle CSV (data.triangle)");
        sub->add_option("--n", flags.n, "triangle dimension (data.n)");
        sub->add_option("--model", flags.model, "model directory (model.dir)");
        sub->add_option("--set", flags.set, "section.key=value override, repeatable");
        commands.emplace_back(sub, command);
    }
    auto* rep = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    rep->add_option("manifest", manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", flags.out, "output directory (default: the recorded one)");
    rep->add_option("--jobs", flags.jobs, "worker threads (fallback: RESERVE_MDN_JOBS)");
    auto* sch = app.add_subcommand("schema", "print the configuration keys and their defaults");
    sch->callback([&] { schema = true; });

    std::string command_name = "reserve_mdn";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << nlohmann::json{{"status", "error"}, {"kind", "usage"}, {"command", command_name}, {"message", e.what()}}.dump()
                  << '\n';
        return exit_status("usage");
    }

    fs::path out_dir;
    try {
        if (schema) {
            std::cout << describe_schema();
            return 0;
        }
        const int jobs = resolve_jobs(flags.jobs);
        RunResult result;
        if (rep->parsed()) {
            command_name = "replay";
            result = replay(manifest, flags.out, jobs);
        } else {
            Command command{};
            for (const auto& [sub, c] : commands)
                if (sub->parsed()) command = c;
            command_name = to_string(command);
            Settings settings;
            if (!flags.config.empty()) settings = load_ini(flags.config);
            Settings overrides;
            for (const auto& a : flags.set) overrides.insert_or_assign(parse_assignment(a).first, parse_assignment(a).second);
            if (flags.seed >= 0) overrides["run.seed"] = std::to_string(flags.seed);
            if (!flags.out.empty()) overrides["run.out"] = flags.out;
            if (!flags.triangle.empty()) overrides["data.triangle"] = flags.triangle;
            if (flags.n > 0) overrides["data.n"] = std::to_string(flags.n);
            if (!flags.model.empty()) overrides["model.dir"] = flags.model;
            merge(settings, overrides, fs::current_path());
            settings = with_defaults(std::move(settings), command);
            out_dir = settings.at("run.out");
            result = run(command, settings, jobs);
        }
        std::cout << nlohmann::json{{"status", "ok"}, {"command", command_name}, {"artifacts", result.artifacts}}.dump()
                  << '\n';
        return 0;
    } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        const std::string kind = err ? err->kind() : "internal";
        const nlohmann::json record{{"status", "error"}, {"kind", kind}, {"command", command_name}, {"message", e.what()}};
        std::cerr << record.dump() << '\n';
        if (!out_dir.empty()) {
            std::error_code ec;
            fs::create_directories(out_dir, ec);
            if (!ec) std::ofstream(out_dir / "error.json") << record.dump(2) << '\n';
        }
        return exit_status(kind);
    }
}

}  // namespace rmdn::cli
