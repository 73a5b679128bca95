#pragma once

#include "reserve_mdn/forecast.hpp"
#include "reserve_mdn/loss.hpp"
#include "reserve_mdn/metrics.hpp"
#include "reserve_mdn/search.hpp"
#include "reserve_mdn/simgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rmdn::cli {

enum class Command { simulate, fit_ccodp, partition, search, fit_mdn, fit_resmdn, predict, evaluate, reserve_dist };

const char* to_string(Command command);
Command command_from_string(const std::string& text);

/// Sectioned configuration keys ("section.key") mapped to their text values.
using Settings = std::map<std::string, std::string>;

/// Reads an INI file. Relative paths in path-valued keys are resolved
/// against the directory holding the file.
Settings load_ini(const std::filesystem::path& path);

/// Parses `section.key=value`. Path-valued keys are made absolute against
/// the working directory.
std::pair<std::string, std::string> parse_assignment(const std::string& text);

/// Copies `overrides` over `base`, absolutising path-valued keys.
void merge(Settings& base, const Settings& overrides, const std::filesystem::path& relative_to);

/// Fills every missing key with its default (some depend on the command)
/// and rejects unknown keys. The result is what the manifest records.
Settings with_defaults(Settings settings, Command command);

/// One line per key: name, default and meaning.
std::string describe_schema();

/// Typed view of a fully defaulted Settings map.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out;

    std::filesystem::path triangle;
    int n = 0;
    std::filesystem::path constraints;
    int tail_constraints = 0;

    EnvironmentKind environment = EnvironmentKind::processing_speedup;
    int references = 0;

    PartitionScheme scheme = PartitionScheme::rolling;
    int members = 5;
    CapBasis cap_basis = CapBasis::raw;
    std::filesystem::path model_dir;

    MdnConfig mdn;

    int search_runs = 3;
    SearchGrids grids;

    std::vector<Cell> density_cells;
    int density_points = 200;

    std::vector<std::filesystem::path> eval_models;
    std::vector<std::filesystem::path> eval_actuals;
    std::vector<std::filesystem::path> eval_baselines;  // empty: adjusted ccODP
    std::size_t eval_nsim = 100000;

    std::size_t reserve_nsim = 100000;
};

RunConfig parse_run_config(const Settings& settings);

/// Files written by one command (relative to the output directory) and the
/// seeds it used.
struct RunResult {
    std::vector<std::string> artifacts;
    nlohmann::json seeds = nlohmann::json::object();
};

/// Executes `command` and writes its artifacts plus manifest.json into the
/// configured output directory. `settings` must come from with_defaults.
RunResult run(Command command, const Settings& settings, int jobs);

/// Re-runs the command recorded in a manifest. A non-empty `out` replaces
/// the recorded output directory.
RunResult replay(const std::filesystem::path& manifest, const std::filesystem::path& out, int jobs);

/// `--jobs` if positive, else RESERVE_MDN_JOBS, else the OpenMP default.
int resolve_jobs(int requested);

/// Process entry point; returns the exit status. Failures print a JSON
/// error record on stderr and return a nonzero status.
int main(int argc, char** argv);

}  // namespace rmdn::cli
