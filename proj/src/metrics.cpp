#include "reserve_mdn/metrics.hpp"

#include "reserve_mdn/csv.hpp"
#include "reserve_mdn/error.hpp"

#include <cmath>
#include <limits>

namespace rmdn {

namespace {

void check_aligned(std::size_t a, std::size_t b) {
    if (a == 0) throw InputError("metric over an empty set");
    if (a != b) throw InputError("predictions and actuals differ in length");
}

}  // namespace

double rmse(std::span<const double> predicted, std::span<const double> actual) {
    check_aligned(predicted.size(), actual.size());
    double s = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) s += (predicted[k] - actual[k]) * (predicted[k] - actual[k]);
    return std::sqrt(s / static_cast<double>(predicted.size()));
}

double floored_log_density(double ld) { return std::isnan(ld) ? kLogScoreFloor : std::max(kLogScoreFloor, ld); }

double log_score(std::span<const double> log_densities) {
    if (log_densities.empty()) throw InputError("metric over an empty set");
    double s = 0.0;
    for (double ld : log_densities) s += floored_log_density(ld);
    return s / static_cast<double>(log_densities.size());
}

double pinball(double qhat, double actual, double q) { return ((actual < qhat ? 1.0 : 0.0) - q) * (qhat - actual); }

double quantile_score(std::span<const double> qhat, std::span<const double> actual, double q) {
    check_aligned(qhat.size(), actual.size());
    if (!(q > 0.0 && q < 1.0)) throw InputError("quantile level must lie in (0,1)");
    double s = 0.0;
    for (std::size_t k = 0; k < qhat.size(); ++k) s += pinball(qhat[k], actual[k], q);
    return s / static_cast<double>(qhat.size());
}

namespace {

void finish(EvaluationReport& r) {
    std::vector<double> mean, actual, ld, q75, q95;
    for (const auto& c : r.cells) {
        mean.push_back(c.mean);
        actual.push_back(c.actual);
        ld.push_back(c.log_density);
        q75.push_back(c.q75);
        q95.push_back(c.q95);
        r.reserve_actual += c.actual;
    }
    r.rmse_cells = rmse(mean, actual);
    r.log_score = log_score(ld);
    r.qs75_cells = quantile_score(q75, actual, 0.75);
    r.qs95_cells = quantile_score(q95, actual, 0.95);
}

void require_lower(const IncrementalTriangle& full) {
    for (const auto c : lower_cells(full.n()))
        if (!full.observed(c)) throw InputError("evaluation needs every lower-triangle cell to be realised");
}

}  // namespace

EvaluationReport evaluate_model(const EnsembleModel& model, const IncrementalTriangle& full,
                                const EvaluationOptions& options) {
    require_lower(full);
    if (full.n() != model.n) throw InputError("triangle and model dimensions differ");
    EvaluationReport r;
    r.model = to_string(model.kind);
    std::vector<CellDistribution> dists;
    for (const auto c : lower_cells(full.n())) {
        auto d = predict_cell(model, c);
        const double x = full.at(c);
        r.cells.push_back({c, x, d.mean(), d.log_pdf(x), mixture_quantile(d, 0.75), mixture_quantile(d, 0.95)});
        dists.push_back(std::move(d));
    }
    finish(r);
    const auto reserves = simulate_reserves(dists, options.nsim, options.seed);
    for (const auto& c : r.cells) r.reserve_mean += c.mean;
    for (const auto& [q, v] : reserves.quantiles) {
        if (q == 0.75) r.reserve_q75 = v;
        if (q == 0.95) r.reserve_q95 = v;
    }
    return r;
}

EvaluationReport evaluate_ccodp(const CcOdpFit& fit, const IncrementalTriangle& full) {
    require_lower(full);
    if (full.n() != fit.n()) throw InputError("triangle and fit dimensions differ");
    EvaluationReport r;
    r.model = "ccodp";
    for (const auto c : lower_cells(full.n())) {
        const double m = fit.mean(c);
        const double x = full.at(c);
        r.cells.push_back({c, x, m, x >= 0.0 ? ccodp_log_density(m, fit.D, x) : -std::numeric_limits<double>::infinity(),
                           odp_quantile(m, fit.D, 0.75), odp_quantile(m, fit.D, 0.95)});
    }
    finish(r);
    // A sum of independent ODP cells with a common dispersion is ODP with the summed mean.
    r.reserve_mean = ccodp_reserve_mean(fit);
    r.reserve_q75 = odp_quantile(r.reserve_mean, fit.D, 0.75);
    r.reserve_q95 = odp_quantile(r.reserve_mean, fit.D, 0.95);
    return r;
}

std::vector<MetricRow> aggregate(std::span<const EvaluationReport> model, std::span<const EvaluationReport> baseline) {
    if (model.size() != baseline.size()) throw InputError("model and baseline report counts differ");
    if (model.empty()) throw InputError("no reports to aggregate");
    struct Metric {
        const char* name;
        bool higher;
        bool ratio;
        double (*get)(const EvaluationReport&);
    };
    const Metric metrics[] = {
        {"rmse_cells", false, true, [](const EvaluationReport& r) { return r.rmse_cells; }},
        {"log_score", true, false, [](const EvaluationReport& r) { return r.log_score; }},
        {"qs75_cells", false, true, [](const EvaluationReport& r) { return r.qs75_cells; }},
        {"qs95_cells", false, true, [](const EvaluationReport& r) { return r.qs95_cells; }},
        {"abs_error_reserve", false, true, [](const EvaluationReport& r) { return std::abs(r.reserve_error()); }},
        {"qs75_reserve", false, true, [](const EvaluationReport& r) { return r.qs75_reserve(); }},
        {"qs95_reserve", false, true, [](const EvaluationReport& r) { return r.qs95_reserve(); }},
    };
    const double T = static_cast<double>(model.size());
    std::vector<MetricRow> rows;
    for (const auto& m : metrics) {
        MetricRow row;
        row.metric = m.name;
        row.higher_is_better = m.higher;
        double ratio = 0.0, wins = 0.0;
        for (std::size_t t = 0; t < model.size(); ++t) {
            const double a = m.get(model[t]), b = m.get(baseline[t]);
            row.model_value += a / T;
            row.baseline_value += b / T;
            row.mean_difference += (a - b) / T;
            ratio += 100.0 * a / b / T;
            if (m.higher ? a > b : a < b) wins += 1.0;
        }
        row.pct_of_baseline = m.ratio ? ratio : std::numeric_limits<double>::quiet_NaN();
        row.outperformance_pct = 100.0 * wins / T;
        rows.push_back(row);
    }
    // Reserve RMSE across triangles.
    MetricRow rr;
    rr.metric = "rmse_reserve";
    double sa = 0.0, sb = 0.0, wins = 0.0;
    for (std::size_t t = 0; t < model.size(); ++t) {
        const double a = model[t].reserve_error(), b = baseline[t].reserve_error();
        sa += a * a / T;
        sb += b * b / T;
        rr.mean_difference += (std::abs(a) - std::abs(b)) / T;
        if (std::abs(a) < std::abs(b)) wins += 1.0;
    }
    rr.model_value = std::sqrt(sa);
    rr.baseline_value = std::sqrt(sb);
    rr.pct_of_baseline = 100.0 * rr.model_value / rr.baseline_value;
    rr.outperformance_pct = 100.0 * wins / T;
    rows.push_back(rr);
    return rows;
}

void save_comparison(const std::filesystem::path& path, const std::vector<MetricRow>& rows,
                     const std::string& model_name, const std::string& baseline_name) {
    csv::Writer out(path);
    out.row({"metric", "better", "model", "baseline", "model_value", "baseline_value", "pct_of_baseline",
             "mean_difference", "outperformance_pct"});
    for (const auto& r : rows)
        out.values(r.metric, r.higher_is_better ? "higher" : "lower", model_name, baseline_name, r.model_value,
                   r.baseline_value, std::isnan(r.pct_of_baseline) ? std::string() : csv::format(r.pct_of_baseline),
                   r.mean_difference, r.outperformance_pct);
}

void save_reports(const std::filesystem::path& path, std::span<const EvaluationReport> reports) {
    csv::Writer out(path);
    out.row({"triangle", "model", "rmse_cells", "log_score", "qs75_cells", "qs95_cells", "reserve_actual",
             "reserve_mean", "reserve_q75", "reserve_q95"});
    for (std::size_t t = 0; t < reports.size(); ++t) {
        const auto& r = reports[t];
        out.values(t + 1, r.model, r.rmse_cells, r.log_score, r.qs75_cells, r.qs95_cells, r.reserve_actual,
                   r.reserve_mean, r.reserve_q75, r.reserve_q95);
    }
}

void save_cell_scores(const std::filesystem::path& path, const EvaluationReport& report) {
    csv::Writer out(path);
    out.row({"accident", "development", "actual", "mean", "log_density", "q75", "q95"});
    for (const auto& c : report.cells)
        out.values(c.cell.i, c.cell.j, c.actual, c.mean, floored_log_density(c.log_density), c.q75, c.q95);
}

}  // namespace rmdn
