// Command-line front end: runs one experiment recipe and writes CSV tables
// plus a JSON sidecar with the resolved configuration into --out.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smm/config_io.hpp"
#include "smm/error.hpp"
#include "smm/gaussian_dynamics.hpp"
#include "smm/harness.hpp"
#include "smm/mean_field.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string preset = "fe8";
    std::string config_file;
    std::vector<std::string> settings;
    double tmax_ns = 1.5;
    int points = 1500;
    double window_end_ns = 0.8;
    std::string out = ".";
    bool fixed_partition = false;
    bool per_time_partition = false;
    std::string partition;
    unsigned workers = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_preset = true) {
    if (with_preset) cmd->add_option("--preset", c.preset, "Molecule preset (fe8, mn12)")->capture_default_str();
    cmd->add_option("--config", c.config_file, "JSON configuration file (replaces --preset)");
    cmd->add_option("--set", c.settings, "Override one setting, key=value (repeatable)");
    cmd->add_option("--tmax", c.tmax_ns, "End of the time grid in ns")->capture_default_str();
    cmd->add_option("--points", c.points, "Number of output times")->capture_default_str();
    cmd->add_option("--window-end", c.window_end_ns, "Averaging window [0, t] in ns")->capture_default_str();
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    auto* fixed = cmd->add_flag("--fixed-partition", c.fixed_partition, "One partition per trace (default)");
    cmd->add_flag("--per-time-partition", c.per_time_partition, "Best partition at every time")->excludes(fixed);
    cmd->add_option("--partition", c.partition, "Explicit partition, e.g. 1,2,3|4,5,6");
    cmd->add_option("--workers", c.workers, "Worker threads (0 = all cores)");
}

smm::PhysicalConfig resolve_config(const Common& c, std::optional<smm::PhysicalConfig> base = std::nullopt) {
    smm::PhysicalConfig cfg = !c.config_file.empty() ? smm::load_config_file(c.config_file)
                              : base                 ? *base
                                                     : smm::load_preset(c.preset);
    for (const auto& s : c.settings) smm::apply_assignment(cfg, s);
    cfg.validate();
    return cfg;
}

smm::TraceOptions trace_options(const Common& c) {
    smm::TraceOptions opt;
    opt.policy = c.per_time_partition ? smm::PartitionPolicy::per_time : smm::PartitionPolicy::fixed;
    if (!c.partition.empty()) {
        if (c.per_time_partition) throw smm::Error("bad_setting", "--partition needs the fixed-partition policy");
        opt.partition = smm::parse_partition(c.partition);
    }
    return opt;
}

smm::SweepOptions sweep_options(const Common& c) {
    smm::SweepOptions opt;
    opt.trace = trace_options(c);
    opt.window.end = c.window_end_ns * smm::units::nanosecond;
    opt.workers = c.workers;
    return opt;
}

std::vector<double> grid(const Common& c) { return smm::uniform_grid(c.tmax_ns * smm::units::nanosecond, c.points); }

json grid_json(const Common& c) {
    return {{"t_end", c.tmax_ns * smm::units::nanosecond}, {"points", c.points}};
}

std::ofstream open_output(const Common& c, const std::string& name) {
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / name;
    std::ofstream out(path);
    if (!out) throw smm::Error("io_error", "cannot write " + path.string());
    std::cout << path.string() << '\n';
    return out;
}

void write_sidecar(const Common& c, const std::string& name, const std::string& command, const smm::PhysicalConfig& cfg,
                   json results) {
    json doc;
    doc["command"] = command;
    doc["config"] = smm::to_json(cfg);
    doc["fingerprint"] = smm::config_fingerprint(cfg);
    doc["grid"] = grid_json(c);
    doc["partition_policy"] = c.per_time_partition ? "per-time" : "fixed";
    doc["results"] = std::move(results);
    open_output(c, name) << doc.dump(2) << '\n';
}

void run_trace(const Common& c, const std::string& order_name, bool covariance) {
    const auto cfg = resolve_config(c);
    const auto times = grid(c);
    const auto order = smm::parse_model_order(order_name);
    const auto trace = smm::run_entanglement_trace(cfg, order, times, trace_options(c));
    const std::string stem = "trace_" + smm::to_string(order);
    {
        auto out = open_output(c, stem + ".csv");
        smm::write_trace_csv(out, trace);
    }
    if (covariance) {
        const auto model = smm::build_drift(cfg, order);
        auto states = smm::propagate_covariance(model, smm::vacuum_state(model), times);
        auto out = open_output(c, "covariance_" + smm::to_string(order) + ".csv");
        smm::write_covariance_csv(out, model, states);
    }
    auto meta = smm::trace_metadata(trace);
    smm::AveragingWindow window{0.0, c.window_end_ns * smm::units::nanosecond};
    meta["window"] = {window.begin, window.end};
    meta["E_avg"] = smm::time_average(times, trace.raw, window);
    write_sidecar(c, stem + ".json", "trace", cfg, meta);
}

void run_means(const Common& c) {
    const auto cfg = resolve_config(c);
    const auto m = smm::solve_mean_amplitudes(cfg);
    auto out = open_output(c, "means.csv");
    out << std::setprecision(17) << "P";
    for (std::size_t k = 0; k < m.modes.size(); ++k) out << ",re_a" << k + 1 << ",im_a" << k + 1;
    out << ",re_s,im_s,re_n,im_n,drive_phase,residual,multiplicity\n";
    out << cfg.drive.power_per_mode;
    for (const auto& a : m.modes) out << ',' << a.real() << ',' << a.imag();
    out << ',' << m.spin.real() << ',' << m.spin.imag() << ',' << m.bath.real() << ',' << m.bath.imag() << ','
        << m.drive_phase << ',' << m.residual << ',' << m.multiplicity << '\n';
    write_sidecar(c, "means.json", "means", cfg,
                  {{"residual", m.residual}, {"multiplicity", m.multiplicity},
                   {"detunings", {{"modes", m.detunings.modes}, {"spin", m.detunings.spin}, {"bath", m.detunings.bath}}}});
}

json sweep_json(const smm::SweepTable& table) {
    json rows = json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"value", r.value}, {"label", r.label}, {"engine", r.engine}, {"E_avg", r.average},
                        {"E_max", r.peak}, {"partition", r.partition}});
    return {{"parameter", table.parameter}, {"window", {table.window.begin, table.window.end}}, {"rows", rows}};
}

void run_sweep_alpha(const Common& c, std::vector<double> alphas) {
    const auto cfg = resolve_config(c);
    if (alphas.empty()) alphas = smm::default_alpha_grid();
    const auto table = smm::sweep_alpha(cfg, alphas, grid(c), sweep_options(c));
    {
        auto out = open_output(c, "sweep_alpha.csv");
        smm::write_sweep_csv(out, table);
    }
    write_sidecar(c, "sweep_alpha.json", "sweep-alpha", cfg, sweep_json(table));
}

void run_sweep_bath(const Common& c, std::vector<int> sizes) {
    const auto cfg = resolve_config(c);
    if (sizes.empty()) sizes = smm::default_bath_sizes();
    const auto table = smm::sweep_bath_size(cfg, sizes, grid(c), sweep_options(c));
    {
        auto out = open_output(c, "sweep_bath.csv");
        smm::write_sweep_csv(out, table);
    }
    write_sidecar(c, "sweep_bath.json", "sweep-bath", cfg, sweep_json(table));
}

std::string multiplier_tag(double m) {
    std::ostringstream s;
    s << m;
    return s.str();
}

void run_compare(const Common& c, const std::vector<double>& multipliers, int levels) {
    const auto cfg = resolve_config(c, smm::comparison_config());
    smm::ComparisonOptions opt;
    opt.spec = {levels, cfg.preset.spin, cfg.mode_count()};
    opt.cm = trace_options(c);
    opt.workers = c.workers;
    const auto blocks = smm::compare_cm_dm(cfg, multipliers, grid(c), opt);
    json results = json::array();
    for (const auto& b : blocks) {
        auto out = open_output(c, "compare_D" + multiplier_tag(b.multiplier) + ".csv");
        smm::write_comparison_csv(out, b);
        results.push_back({{"multiplier", b.multiplier},
                           {"dm_average", b.dm_average},
                           {"cm_average", b.cm_average},
                           {"ratio_dm_over_cm", b.ratio},
                           {"closest_order", smm::to_string(static_cast<smm::ModelOrder>(b.closest))}});
    }
    {
        auto out = open_output(c, "compare_summary.csv");
        smm::write_comparison_summary_csv(out, blocks);
    }
    json doc = {{"blocks", results}, {"truncation", {{"mode_levels", levels}, {"spin", cfg.preset.spin}}},
                {"window", "whole grid"}};
    write_sidecar(c, "compare.json", "compare-dm", cfg, doc);
}

void run_truncation(const Common& c, const std::vector<double>& powers_pw, const std::vector<int>& levels,
                    double spin) {
    auto base = smm::comparison_config();
    base.preset.spin = spin;
    const auto cfg = resolve_config(c, base);
    std::vector<double> powers;
    for (double p : powers_pw) powers.push_back(p * smm::units::picowatt);
    std::vector<smm::TruncationSpec> specs;
    for (int l : levels) specs.push_back({l, cfg.preset.spin, cfg.mode_count()});
    smm::TruncationStudyOptions opt;
    opt.workers = c.workers;
    const auto rows = smm::truncation_study(cfg, powers, specs, grid(c), opt);
    {
        auto out = open_output(c, "truncation.csv");
        smm::write_truncation_csv(out, rows);
    }
    {
        auto out = open_output(c, "truncation_summary.csv");
        smm::write_truncation_summary_csv(out, rows);
    }
    json results = json::array();
    for (const auto& r : rows)
        results.push_back({{"power", r.power}, {"mode_levels", r.spec.mode_levels},
                           {"divergence_time", r.divergence_time}, {"diverged", r.diverged}});
    write_sidecar(c, "truncation.json", "truncation-study", cfg,
                  {{"rows", results}, {"relative_threshold", opt.relative_threshold}, {"floor", opt.floor}});
}

void run_mn12(const Common& c) {
    const auto cfg = resolve_config(c, smm::load_preset("mn12"));
    const auto suite = smm::run_order_suite(cfg, grid(c), sweep_options(c));
    {
        auto out = open_output(c, "mn12_suite.csv");
        smm::write_suite_csv(out, suite);
    }
    json traces = json::array();
    for (const auto& t : suite.traces) traces.push_back(smm::trace_metadata(t));
    write_sidecar(c, "mn12_suite.json", "mn12-suite", cfg,
                  {{"averages", suite.averages}, {"relative_gap_second_vs_zeroth", suite.relative_gap},
                   {"traces", traces}});
}

int fail(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entanglement witness simulations for single-molecule magnets in a multimode cavity"};
    app.require_subcommand(1);

    Common common;
    std::string order = "zeroth";
    bool covariance = false;
    std::vector<double> alphas, multipliers{1.0, 3.0}, powers{0.01, 0.1, 1.0};
    std::vector<int> sizes, levels{4, 5};
    int dm_levels = 4;
    double spin = 2.0;

    auto* trace = app.add_subcommand("trace", "Entanglement trace of one model order");
    add_common(trace, common);
    trace->add_option("--order", order, "zeroth, first or second")->capture_default_str();
    trace->add_flag("--covariance", covariance, "Also write the covariance trajectory");

    auto* means = app.add_subcommand("means", "Stationary mean amplitudes used at second order");
    add_common(means, common);

    auto* alpha = app.add_subcommand("sweep-alpha", "Time-averaged entanglement against the hyperfine coupling");
    add_common(alpha, common);
    alpha->add_option("--alphas", alphas, "Coupling values in rad/s (default 0 and 1e6..1e12)");

    auto* bath = app.add_subcommand("sweep-bath", "Time-averaged entanglement against the bath size");
    add_common(bath, common);
    bath->add_option("--sizes", sizes, "Bath spin counts (default 10 50 100 200)");

    auto* compare = app.add_subcommand("compare-dm", "Density-matrix against covariance-matrix traces");
    add_common(compare, common, false);
    compare->add_option("--multipliers", multipliers, "Factors applied to D")->capture_default_str();
    compare->add_option("--levels", dm_levels, "Levels per cavity mode")->capture_default_str();

    auto* truncation = app.add_subcommand("truncation-study", "Divergence time of density-matrix truncations");
    add_common(truncation, common, false);
    truncation->add_option("--powers", powers, "Drive powers in pW")->capture_default_str();
    truncation->add_option("--levels", levels, "Levels per cavity mode, compared in order")->capture_default_str();
    truncation->add_option("--spin", spin, "Giant spin S")->capture_default_str();

    auto* mn12 = app.add_subcommand("mn12-suite", "All three model orders for Mn12");
    add_common(mn12, common, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        if (*trace) run_trace(common, order, covariance);
        else if (*means) run_means(common);
        else if (*alpha) run_sweep_alpha(common, alphas);
        else if (*bath) run_sweep_bath(common, sizes);
        else if (*compare) run_compare(common, multipliers, dm_levels);
        else if (*truncation) run_truncation(common, powers, levels, spin);
        else if (*mn12) run_mn12(common);
    } catch (const smm::Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    std::cerr << "done in " << elapsed.count() << " s\n";
    return 0;
}
