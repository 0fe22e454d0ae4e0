#include "smm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "smm/config_io.hpp"
#include "smm/error.hpp"
#include "smm/worker_pool.hpp"

namespace smm {

namespace {

constexpr std::array<ModelOrder, 3> all_orders{ModelOrder::zeroth, ModelOrder::first, ModelOrder::second};

std::string quoted(const std::string& field) {
    return field.find(',') == std::string::npos ? field : "\"" + field + "\"";
}

double parse_double(const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error("bad_csv", "not a number: '" + text + "'");
}

std::vector<double> column_values(const CsvTable& table, const std::string& name) {
    const std::size_t c = table.column(name);
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) out.push_back(parse_double(row.at(c)));
    return out;
}

void require_grid(std::span<const double> times) {
    if (times.size() < 2) throw Error("bad_time_grid", "need at least two output times");
}

// Zeroth-order reference plus one first-order trace per value, merged in
// parameter order.
template <typename Value, typename Mutate>
SweepTable sweep_first_order(const PhysicalConfig& cfg, std::span<const Value> values, Mutate mutate,
                             std::span<const double> times, const SweepOptions& opt, std::string parameter) {
    require_grid(times);
    SweepTable table;
    table.parameter = std::move(parameter);
    table.window = opt.window;

    const auto reference = run_entanglement_trace(cfg, ModelOrder::zeroth, times, opt.trace);
    TraceOptions trace_opt = opt.trace;
    if (trace_opt.policy == PartitionPolicy::fixed && !trace_opt.partition)
        trace_opt.partition = parse_partition(reference.partitions.front());

    std::vector<SweepRow> rows(values.size());
    parallel_for(values.size(), opt.workers, [&](std::size_t i) {
        PhysicalConfig c = cfg;
        mutate(c, values[i]);
        const auto trace = run_entanglement_trace(c, ModelOrder::first, times, trace_opt);
        auto& row = rows[i];
        row.value = static_cast<double>(values[i]);
        row.label = table.parameter;
        row.engine = trace.engine;
        row.average = time_average(times, trace.raw, opt.window);
        row.peak = trace.peak();
        row.partition = trace.partitions.front();
    });

    SweepRow ref;
    ref.label = "reference";
    ref.engine = reference.engine;
    ref.average = time_average(times, reference.raw, opt.window);
    ref.peak = reference.peak();
    ref.partition = reference.partitions.front();
    table.rows.push_back(ref);
    table.rows.insert(table.rows.end(), rows.begin(), rows.end());
    return table;
}

std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

} // namespace

std::vector<double> uniform_grid(double t_end, int points) {
    if (points < 2 || !(t_end > 0.0)) throw Error("bad_time_grid", "need t_end > 0 and at least two points");
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = t_end * i / (points - 1);
    return t;
}

double time_average(std::span<const double> times, std::span<const double> values, const AveragingWindow& window) {
    if (times.size() != values.size() || times.empty()) throw Error("bad_trace", "times and values must match");
    const double a = std::max(window.begin, times.front());
    const double b = std::min(window.end, times.back());
    if (!(b > a)) throw Error("bad_trace", "averaging window does not overlap the grid");

    const auto value_at = [&](double t) {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return values.front();
        if (it == times.end()) return values.back();
        const std::size_t j = static_cast<std::size_t>(it - times.begin());
        const double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
        return (1.0 - w) * values[j - 1] + w * values[j];
    };

    double integral = 0.0, t_prev = a, v_prev = value_at(a);
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] <= a) continue;
        if (times[i] >= b) break;
        integral += 0.5 * (v_prev + values[i]) * (times[i] - t_prev);
        t_prev = times[i];
        v_prev = values[i];
    }
    integral += 0.5 * (v_prev + value_at(b)) * (b - t_prev);
    return integral / (b - a);
}

std::string config_fingerprint(const PhysicalConfig& cfg) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : to_json(cfg).dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::string to_string(PartitionPolicy policy) { return policy == PartitionPolicy::fixed ? "fixed" : "per-time"; }

EntanglementTrace normalize_trace(EntanglementTrace trace) {
    trace.divisor = trace.raw.empty() ? 0.0 : *std::max_element(trace.raw.begin(), trace.raw.end());
    trace.zero_trace = !(trace.divisor > 0.0);
    trace.normalized.assign(trace.raw.size(), 0.0);
    if (!trace.zero_trace)
        for (std::size_t i = 0; i < trace.raw.size(); ++i) trace.normalized[i] = trace.raw[i] / trace.divisor;
    return trace;
}

std::string engine_tag(ModelOrder order) { return "cm-" + to_string(order); }

EntanglementTrace run_entanglement_trace(const PhysicalConfig& cfg, ModelOrder order, std::span<const double> times,
                                         const TraceOptions& opt) {
    require_grid(times);
    const DriftModel model = build_drift(cfg, order);

    std::vector<ModePartition> candidates;
    if (opt.policy == PartitionPolicy::fixed && opt.partition)
        candidates.push_back(*opt.partition);
    else
        candidates = balanced_partitions(model.mode_count);

    // values[p][i]: negativity of candidate p at time i.
    std::vector<std::vector<double>> values(candidates.size());
    for (auto& v : values) v.reserve(times.size());
    propagate_covariance(
        model, vacuum_state(model), times,
        [&](const CovarianceState& s) {
            for (std::size_t p = 0; p < candidates.size(); ++p) values[p].push_back(log_negativity(s.v, candidates[p]));
        },
        opt.propagation);

    EntanglementTrace trace;
    trace.engine = engine_tag(order);
    trace.times.assign(times.begin(), times.end());
    trace.fingerprint = config_fingerprint(cfg);
    if (opt.policy == PartitionPolicy::fixed) {
        std::size_t best = 0;
        double best_avg = -1.0;
        const AveragingWindow whole{times.front(), times.back()};
        for (std::size_t p = 0; p < candidates.size(); ++p) {
            const double avg = time_average(times, values[p], whole);
            if (avg > best_avg) {
                best = p;
                best_avg = avg;
            }
        }
        trace.raw = values[best];
        trace.partitions.assign(times.size(), candidates[best].label());
    } else {
        for (std::size_t i = 0; i < times.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t p = 1; p < candidates.size(); ++p)
                if (values[p][i] > values[best][i]) best = p;
            trace.raw.push_back(values[best][i]);
            trace.partitions.push_back(candidates[best].label());
        }
    }
    return normalize_trace(std::move(trace));
}

EntanglementTrace dm_trace(const PhysicalConfig& cfg, const TruncationSpec& spec, std::span<const double> times,
                           const MasterEquationOptions& opt) {
    require_grid(times);
    const auto points = dm_entanglement_trace(cfg, spec, times, opt);
    EntanglementTrace trace;
    trace.engine = "dm";
    trace.fingerprint = config_fingerprint(cfg);
    ModePartition split;
    split.group_a.push_back(1);
    for (int m = 2; m <= spec.mode_count; ++m) split.group_b.push_back(m);
    for (const auto& p : points) {
        trace.times.push_back(p.time);
        trace.raw.push_back(p.negativity);
        trace.partitions.push_back(split.label());
        trace.purity.push_back(p.purity);
        trace.trace_defect.push_back(p.trace_defect);
    }
    return normalize_trace(std::move(trace));
}

std::vector<SweepRow> SweepTable::swept() const {
    std::vector<SweepRow> out;
    for (const auto& r : rows)
        if (r.label != "reference") out.push_back(r);
    return out;
}

const SweepRow* SweepTable::reference() const {
    for (const auto& r : rows)
        if (r.label == "reference") return &r;
    return nullptr;
}

SweepTable sweep_alpha(const PhysicalConfig& cfg, std::span<const double> alphas, std::span<const double> times,
                       const SweepOptions& opt) {
    return sweep_first_order(
        cfg, alphas, [](PhysicalConfig& c, double a) { c.preset.hyperfine_flip_flop = a; }, times, opt, "alpha");
}

SweepTable sweep_bath_size(const PhysicalConfig& cfg, std::span<const int> sizes, std::span<const double> times,
                           const SweepOptions& opt) {
    return sweep_first_order(
        cfg, sizes, [](PhysicalConfig& c, int n) { c.preset.bath_size = n; }, times, opt, "N");
}

std::vector<double> default_alpha_grid() { return {0.0, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12}; }

std::vector<int> default_bath_sizes() { return {10, 50, 100, 200}; }

PhysicalConfig comparison_config() {
    PhysicalConfig cfg = load_preset("fe8");
    cfg.preset.spin = 3.0;
    cfg.geometry.mode_count = 2;
    cfg.drive.power_per_mode = 0.01 * units::picowatt;
    cfg.spin_dephasing = 1e9;
    return cfg;
}

std::vector<ComparisonBlock> compare_cm_dm(const PhysicalConfig& cfg_dm, std::span<const double> multipliers,
                                           std::span<const double> times, const ComparisonOptions& opt) {
    require_grid(times);
    if (cfg_dm.mode_count() != opt.spec.mode_count || std::abs(cfg_dm.preset.spin - opt.spec.spin) > 1e-12)
        throw Error("invalid_config", "truncation spec must match the configuration's mode count and spin");

    std::vector<ComparisonBlock> blocks(multipliers.size());
    parallel_for(4 * multipliers.size(), opt.workers, [&](std::size_t task) {
        auto& block = blocks[task / 4];
        const std::size_t which = task % 4;
        PhysicalConfig c = cfg_dm;
        c.preset.axial_anisotropy *= multipliers[task / 4];
        if (which == 0)
            block.dm = dm_trace(c, opt.spec, times, opt.dm);
        else
            block.cm[which - 1] = run_entanglement_trace(c, all_orders[which - 1], times, opt.cm);
    });

    const AveragingWindow window = opt.window.value_or(AveragingWindow{times.front(), times.back()});
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto& block = blocks[b];
        block.multiplier = multipliers[b];
        block.dm_average = time_average(times, block.dm.raw, window);
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k) {
            block.cm_average[k] = time_average(times, block.cm[k].raw, window);
            block.ratio[k] = block.cm_average[k] > 0.0 ? block.dm_average / block.cm_average[k]
                                                       : std::numeric_limits<double>::infinity();
            const double distance = std::abs(std::log(block.ratio[k]));
            if (distance < best) {
                best = distance;
                block.closest = k;
            }
        }
    }
    return blocks;
}

OrderSuite run_order_suite(const PhysicalConfig& cfg, std::span<const double> times, const SweepOptions& opt) {
    require_grid(times);
    OrderSuite suite;
    suite.preset = cfg.preset.name;
    parallel_for(3, opt.workers, [&](std::size_t k) {
        suite.traces[k] = run_entanglement_trace(cfg, all_orders[k], times, opt.trace);
    });
    for (std::size_t k = 0; k < 3; ++k) suite.averages[k] = time_average(times, suite.traces[k].raw, opt.window);
    suite.relative_gap = suite.averages[0] > 0.0 ? std::abs(suite.averages[2] - suite.averages[0]) / suite.averages[0]
                                                 : std::numeric_limits<double>::infinity();
    return suite;
}

OrderSuite run_mn12_suite(std::span<const double> times, const SweepOptions& opt) {
    return run_order_suite(load_preset("mn12"), times, opt);
}

void write_trace_csv(std::ostream& out, const EntanglementTrace& trace) {
    const bool dm = !trace.purity.empty();
    out << "t,E_raw,E_normalized,partition" << (dm ? ",purity,trace_defect" : "") << '\n';
    out << std::setprecision(17);
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        out << trace.times[i] << ',' << trace.raw[i] << ',' << trace.normalized[i] << ','
            << quoted(trace.partitions[i]);
        if (dm) out << ',' << trace.purity[i] << ',' << trace.trace_defect[i];
        out << '\n';
    }
}

EntanglementTrace read_trace_csv(std::istream& in) {
    const CsvTable table = read_csv(in);
    EntanglementTrace trace;
    trace.times = column_values(table, "t");
    trace.raw = column_values(table, "E_raw");
    trace.normalized = column_values(table, "E_normalized");
    const std::size_t p = table.column("partition");
    for (const auto& row : table.rows) trace.partitions.push_back(row.at(p));
    if (std::find(table.header.begin(), table.header.end(), "purity") != table.header.end()) {
        trace.purity = column_values(table, "purity");
        trace.trace_defect = column_values(table, "trace_defect");
        trace.engine = "dm";
    }
    trace.divisor = trace.raw.empty() ? 0.0 : *std::max_element(trace.raw.begin(), trace.raw.end());
    trace.zero_trace = !(trace.divisor > 0.0);
    return trace;
}

void write_sweep_csv(std::ostream& out, const SweepTable& table) {
    out << "parameter,value,label,engine,E_avg,E_max,partition,window_begin,window_end\n";
    out << std::setprecision(17);
    for (const auto& r : table.rows) {
        out << table.parameter << ',' << r.value << ',' << r.label << ',' << r.engine << ',' << r.average << ','
            << r.peak << ',' << quoted(r.partition) << ',' << table.window.begin << ',' << table.window.end << '\n';
    }
}

SweepTable read_sweep_csv(std::istream& in) {
    const CsvTable csv = read_csv(in);
    SweepTable table;
    const auto value = column_values(csv, "value"), avg = column_values(csv, "E_avg"), peak = column_values(csv, "E_max");
    const auto begin = column_values(csv, "window_begin"), end = column_values(csv, "window_end");
    const std::size_t param = csv.column("parameter"), label = csv.column("label"), engine = csv.column("engine"),
                      part = csv.column("partition");
    for (std::size_t i = 0; i < csv.rows.size(); ++i) {
        const auto& row = csv.rows[i];
        table.parameter = row.at(param);
        table.window = {begin[i], end[i]};
        table.rows.push_back({value[i], row.at(label), row.at(engine), avg[i], peak[i], row.at(part)});
    }
    return table;
}

void write_comparison_csv(std::ostream& out, const ComparisonBlock& block) {
    out << "t,E_dm,E_cm_zeroth,E_cm_first,E_cm_second,purity,trace_defect\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < block.dm.times.size(); ++i) {
        out << block.dm.times[i] << ',' << block.dm.raw[i];
        for (const auto& cm : block.cm) out << ',' << cm.raw[i];
        out << ',' << block.dm.purity[i] << ',' << block.dm.trace_defect[i] << '\n';
    }
}

void write_comparison_summary_csv(std::ostream& out, std::span<const ComparisonBlock> blocks) {
    out << "multiplier,engine,E_avg,E_max,ratio_dm_over_engine,closest\n";
    out << std::setprecision(17);
    for (const auto& b : blocks) {
        out << b.multiplier << ",dm," << b.dm_average << ',' << b.dm.peak() << ",1,0\n";
        for (int k = 0; k < 3; ++k) {
            out << b.multiplier << ',' << b.cm[k].engine << ',' << b.cm_average[k] << ',' << b.cm[k].peak() << ','
                << b.ratio[k] << ',' << (b.closest == k ? 1 : 0) << '\n';
        }
    }
}

void write_suite_csv(std::ostream& out, const OrderSuite& suite) {
    out << "t,E_zeroth,E_first,E_second,E_zeroth_normalized,E_first_normalized,E_second_normalized\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < suite.traces[0].times.size(); ++i) {
        out << suite.traces[0].times[i];
        for (const auto& t : suite.traces) out << ',' << t.raw[i];
        for (const auto& t : suite.traces) out << ',' << t.normalized[i];
        out << '\n';
    }
}

void write_truncation_csv(std::ostream& out, std::span<const TruncationRow> rows) {
    out << "power_pw,mode_levels,spin,t,E_raw,purity,trace_defect,min_eigenvalue,occupations\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        for (const auto& p : r.trace) {
            out << r.power / units::picowatt << ',' << r.spec.mode_levels << ',' << r.spec.spin << ',' << p.time << ','
                << p.negativity << ',' << p.purity << ',' << p.trace_defect << ',' << p.min_eigenvalue << ',';
            std::string occ;
            for (std::size_t m = 0; m < p.occupations.size(); ++m) occ += (m ? ";" : "") + format_double(p.occupations[m]);
            out << occ << '\n';
        }
    }
}

void write_truncation_summary_csv(std::ostream& out, std::span<const TruncationRow> rows) {
    out << "power_pw,mode_levels,spin,divergence_time,diverged,E_max\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        double peak = 0.0;
        for (const auto& p : r.trace) peak = std::max(peak, p.negativity);
        out << r.power / units::picowatt << ',' << r.spec.mode_levels << ',' << r.spec.spin << ','
            << r.divergence_time << ',' << (r.diverged ? 1 : 0) << ',' << peak << '\n';
    }
}

nlohmann::json trace_metadata(const EntanglementTrace& trace) {
    nlohmann::json j;
    j["engine"] = trace.engine;
    j["fingerprint"] = trace.fingerprint;
    j["points"] = trace.times.size();
    j["t_end"] = trace.times.empty() ? 0.0 : trace.times.back();
    j["normalization_divisor"] = trace.divisor;
    j["zero_trace"] = trace.zero_trace;
    std::vector<std::string> distinct;
    for (const auto& p : trace.partitions)
        if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) distinct.push_back(p);
    j["partitions"] = distinct;
    return j;
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("bad_csv", "missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
    const auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::string field;
        bool quoted_field = false;
        for (char c : line) {
            if (c == '"') {
                quoted_field = !quoted_field;
            } else if (c == ',' && !quoted_field) {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c != '\r') {
                field += c;
            }
        }
        if (quoted_field) throw Error("bad_csv", "unterminated quote in '" + line + "'");
        fields.push_back(std::move(field));
        return fields;
    };

    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw Error("bad_csv", "empty input");
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != table.header.size()) throw Error("bad_csv", "row width differs from header: '" + line + "'");
        table.rows.push_back(std::move(fields));
    }
    return table;
}

} // namespace smm
