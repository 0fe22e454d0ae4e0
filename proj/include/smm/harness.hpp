#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smm/cv_entanglement.hpp"
#include "smm/gaussian_dynamics.hpp"
#include "smm/lindblad.hpp"
#include "smm/model_config.hpp"

namespace smm {

// `points` equally spaced samples of [0, t_end], both ends included.
std::vector<double> uniform_grid(double t_end, int points);

struct AveragingWindow {
    double begin = 0.0;
    double end = 0.8 * units::nanosecond;
};

// Trapezoidal mean of values over [begin, end] clipped to the grid.
double time_average(std::span<const double> times, std::span<const double> values, const AveragingWindow& window);

// Stable across runs and platforms: FNV-1a over the resolved configuration.
std::string config_fingerprint(const PhysicalConfig& cfg);

enum class PartitionPolicy {
    fixed,     // one partition for the whole trace
    per_time,  // best balanced partition at every output time
};

std::string to_string(PartitionPolicy policy);

struct EntanglementTrace {
    std::string engine;                  // "cm-zeroth", "cm-first", "cm-second" or "dm"
    std::vector<double> times;
    std::vector<double> raw;
    std::vector<double> normalized;
    double divisor = 0.0;                // max(raw)
    bool zero_trace = true;              // max(raw) == 0, normalized left at zero
    std::vector<std::string> partitions; // partition label at each time
    std::vector<double> purity;          // density-matrix traces only
    std::vector<double> trace_defect;
    std::string fingerprint;

    double peak() const { return divisor; }
};

EntanglementTrace normalize_trace(EntanglementTrace trace);

struct TraceOptions {
    PartitionPolicy policy = PartitionPolicy::fixed;
    // Fixed policy: used as given when set, otherwise the balanced partition
    // with the largest time-averaged negativity over the whole grid.
    std::optional<ModePartition> partition;
    PropagationOptions propagation;
};

std::string engine_tag(ModelOrder order);

// Vacuum covariance propagated under the drift model of `order`, with the
// mode-group negativity read at every time.
EntanglementTrace run_entanglement_trace(const PhysicalConfig& cfg, ModelOrder order, std::span<const double> times,
                                         const TraceOptions& opt = {});

EntanglementTrace dm_trace(const PhysicalConfig& cfg, const TruncationSpec& spec, std::span<const double> times,
                           const MasterEquationOptions& opt = {});

struct SweepRow {
    double value = 0.0;
    std::string label;     // "reference" for the zeroth-order row
    std::string engine;
    double average = 0.0;
    double peak = 0.0;
    std::string partition;
};

struct SweepTable {
    std::string parameter;
    AveragingWindow window;
    std::vector<SweepRow> rows;

    // Rows of the swept engine, in parameter order (the reference row excluded).
    std::vector<SweepRow> swept() const;
    const SweepRow* reference() const;
};

struct SweepOptions {
    AveragingWindow window;
    TraceOptions trace;
    unsigned workers = 0;   // 0 = hardware concurrency
};

// First-order averages for each hyperfine coupling, plus the zeroth-order
// reference row. With the fixed policy every row uses the partition chosen
// on the zeroth-order reference trace.
SweepTable sweep_alpha(const PhysicalConfig& cfg, std::span<const double> alphas, std::span<const double> times,
                       const SweepOptions& opt = {});
// Same for the number of bath spins N (J = N / 2).
SweepTable sweep_bath_size(const PhysicalConfig& cfg, std::span<const int> sizes, std::span<const double> times,
                           const SweepOptions& opt = {});

std::vector<double> default_alpha_grid();   // 0, then 1e6 .. 1e12 by decades
std::vector<int> default_bath_sizes();      // 10, 50, 100, 200

// fe8 with S = 3, two modes, P = 0.01 pW and kappa_s = 1e9.
PhysicalConfig comparison_config();

struct ComparisonBlock {
    double multiplier = 1.0;             // applied to D
    EntanglementTrace dm;
    std::array<EntanglementTrace, 3> cm; // zeroth, first, second
    double dm_average = 0.0;
    std::array<double, 3> cm_average{};
    std::array<double, 3> ratio{};       // dm_average / cm_average
    int closest = 0;                     // order with the smallest |ln ratio|
};

struct ComparisonOptions {
    TruncationSpec spec{4, 3.0, 2};
    MasterEquationOptions dm;
    TraceOptions cm;
    std::optional<AveragingWindow> window;   // default: the whole grid
    unsigned workers = 0;
};

std::vector<ComparisonBlock> compare_cm_dm(const PhysicalConfig& cfg_dm, std::span<const double> multipliers,
                                           std::span<const double> times, const ComparisonOptions& opt = {});

struct OrderSuite {
    std::string preset;
    std::array<EntanglementTrace, 3> traces;
    std::array<double, 3> averages{};
    double relative_gap = 0.0;   // |avg(second) - avg(zeroth)| / avg(zeroth)
};

OrderSuite run_order_suite(const PhysicalConfig& cfg, std::span<const double> times, const SweepOptions& opt = {});
OrderSuite run_mn12_suite(std::span<const double> times, const SweepOptions& opt = {});

// Flat-file output. Doubles are written with 17 significant digits so every
// row reads back bit-identical.
void write_trace_csv(std::ostream& out, const EntanglementTrace& trace);
EntanglementTrace read_trace_csv(std::istream& in);
void write_sweep_csv(std::ostream& out, const SweepTable& table);
SweepTable read_sweep_csv(std::istream& in);
void write_comparison_csv(std::ostream& out, const ComparisonBlock& block);
void write_comparison_summary_csv(std::ostream& out, std::span<const ComparisonBlock> blocks);
void write_suite_csv(std::ostream& out, const OrderSuite& suite);
void write_truncation_csv(std::ostream& out, std::span<const TruncationRow> rows);
void write_truncation_summary_csv(std::ostream& out, std::span<const TruncationRow> rows);

nlohmann::json trace_metadata(const EntanglementTrace& trace);

// Minimal CSV reader for the files above: one header line, comma-separated
// fields, double quotes around fields that contain commas.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;   // throws on a missing column
};

CsvTable read_csv(std::istream& in);

} // namespace smm
