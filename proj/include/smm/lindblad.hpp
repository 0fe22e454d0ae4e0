#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "smm/model_config.hpp"

namespace smm {

// Hilbert space mode_1 (x) ... (x) mode_M (x) spin, with the spin in the S_z
// basis ordered m = +S, +S-1, ..., -S.
struct TruncationSpec {
    int mode_levels = 4;
    double spin = 3.0;
    int mode_count = 2;

    int spin_levels() const { return static_cast<int>(2.0 * spin + 0.5) + 1; }
    int mode_dimension() const;
    int dimension() const { return mode_dimension() * spin_levels(); }
    void validate() const;
};

struct OperatorSet {
    TruncationSpec spec;
    // Single-factor matrices.
    Eigen::MatrixXcd boson;        // truncated a
    Eigen::MatrixXcd spin_z, spin_plus, spin_minus, spin_x, spin_y;
    // Embedded in the full space.
    std::vector<Eigen::MatrixXcd> a;
    Eigen::MatrixXcd sz, sx, sy, sp, sm;
};

OperatorSet build_operators(const TruncationSpec& spec);

// H(t) = sum w_m a_m^+ a_m + G sum (a_m^+ + a_m) S_x + w_e S_z - D S_z^2
//        + E (S_x^2 - S_y^2) + i sum E_m (a_m^+ e^{-i L_m t} - h.c.)
// using the first spec.mode_count cavity modes of cfg.
Eigen::MatrixXcd build_hamiltonian_dm(const PhysicalConfig& cfg, const OperatorSet& ops, double t);

struct TruncatedState {
    Eigen::MatrixXcd rho;
    double time = 0.0;
    TruncationSpec spec;
};

// Cavity vacuum (x) |S, m = +S>.
TruncatedState initial_state(const TruncationSpec& spec);

struct MasterEquationOptions {
    double absolute_tolerance = 1e-13;
    double relative_tolerance = 1e-11;
    // 0: 0.25 / fastest frequency left in the interaction-picture generator
    // (largest mode frequency plus the spin spectrum width).
    double max_step = 0.0;
    bool check_invariants = true;
    double hermiticity_tolerance = 1e-10;
    double trace_tolerance = 1e-8;
    double positivity_tolerance = 1e-9;
};

struct StateDiagnostics {
    double trace_defect = 0.0;       // |tr rho - 1|
    double hermiticity_defect = 0.0; // max |rho - rho^+|
    double min_eigenvalue = 0.0;
    double purity = 0.0;
};

StateDiagnostics diagnose(const Eigen::MatrixXcd& rho);

using DmObserver = std::function<void(const TruncatedState&, const StateDiagnostics&)>;

// rho' = -i[H, rho] + kappa_s L_{S_z}[rho] + kappa sum_m L_{a_m}[rho] with
// L_O[rho] = 2 O rho O^+ - {O^+ O, rho}. States are reported in the lab
// frame. Throws smm::Error("invariant_violation" / "integrator_failure")
// with the offending time.
void evolve_master_equation(const TruncatedState& rho0, const PhysicalConfig& cfg, const OperatorSet& ops,
                            std::span<const double> times, const DmObserver& observe,
                            const MasterEquationOptions& opt = {});
std::vector<TruncatedState> evolve_master_equation(const TruncatedState& rho0, const PhysicalConfig& cfg,
                                                   const OperatorSet& ops, std::span<const double> times,
                                                   const MasterEquationOptions& opt = {});

// Partial trace over the spin factor.
Eigen::MatrixXcd reduced_modes_state(const TruncatedState& state);
Eigen::MatrixXcd reduced_modes_state(const Eigen::MatrixXcd& rho, const TruncationSpec& spec);

// Transpose of the factors after `split` (modes split+1..M), for a state of
// mode_count modes with mode_levels each.
Eigen::MatrixXcd partial_transpose_dm(const Eigen::MatrixXcd& rho_modes, int mode_levels, int mode_count, int split = 1);

// max(0, ln(||rho^{T_B}||_1 / tr rho)).
double dm_log_negativity(const Eigen::MatrixXcd& rho_modes, int mode_levels, int mode_count, int split = 1);

struct DmTracePoint {
    double time = 0.0;
    double negativity = 0.0;
    double purity = 0.0;
    double trace_defect = 0.0;
    double min_eigenvalue = 0.0;
    std::vector<double> occupations;  // <a_m^+ a_m>
};

// Vacuum initial state, mode-mode negativity (split after mode 1) at every time.
std::vector<DmTracePoint> dm_entanglement_trace(const PhysicalConfig& cfg, const TruncationSpec& spec,
                                                std::span<const double> times,
                                                const MasterEquationOptions& opt = {});

struct TruncationRow {
    double power = 0.0;             // W
    TruncationSpec spec;
    std::vector<DmTracePoint> trace;
    double divergence_time = 0.0;   // t*: compared against the next spec in the list
    bool diverged = false;
};

struct TruncationStudyOptions {
    double relative_threshold = 0.05;
    // Points where both traces are below floor * (largest value of the pair)
    // are not compared: at t -> 0 both vanish and the ratio is noise.
    double floor = 1e-3;
    MasterEquationOptions integrator;
    unsigned workers = 0;   // 0 = hardware concurrency
};

// Earliest time where |a - b| / max(a, b) exceeds the threshold; the last
// grid time when it never does.
double divergence_time(std::span<const double> times, std::span<const double> a, std::span<const double> b,
                       double relative_threshold = 0.05, double floor = 1e-3, bool* diverged = nullptr);

// Runs every (power, spec) pair; the divergence time of spec k is measured
// against spec k+1 (the last spec reuses the previous pair's value).
std::vector<TruncationRow> truncation_study(const PhysicalConfig& cfg, std::span<const double> powers,
                                            std::span<const TruncationSpec> specs, std::span<const double> times,
                                            const TruncationStudyOptions& opt = {});

} // namespace smm
