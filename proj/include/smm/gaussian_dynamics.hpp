#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smm/mean_field.hpp"
#include "smm/model_config.hpp"

namespace smm {

// Linear quadrature dynamics du/dt = K u + l(t) for the ordering
// (x_1, y_1, ..., x_M, y_M, x_s, y_s[, x_n, y_n]).
struct DriftModel {
    ModelOrder order = ModelOrder::zeroth;
    int mode_count = 0;
    bool has_bath = false;
    Eigen::MatrixXd drift;              // K
    Eigen::VectorXd diffusion;          // diagonal of the diffusion matrix
    std::vector<double> pump_amplitudes;   // E_m, empty at second order
    std::vector<double> pump_frequencies;  // Lambda_m
    double max_frequency = 0.0;         // largest mode frequency
    double mode_decay = 0.0;

    int dimension() const { return static_cast<int>(drift.rows()); }
    int spin_index() const { return 2 * mode_count; }
    int bath_index() const { return 2 * mode_count + 2; }
    std::vector<std::string> layout() const;   // "x1", "y1", ..., "xs", "ys", "xn", "yn"
    Eigen::MatrixXd diffusion_matrix() const { return diffusion.asDiagonal(); }
    // p(t) with p/sqrt(2) = (E_1 cos L_1 t, -E_1 sin L_1 t, ..., 0, 0).
    Eigen::VectorXd pump(double t) const;
};

struct CovarianceState {
    Eigen::MatrixXd v;
    double time = 0.0;
};

DriftModel build_drift_zeroth(const PhysicalConfig& cfg);
DriftModel build_drift_first(const PhysicalConfig& cfg);
// Linearized around `means`; throws smm::Error("stale_linearization") when
// their residual exceeds `tolerance`.
DriftModel build_drift_second(const PhysicalConfig& cfg, const MeanAmplitudes& means, double tolerance = 1e-10);
// Dispatches on order, solving the stationary means for the second order.
DriftModel build_drift(const PhysicalConfig& cfg, ModelOrder order);

CovarianceState vacuum_state(const DriftModel& model);

struct PropagationOptions {
    double absolute_tolerance = 0.0;   // 0: 1e-12 |D| / kappa
    double relative_tolerance = 1e-10;
    double max_step = 0.0;             // 0: 0.05 / omega_max
    bool check_physicality = true;
    double physicality_tolerance = 1e-9;
};

using CovarianceObserver = std::function<void(const CovarianceState&)>;

// Integrates dV/dt = K V + V K^T + D, reporting V at every entry of `times`
// (the first must equal v0.time). Throws smm::Error("integrator_failure" or
// "unphysical_state") carrying the offending time.
void propagate_covariance(const DriftModel& model, const CovarianceState& v0, std::span<const double> times,
                          const CovarianceObserver& observe, const PropagationOptions& opt = {});
std::vector<CovarianceState> propagate_covariance(const DriftModel& model, const CovarianceState& v0,
                                                  std::span<const double> times,
                                                  const PropagationOptions& opt = {});

// First moments du/dt = K u + p(t) from u(times.front()) = u0. The
// second-order model has its drive folded into the stationary means, so its
// fluctuation means simply relax.
std::vector<Eigen::VectorXd> propagate_means(const DriftModel& model, const Eigen::VectorXd& u0,
                                             std::span<const double> times, const PropagationOptions& opt = {});

// <a_m^+ a_m> = (<x>^2 + <y>^2 + V_xx + V_yy - 1) / 2 for mode m (1-based).
double mode_occupation(const Eigen::VectorXd& u, const Eigen::MatrixXd& v, int mode);

struct Stability {
    bool stable = false;
    double abscissa = 0.0;   // max Re(lambda(K))
};

Stability stability_check(const DriftModel& model);
Stability stability_check(const Eigen::MatrixXd& drift);

// Solves K V + V K^T + D = 0. Throws smm::Error("no_steady_state") if K is
// not stable.
CovarianceState steady_state_covariance(const DriftModel& model);

// Header "t,V_x1_x1,V_x1_y1,..." then one row per state (upper triangle,
// row-major in layout order).
void write_covariance_csv(std::ostream& out, const DriftModel& model, std::span<const CovarianceState> states);

} // namespace smm
