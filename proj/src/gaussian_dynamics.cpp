#include "smm/gaussian_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "smm/cv_entanglement.hpp"
#include "smm/error.hpp"
#include "smm/ode.hpp"

namespace smm {

namespace {

// Modes, the giant-spin oscillator and its couplings; identical in all orders
// apart from the spin frequency block, which callers overwrite as needed.
DriftModel base_model(const PhysicalConfig& cfg, ModelOrder order, bool bath) {
    cfg.validate();
    DriftModel m;
    m.order = order;
    m.mode_count = cfg.mode_count();
    m.has_bath = bath;
    const int dim = 2 * m.mode_count + (bath ? 4 : 2);
    m.drift = Eigen::MatrixXd::Zero(dim, dim);
    m.diffusion = Eigen::VectorXd::Zero(dim);

    const auto omega = cfg.mode_frequencies();
    const double kappa = cfg.mode_decay();
    const double g = std::sqrt(2.0 * cfg.preset.spin) * cfg.spin_photon_coupling;
    const int s = m.spin_index();
    for (int k = 0; k < m.mode_count; ++k) {
        const int x = 2 * k, y = x + 1;
        const double w = omega[static_cast<std::size_t>(k)];
        m.drift(x, x) = -kappa;
        m.drift(x, y) = w;
        m.drift(y, x) = -w;
        m.drift(y, y) = -kappa;
        m.drift(y, s) = -g;
        m.drift(s + 1, x) = -g;
        m.diffusion(x) = kappa;
        m.diffusion(y) = kappa;
    }
    m.diffusion(s) = cfg.spin_damping;
    m.diffusion(s + 1) = cfg.spin_damping;
    m.drift(s, s) = -cfg.spin_damping;
    m.drift(s + 1, s + 1) = -cfg.spin_damping;

    m.max_frequency = omega.empty() ? 0.0 : *std::max_element(omega.begin(), omega.end());
    m.mode_decay = kappa;
    m.pump_frequencies = cfg.pump_frequencies();
    m.pump_amplitudes = cfg.pump_amplitudes();
    return m;
}

void set_spin_block(DriftModel& m, double upper, double lower) {
    const int s = m.spin_index();
    m.drift(s, s + 1) = upper;
    m.drift(s + 1, s) = lower;
}

void set_bath_blocks(DriftModel& m, const PhysicalConfig& cfg, double omega_n) {
    const int s = m.spin_index(), b = m.bath_index();
    const double hop = cfg.preset.hyperfine_flip_flop * std::sqrt(cfg.bath_spin() * cfg.preset.spin);
    m.drift(s, b + 1) = hop;
    m.drift(s + 1, b) = -hop;
    m.drift(b, s + 1) = hop;
    m.drift(b + 1, s) = -hop;
    m.drift(b, b) = -cfg.bath_damping;
    m.drift(b + 1, b + 1) = -cfg.bath_damping;
    m.drift(b, b + 1) = omega_n;
    m.drift(b + 1, b) = -omega_n;
    m.diffusion(b) = cfg.bath_damping;
    m.diffusion(b + 1) = cfg.bath_damping;
}

std::string time_stamp(double t) {
    std::ostringstream out;
    out << std::setprecision(6) << t;
    return out.str();
}

} // namespace

std::vector<std::string> DriftModel::layout() const {
    std::vector<std::string> out;
    for (int k = 1; k <= mode_count; ++k) {
        out.push_back("x" + std::to_string(k));
        out.push_back("y" + std::to_string(k));
    }
    out.insert(out.end(), {"xs", "ys"});
    if (has_bath) out.insert(out.end(), {"xn", "yn"});
    return out;
}

Eigen::VectorXd DriftModel::pump(double t) const {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dimension());
    for (std::size_t k = 0; k < pump_amplitudes.size(); ++k) {
        const double phase = pump_frequencies[k] * t;
        p(2 * static_cast<Eigen::Index>(k)) = std::sqrt(2.0) * pump_amplitudes[k] * std::cos(phase);
        p(2 * static_cast<Eigen::Index>(k) + 1) = -std::sqrt(2.0) * pump_amplitudes[k] * std::sin(phase);
    }
    return p;
}

DriftModel build_drift_zeroth(const PhysicalConfig& cfg) {
    auto m = base_model(cfg, ModelOrder::zeroth, false);
    const double omega_s = hp_frequencies(cfg, ModelOrder::zeroth).spin;
    const double es = cfg.preset.transverse_anisotropy * cfg.preset.spin;
    set_spin_block(m, omega_s - 2.0 * es, -omega_s - 2.0 * es);
    return m;
}

DriftModel build_drift_first(const PhysicalConfig& cfg) {
    auto m = base_model(cfg, ModelOrder::first, true);
    const auto hp = hp_frequencies(cfg, ModelOrder::first);
    const double es = cfg.preset.transverse_anisotropy * cfg.preset.spin;
    set_spin_block(m, hp.spin - 2.0 * es, -hp.spin - 2.0 * es);
    set_bath_blocks(m, cfg, *hp.bath);
    return m;
}

DriftModel build_drift_second(const PhysicalConfig& cfg, const MeanAmplitudes& means, double tolerance) {
    const double residual = mean_residual(means, cfg);
    if (!(residual <= tolerance)) {
        std::ostringstream msg;
        msg << "stationary means residual " << residual << " exceeds " << tolerance;
        throw Error("stale_linearization", msg.str());
    }
    auto m = base_model(cfg, ModelOrder::second, true);
    m.pump_amplitudes.clear();  // the drive lives in the stationary means

    const auto hp = hp_frequencies(cfg, ModelOrder::first);
    const auto& p = cfg.preset;
    const double k1 = p.axial_anisotropy, k2 = p.hyperfine_ising;
    const double es = p.transverse_anisotropy * p.spin;
    const double spin_pop = std::norm(means.spin), bath_pop = std::norm(means.bath);
    const double omega_nl = hp.spin - k1 - 4.0 * k1 * spin_pop - k2 * bath_pop;
    const double squeeze = 2.0 * k1 * (means.spin * means.spin).real();
    set_spin_block(m, omega_nl + squeeze - 2.0 * es, -omega_nl + squeeze - 2.0 * es);

    set_bath_blocks(m, cfg, *hp.bath);
    const int s = m.spin_index(), b = m.bath_index();
    m.drift(s, b + 1) += 2.0 * k2 * (means.spin * means.bath).real();
    m.drift(b, b + 1) = *hp.bath + k2 * spin_pop;
    m.drift(b + 1, b) = -*hp.bath + k2 * spin_pop;
    return m;
}

DriftModel build_drift(const PhysicalConfig& cfg, ModelOrder order) {
    switch (order) {
    case ModelOrder::zeroth: return build_drift_zeroth(cfg);
    case ModelOrder::first: return build_drift_first(cfg);
    case ModelOrder::second: return build_drift_second(cfg, solve_mean_amplitudes(cfg));
    }
    throw Error("unknown_order", "unknown model order");
}

CovarianceState vacuum_state(const DriftModel& model) {
    return {0.5 * Eigen::MatrixXd::Identity(model.dimension(), model.dimension()), 0.0};
}

void propagate_covariance(const DriftModel& model, const CovarianceState& v0, std::span<const double> times,
                          const CovarianceObserver& observe, const PropagationOptions& opt) {
    const int dim = model.dimension();
    if (v0.v.rows() != dim || v0.v.cols() != dim)
        throw Error("bad_covariance", "initial covariance does not match the drift model");
    if (times.empty()) return;
    if (times.front() != v0.time) throw Error("bad_time_grid", "time grid must start at the initial state time");

    ode::Settings settings;
    const double d_norm = model.diffusion.cwiseAbs().maxCoeff();
    settings.absolute_tolerance = opt.absolute_tolerance > 0.0
                                      ? opt.absolute_tolerance
                                      : 1e-12 * (model.mode_decay > 0.0 && d_norm > 0.0 ? d_norm / model.mode_decay : 1.0);
    settings.relative_tolerance = opt.relative_tolerance;
    settings.max_step = opt.max_step > 0.0 ? opt.max_step
                        : model.max_frequency > 0.0 ? 0.05 / model.max_frequency
                                                    : std::numeric_limits<double>::infinity();

    const Eigen::MatrixXd& k = model.drift;
    const Eigen::MatrixXd d = model.diffusion_matrix();
    Eigen::MatrixXd kv(dim, dim);
    auto rhs = [&](double, const Eigen::MatrixXd& v, Eigen::MatrixXd& dv) {
        kv.noalias() = k * v;
        dv = kv + kv.transpose() + d;   // symmetric by construction
    };
    auto report = [&](std::size_t, double t, const Eigen::MatrixXd& v) {
        if (opt.check_physicality && !physicality_check(v, opt.physicality_tolerance))
            throw Error("unphysical_state", "covariance left the physical set at t = " + time_stamp(t));
        observe(CovarianceState{v, t});
    };
    ode::integrate(ode::dormand_prince_54(), rhs, Eigen::MatrixXd(v0.v), times, settings, report);
}

std::vector<CovarianceState> propagate_covariance(const DriftModel& model, const CovarianceState& v0,
                                                  std::span<const double> times, const PropagationOptions& opt) {
    std::vector<CovarianceState> out;
    out.reserve(times.size());
    propagate_covariance(model, v0, times, [&](const CovarianceState& s) { out.push_back(s); }, opt);
    return out;
}

std::vector<Eigen::VectorXd> propagate_means(const DriftModel& model, const Eigen::VectorXd& u0,
                                             std::span<const double> times, const PropagationOptions& opt) {
    if (u0.size() != model.dimension()) throw Error("bad_covariance", "initial means do not match the drift model");
    double amplitude = 1.0;
    for (double e : model.pump_amplitudes)
        if (model.mode_decay > 0.0) amplitude = std::max(amplitude, e / model.mode_decay);
    ode::Settings settings;
    settings.absolute_tolerance = opt.absolute_tolerance > 0.0 ? opt.absolute_tolerance : 1e-12 * amplitude;
    settings.relative_tolerance = opt.relative_tolerance;
    settings.max_step = opt.max_step > 0.0 ? opt.max_step
                        : model.max_frequency > 0.0 ? 0.05 / model.max_frequency
                                                    : std::numeric_limits<double>::infinity();

    std::vector<Eigen::VectorXd> out;
    out.reserve(times.size());
    auto rhs = [&](double t, const Eigen::VectorXd& u, Eigen::VectorXd& du) {
        du.noalias() = model.drift * u;
        du += model.pump(t);
    };
    ode::integrate(ode::dormand_prince_54(), rhs, Eigen::VectorXd(u0), times, settings,
                   [&](std::size_t, double, const Eigen::VectorXd& u) { out.push_back(u); });
    return out;
}

double mode_occupation(const Eigen::VectorXd& u, const Eigen::MatrixXd& v, int mode) {
    const int x = 2 * (mode - 1), y = x + 1;
    return 0.5 * (u(x) * u(x) + u(y) * u(y) + v(x, x) + v(y, y) - 1.0);
}

Stability stability_check(const Eigen::MatrixXd& drift) {
    Eigen::EigenSolver<Eigen::MatrixXd> solver(drift, false);
    if (solver.info() != Eigen::Success) return {false, std::numeric_limits<double>::quiet_NaN()};
    const double abscissa = solver.eigenvalues().real().maxCoeff();
    return {abscissa < 0.0, abscissa};
}

Stability stability_check(const DriftModel& model) { return stability_check(model.drift); }

CovarianceState steady_state_covariance(const DriftModel& model) {
    const auto stability = stability_check(model);
    if (!stability.stable) {
        std::ostringstream msg;
        msg << "drift matrix has an eigenvalue with real part " << stability.abscissa
            << "; a steady state needs all eigenvalues of K in the open left half-plane";
        throw Error("no_steady_state", msg.str());
    }
    const int n = model.dimension();
    const Eigen::MatrixXd& k = model.drift;
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    // vec(K V + V K^T) = (I (x) K + K (x) I) vec(V), column-major vec.
    Eigen::MatrixXd lyap = Eigen::MatrixXd::Zero(n * n, n * n);
    for (int j = 0; j < n; ++j) {
        lyap.block(j * n, j * n, n, n) += k;
        for (int i = 0; i < n; ++i) lyap.block(i * n, j * n, n, n) += k(i, j) * id;
    }
    const Eigen::MatrixXd d = model.diffusion_matrix();
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(d.data(), n * n);
    const Eigen::VectorXd x = lyap.partialPivLu().solve(rhs);
    Eigen::MatrixXd v = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    v = 0.5 * (v + v.transpose()).eval();

    const double residual = (k * v + v * k.transpose() + d).cwiseAbs().maxCoeff();
    const double d_norm = model.diffusion.cwiseAbs().maxCoeff();
    if (residual > 1e-10 * std::max(d_norm, std::numeric_limits<double>::min())) {
        std::ostringstream msg;
        msg << "Lyapunov residual " << residual << " too large (ill-conditioned drift, abscissa "
            << stability.abscissa << ")";
        throw Error("no_steady_state", msg.str());
    }
    return {v, std::numeric_limits<double>::infinity()};
}

void write_covariance_csv(std::ostream& out, const DriftModel& model, std::span<const CovarianceState> states) {
    const auto names = model.layout();
    const int n = model.dimension();
    out << "t";
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) out << ",V_" << names[static_cast<std::size_t>(i)] << '_' << names[static_cast<std::size_t>(j)];
    out << '\n';
    out << std::setprecision(17);
    for (const auto& s : states) {
        out << s.time;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) out << ',' << s.v(i, j);
        out << '\n';
    }
}

} // namespace smm
