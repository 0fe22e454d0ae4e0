#include "smm/lindblad.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "smm/error.hpp"
#include "smm/ode.hpp"
#include "smm/worker_pool.hpp"

namespace smm {

namespace {

using Eigen::MatrixXcd;
using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
    MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

MatrixXcd identity(Eigen::Index n) { return MatrixXcd::Identity(n, n); }

int power(int base, int exponent) {
    int out = 1;
    for (int i = 0; i < exponent; ++i) out *= base;
    return out;
}

std::string stamp(double t) {
    std::ostringstream out;
    out << std::setprecision(6) << t;
    return out.str();
}

struct Entry {
    int row, col;
    double value;
};

// Nonzeros of a_m on the mode space (all modes, spin excluded).
std::vector<Entry> mode_lowering(const TruncationSpec& spec, int mode) {
    const int stride = power(spec.mode_levels, spec.mode_count - 1 - mode);
    std::vector<Entry> out;
    for (int i = 0; i < spec.mode_dimension(); ++i) {
        const int n = (i / stride) % spec.mode_levels;
        if (n > 0) out.push_back({i - stride, i, std::sqrt(static_cast<double>(n))});
    }
    return out;
}

std::vector<int> occupation(const TruncationSpec& spec, int mode) {
    const int stride = power(spec.mode_levels, spec.mode_count - 1 - mode);
    std::vector<int> out(static_cast<std::size_t>(spec.mode_dimension()));
    for (int i = 0; i < spec.mode_dimension(); ++i) out[static_cast<std::size_t>(i)] = (i / stride) % spec.mode_levels;
    return out;
}

MatrixXcd spin_hamiltonian(const PhysicalConfig& cfg, const OperatorSet& ops) {
    const auto& p = cfg.preset;
    const MatrixXcd sz2 = ops.spin_z * ops.spin_z;
    return cfg.zeeman().electron * ops.spin_z - p.axial_anisotropy * sz2 +
           p.transverse_anisotropy * (ops.spin_x * ops.spin_x - ops.spin_y * ops.spin_y);
}

struct ModeDrive {
    double omega, pump, amplitude;
};

std::vector<ModeDrive> mode_drives(const PhysicalConfig& cfg, const TruncationSpec& spec) {
    if (cfg.mode_count() < spec.mode_count)
        throw Error("invalid_config", "configuration has fewer cavity modes than the truncation spec");
    const auto omega = cfg.mode_frequencies();
    const auto pumps = cfg.pump_frequencies();
    const auto amps = cfg.pump_amplitudes();
    std::vector<ModeDrive> out;
    for (int m = 0; m < spec.mode_count; ++m) {
        const auto k = static_cast<std::size_t>(m);
        out.push_back({omega[k], pumps[k], amps[k]});
    }
    return out;
}

// Generator in the interaction picture of H0 = sum w_m n_m + H_spin, with the
// spin factor in the eigenbasis of H_spin. H0 is a sum of local terms, so the
// mode-mode entanglement of the reduced state is the same in both frames.
//
// Internally the spin index is the slow one (index k * dm + i), so spin
// operators acting from the right are a single GEMM on a reshaped view and
// mode operators act on contiguous columns. The derivative is assembled as
// G + G^+ with G = F^+, which only needs right multiplications.
class InteractionGenerator {
public:
    InteractionGenerator(const PhysicalConfig& cfg, const OperatorSet& ops)
        : spec_(ops.spec), ds_(spec_.spin_levels()), dm_(spec_.mode_dimension()), d_(spec_.dimension()),
          drives_(mode_drives(cfg, spec_)) {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(spin_hamiltonian(cfg, ops));
        energies_ = eig.eigenvalues();
        basis_ = eig.eigenvectors();
        x0_ = basis_.adjoint() * ops.spin_x * basis_;
        z0_ = basis_.adjoint() * ops.spin_z * basis_;
        coupling_ = cfg.spin_photon_coupling;
        kappa_ = cfg.mode_decay();
        dephasing_ = cfg.spin_dephasing;
        for (int m = 0; m < spec_.mode_count; ++m) lowering_.push_back(mode_lowering(spec_, m));
        number_sum_ = Eigen::VectorXd::Zero(dm_);
        mode_energy_ = Eigen::VectorXd::Zero(dm_);
        for (int m = 0; m < spec_.mode_count; ++m) {
            const auto n = occupation(spec_, m);
            for (int i = 0; i < dm_; ++i) {
                number_sum_(i) += n[static_cast<std::size_t>(i)];
                mode_energy_(i) += n[static_cast<std::size_t>(i)] * drives_[static_cast<std::size_t>(m)].omega;
            }
        }
        for (auto* m : {&t1_, &t2_, &g_}) m->resize(d_, d_);
        phases_.resize(ds_);
    }

    double fastest_frequency() const {
        double w = 0.0;
        for (const auto& d : drives_) w = std::max({w, std::abs(d.omega), std::abs(d.omega - d.pump)});
        return w + (energies_.maxCoeff() - energies_.minCoeff());
    }

    // Lab state (mode-major, S_z basis) -> internal interaction-picture state.
    MatrixXcd to_interaction(const MatrixXcd& lab) const {
        const MatrixXcd u = kron(identity(dm_), basis_);
        return permute_to_internal(u.adjoint() * lab * u);
    }

    MatrixXcd to_lab(const MatrixXcd& internal, double t) const {
        const MatrixXcd rho = permute_to_external(internal);
        Eigen::VectorXcd phase(d_);
        for (int i = 0; i < dm_; ++i)
            for (int k = 0; k < ds_; ++k) phase(i * ds_ + k) = std::polar(1.0, -(mode_energy_(i) + energies_(k)) * t);
        const MatrixXcd rotated = phase.asDiagonal() * rho * phase.conjugate().asDiagonal();
        const MatrixXcd u = kron(identity(dm_), basis_);
        MatrixXcd out = u * rotated * u.adjoint();
        return 0.5 * (out + out.adjoint());
    }

    void operator()(double t, const MatrixXcd& rho, MatrixXcd& out) {
        for (int k = 0; k < ds_; ++k) phases_(k) = std::polar(1.0, energies_(k) * t);
        const MatrixXcd x = phases_.asDiagonal() * x0_ * phases_.conjugate().asDiagonal();

        // Hamiltonian: G = i rho H, H = X(t) (x) A(t) + 1 (x) Dr(t).
        right_spin(rho, x, t1_);
        g_.setZero();
        for (std::size_t m = 0; m < lowering_.size(); ++m) {
            const auto& drive = drives_[m];
            const cd rot = I * std::polar(coupling_, -drive.omega * t);
            const cd pump = I * (I * drive.amplitude * std::polar(1.0, (drive.omega - drive.pump) * t));
            for (const auto& e : lowering_[m]) {
                // A = G (a e^{-iwt} + a^+ e^{iwt})
                right_mode_axpy(t1_, e.row, e.col, rot * e.value, g_);
                right_mode_axpy(t1_, e.col, e.row, (-std::conj(rot)) * e.value, g_);
                if (drive.amplitude != 0.0) {
                    // Dr = i E (a^+ e^{i d t} - a e^{-i d t})
                    right_mode_axpy(rho, e.col, e.row, pump * e.value, g_);
                    right_mode_axpy(rho, e.row, e.col, (-std::conj(pump)) * e.value, g_);
                }
            }
        }

        if (dephasing_ != 0.0) {
            // F = kappa_s Z (rho Z - Z rho), G = kappa_s (Z rho - rho Z) Z
            const MatrixXcd z = phases_.asDiagonal() * z0_ * phases_.conjugate().asDiagonal();
            right_spin(rho, z, t1_);
            t2_ = t1_.adjoint() - t1_;
            right_spin(t2_, z, t1_);
            g_ += dephasing_ * t1_;
        }

        if (kappa_ != 0.0) {
            // G = kappa (a rho a^+ - rho a^+ a), summed over modes
            for (const auto& ops : lowering_) {
                t1_.setZero();
                for (const auto& e : ops) right_mode_axpy(rho, e.col, e.row, cd(e.value), t1_);   // rho a^+
                for (const auto& e : ops)
                    for (int k = 0; k < ds_; ++k)
                        g_.row(k * dm_ + e.row) += (kappa_ * e.value) * t1_.row(k * dm_ + e.col);
            }
            for (int k = 0; k < ds_; ++k)
                for (int j = 0; j < dm_; ++j)
                    if (number_sum_(j) != 0.0) g_.col(k * dm_ + j) -= (kappa_ * number_sum_(j)) * rho.col(k * dm_ + j);
        }
        out = g_ + g_.adjoint();
    }

private:
    // result = in (op (x) 1): column blocks of width dm are contiguous, so the
    // product is one GEMM on a (d*dm x ds) view.
    void right_spin(const MatrixXcd& in, const MatrixXcd& op, MatrixXcd& result) const {
        const Eigen::Index rows = static_cast<Eigen::Index>(d_) * dm_;
        Eigen::Map<const MatrixXcd> view(in.data(), rows, ds_);
        Eigen::Map<MatrixXcd> res(result.data(), rows, ds_);
        res.noalias() = view * op;
    }

    // result += in (1 (x) S) for the single entry S(a, b) = value.
    void right_mode_axpy(const MatrixXcd& in, int a, int b, cd value, MatrixXcd& result) const {
        for (int l = 0; l < ds_; ++l) result.col(l * dm_ + b) += value * in.col(l * dm_ + a);
    }

    MatrixXcd permute_to_internal(const MatrixXcd& ext) const {
        MatrixXcd out(d_, d_);
        for (int i = 0; i < dm_; ++i)
            for (int k = 0; k < ds_; ++k)
                for (int j = 0; j < dm_; ++j)
                    for (int l = 0; l < ds_; ++l) out(k * dm_ + i, l * dm_ + j) = ext(i * ds_ + k, j * ds_ + l);
        return out;
    }

    MatrixXcd permute_to_external(const MatrixXcd& in) const {
        MatrixXcd out(d_, d_);
        for (int i = 0; i < dm_; ++i)
            for (int k = 0; k < ds_; ++k)
                for (int j = 0; j < dm_; ++j)
                    for (int l = 0; l < ds_; ++l) out(i * ds_ + k, j * ds_ + l) = in(k * dm_ + i, l * dm_ + j);
        return out;
    }

    TruncationSpec spec_;
    int ds_, dm_, d_;
    std::vector<ModeDrive> drives_;
    Eigen::VectorXd energies_;
    MatrixXcd basis_, x0_, z0_;
    double coupling_ = 0.0, kappa_ = 0.0, dephasing_ = 0.0;
    std::vector<std::vector<Entry>> lowering_;
    Eigen::VectorXd number_sum_, mode_energy_;
    MatrixXcd t1_, t2_, g_;
    Eigen::VectorXcd phases_;
};
} // namespace

int TruncationSpec::mode_dimension() const { return power(mode_levels, mode_count); }

void TruncationSpec::validate() const {
    if (mode_levels < 2) throw Error("invalid_config", "mode_levels must be >= 2");
    if (mode_count < 1) throw Error("invalid_config", "mode_count must be >= 1");
    const double twice = 2.0 * spin;
    if (!(spin >= 0.5) || std::abs(twice - std::round(twice)) > 1e-12)
        throw Error("invalid_config", "spin must be a positive half-integer");
    if (static_cast<double>(mode_dimension()) * spin_levels() > 4096)
        throw Error("invalid_config", "truncated space too large for the dense engine");
}

OperatorSet build_operators(const TruncationSpec& spec) {
    spec.validate();
    OperatorSet ops;
    ops.spec = spec;
    const int levels = spec.mode_levels;
    ops.boson = MatrixXcd::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) ops.boson(n - 1, n) = std::sqrt(static_cast<double>(n));

    const int ds = spec.spin_levels();
    const double s = spec.spin;
    ops.spin_z = MatrixXcd::Zero(ds, ds);
    ops.spin_plus = MatrixXcd::Zero(ds, ds);
    for (int k = 0; k < ds; ++k) {
        const double m = s - k;
        ops.spin_z(k, k) = m;
        if (k > 0) ops.spin_plus(k - 1, k) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
    }
    ops.spin_minus = ops.spin_plus.adjoint();
    ops.spin_x = 0.5 * (ops.spin_plus + ops.spin_minus);
    ops.spin_y = (ops.spin_plus - ops.spin_minus) / (2.0 * I);

    const int dm = spec.mode_dimension();
    for (int m = 0; m < spec.mode_count; ++m) {
        const int before = power(levels, m), after = power(levels, spec.mode_count - 1 - m);
        ops.a.push_back(kron(kron(identity(before), kron(ops.boson, identity(after))), identity(ds)));
    }
    const MatrixXcd id_modes = identity(dm);
    ops.sz = kron(id_modes, ops.spin_z);
    ops.sx = kron(id_modes, ops.spin_x);
    ops.sy = kron(id_modes, ops.spin_y);
    ops.sp = kron(id_modes, ops.spin_plus);
    ops.sm = kron(id_modes, ops.spin_minus);
    return ops;
}

Eigen::MatrixXcd build_hamiltonian_dm(const PhysicalConfig& cfg, const OperatorSet& ops, double t) {
    const auto drives = mode_drives(cfg, ops.spec);
    const int d = ops.spec.dimension();
    MatrixXcd h = kron(identity(ops.spec.mode_dimension()), spin_hamiltonian(cfg, ops));
    for (std::size_t m = 0; m < drives.size(); ++m) {
        const auto& a = ops.a[m];
        const MatrixXcd ad = a.adjoint();
        h += drives[m].omega * (ad * a);
        h += cfg.spin_photon_coupling * ((ad + a) * ops.sx);
        const cd phase = std::polar(1.0, -drives[m].pump * t);
        h += I * drives[m].amplitude * (phase * ad - std::conj(phase) * a);
    }
    const double defect = (h - h.adjoint()).cwiseAbs().maxCoeff();
    if (defect > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
        throw Error("internal", "Hamiltonian lost Hermiticity");
    (void)d;
    return h;
}

TruncatedState initial_state(const TruncationSpec& spec) {
    spec.validate();
    TruncatedState s;
    s.spec = spec;
    s.rho = MatrixXcd::Zero(spec.dimension(), spec.dimension());
    s.rho(0, 0) = 1.0;  // all modes empty, spin index 0 is m = +S
    return s;
}

StateDiagnostics diagnose(const Eigen::MatrixXcd& rho) {
    StateDiagnostics d;
    d.trace_defect = std::abs(rho.trace() - cd(1.0));
    d.hermiticity_defect = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    const MatrixXcd h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(h, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = eig.eigenvalues().minCoeff();
    d.purity = h.squaredNorm();
    return d;
}

void evolve_master_equation(const TruncatedState& rho0, const PhysicalConfig& cfg, const OperatorSet& ops,
                            std::span<const double> times, const DmObserver& observe,
                            const MasterEquationOptions& opt) {
    const auto& spec = ops.spec;
    if (rho0.rho.rows() != spec.dimension() || rho0.rho.cols() != spec.dimension())
        throw Error("bad_state", "initial density matrix does not match the truncation spec");
    if (times.empty()) return;
    if (times.front() != rho0.time) throw Error("bad_time_grid", "time grid must start at the initial state time");
    if (rho0.time != 0.0) throw Error("bad_time_grid", "evolution starts at t = 0");

    InteractionGenerator gen(cfg, ops);
    ode::Settings settings;
    settings.absolute_tolerance = opt.absolute_tolerance;
    settings.relative_tolerance = opt.relative_tolerance;
    const double fast = gen.fastest_frequency();
    settings.max_step = opt.max_step > 0.0 ? opt.max_step
                        : fast > 0.0       ? 0.25 / fast
                                           : std::numeric_limits<double>::infinity();

    auto report = [&](std::size_t, double t, const MatrixXcd& rho) {
        TruncatedState lab{gen.to_lab(rho, t), t, spec};
        const auto diag = diagnose(lab.rho);
        // Hermiticity of the integrated state, before the lab-frame symmetrization.
        StateDiagnostics checked = diag;
        checked.hermiticity_defect = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        if (opt.check_invariants) {
            std::string what;
            if (checked.hermiticity_defect > opt.hermiticity_tolerance) what = "Hermiticity";
            else if (checked.trace_defect > opt.trace_tolerance) what = "trace";
            else if (checked.min_eigenvalue < -opt.positivity_tolerance) what = "positivity";
            else if (checked.purity > 1.0 + 1e-9) what = "purity bound";
            if (!what.empty())
                throw Error("invariant_violation", what + " violated at t = " + stamp(t) +
                                                       " (truncation too small or step failure)");
        }
        observe(lab, checked);
    };
    ode::integrate(ode::dormand_prince_54(), gen, gen.to_interaction(rho0.rho), times, settings, report);
}

std::vector<TruncatedState> evolve_master_equation(const TruncatedState& rho0, const PhysicalConfig& cfg,
                                                   const OperatorSet& ops, std::span<const double> times,
                                                   const MasterEquationOptions& opt) {
    std::vector<TruncatedState> out;
    out.reserve(times.size());
    evolve_master_equation(rho0, cfg, ops, times,
                           [&](const TruncatedState& s, const StateDiagnostics&) { out.push_back(s); }, opt);
    return out;
}

Eigen::MatrixXcd reduced_modes_state(const Eigen::MatrixXcd& rho, const TruncationSpec& spec) {
    const int ds = spec.spin_levels(), dm = spec.mode_dimension();
    MatrixXcd out(dm, dm);
    for (int i = 0; i < dm; ++i)
        for (int j = 0; j < dm; ++j) out(i, j) = rho.block(i * ds, j * ds, ds, ds).trace();
    return out;
}

Eigen::MatrixXcd reduced_modes_state(const TruncatedState& state) { return reduced_modes_state(state.rho, state.spec); }

Eigen::MatrixXcd partial_transpose_dm(const Eigen::MatrixXcd& rho_modes, int mode_levels, int mode_count, int split) {
    if (split < 1 || split >= mode_count) throw Error("bad_partition", "split must lie between the first and last mode");
    const int da = power(mode_levels, split), db = power(mode_levels, mode_count - split);
    if (rho_modes.rows() != da * db || rho_modes.cols() != da * db)
        throw Error("bad_state", "mode density matrix does not match the level count");
    MatrixXcd out(da * db, da * db);
    for (int a1 = 0; a1 < da; ++a1)
        for (int a2 = 0; a2 < da; ++a2)
            out.block(a1 * db, a2 * db, db, db) = rho_modes.block(a1 * db, a2 * db, db, db).transpose();
    return out;
}

double dm_log_negativity(const Eigen::MatrixXcd& rho_modes, int mode_levels, int mode_count, int split) {
    MatrixXcd pt = partial_transpose_dm(rho_modes, mode_levels, mode_count, split);
    pt = 0.5 * (pt + pt.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(pt, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double trace = ev.sum();
    if (!(trace > 0.0)) return 0.0;
    return std::max(0.0, std::log(ev.cwiseAbs().sum() / trace));
}

std::vector<DmTracePoint> dm_entanglement_trace(const PhysicalConfig& cfg, const TruncationSpec& spec,
                                                std::span<const double> times, const MasterEquationOptions& opt) {
    const auto ops = build_operators(spec);
    std::vector<DmTracePoint> out;
    out.reserve(times.size());
    std::vector<Eigen::VectorXd> numbers;
    for (int m = 0; m < spec.mode_count; ++m) {
        const auto n = occupation(spec, m);
        Eigen::VectorXd v(spec.mode_dimension());
        for (int i = 0; i < spec.mode_dimension(); ++i) v(i) = n[static_cast<std::size_t>(i)];
        numbers.push_back(v);
    }
    evolve_master_equation(
        initial_state(spec), cfg, ops, times,
        [&](const TruncatedState& s, const StateDiagnostics& d) {
            const MatrixXcd modes = reduced_modes_state(s);
            DmTracePoint p;
            p.time = s.time;
            p.negativity = spec.mode_count >= 2 ? dm_log_negativity(modes, spec.mode_levels, spec.mode_count, 1) : 0.0;
            p.purity = d.purity;
            p.trace_defect = d.trace_defect;
            p.min_eigenvalue = d.min_eigenvalue;
            for (const auto& n : numbers) p.occupations.push_back((n.asDiagonal() * modes).trace().real());
            out.push_back(std::move(p));
        },
        opt);
    return out;
}

double divergence_time(std::span<const double> times, std::span<const double> a, std::span<const double> b,
                       double relative_threshold, double floor, bool* diverged) {
    if (times.size() != a.size() || times.size() != b.size())
        throw Error("bad_trace", "traces must share the time grid");
    if (diverged) *diverged = false;
    if (times.empty()) return 0.0;
    double peak = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) peak = std::max({peak, a[i], b[i]});
    const double cutoff = floor * peak;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double hi = std::max(a[i], b[i]);
        if (hi <= cutoff || hi == 0.0) continue;
        if (std::abs(a[i] - b[i]) / hi > relative_threshold) {
            if (diverged) *diverged = true;
            return times[i];
        }
    }
    return times.back();
}

std::vector<TruncationRow> truncation_study(const PhysicalConfig& cfg, std::span<const double> powers,
                                            std::span<const TruncationSpec> specs, std::span<const double> times,
                                            const TruncationStudyOptions& opt) {
    if (specs.size() < 2) throw Error("invalid_config", "truncation study needs at least two specs");
    std::vector<TruncationRow> rows(powers.size() * specs.size());
    parallel_for(rows.size(), opt.workers, [&](std::size_t i) {
        PhysicalConfig c = cfg;
        c.drive.power_per_mode = powers[i / specs.size()];
        auto& row = rows[i];
        row.power = c.drive.power_per_mode;
        row.spec = specs[i % specs.size()];
        row.trace = dm_entanglement_trace(c, row.spec, times, opt.integrator);
    });
    for (std::size_t first = 0; first < rows.size(); first += specs.size()) {
        std::vector<std::vector<double>> values;
        for (std::size_t k = first; k < first + specs.size(); ++k) {
            std::vector<double> v;
            for (const auto& pt : rows[k].trace) v.push_back(pt.negativity);
            values.push_back(std::move(v));
        }
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            auto& row = rows[first + k];
            row.divergence_time = divergence_time(times, values[k], values[k + 1], opt.relative_threshold,
                                                  opt.floor, &row.diverged);
        }
        auto& last = rows[first + specs.size() - 1];
        last.divergence_time = rows[first + specs.size() - 2].divergence_time;
        last.diverged = rows[first + specs.size() - 2].diverged;
    }
    return rows;
}

} // namespace smm
