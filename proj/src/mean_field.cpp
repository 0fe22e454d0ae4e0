#include "smm/mean_field.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "smm/error.hpp"

namespace smm {

namespace {

constexpr complex I{0.0, 1.0};

struct Coefficients {
    double spin;        // S
    double kappa1;
    double drive1;      // E_1
    double g_eff;       // G sqrt(S/2)
    double hop;         // alpha sqrt(J S)
    double k1, k2;
    double gamma_s, gamma_b;
    double delta_s, delta_n;
    std::vector<double> kappa;
    std::vector<double> drive;
};

Coefficients coefficients(const PhysicalConfig& cfg, const Detunings& det) {
    Coefficients c;
    const auto& p = cfg.preset;
    c.spin = p.spin;
    const double kappa = cfg.mode_decay();
    c.kappa.assign(static_cast<std::size_t>(cfg.mode_count()), kappa);
    c.drive = cfg.pump_amplitudes();
    c.kappa1 = kappa;
    c.drive1 = c.drive.front();
    c.g_eff = cfg.spin_photon_coupling * std::sqrt(p.spin / 2.0);
    c.hop = p.hyperfine_flip_flop * std::sqrt(cfg.bath_spin() * p.spin);
    c.k1 = p.axial_anisotropy;
    c.k2 = p.hyperfine_ising;
    c.gamma_s = cfg.spin_damping;
    c.gamma_b = cfg.bath_damping;
    c.delta_s = det.spin;
    c.delta_n = det.bath;
    return c;
}

// Bath response i(Delta_n - K2 u) + Gamma_b at u = |<s>|^2.
complex bath_denominator(const Coefficients& c, double u) {
    return complex(c.gamma_b, c.delta_n - c.k2 * u);
}

// <s> = numerator / den(|<s>|^2) after eliminating <a_1> and <n>.
complex spin_numerator(const Coefficients& c) { return -I * c.g_eff * c.drive1 / c.kappa1; }

complex spin_denominator(const Coefficients& c, double u) {
    const complex bath = bath_denominator(c, u);
    const double bath_population = c.hop * c.hop * u / std::norm(bath);  // |<n>|^2
    const double shift = c.delta_s - c.k1 - 2.0 * c.k1 * u - c.k2 * bath_population;
    return I * shift + c.gamma_s + c.g_eff * c.g_eff / c.kappa1 + c.hop * c.hop / bath;
}

double relative_defect(std::initializer_list<complex> terms) {
    complex sum{};
    double scale = 0.0;
    for (const auto& t : terms) {
        sum += t;
        scale = std::max(scale, std::abs(t));
    }
    return scale == 0.0 ? 0.0 : std::abs(sum) / scale;
}

} // namespace

Detunings rotating_detunings(const PhysicalConfig& cfg) {
    Detunings d;
    const auto omega = cfg.mode_frequencies();
    const auto pumps = cfg.pump_frequencies();
    d.modes.resize(omega.size());
    for (std::size_t m = 0; m < omega.size(); ++m) d.modes[m] = omega[m] - pumps[m];
    const auto hp = hp_frequencies(cfg, ModelOrder::first);
    d.spin = hp.spin - pumps.front();
    d.bath = *hp.bath - pumps.front();
    return d;
}

MeanAmplitudes solve_mean_amplitudes(const PhysicalConfig& cfg, const MeanFieldOptions& opt) {
    if (!(cfg.mode_decay() > 0.0))
        throw Error("invalid_config", "stationary means need a lossy cavity (kappa > 0)");
    if (!(cfg.bath_damping > 0.0))
        throw Error("invalid_config", "stationary means need Gamma_b > 0");

    MeanAmplitudes out;
    out.detunings = rotating_detunings(cfg);
    const auto c = coefficients(cfg, out.detunings);
    const std::size_t modes = c.kappa.size();
    out.modes.assign(modes, complex{});
    for (std::size_t m = 1; m < modes; ++m) out.modes[m] = c.drive[m] / c.kappa[m];

    const complex numerator = spin_numerator(c);
    const double target = std::abs(numerator);
    double y = 0.0;
    if (target == 0.0) {
        out.multiplicity = 1;
    } else {
        const auto f = [&](double v) { return v * std::abs(spin_denominator(c, v * v)) - target; };
        const double y_max = 10.0 * target / std::abs(spin_denominator(c, 0.0));

        // Count sign changes to expose Kerr multistability; keep the smallest
        // root, which is the branch reached by ramping the drive up from zero.
        double lo = 0.0, flo = f(0.0);
        double first_lo = -1.0, first_hi = -1.0;
        for (int i = 1; i <= opt.scan_points; ++i) {
            const double hi = y_max * i / opt.scan_points;
            const double fhi = f(hi);
            if ((flo < 0.0) != (fhi < 0.0) || fhi == 0.0) {
                if (out.multiplicity == 0) {
                    first_lo = lo;
                    first_hi = hi;
                }
                ++out.multiplicity;
            }
            lo = hi;
            flo = fhi;
        }
        if (out.multiplicity == 0) {
            std::ostringstream msg;
            msg << "no root of the |<s>| equation in [0, " << y_max << "]; f(y_max) = " << flo;
            throw Error("not_converged", msg.str());
        }
        std::uintmax_t iterations = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(
            f, first_lo, first_hi, boost::math::tools::eps_tolerance<double>(52), iterations);
        y = 0.5 * (a + b);
    }

    const complex s = target == 0.0 ? complex{} : numerator / spin_denominator(c, y * y);
    const double u = std::norm(s);
    const complex phase = (s == complex{}) ? complex{1.0} : I * std::abs(s) / s;
    out.drive_phase = std::arg(phase);
    out.spin = phase * s;
    out.bath = -I * c.hop * out.spin / bath_denominator(c, u);
    out.modes[0] = (c.drive1 * phase - I * c.g_eff * out.spin) / c.kappa1;
    // The alignment is exact up to rounding; remove the residue.
    out.spin = complex(0.0, out.spin.imag());

    out.residual = mean_residual(out, cfg);
    if (!(out.residual <= opt.tolerance)) {
        std::ostringstream msg;
        msg << "stationary means residual " << out.residual << " exceeds " << opt.tolerance;
        throw Error("not_converged", msg.str());
    }
    return out;
}

double mean_residual(const MeanAmplitudes& means, const PhysicalConfig& cfg) {
    const auto det = rotating_detunings(cfg);
    const auto c = coefficients(cfg, det);
    if (means.modes.size() != c.kappa.size()) return std::numeric_limits<double>::infinity();

    const complex drive1 = c.drive1 * std::polar(1.0, means.drive_phase);
    const complex s = means.spin;
    const complex n = means.bath;
    const double u = std::norm(s);

    double worst = relative_defect({c.kappa1 * means.modes[0], -drive1, I * c.g_eff * s});
    for (std::size_t m = 1; m < c.kappa.size(); ++m)
        worst = std::max(worst, relative_defect({c.kappa[m] * means.modes[m], complex(-c.drive[m])}));
    worst = std::max(worst, relative_defect({bath_denominator(c, u) * n, I * c.hop * s}));
    const double shift = c.delta_s - c.k1 - 2.0 * c.k1 * u - c.k2 * std::norm(n);
    worst = std::max(worst, relative_defect({complex(c.gamma_s, shift) * s, I * c.g_eff * means.modes[0],
                                             I * c.hop * n}));
    return worst;
}

} // namespace smm
