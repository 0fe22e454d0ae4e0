#pragma once

// Adaptive explicit Runge-Kutta integration of matrix-valued ODEs.
//
// The driver is generic over the Butcher tableau and the state type (any
// Eigen dense matrix, real or complex). Output times are hit exactly: a step
// is shortened rather than interpolated when it would overshoot, so the
// observer sees states produced by the integrator itself.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>

#include "smm/error.hpp"

namespace smm::ode {

template <std::size_t Stages>
struct Tableau {
    std::array<double, Stages> c{};
    std::array<std::array<double, Stages>, Stages> a{};
    std::array<double, Stages> b{};      // propagating weights
    std::array<double, Stages> e{};      // b - b_embedded
    int error_order = 4;                 // order of the embedded estimate
    bool first_same_as_last = false;
};

// Dormand & Prince 5(4), FSAL.
inline const Tableau<7>& dormand_prince_54() {
    static const Tableau<7> t = [] {
        Tableau<7> t;
        t.c = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
        t.a[1] = {1.0 / 5};
        t.a[2] = {3.0 / 40, 9.0 / 40};
        t.a[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
        t.a[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729};
        t.a[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656};
        t.a[6] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84};
        t.b = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
        t.e = {71.0 / 57600, 0.0, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200, 22.0 / 525, -1.0 / 40};
        t.error_order = 4;
        t.first_same_as_last = true;
        return t;
    }();
    return t;
}

struct Settings {
    double absolute_tolerance = 1e-12;
    double relative_tolerance = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0.0;            // 0 = pick from the output spacing
    std::size_t max_steps = 100'000'000;
};

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t evaluations = 0;
};

// Integrates y' = rhs(t, y) from times.front() through every entry of
// `times` (strictly increasing), calling observe(index, t, y) at each one,
// including the initial time. rhs is invoked as rhs(t, y, dydt).
template <std::size_t Stages, typename State, typename Rhs, typename Observer>
Stats integrate(const Tableau<Stages>& tab, Rhs&& rhs, State y, std::span<const double> times,
                const Settings& opt, Observer&& observe) {
    Stats stats;
    if (times.empty()) return stats;
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1]))
            throw Error("bad_time_grid", "output times must be strictly increasing");
    }

    double t = times.front();
    observe(std::size_t{0}, t, static_cast<const State&>(y));
    if (times.size() == 1) return stats;

    std::array<State, Stages> k;
    for (auto& ki : k) ki = State::Zero(y.rows(), y.cols());
    State stage(y.rows(), y.cols());
    State y_new(y.rows(), y.cols());
    State err(y.rows(), y.cols());

    double h = opt.initial_step > 0.0 ? opt.initial_step : 1e-2 * (times[1] - times[0]);
    h = std::min(h, opt.max_step);
    const double exponent = -1.0 / (tab.error_order + 1);

    rhs(t, static_cast<const State&>(y), k[0]);
    ++stats.evaluations;

    for (std::size_t out = 1; out < times.size(); ++out) {
        const double target = times[out];
        while (t < target) {
            if (stats.accepted + stats.rejected >= opt.max_steps) {
                std::ostringstream msg;
                msg << "step budget exhausted at t = " << t;
                throw Error("integrator_failure", msg.str());
            }
            bool last = false;
            double step = h;
            if (t + step >= target || target - (t + step) < 1e-12 * step) {
                step = target - t;
                last = true;
            }

            for (std::size_t s = 1; s < Stages; ++s) {
                stage = y;
                for (std::size_t j = 0; j < s; ++j)
                    if (tab.a[s][j] != 0.0) stage += (step * tab.a[s][j]) * k[j];
                rhs(t + tab.c[s] * step, static_cast<const State&>(stage), k[s]);
                ++stats.evaluations;
            }
            y_new = y;
            err.setZero();
            for (std::size_t s = 0; s < Stages; ++s) {
                if (tab.b[s] != 0.0) y_new += (step * tab.b[s]) * k[s];
                if (tab.e[s] != 0.0) err += (step * tab.e[s]) * k[s];
            }

            // Squared moduli keep the complex case vectorizable (no hypot).
            const auto scale = (opt.absolute_tolerance +
                                opt.relative_tolerance *
                                    y.cwiseAbs2().array().max(y_new.cwiseAbs2().array()).sqrt());
            const double norm = (err.cwiseAbs2().array().sqrt() / scale).maxCoeff();
            if (!std::isfinite(norm)) {
                std::ostringstream msg;
                msg << "non-finite state encountered at t = " << t;
                throw Error("integrator_failure", msg.str());
            }

            const double factor =
                norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, exponent), 0.2, 5.0);
            if (norm <= 1.0) {
                t = last ? target : t + step;
                y.swap(y_new);
                if (tab.first_same_as_last) {
                    k[0].swap(k[Stages - 1]);
                } else {
                    rhs(t, static_cast<const State&>(y), k[0]);
                    ++stats.evaluations;
                }
                ++stats.accepted;
                // A step clipped to land on an output time says nothing about
                // the natural step size, so keep the previous proposal.
                if (!last || step >= h) h = std::min(step * factor, opt.max_step);
            } else {
                ++stats.rejected;
                h = step * std::max(factor, 0.1);
                if (h < 1e-15 * std::max(std::abs(t), 1e-30) || h <= 0.0) {
                    std::ostringstream msg;
                    msg << "step size underflow at t = " << t;
                    throw Error("integrator_failure", msg.str());
                }
            }
        }
        observe(out, t, static_cast<const State&>(y));
    }
    return stats;
}

} // namespace smm::ode
