#pragma once

#include <complex>
#include <vector>

#include "smm/model_config.hpp"

namespace smm {

using complex = std::complex<double>;

struct Detunings {
    std::vector<double> modes;  // omega_m - Lambda_m
    double spin = 0.0;          // Omega_s (first order) - Lambda_1
    double bath = 0.0;          // Omega_n - Lambda_1
};

// Stationary amplitudes in the frame rotating at the pump frequencies.
//
// The mode-1 pump phase is a free reference. It is chosen so that <s> is
// purely imaginary with Im<s> >= 0; drive_phase records that choice, i.e. the
// mode-1 drive enters the stationary equations as E_1 exp(i drive_phase).
// Modes m >= 2 keep a real drive, so <a_m> = E_m / kappa is real.
struct MeanAmplitudes {
    std::vector<complex> modes;
    complex spin{};
    complex bath{};
    double drive_phase = 0.0;
    double residual = 0.0;
    int multiplicity = 0;        // roots of the |<s>| equation found in the bracket
    Detunings detunings;
};

Detunings rotating_detunings(const PhysicalConfig& cfg);

struct MeanFieldOptions {
    double tolerance = 1e-10;    // required residual
    int scan_points = 4000;      // sign-change scan used to count roots
};

// Solves the stationary equations by bracketed root finding on y = |<s>|.
// Throws smm::Error("not_converged") when no root exists in the bracket or
// the residual misses the tolerance.
MeanAmplitudes solve_mean_amplitudes(const PhysicalConfig& cfg, const MeanFieldOptions& opt = {});

// Largest relative defect among the four stationary relations (mode 1,
// modes m >= 2, bath, spin), each scaled by its largest term.
double mean_residual(const MeanAmplitudes& means, const PhysicalConfig& cfg);

} // namespace smm
