#include "smm/model_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "smm/error.hpp"

namespace smm {

namespace {

std::string lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

[[noreturn]] void invalid(const std::string& what) {
    throw Error("invalid_config", what);
}

} // namespace

std::string to_string(ModelOrder order) {
    switch (order) {
    case ModelOrder::zeroth: return "zeroth";
    case ModelOrder::first: return "first";
    case ModelOrder::second: return "second";
    }
    return "unknown";
}

ModelOrder parse_model_order(std::string_view text) {
    const auto key = lower(text);
    if (key == "zeroth" || key == "0") return ModelOrder::zeroth;
    if (key == "first" || key == "1") return ModelOrder::first;
    if (key == "second" || key == "2") return ModelOrder::second;
    throw Error("unknown_order", "unknown model order '" + std::string(text) + "'");
}

std::vector<double> PhysicalConfig::mode_frequencies() const {
    if (preset.fundamental_frequency <= 0.0) return derive_cavity(geometry).frequencies;
    std::vector<double> out(static_cast<std::size_t>(geometry.mode_count));
    for (int m = 0; m < geometry.mode_count; ++m)
        out[static_cast<std::size_t>(m)] = (m + 1) * preset.fundamental_frequency;
    return out;
}

double PhysicalConfig::mode_decay() const {
    if (overrides.mode_decay) return *overrides.mode_decay;
    return derive_cavity(geometry).decay;
}

ZeemanFrequencies PhysicalConfig::zeeman() const {
    auto z = zeeman_frequencies(magnetic_field);
    if (overrides.electron_zeeman) z.electron = *overrides.electron_zeeman;
    if (overrides.nuclear_zeeman) z.nuclear = *overrides.nuclear_zeeman;
    return z;
}

std::vector<double> PhysicalConfig::pump_frequencies() const {
    if (drive.pump_frequencies.empty()) return mode_frequencies();
    if (static_cast<int>(drive.pump_frequencies.size()) != geometry.mode_count)
        invalid("drive.pump_frequencies must list one frequency per cavity mode");
    return drive.pump_frequencies;
}

std::vector<double> PhysicalConfig::pump_amplitudes() const {
    const auto pumps = pump_frequencies();
    std::vector<double> out(pumps.size());
    if (overrides.drive_amplitude) {
        std::fill(out.begin(), out.end(), *overrides.drive_amplitude);
        return out;
    }
    const double kappa = mode_decay();
    for (std::size_t m = 0; m < pumps.size(); ++m)
        out[m] = pump_amplitude(drive.power_per_mode, kappa, pumps[m]);
    return out;
}

void PhysicalConfig::validate() const {
    const auto& p = preset;
    const double twice_spin = 2.0 * p.spin;
    if (!(p.spin >= 0.5) || std::abs(twice_spin - std::round(twice_spin)) > 1e-12)
        invalid("spin S must be a positive half-integer");
    if (p.bath_size < 0) invalid("bath size N must be non-negative");
    if (!(p.axial_anisotropy > 0.0)) invalid("axial anisotropy D must be positive");
    if (!(p.transverse_anisotropy >= 0.0)) invalid("transverse anisotropy E must be non-negative");
    if (!(geometry.length > 0.0)) invalid("cavity length must be positive");
    if (!(geometry.refractive_index >= 1.0)) invalid("refractive index must be >= 1");
    if (!(geometry.reflectivity_2 > 0.0 && geometry.reflectivity_2 <= geometry.reflectivity_1 &&
          geometry.reflectivity_1 <= 1.0))
        invalid("reflectivities must satisfy 0 < R2 <= R1 <= 1");
    if (geometry.mode_count < 1) invalid("mode count M must be >= 1");
    if (!(drive.power_per_mode >= 0.0)) invalid("drive power must be non-negative");
    for (double rate : {spin_damping, bath_damping, spin_dephasing, mode_decay()})
        if (!(rate >= 0.0)) invalid("damping and dephasing rates must be non-negative");
    if (!std::isfinite(spin_photon_coupling)) invalid("coupling G must be finite");
    const auto z = zeeman();
    if (!std::isfinite(z.electron) || !std::isfinite(z.nuclear))
        invalid("Zeeman frequencies must be finite");
    pump_frequencies();
}

PhysicalConfig load_preset(std::string_view name) {
    PhysicalConfig cfg;
    const auto key = lower(name);
    if (key == "fe8") {
        cfg.preset = SmmPreset{"Fe8", 10.0, 3.6e10, 6.02e9, 1.42e9, 1.42e9, 1e3, 1e3, 50, 6.75e11};
        cfg.geometry = CavityGeometry{1.05e-3, 1.33, 1.0, 0.87, 6};
    } else if (key == "mn12") {
        cfg.preset = SmmPreset{"Mn12", 10.0, 8.64e10, 0.0, 1.42e9, 1.42e9, 1e3, 1e3, 50, 1.64e12};
        cfg.geometry = CavityGeometry{0.43e-3, 1.33, 1.0, 0.94, 6};
    } else {
        throw Error("unknown_preset", "unknown preset '" + std::string(name) +
                                          "' (expected fe8 or mn12)");
    }
    // Both cavities are quoted with kappa ~ 7.5e9; the geometric estimate is kept
    // available through derive_cavity.
    cfg.overrides.mode_decay = 7.5e9;
    cfg.magnetic_field = 0.01;
    cfg.spin_damping = 0.0;
    cfg.bath_damping = 1e6;
    cfg.spin_dephasing = 1e9;
    cfg.spin_photon_coupling = 1e7;
    cfg.drive.power_per_mode = 0.01 * units::picowatt;
    return cfg;
}

std::vector<std::string> preset_names() { return {"fe8", "mn12"}; }

CavityModes derive_cavity(const CavityGeometry& g) {
    if (!(g.length > 0.0) || !(g.refractive_index >= 1.0) || g.mode_count < 1)
        invalid("cavity geometry out of range");
    if (!(g.reflectivity_2 > 0.0 && g.reflectivity_2 <= g.reflectivity_1 && g.reflectivity_1 <= 1.0))
        invalid("reflectivities must satisfy 0 < R2 <= R1 <= 1");
    CavityModes out;
    const double optical_length = g.refractive_index * g.length;
    const double fundamental = M_PI * units::speed_of_light / optical_length;
    out.frequencies.resize(static_cast<std::size_t>(g.mode_count));
    for (int m = 0; m < g.mode_count; ++m)
        out.frequencies[static_cast<std::size_t>(m)] = (m + 1) * fundamental;
    // Finesse F = -2 pi / ln(R1 R2) = pi c / (2 kappa n L).
    const double log_round_trip = std::log(g.reflectivity_1 * g.reflectivity_2);
    out.decay = -units::speed_of_light * log_round_trip / (4.0 * optical_length);
    out.lossless = out.decay == 0.0;
    return out;
}

ZeemanFrequencies zeeman_frequencies(double magnetic_field) {
    return {units::electron_gyromagnetic * magnetic_field,
            units::proton_gyromagnetic * magnetic_field};
}

double pump_amplitude(double power, double decay, double pump_frequency) {
    if (pump_frequency == 0.0)
        throw Error("division_by_zero", "pump frequency Lambda must be non-zero");
    if (!(power >= 0.0) || !(decay >= 0.0) || !(pump_frequency > 0.0))
        invalid("pump amplitude needs P >= 0, kappa >= 0, Lambda > 0");
    return std::sqrt(2.0 * (power / units::hbar) * decay / pump_frequency);
}

HpFrequencies hp_frequencies(const PhysicalConfig& cfg, ModelOrder order) {
    const auto& p = cfg.preset;
    const auto z = cfg.zeeman();
    const double j = cfg.bath_spin();
    HpFrequencies out;
    out.spin = 2.0 * p.axial_anisotropy * p.spin - z.electron;
    if (order != ModelOrder::zeroth) {
        out.spin += p.hyperfine_ising * j;
        out.bath = p.hyperfine_ising * p.spin + 2.0 * p.bath_exchange_xy * j -
                   2.0 * j * p.bath_exchange_zz - z.nuclear;
        if (cfg.overrides.bath_frequency) out.bath = *cfg.overrides.bath_frequency;
    }
    if (cfg.overrides.spin_frequency) out.spin = *cfg.overrides.spin_frequency;

    if (!(out.spin > 0.0)) {
        std::ostringstream msg;
        msg << "spin oscillator frequency Omega_s = " << out.spin << " is not positive";
        throw Error("invalid_regime", msg.str());
    }
    if (out.bath && !(*out.bath > 0.0)) {
        std::ostringstream msg;
        msg << "bath oscillator frequency Omega_n = " << *out.bath << " is not positive";
        throw Error("invalid_regime", msg.str());
    }
    return out;
}

} // namespace smm
