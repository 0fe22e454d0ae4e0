#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smm {

// Frequencies and rates are angular (rad/s) throughout, times in seconds.
namespace units {
inline constexpr double speed_of_light = 299792458.0;       // m/s
inline constexpr double hbar = 1.054572e-34;                // J s
inline constexpr double electron_gyromagnetic = 1.760859e11; // rad s^-1 T^-1
inline constexpr double proton_gyromagnetic = 2.675222e8;    // rad s^-1 T^-1
inline constexpr double picowatt = 1e-12;
inline constexpr double nanosecond = 1e-9;
} // namespace units

enum class ModelOrder { zeroth, first, second };

std::string to_string(ModelOrder order);
ModelOrder parse_model_order(std::string_view text);

// Giant-spin and nuclear-bath constants of one molecule.
struct SmmPreset {
    std::string name;
    double spin = 10.0;                  // S
    double axial_anisotropy = 0.0;       // D (also the self-Kerr constant K1)
    double transverse_anisotropy = 0.0;  // E
    double hyperfine_flip_flop = 0.0;    // alpha
    double hyperfine_ising = 0.0;        // gamma (also the cross-Kerr constant K2)
    double bath_exchange_xy = 1e3;       // beta
    double bath_exchange_zz = 1e3;       // Delta
    int bath_size = 50;                  // N, collective bath spin J = N/2
    double fundamental_frequency = 0.0;  // cavity fundamental tuned to this molecule; 0 = derive from geometry
};

struct CavityGeometry {
    double length = 1.05e-3;     // m
    double refractive_index = 1.33;
    double reflectivity_1 = 1.0;
    double reflectivity_2 = 0.87;
    int mode_count = 6;
};

struct DriveConfig {
    double power_per_mode = 0.01 * units::picowatt;  // W
    std::vector<double> pump_frequencies;           // empty = resonant (Lambda_m = omega_m)
};

// Explicit values that replace a derived quantity when set.
struct DerivedOverrides {
    std::optional<double> mode_decay;
    std::optional<double> electron_zeeman;
    std::optional<double> nuclear_zeeman;
    std::optional<double> drive_amplitude;
    std::optional<double> spin_frequency;
    std::optional<double> bath_frequency;
};

struct CavityModes {
    std::vector<double> frequencies;
    double decay = 0.0;
    bool lossless = false;  // R1 R2 = 1: no steady state can be expected
};

struct ZeemanFrequencies {
    double electron = 0.0;
    double nuclear = 0.0;
};

struct HpFrequencies {
    double spin = 0.0;                 // Omega_s
    std::optional<double> bath;        // Omega_n, absent at zeroth order
};

struct PhysicalConfig {
    SmmPreset preset;
    CavityGeometry geometry;
    DriveConfig drive;
    double magnetic_field = 0.01;       // T
    double spin_damping = 0.0;          // Gamma_s
    double bath_damping = 1e6;          // Gamma_b
    double spin_dephasing = 1e9;        // kappa_s (density-matrix engine)
    double spin_photon_coupling = 1e7;  // G
    DerivedOverrides overrides;

    int mode_count() const { return geometry.mode_count; }
    double bath_spin() const { return 0.5 * preset.bath_size; }

    std::vector<double> mode_frequencies() const;
    double mode_decay() const;
    ZeemanFrequencies zeeman() const;
    std::vector<double> pump_frequencies() const;
    std::vector<double> pump_amplitudes() const;

    // Throws smm::Error("invalid_config") on the first violated invariant.
    void validate() const;
};

PhysicalConfig load_preset(std::string_view name);
std::vector<std::string> preset_names();

CavityModes derive_cavity(const CavityGeometry& geometry);
ZeemanFrequencies zeeman_frequencies(double magnetic_field);

// E = sqrt(2 (P / hbar) kappa / Lambda), in rad/s.
double pump_amplitude(double power, double decay, double pump_frequency);

// Holstein-Primakoff oscillator frequencies for the requested model order.
// Throws smm::Error("invalid_regime") when a required frequency is not positive.
HpFrequencies hp_frequencies(const PhysicalConfig& cfg, ModelOrder order);

} // namespace smm
