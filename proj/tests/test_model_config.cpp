#include <doctest.h>

#include <cmath>

#include "smm/config_io.hpp"
#include "smm/error.hpp"
#include "smm/model_config.hpp"

using namespace smm;

namespace {

// CODATA 2018 values, kept apart from the library constants.
constexpr double c_light = 299792458.0;
constexpr double hbar_codata = 1.054571817e-34;
constexpr double gamma_e_codata = 1.76085963023e11;
constexpr double gamma_p_codata = 2.6752218744e8;

bool throws_code(auto&& f, const std::string& code) {
    try {
        f();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

} // namespace

TEST_CASE("fe8 preset carries the caption values") {
    const auto cfg = load_preset("Fe8");
    CHECK(cfg.preset.spin == 10.0);
    CHECK(cfg.preset.axial_anisotropy == 3.6e10);
    CHECK(cfg.preset.transverse_anisotropy == 6.02e9);
    CHECK(cfg.preset.hyperfine_flip_flop == 1420e6);
    CHECK(cfg.preset.hyperfine_ising == 1420e6);
    CHECK(cfg.bath_spin() == 25.0);
    CHECK(cfg.preset.fundamental_frequency == 6.75e11);
    CHECK(cfg.mode_decay() == 7.5e9);
    CHECK(cfg.magnetic_field == 0.01);
    CHECK(cfg.spin_damping == 0.0);
    CHECK(cfg.spin_dephasing == 1e9);
    CHECK(cfg.spin_photon_coupling == 1e7);
    CHECK(cfg.preset.bath_exchange_xy == 1e3);
    CHECK(cfg.preset.bath_exchange_zz == 1e3);
    CHECK(cfg.bath_damping == 1e6);
    CHECK(cfg.mode_count() == 6);
}

TEST_CASE("mn12 preset carries the caption values") {
    const auto cfg = load_preset("mn12");
    CHECK(cfg.preset.spin == 10.0);
    CHECK(cfg.preset.axial_anisotropy == 8.64e10);
    CHECK(cfg.preset.transverse_anisotropy == 0.0);
    CHECK(cfg.preset.fundamental_frequency == 1.64e12);
    CHECK(cfg.preset.hyperfine_ising == 1420e6);
    CHECK(cfg.bath_spin() == 25.0);
    CHECK(cfg.mode_frequencies()[2] == doctest::Approx(3 * 1.64e12).epsilon(1e-15));
}

TEST_CASE("unknown presets are rejected") {
    CHECK(throws_code([] { load_preset("Xx"); }, "unknown_preset"));
}

TEST_CASE("cavity derivation from geometry") {
    SUBCASE("fe8 cavity") {
        const auto modes = derive_cavity({1.05e-3, 1.33, 1.0, 0.87, 1});
        CHECK(modes.frequencies.size() == 1);
        CHECK(modes.frequencies[0] == doctest::Approx(6.75e11).epsilon(0.01));
        CHECK(modes.decay == doctest::Approx(7.5e9).epsilon(0.01));
        // Independent route through the finesse: F = -2 pi / ln(R1 R2), kappa = pi c / (2 F n L).
        const double finesse = -2.0 * M_PI / std::log(0.87);
        CHECK(modes.decay == doctest::Approx(M_PI * c_light / (2.0 * finesse * 1.33 * 1.05e-3)).epsilon(1e-12));
        CHECK_FALSE(modes.lossless);
    }
    SUBCASE("mn12 cavity") {
        const auto modes = derive_cavity({0.43e-3, 1.33, 1.0, 0.94, 2});
        CHECK(modes.frequencies[0] == doctest::Approx(1.64e12).epsilon(0.01));
        // The geometric estimate is 8.1e9 against the quoted ~7.5e9.
        CHECK(modes.decay == doctest::Approx(7.5e9).epsilon(0.1));
    }
    SUBCASE("doubling the length halves every frequency and the decay") {
        const auto a = derive_cavity({1e-3, 1.4, 1.0, 0.9, 4});
        const auto b = derive_cavity({2e-3, 1.4, 1.0, 0.9, 4});
        for (std::size_t m = 0; m < 4; ++m) CHECK(b.frequencies[m] == doctest::Approx(0.5 * a.frequencies[m]));
        CHECK(b.decay == doctest::Approx(0.5 * a.decay));
    }
    SUBCASE("mode frequencies are exact multiples of the fundamental") {
        const auto modes = derive_cavity({0.77e-3, 1.2, 0.99, 0.8, 9});
        for (std::size_t m = 0; m < 9; ++m) CHECK(modes.frequencies[m] == (m + 1) * modes.frequencies[0]);
    }
    SUBCASE("lossless mirrors are flagged") {
        const auto modes = derive_cavity({1e-3, 1.0, 1.0, 1.0, 1});
        CHECK(modes.lossless);
        CHECK(modes.decay == 0.0);
    }
    SUBCASE("invalid geometry") {
        CHECK(throws_code([] { derive_cavity({-1.0, 1.33, 1.0, 0.9, 1}); }, "invalid_config"));
        CHECK(throws_code([] { derive_cavity({1e-3, 1.33, 0.8, 0.9, 1}); }, "invalid_config"));
    }
}

TEST_CASE("zeeman frequencies") {
    CHECK(zeeman_frequencies(0.0).electron == 0.0);
    CHECK(zeeman_frequencies(0.0).nuclear == 0.0);
    const auto z = zeeman_frequencies(0.01);
    CHECK(z.electron == doctest::Approx(gamma_e_codata * 0.01).epsilon(1e-6));
    CHECK(z.nuclear == doctest::Approx(gamma_p_codata * 0.01).epsilon(1e-6));
    const auto z2 = zeeman_frequencies(0.02);
    CHECK(z2.electron == 2.0 * z.electron);
    CHECK(z2.nuclear == 2.0 * z.nuclear);
}

TEST_CASE("pump amplitude") {
    CHECK(pump_amplitude(0.0, 7.5e9, 6.75e11) == 0.0);
    const double e = pump_amplitude(0.01e-12, 7.5e9, 6.75e11);
    CHECK(e == doctest::Approx(std::sqrt(2.0 * 0.01e-12 * 7.5e9 / (hbar_codata * 6.75e11))).epsilon(1e-6));
    CHECK(e == doctest::Approx(1.45e9).epsilon(0.01));
    // The stationary coherent amplitude E / kappa stays of order 0.1 - 1.
    CHECK(e / 7.5e9 > 0.1);
    CHECK(e / 7.5e9 < 1.0);
    CHECK(pump_amplitude(0.04e-12, 7.5e9, 6.75e11) == doctest::Approx(2.0 * e).epsilon(1e-14));
    CHECK(throws_code([] { pump_amplitude(1e-12, 7.5e9, 0.0); }, "division_by_zero"));
}

TEST_CASE("holstein-primakoff frequencies") {
    const auto cfg = load_preset("fe8");
    const double we = gamma_e_codata * 0.01, wb = gamma_p_codata * 0.01;

    const auto zeroth = hp_frequencies(cfg, ModelOrder::zeroth);
    CHECK(zeroth.spin == doctest::Approx(2.0 * 3.6e10 * 10.0 - we).epsilon(1e-9));
    CHECK(zeroth.spin == doctest::Approx(7.182e11).epsilon(1e-4));
    CHECK_FALSE(zeroth.bath.has_value());

    const auto first = hp_frequencies(cfg, ModelOrder::first);
    CHECK(first.spin == doctest::Approx(7.2e11 + 1.42e9 * 25.0 - we).epsilon(1e-9));
    REQUIRE(first.bath.has_value());
    CHECK(*first.bath == doctest::Approx(1.42e9 * 10 + 2e3 * 25 - 2 * 25 * 1e3 - wb).epsilon(1e-9));
    CHECK(*first.bath == doctest::Approx(1.4197e10).epsilon(1e-4));
    CHECK(hp_frequencies(cfg, ModelOrder::second).spin == first.spin);

    SUBCASE("no hyperfine shift without gamma and bath") {
        auto c = cfg;
        c.preset.hyperfine_ising = 0.0;
        c.preset.bath_size = 0;
        // Omega_n = -omega_b would be rejected; an explicit nuclear Zeeman
        // value keeps the bath frequency positive.
        c.overrides.nuclear_zeeman = -1e6;
        CHECK(hp_frequencies(c, ModelOrder::first).spin == hp_frequencies(c, ModelOrder::zeroth).spin);
        c.overrides.nuclear_zeeman.reset();
        CHECK(throws_code([&] { hp_frequencies(c, ModelOrder::first); }, "invalid_regime"));
    }
    SUBCASE("non-positive spin frequency") {
        auto c = cfg;
        c.overrides.electron_zeeman = 1e12;
        CHECK(throws_code([&] { hp_frequencies(c, ModelOrder::zeroth); }, "invalid_regime"));
    }
    SUBCASE("presets are in the positive regime") {
        for (const auto& name : preset_names()) {
            const auto p = load_preset(name);
            for (auto order : {ModelOrder::zeroth, ModelOrder::first, ModelOrder::second}) {
                const auto hp = hp_frequencies(p, order);
                CHECK(hp.spin > 0.0);
                if (hp.bath) CHECK(*hp.bath > 0.0);
            }
        }
    }
}

TEST_CASE("validation") {
    auto cfg = load_preset("fe8");
    cfg.validate();
    auto bad = cfg;
    bad.preset.spin = 2.3;
    CHECK(throws_code([&] { bad.validate(); }, "invalid_config"));
    bad = cfg;
    bad.bath_damping = -1.0;
    CHECK(throws_code([&] { bad.validate(); }, "invalid_config"));
    bad = cfg;
    bad.geometry.mode_count = 0;
    CHECK(throws_code([&] { bad.validate(); }, "invalid_config"));
    bad = cfg;
    bad.drive.pump_frequencies = {1.0, 2.0};
    CHECK(throws_code([&] { bad.validate(); }, "invalid_config"));
}

TEST_CASE("settings and configuration documents") {
    auto cfg = load_preset("fe8");
    apply_assignment(cfg, "smm.S=3");
    apply_assignment(cfg, "cavity.M=2");
    apply_assignment(cfg, "drive.power_pw=0.1");
    apply_assignment(cfg, "field.omega_e=-2e9");
    CHECK(cfg.preset.spin == 3.0);
    CHECK(cfg.mode_count() == 2);
    CHECK(cfg.drive.power_per_mode == doctest::Approx(0.1e-12));
    CHECK(cfg.zeeman().electron == -2e9);

    CHECK(throws_code([&] { apply_assignment(cfg, "smm.nope=1"); }, "unknown_setting"));
    CHECK(throws_code([&] { apply_assignment(cfg, "smm.S"); }, "bad_setting"));
    CHECK(throws_code([&] { apply_assignment(cfg, "smm.S=abc"); }, "bad_setting"));
    CHECK(throws_code([&] { apply_assignment(cfg, "cavity.M=1.5"); }, "bad_setting"));

    SUBCASE("resolved configuration round-trips") {
        const auto doc = to_json(cfg);
        const auto back = config_from_json(doc);
        CHECK(to_json(back) == doc);
    }
    SUBCASE("section document") {
        const auto c = config_from_json(nlohmann::json::parse(R"({"preset": "mn12", "smm": {"N": 100}, "rates": {"Gamma_b": 2e6}})"));
        CHECK(c.preset.name == "Mn12");
        CHECK(c.bath_spin() == 50.0);
        CHECK(c.bath_damping == 2e6);
    }
    SUBCASE("derived quantities are deterministic") {
        CHECK(to_json(load_preset("fe8")).dump() == to_json(load_preset("fe8")).dump());
    }
}
