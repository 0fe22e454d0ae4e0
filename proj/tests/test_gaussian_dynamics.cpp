#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "smm/cv_entanglement.hpp"
#include "smm/error.hpp"
#include "smm/gaussian_dynamics.hpp"
#include "smm/mean_field.hpp"

using namespace smm;

namespace {

// One mode at omega = 1, kappa = 0.1, sqrt(2S) G = 0.2, Omega_s = 2, E S = 0.3.
PhysicalConfig toy_config() {
    PhysicalConfig cfg = load_preset("fe8");
    cfg.geometry.mode_count = 1;
    cfg.preset.fundamental_frequency = 1.0;
    cfg.overrides.mode_decay = 0.1;
    cfg.preset.spin = 2.0;
    cfg.spin_photon_coupling = 0.1;
    cfg.preset.transverse_anisotropy = 0.15;
    cfg.overrides.spin_frequency = 2.0;
    cfg.spin_damping = 0.0;
    cfg.drive.power_per_mode = 0.0;
    return cfg;
}

std::vector<double> linspace(double end, int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = end * i / (n - 1);
    return t;
}

// Van Loan: exp([[-K, D], [0, K^T]] t) holds e^{K^T t} and the noise
// integral int_0^t e^{Ks} D e^{K^T s} ds = F22^T F12.
Eigen::MatrixXd exponential_oracle(const Eigen::MatrixXd& k, const Eigen::MatrixXd& d, const Eigen::MatrixXd& v0,
                                   double t) {
    const auto n = k.rows();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    c.topLeftCorner(n, n) = -k * t;
    c.topRightCorner(n, n) = d * t;
    c.bottomRightCorner(n, n) = k.transpose() * t;
    const Eigen::MatrixXd f = c.exp();
    const Eigen::MatrixXd w = f.bottomRightCorner(n, n).transpose();   // e^{Kt}
    return w * v0 * w.transpose() + w * f.topRightCorner(n, n);
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST_CASE("zeroth-order drift for the hand-assembled example") {
    const auto model = build_drift_zeroth(toy_config());
    Eigen::Matrix4d expected;
    expected << -0.1, 1, 0, 0,
                -1, -0.1, -0.2, 0,
                0, 0, 0, 1.4,
                -0.2, 0, -2.6, 0;
    CHECK((model.drift - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(model.dimension() == 4);
    CHECK(model.diffusion(0) == 0.1);
    CHECK(model.diffusion(1) == 0.1);
    CHECK(model.diffusion(2) == 0.0);
    CHECK(model.layout() == std::vector<std::string>{"x1", "y1", "xs", "ys"});
}

TEST_CASE("zeroth-order block structure") {
    auto cfg = load_preset("fe8");
    const auto model = build_drift_zeroth(cfg);
    REQUIRE(model.dimension() == 14);
    const double g = std::sqrt(2.0 * 10.0) * 1e7;
    const int ys = model.spin_index() + 1;
    for (int m = 0; m < 6; ++m) {
        CHECK(model.drift(ys, 2 * m) == doctest::Approx(-g));
        CHECK(model.drift(2 * m + 1, model.spin_index()) == doctest::Approx(-g));
        for (int other = 0; other < 6; ++other)
            if (other != m) CHECK(model.drift.block(2 * m, 2 * other, 2, 2).isZero());
    }
    cfg.spin_photon_coupling = 0.0;
    const auto free = build_drift_zeroth(cfg);
    CHECK(free.drift.block(0, 12, 12, 2).isZero());
    CHECK(free.drift.block(12, 0, 2, 12).isZero());
}

TEST_CASE("first-order bath blocks") {
    auto cfg = load_preset("fe8");
    const auto model = build_drift_first(cfg);
    REQUIRE(model.dimension() == 16);
    const int s = model.spin_index(), b = model.bath_index();
    const double c = 1.42e9 * std::sqrt(25.0 * 10.0);
    CHECK(c == doctest::Approx(2.245e10).epsilon(1e-3));
    CHECK(model.drift(s, b + 1) == doctest::Approx(c));
    CHECK(model.drift(s + 1, b) == doctest::Approx(-c));
    CHECK(model.drift(b, s + 1) == doctest::Approx(c));
    CHECK(model.drift(b + 1, s) == doctest::Approx(-c));
    const double omega_n = *hp_frequencies(cfg, ModelOrder::first).bath;
    CHECK(model.drift(b, b + 1) == doctest::Approx(omega_n));
    CHECK(model.drift(b + 1, b) == doctest::Approx(-omega_n));
    CHECK(model.drift(b, b) == -cfg.bath_damping);
    CHECK(model.diffusion(b) == cfg.bath_damping);
    const double omega_s = hp_frequencies(cfg, ModelOrder::first).spin;
    const double es = 2.0 * cfg.preset.transverse_anisotropy * cfg.preset.spin;
    CHECK(model.drift(s, s + 1) == doctest::Approx(omega_s - es));
    CHECK(model.drift(s + 1, s) == doctest::Approx(-omega_s - es));

    SUBCASE("alpha = 0 decouples the bath") {
        cfg.preset.hyperfine_flip_flop = 0.0;
        const auto m = build_drift_first(cfg);
        CHECK(m.drift.block(s, b, 2, 2).isZero());
        CHECK(m.drift.block(b, s, 2, 2).isZero());
        CHECK(m.drift.topLeftCorner(14, 14) == build_drift_zeroth([&] {
                  auto z = cfg;
                  z.overrides.spin_frequency = omega_s;
                  return z;
              }()).drift);
    }
}

TEST_CASE("second-order drift") {
    auto cfg = load_preset("fe8");

    SUBCASE("no Kerr terms reproduces the first order") {
        cfg.preset.axial_anisotropy = 1e-30;    // K1 -> 0 while keeping D > 0 valid
        cfg.preset.hyperfine_ising = 0.0;
        const auto reference = hp_frequencies(load_preset("fe8"), ModelOrder::first);
        cfg.overrides.spin_frequency = reference.spin;
        cfg.overrides.bath_frequency = *reference.bath;
        const auto means = solve_mean_amplitudes(cfg);
        const auto second = build_drift_second(cfg, means);
        const auto first = build_drift_first(cfg);
        CHECK((second.drift - first.drift).cwiseAbs().maxCoeff() <= 1e-12 * first.drift.cwiseAbs().maxCoeff());
        CHECK(second.pump_amplitudes.empty());
    }
    SUBCASE("zero drive only shifts the spin frequency by K1") {
        cfg.drive.power_per_mode = 0.0;
        const auto means = solve_mean_amplitudes(cfg);
        CHECK(std::abs(means.spin) == 0.0);
        const auto second = build_drift_second(cfg, means);
        auto shifted = cfg;
        shifted.overrides.spin_frequency = hp_frequencies(cfg, ModelOrder::first).spin - cfg.preset.axial_anisotropy;
        const auto expected = build_drift_first(shifted);
        CHECK((second.drift - expected.drift).cwiseAbs().maxCoeff() <= 1e-15 * expected.drift.cwiseAbs().maxCoeff());
    }
    SUBCASE("fe8 defaults: finite and stable") {
        const auto means = solve_mean_amplitudes(cfg);
        const auto model = build_drift_second(cfg, means);
        CHECK(model.dimension() == 16);
        CHECK(model.drift.allFinite());
        CHECK(stability_check(model).stable);

        // Entries that depend on the means, with <s> = i y and <s>^2 = -y^2.
        const double y = means.spin.imag();
        const double k1 = cfg.preset.axial_anisotropy, k2 = cfg.preset.hyperfine_ising;
        const double omega_nl = hp_frequencies(cfg, ModelOrder::first).spin - k1 - 4 * k1 * y * y -
                                k2 * std::norm(means.bath);
        const double es = 2.0 * cfg.preset.transverse_anisotropy * cfg.preset.spin;
        const int s = model.spin_index(), b = model.bath_index();
        CHECK(model.drift(s, s + 1) == doctest::Approx(omega_nl - 2 * k1 * y * y - es));
        CHECK(model.drift(s + 1, s) == doctest::Approx(-omega_nl - 2 * k1 * y * y - es));
        const double omega_n = *hp_frequencies(cfg, ModelOrder::first).bath;
        CHECK(model.drift(b, b + 1) == doctest::Approx(omega_n + k2 * y * y));
        CHECK(model.drift(b + 1, b) == doctest::Approx(-omega_n + k2 * y * y));
    }
    SUBCASE("stale means are rejected") {
        auto means = solve_mean_amplitudes(cfg);
        means.spin *= 1.01;
        CHECK_THROWS_AS(build_drift_second(cfg, means), Error);
        try {
            build_drift_second(cfg, means);
        } catch (const Error& e) {
            CHECK(e.code() == "stale_linearization");
        }
    }
}

TEST_CASE("propagation against closed forms") {
    SUBCASE("frozen dynamics") {
        DriftModel m;
        m.mode_count = 1;
        m.drift = Eigen::MatrixXd::Zero(4, 4);
        m.diffusion = Eigen::VectorXd::Zero(4);
        Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(4, 4);
        v0(0, 1) = v0(1, 0) = 0.3;
        const auto times = linspace(5.0, 11);
        for (const auto& s : propagate_covariance(m, {v0, 0.0}, times)) CHECK(s.v == v0);
    }
    SUBCASE("decoupled mode") {
        auto cfg = toy_config();
        cfg.spin_photon_coupling = 0.0;
        const auto model = build_drift_zeroth(cfg);
        const auto times = linspace(30.0, 61);
        for (const auto& s : propagate_covariance(model, vacuum_state(model), times))
            CHECK((s.v.topLeftCorner(2, 2) - 0.5 * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

        const Eigen::MatrixXd v0 = Eigen::MatrixXd::Identity(4, 4);
        for (const auto& s : propagate_covariance(model, {v0, 0.0}, times)) {
            const double exact = 0.5 + 0.5 * std::exp(-2.0 * 0.1 * s.time);
            CHECK(s.v(0, 0) == doctest::Approx(exact).epsilon(1e-8));
            CHECK(s.v(1, 1) == doctest::Approx(exact).epsilon(1e-8));
            CHECK(std::abs(s.v(0, 1)) < 1e-10);
        }
    }
    SUBCASE("driven mean amplitude") {
        auto cfg = toy_config();
        cfg.spin_photon_coupling = 0.0;
        cfg.overrides.drive_amplitude = 0.05;
        const auto model = build_drift_zeroth(cfg);
        const auto times = linspace(40.0, 81);
        const auto u = propagate_means(model, Eigen::VectorXd::Zero(4), times);
        const auto v = propagate_covariance(model, vacuum_state(model), times);
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double amp = 0.05 / 0.1 * (1.0 - std::exp(-0.1 * times[i]));
            CHECK(mode_occupation(u[i], v[i].v, 1) == doctest::Approx(amp * amp).epsilon(1e-7));
        }
    }
}

TEST_CASE("integrator against the matrix exponential") {
    SUBCASE("toy model") {
        auto cfg = toy_config();
        cfg.spin_damping = 0.05;
        const auto model = build_drift_zeroth(cfg);
        const auto times = linspace(25.0, 26);
        const auto states = propagate_covariance(model, vacuum_state(model), times);
        for (const auto& s : states) {
            const auto exact = exponential_oracle(model.drift, model.diffusion_matrix(), vacuum_state(model).v, s.time);
            CHECK(relative_error(s.v, exact) <= 1e-6);
        }
    }
    for (auto order : {ModelOrder::zeroth, ModelOrder::first, ModelOrder::second}) {
        CAPTURE(to_string(order));
        auto cfg = load_preset("fe8");
        cfg.geometry.mode_count = 2;
        const auto model = build_drift(cfg, order);
        const auto times = linspace(40e-12, 9);
        const auto states = propagate_covariance(model, vacuum_state(model), times);
        for (const auto& s : states) {
            const auto exact = exponential_oracle(model.drift, model.diffusion_matrix(), vacuum_state(model).v, s.time);
            CHECK(relative_error(s.v, exact) <= 1e-6);
        }
    }
}

TEST_CASE("trajectory invariants for every order") {
    for (auto order : {ModelOrder::zeroth, ModelOrder::first, ModelOrder::second}) {
        CAPTURE(to_string(order));
        const auto cfg = load_preset("fe8");
        const auto model = build_drift(cfg, order);
        const auto times = linspace(0.2e-9, 201);
        propagate_covariance(model, vacuum_state(model), times, [&](const CovarianceState& s) {
            const double scale = s.v.norm();
            CHECK((s.v - s.v.transpose()).norm() <= 1e-12 * scale);
            CHECK(symplectic_eigenvalues(s.v).front() >= 0.5 - 1e-9);
        });
    }
}

TEST_CASE("covariance is independent of the drive at orders 0 and 1") {
    for (auto order : {ModelOrder::zeroth, ModelOrder::first}) {
        auto low = load_preset("fe8");
        auto high = low;
        high.drive.power_per_mode = 1e-12;
        const auto times = linspace(0.05e-9, 51);
        const auto a = build_drift(low, order), b = build_drift(high, order);
        const auto va = propagate_covariance(a, vacuum_state(a), times);
        const auto vb = propagate_covariance(b, vacuum_state(b), times);
        for (std::size_t i = 0; i < va.size(); ++i) CHECK(va[i].v == vb[i].v);
    }
}

TEST_CASE("stability and steady state") {
    CHECK(stability_check(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(3, 3))).stable);
    CHECK(stability_check(Eigen::MatrixXd(-Eigen::MatrixXd::Identity(3, 3))).abscissa == doctest::Approx(-1.0));
    Eigen::MatrixXd rotation(2, 2);
    rotation << 0, 1, -1, 0;
    const auto r = stability_check(rotation);
    CHECK_FALSE(r.stable);
    CHECK(std::abs(r.abscissa) < 1e-15);

    SUBCASE("single damped mode relaxes to vacuum") {
        auto cfg = toy_config();
        cfg.spin_photon_coupling = 0.0;
        cfg.spin_damping = 0.3;
        cfg.preset.transverse_anisotropy = 0.0;   // otherwise the spin block squeezes
        const auto ss = steady_state_covariance(build_drift_zeroth(cfg));
        CHECK((ss.v - 0.5 * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("undamped, uncoupled spin has no steady state") {
        auto cfg = toy_config();
        cfg.spin_photon_coupling = 0.0;
        const auto model = build_drift_zeroth(cfg);
        CHECK_FALSE(stability_check(model).stable);
        try {
            steady_state_covariance(model);
            FAIL("expected no_steady_state");
        } catch (const Error& e) {
            CHECK(e.code() == "no_steady_state");
        }
    }
    SUBCASE("fe8 zeroth order with an undamped spin is only marginally stable") {
        const auto model = build_drift_zeroth(load_preset("fe8"));
        const auto s = stability_check(model);
        // The cavity loss leaks into the spin through G: the abscissa is
        // negative but six orders below kappa.
        CHECK(s.abscissa < 0.0);
        CHECK(std::abs(s.abscissa) < 1e-5 * model.mode_decay);
    }
    SUBCASE("fe8 first order steady state") {
        const auto model = build_drift_first(load_preset("fe8"));
        const auto ss = steady_state_covariance(model);
        CHECK((ss.v - ss.v.transpose()).norm() <= 1e-12 * ss.v.norm());
        CHECK(physicality_check(ss.v));
        const Eigen::MatrixXd residual = model.drift * ss.v + ss.v * model.drift.transpose() + model.diffusion_matrix();
        CHECK(residual.norm() <= 1e-10 * model.diffusion.norm());
    }
}

TEST_CASE("unphysical initial covariance is reported with its time") {
    auto cfg = toy_config();
    const auto model = build_drift_zeroth(cfg);
    const Eigen::MatrixXd v0 = 0.4 * Eigen::MatrixXd::Identity(4, 4);
    try {
        propagate_covariance(model, {v0, 0.0}, linspace(1.0, 3));
        FAIL("expected unphysical_state");
    } catch (const Error& e) {
        CHECK(e.code() == "unphysical_state");
        CHECK(std::string(e.what()).find("t = 0") != std::string::npos);
    }
}

TEST_CASE("covariance csv") {
    const auto model = build_drift_zeroth(toy_config());
    const auto states = propagate_covariance(model, vacuum_state(model), linspace(1.0, 3));
    std::ostringstream out;
    write_covariance_csv(out, model, states);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("t,V_x1_x1,V_x1_y1,V_x1_xs,V_x1_ys,V_y1_y1", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 3);
}
