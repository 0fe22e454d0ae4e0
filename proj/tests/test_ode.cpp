#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "smm/error.hpp"
#include "smm/ode.hpp"

using namespace smm;

TEST_CASE("harmonic oscillator over many periods") {
    const double w = 2.0 * M_PI;
    auto rhs = [&](double, const Eigen::Vector2d& y, Eigen::Vector2d& dy) {
        dy(0) = y(1);
        dy(1) = -w * w * y(0);
    };
    std::vector<double> times;
    for (int i = 0; i <= 50; ++i) times.push_back(0.2 * i);
    ode::Settings opt;
    opt.absolute_tolerance = 1e-12;
    opt.relative_tolerance = 1e-12;
    std::vector<double> seen;
    double worst = 0.0;
    const auto stats = ode::integrate(ode::dormand_prince_54(), rhs, Eigen::Vector2d(1.0, 0.0), times, opt,
                                      [&](std::size_t i, double t, const Eigen::Vector2d& y) {
                                          CHECK(t == times[i]);
                                          seen.push_back(t);
                                          worst = std::max(worst, std::abs(y(0) - std::cos(w * t)));
                                      });
    CHECK(seen.size() == times.size());
    CHECK(worst < 1e-9);
    CHECK(stats.accepted > 0);
}

TEST_CASE("complex matrix state") {
    const std::complex<double> lambda{-1.0, 10.0};
    auto rhs = [&](double, const Eigen::MatrixXcd& y, Eigen::MatrixXcd& dy) { dy = lambda * y; };
    Eigen::MatrixXcd y0 = Eigen::MatrixXcd::Ones(2, 3);
    const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
    ode::Settings opt;
    opt.absolute_tolerance = 1e-13;
    opt.relative_tolerance = 1e-11;
    ode::integrate(ode::dormand_prince_54(), rhs, y0, times, opt,
                   [&](std::size_t, double t, const Eigen::MatrixXcd& y) {
                       const auto exact = std::exp(lambda * t);
                       CHECK(std::abs(y(1, 2) - exact) < 1e-9);
                   });
}

TEST_CASE("step cap bounds every step") {
    auto rhs = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) { dy.setZero(); };
    ode::Settings opt;
    opt.max_step = 0.1;
    const std::vector<double> times{0.0, 1.0};
    const auto stats = ode::integrate(ode::dormand_prince_54(), rhs, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), times, opt,
                                      [](std::size_t, double, const Eigen::VectorXd&) {});
    CHECK(stats.accepted >= 10);
}

TEST_CASE("failures carry the time") {
    auto rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y; };
    const std::vector<double> bad{0.0, 1.0, 1.0};
    CHECK_THROWS_AS(ode::integrate(ode::dormand_prince_54(), rhs, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), bad, {},
                                   [](std::size_t, double, const Eigen::VectorXd&) {}),
                    Error);

    ode::Settings tight;
    tight.max_steps = 3;
    tight.max_step = 1e-3;
    const std::vector<double> times{0.0, 1.0};
    try {
        ode::integrate(ode::dormand_prince_54(), rhs, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), times, tight,
                       [](std::size_t, double, const Eigen::VectorXd&) {});
        FAIL("expected a step budget failure");
    } catch (const Error& e) {
        CHECK(e.code() == "integrator_failure");
        CHECK(std::string(e.what()).find("t = ") != std::string::npos);
    }

    auto blowup = [](double t, const Eigen::VectorXd&, Eigen::VectorXd& dy) {
        dy.setConstant(t > 0.5 ? std::nan("") : 1.0);
    };
    CHECK_THROWS_AS(ode::integrate(ode::dormand_prince_54(), blowup, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), times, {},
                                   [](std::size_t, double, const Eigen::VectorXd&) {}),
                    Error);
}
