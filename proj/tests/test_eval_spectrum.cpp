#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ifef/error.hpp"
#include "ifef/eval.hpp"
#include "ifef/pde.hpp"

using namespace ifef;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("relative L2 identities") {
    VectorXd e(4);
    e << 1.0, -2.0, 0.5, 3.0;
    CHECK(relative_l2(e, e) == 0.0);
    CHECK(relative_l2(2.0 * e, e) == doctest::Approx(1.0).epsilon(1e-15));
    // Orthogonal perturbation with norm 0.1 |e|.
    VectorXd d(4);
    d << 2.0, 1.0, 0.0, 0.0;
    REQUIRE(d.dot(e) == 0.0);
    const VectorXd eps = 0.1 * e.norm() / d.norm() * d;
    CHECK(relative_l2(e + eps, e) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(relative_l2(-3.0 * (e + eps), -3.0 * e) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK_THROWS_AS(relative_l2(e, VectorXd::Zero(4)), MetricError);
    CHECK_THROWS_AS(relative_l2(e, VectorXd::Ones(3)), MetricError);
}

TEST_CASE("error report carries per-point absolute errors") {
    const VectorXd exact = VectorXd::LinSpaced(5, 1.0, 5.0);
    VectorXd pred = exact;
    pred(2) += 0.5;
    const ErrorReport r = error_report(pred, exact, MatrixXd::Zero(2, 5), {5, 1});
    CHECK(r.abs_error(2) == 0.5);
    CHECK(r.abs_error.sum() == 0.5);
    CHECK(r.relative_l2 == doctest::Approx(0.5 / exact.norm()));
}

TEST_CASE("spectrum calibration: unit sinusoids map to one") {
    SpectrumConfig cfg;
    for (double f : cfg.frequencies) {
        const auto mags = spectrum_magnitudes([f](double x) { return std::sin(2 * kPi * f * x); }, cfg);
        for (std::size_t i = 0; i < cfg.frequencies.size(); ++i) {
            if (cfg.frequencies[i] == f)
                CHECK(std::abs(mags[i] - 1.0) < 1e-10);
            else
                CHECK(mags[i] < 1e-10);
        }
    }
    const auto cosine = spectrum_magnitudes([](double x) { return std::cos(2 * kPi * 5 * x + 0.3); }, cfg);
    CHECK(std::abs(cosine[2] - 1.0) < 1e-10);
}

TEST_CASE("exact multi-sinusoid solution has every normalized magnitude equal to one") {
    SpectrumConfig cfg;
    cfg.amplitudes = {1, 2, 0.5, 1, 3, 1, 1, 0.25, 1, 1};
    const PdeProblem p = make_multisine_convection(1.0, cfg.frequencies, cfg.amplitudes);
    const auto mags = spectrum_magnitudes(
        [&](double x) {
            VectorXd q(2);
            q << x, cfg.time_slice;
            return (*p.exact)(q);
        },
        cfg);
    for (double m : mags) CHECK(std::abs(m - 1.0) < 1e-8);
}

TEST_CASE("Parseval bound: projected energy never exceeds the signal energy") {
    SpectrumConfig cfg;
    const VectorXd x = spectrum_grid(cfg.eval_points);
    VectorXd u(x.size());
    for (Index m = 0; m < x.size(); ++m)
        u(m) = std::sin(2 * kPi * 30 * x(m)) + 0.3 * std::cos(2 * kPi * 7 * x(m)) + x(m) * x(m);
    const auto mags = spectrum_magnitudes(u, cfg);
    double projected = 0.0;
    for (double m : mags) projected += 0.5 * m * m;  // each unit-amplitude mode carries energy 1/2 per sample
    CHECK(projected <= u.squaredNorm() / cfg.eval_points + 1e-12);
}

TEST_CASE("aliasing and malformed spectrum configurations are rejected") {
    SpectrumConfig cfg;
    cfg.frequencies.back() = 256;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SpectrumConfig{};
    cfg.amplitudes.pop_back();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SpectrumConfig{};
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.d_sweep == std::vector<Index>{400, 800, 1600, 2400, 3200, 4000});
    CHECK_THROWS_AS(spectrum_magnitudes(VectorXd::Zero(100), cfg), ConfigError);
}
