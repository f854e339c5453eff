#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fd.hpp"
#include "ifef/elementwise.hpp"
#include "ifef/error.hpp"
#include "ifef/features.hpp"
#include "ifef/rng.hpp"

using namespace ifef;

namespace {

MatrixXd random_points(int dims, Index n, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd x(dims, n);
    for (Index j = 0; j < n; ++j)
        for (int i = 0; i < dims; ++i) x(i, j) = rng.uniform(-1.0, 1.0);
    return x;
}

FeatureBasis small_basis(bool with_rff, std::uint64_t seed = 3) {
    FeatureBasis basis;
    basis.params = NetworkParams::xavier(2, {5, 4}, false, seed);
    if (with_rff) basis.rff = sample_rff(6, 4, 1.0, seed + 1);
    return basis;
}

/// psi_k(x) value only, for finite differences.
double feature_value(const FeatureBasis& basis, const VectorXd& x, Index k) {
    return forward_features(basis, x, 0).value()(k, 0);
}

}  // namespace

TEST_CASE("hyperdual arithmetic matches closed-form derivatives") {
    const double x0 = 0.37;
    const HyperDual x = HyperDual::variable(x0);
    const HyperDual y = tanh(sin(x) * x) / (exp(x) + cos(x));
    const auto f = [](double t) { return std::tanh(std::sin(t) * t) / (std::exp(t) + std::cos(t)); };
    const double h = 1e-4;
    CHECK(y.v == doctest::Approx(f(x0)).epsilon(1e-14));
    CHECK(y.d == doctest::Approx((f(x0 + h) - f(x0 - h)) / (2 * h)).epsilon(1e-7));
    CHECK(y.dd == doctest::Approx((f(x0 + h) - 2 * f(x0) + f(x0 - h)) / (h * h)).epsilon(1e-5));
}

TEST_CASE("vectorized tanh, cos and sin match the standard library") {
    Rng rng(6);
    MatrixXd x(50, 40);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * std::pow(10.0, rng.uniform(-9.0, 2.5));
    x(0, 0) = 0.0;
    x(1, 0) = 40.0;
    x(2, 0) = -800.0;
    const MatrixXd t = fast_tanh(x);
    MatrixXd c, s;
    fast_sincos(x, c, s);
    for (Index i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        CHECK(std::abs(t.data()[i] - std::tanh(v)) < 1e-15);
        CHECK(std::abs(c.data()[i] - std::cos(v)) < 1e-15);
        CHECK(std::abs(s.data()[i] - std::sin(v)) < 1e-15);
    }
}

TEST_CASE("feature jets agree with finite differences") {
    for (bool with_rff : {false, true}) {
        const FeatureBasis basis = small_basis(with_rff);
        const MatrixXd pts = random_points(2, 4, 11);
        const JetBatch psi = forward_features(basis, pts, 2);
        CHECK(psi.rows() == basis.feature_count());
        for (Index j = 0; j < pts.cols(); ++j) {
            const VectorXd x = pts.col(j);
            for (Index k = 0; k < psi.rows(); ++k) {
                const auto f = [&](const VectorXd& y) { return feature_value(basis, y, k); };
                CHECK(psi.value()(k, j) == doctest::Approx(f(x)).epsilon(1e-14));
                for (int i = 0; i < 2; ++i) {
                    CHECK(std::abs(psi.grad(i)(k, j) - fd::partial(f, x, i)) < 1e-6);
                    CHECK(std::abs(psi.diag2(i)(k, j) - fd::second(f, x, i)) < 1e-4);
                }
            }
        }
    }
}

TEST_CASE("lower-order jets are prefixes of higher-order jets") {
    const FeatureBasis basis = small_basis(true);
    const MatrixXd pts = random_points(2, 7, 5);
    const JetBatch j2 = forward_features(basis, pts, 2);
    const JetBatch j1 = forward_features(basis, pts, 1);
    const JetBatch j0 = forward_features(basis, pts, 0);
    CHECK((j2.value() - j0.value()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((j2.grad(1) - j1.grad(1)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single-point jets match the batched pass") {
    const FeatureBasis basis = small_basis(true);
    const MatrixXd pts = random_points(2, 3, 8);
    const JetBatch psi = forward_features(basis, pts, 2);
    const std::vector<Jet2> jets = psi_jets(basis, pts.col(2), 2);
    for (Index k = 0; k < psi.rows(); ++k) {
        CHECK(jets[k].value == doctest::Approx(psi.value()(k, 2)).epsilon(1e-13));
        CHECK(jets[k].diag2(0) == doctest::Approx(psi.diag2(0)(k, 2)).epsilon(1e-13));
    }
}

TEST_CASE("parameter gradients of value, gradient and Laplacian terms") {
    for (bool with_rff : {false, true}) {
        FeatureBasis basis = small_basis(with_rff, 21);
        const MatrixXd pts = random_points(2, 5, 9);
        const JetBatch probe = forward_features(basis, pts, 2);
        // Scalar S = sum of random weights times every jet entry (value, grads, diagonals).
        Rng rng(77);
        MatrixXd weights(probe.rows(), probe.data().cols());
        for (Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.normal();

        const auto S = [&](const VectorXd& flat) {
            FeatureBasis b = basis;
            b.params.assign(flat);
            return weights.cwiseProduct(forward_features(b, pts, 2).data()).sum();
        };
        FeatureCache cache;
        forward_features(basis, pts, 2, &cache);
        JetBatch adj(probe.rows(), probe.points(), 2, 2);
        adj.data() = weights;
        const VectorXd analytic = backward_features(basis, cache, adj);
        const VectorXd numeric = fd::gradient(S, basis.params.flatten(), 1e-6);
        CHECK(analytic.size() == basis.params.hidden_parameter_count());
        CHECK(fd::rel_err(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("parameter flattening round-trips in layer-major order") {
    NetworkParams p = NetworkParams::xavier(2, {3, 4}, true, 1);
    const VectorXd flat = p.flatten();
    CHECK(flat.size() == p.parameter_count());
    CHECK(p.parameter_count() == (2 * 3 + 3) + (3 * 4 + 4) + 4);
    CHECK(flat(1) == p.layers[0].weight(0, 1));
    CHECK(flat(6) == p.layers[0].bias(0));
    CHECK(flat(flat.size() - 1) == (*p.readout)(3));
    NetworkParams q = NetworkParams::xavier(2, {3, 4}, true, 2);
    q.assign(flat);
    CHECK((q.flatten() - flat).norm() == 0.0);
    CHECK_THROWS_AS(q.assign(flat.head(5)), ConfigError);
}

TEST_CASE("xavier initialization is deterministic and zero-biased") {
    const NetworkParams a = NetworkParams::xavier(2, {64, 64}, false, 42);
    const NetworkParams b = NetworkParams::xavier(2, {64, 64}, false, 42);
    const NetworkParams c = NetworkParams::xavier(2, {64, 64}, false, 43);
    CHECK((a.flatten() - b.flatten()).norm() == 0.0);
    CHECK((a.flatten() - c.flatten()).norm() > 0.0);
    CHECK(a.layers[1].bias.norm() == 0.0);
    const double var = a.layers[1].weight.squaredNorm() / a.layers[1].weight.size();
    CHECK(var == doctest::Approx(2.0 / 128.0).epsilon(0.1));
}

TEST_CASE("fourier matrix draws are nested and seeded") {
    const RffMatrix small = sample_rff(400, 8, 2.0, 9);
    const RffMatrix large = sample_rff(1600, 8, 2.0, 9);
    CHECK((large.B.topRows(400) - small.B).cwiseAbs().maxCoeff() == 0.0);
    CHECK((sample_rff(400, 8, 2.0, 10).B - small.B).cwiseAbs().maxCoeff() > 0.0);
    const double sd = std::sqrt(large.B.squaredNorm() / large.B.size());
    CHECK(sd == doctest::Approx(2.0).epsilon(0.03));
    CHECK_THROWS_AS(sample_rff(0, 8, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(sample_rff(4, 8, -1.0, 1), ConfigError);
}

TEST_CASE("feature norm identity: |psi|^2 = 1 for the fourier extension") {
    const FeatureBasis basis = small_basis(true);
    const JetBatch psi = forward_features(basis, random_points(2, 20, 4), 0);
    for (Index j = 0; j < psi.points(); ++j)
        CHECK(psi.value().col(j).squaredNorm() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("non-finite activations name the offending point") {
    FeatureBasis basis = small_basis(true);
    MatrixXd pts = random_points(2, 4, 1);
    pts(1, 2) = std::numeric_limits<double>::quiet_NaN();
    try {
        forward_features(basis, pts, 1);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.index() == 2);
    }
    JetBatch jets(3, 5, 2, 1);
    jets.grad(1)(0, 4) = std::numeric_limits<double>::infinity();
    try {
        require_finite(jets, "features");
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.index() == 4);
    }
}

TEST_CASE("layer shape mismatch is a configuration error") {
    NetworkParams p = NetworkParams::xavier(2, {3, 4}, false, 1);
    p.layers[1].weight.resize(4, 2);
    CHECK_THROWS_AS(p.validate(), ConfigError);
}
