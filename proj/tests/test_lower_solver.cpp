#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fd.hpp"
#include "ifef/error.hpp"
#include "ifef/qp.hpp"
#include "ifef/rng.hpp"

using namespace ifef;

namespace {

MatrixXd gaussian(Index r, Index c, Rng& rng) {
    MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

struct Fixture {
    MatrixXd B, R;
    VectorXd G, F;
    double lambda = 0.3;

    explicit Fixture(Index nb = 30, Index nf = 60, Index dim = 12, std::uint64_t seed = 1) {
        Rng rng(seed);
        B = gaussian(nb, dim, rng);
        R = gaussian(nf, dim, rng);
        G = gaussian(nb, 1, rng);
        F = gaussian(nf, 1, rng);
    }
};

}  // namespace

TEST_CASE("quadratic form equals the sampled loss") {
    const Fixture f;
    const QpSystem sys = assemble(f.B, f.G, f.R, f.F, f.lambda);
    CHECK((sys.Q - sys.Q.transpose()).norm() == 0.0);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const VectorXd theta = gaussian(f.B.cols(), 1, rng);
        const double direct = sampled_loss(f.B, f.G, f.R, f.F, f.lambda, theta);
        CHECK(sys.loss(theta) == doctest::Approx(direct).epsilon(1e-12));
    }
    CHECK(sys.b == doctest::Approx(sampled_loss(f.B, f.G, f.R, f.F, f.lambda, VectorXd::Zero(12))).epsilon(1e-14));
}

TEST_CASE("closed-form minimizer matches a weighted least-squares oracle") {
    const Fixture f;
    const QpSystem sys = assemble(f.B, f.G, f.R, f.F, f.lambda);
    const VectorXd theta = solve_regularized(sys, 0.0);
    MatrixXd A(f.B.rows() + f.R.rows(), f.B.cols());
    VectorXd y(A.rows());
    const double sb = std::sqrt(1.0 / f.B.rows()), sf = std::sqrt(f.lambda / f.R.rows());
    A << sb * f.B, sf * f.R;
    y << sb * f.G, sf * f.F;
    const VectorXd oracle = A.colPivHouseholderQr().solve(y);
    CHECK(fd::rel_err(theta, oracle) < 1e-10);
    CHECK((sys.Q * theta + sys.c).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("closed form agrees with long gradient descent") {
    const Fixture f(20, 40, 6, 7);
    const QpSystem sys = assemble(f.B, f.G, f.R, f.F, f.lambda);
    const double gamma = 1e-3;
    const VectorXd theta = solve_regularized(sys, gamma);
    const double L = (sys.Q.eigenvalues().real().maxCoeff() + gamma);
    VectorXd it = VectorXd::Zero(6);
    for (int k = 0; k < 200000; ++k) it -= (1.0 / L) * (sys.Q * it + gamma * it + sys.c);
    CHECK(fd::rel_err(it, theta) < 1e-6);
}

TEST_CASE("minimizer never increases the loss (gamma = 0)") {
    const Fixture f;
    const QpSystem sys = assemble(f.B, f.G, f.R, f.F, f.lambda);
    const VectorXd theta = solve_regularized(sys, 0.0);
    const double best = sampled_loss(f.B, f.G, f.R, f.F, f.lambda, theta);
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const VectorXd other = theta + gaussian(12, 1, rng) * std::pow(10.0, -trial % 6);
        CHECK(best <= sampled_loss(f.B, f.G, f.R, f.F, f.lambda, other) + 1e-15);
    }
}

TEST_CASE("rank guard and singular systems") {
    const Fixture small(3, 4, 12, 2);  // 7 rows < 12 unknowns
    const QpSystem sys = assemble(small.B, small.G, small.R, small.F, 1.0);
    CHECK(rank_guard(sys, 0.0).status == RankCheck::Status::Singular);
    CHECK(rank_guard(sys, 1e-7).status == RankCheck::Status::Underdetermined);
    CHECK(!rank_guard(sys, 1e-7).message.empty());
    CHECK(rank_guard(100, 12, 0.0).status == RankCheck::Status::Ok);
    CHECK_THROWS_AS(solve_regularized(sys, 0.0), SingularSystemError);
    const VectorXd theta = solve_regularized(sys, 1e-7);
    CHECK(theta.allFinite());

    // Enough rows but a rank-deficient design: duplicated columns.
    Fixture dup(40, 40, 6, 3);
    dup.B.col(5) = dup.B.col(4);
    dup.R.col(5) = dup.R.col(4);
    const QpSystem deficient = assemble(dup.B, dup.G, dup.R, dup.F, 1.0);
    try {
        RegularizedFactor factor(deficient.Q, 0.0);
        // LLT may succeed on round-off; the residual guard then has the last word.
        (void)factor;
    } catch (const SingularSystemError& e) {
        CHECK(e.smallest_pivot() < 1e-10);
    }
    MatrixXd zero = MatrixXd::Zero(4, 4);
    CHECK_THROWS_AS(RegularizedFactor(zero, 0.0), SingularSystemError);
    CHECK_THROWS_AS(RegularizedFactor(zero, -1.0), ConfigError);
    CHECK_THROWS_AS(assemble(small.B, small.G, small.R, small.F, 0.0), ConfigError);
}

TEST_CASE("nonlinear loss gradient matches finite differences") {
    Rng rng(5);
    const Index nb = 10, nf = 15, dim = 7;
    const MatrixXd B = gaussian(nb, dim, rng);
    const VectorXd G = gaussian(nb, 1, rng);
    NonlinearDesign d;
    d.value = gaussian(nf, dim, rng);
    d.dt = gaussian(nf, dim, rng);
    d.dx = gaussian(nf, dim, rng);
    d.dxx = gaussian(nf, dim, rng);
    d.source = gaussian(nf, 1, rng);
    d.op.nu = 0.05;
    const VectorXd theta = gaussian(dim, 1, rng);
    VectorXd g;
    nonlinear_loss(B, G, d, 0.7, theta, &g);
    const auto f = [&](const VectorXd& t) { return nonlinear_loss(B, G, d, 0.7, t); };
    CHECK(fd::rel_err(g, fd::gradient(f, theta, 1e-6)) < 1e-7);

    SUBCASE("kappa = 0 reduces to the linear closed form") {
        d.op.nonlinearity = 0.0;
        const QpSystem sys = assemble(B, G, MatrixXd(d.dt - d.op.nu * d.dxx), d.source, 0.7);
        const VectorXd closed = solve_regularized(sys, 0.0);
        const double l_closed = nonlinear_loss(B, G, d, 0.7, closed);
        CHECK(l_closed == doctest::Approx(sampled_loss(B, G, MatrixXd(d.dt - d.op.nu * d.dxx), d.source, 0.7, closed)).epsilon(1e-12));
        std::vector<double> trace;
        const VectorXd it = nonlinear_lower_solve(B, G, d, 0.7, VectorXd::Zero(dim), {20000, 1e-2}, &trace);
        CHECK(nonlinear_loss(B, G, d, 0.7, it) <= l_closed * (1.0 + 1e-6));
        CHECK(trace.size() == 20001);
    }
    SUBCASE("best iterate is never worse than the start") {
        std::vector<double> trace;
        const VectorXd it = nonlinear_lower_solve(B, G, d, 0.7, theta, {200, 1e-3}, &trace);
        CHECK(f(it) <= f(theta));
    }
    SUBCASE("divergence is reported with the loss trace") {
        try {
            nonlinear_lower_solve(B, G, d, 0.7, theta, {500, 50.0});
            FAIL("expected divergence");
        } catch (const DivergenceError& e) {
            CHECK(e.trace().size() >= 2);
        }
    }
}
