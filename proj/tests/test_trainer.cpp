#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "fd.hpp"
#include "ifef/error.hpp"
#include "ifef/trainer.hpp"

using namespace ifef;

namespace {

Box square(double lo, double hi) {
    Box b;
    b.lo = VectorXd::Constant(2, lo);
    b.hi = VectorXd::Constant(2, hi);
    return b;
}

PinnObjective helmholtz_objective(Index nb = 40, Index nf = 120) {
    PdeProblem p = make_helmholtz(1.0, 1.0, square(-1, 1));
    CollocationSet set = sample_lhs(p, nb, nf, 3);
    return PinnObjective(std::move(p), std::move(set));
}

PinnObjective burgers_objective() {
    PdeProblem p = make_burgers(0.01 / std::numbers::pi);
    CollocationSet set = sample_lhs(p, 30, 60, 4);
    return PinnObjective(std::move(p), std::move(set));
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.D = 10;
    cfg.gamma = 1e-8;
    cfg.lambda_ll = 0.05;
    cfg.seed = 2;
    return cfg;
}

EvalTarget target_for(const PinnObjective& obj) {
    EvalTarget t;
    t.grid = {21, 21};
    t.points = tensor_grid(obj.problem().domain, t.grid);
    t.exact = evaluate_field(*obj.problem().exact, t.points);
    return t;
}

}  // namespace

TEST_CASE("variant and extension names round-trip") {
    for (Variant v : {Variant::Ifef, Variant::IfefPd, Variant::Vanilla}) CHECK(parse_variant(to_string(v)) == v);
    for (Extension e : {Extension::Rff, Extension::None}) CHECK(parse_extension(to_string(e)) == e);
    CHECK_THROWS_AS(parse_variant("adam"), ConfigError);
    CHECK_THROWS_AS(parse_extension("fourier"), ConfigError);
}

TEST_CASE("configuration validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lambda_ll = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.lambda_min = 10.0;
    cfg.lambda_max = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    CHECK(cfg.upper_lambda() == cfg.lambda_ll);
    cfg.lambda_upper = 3.0;
    CHECK(cfg.upper_lambda() == 3.0);
}

TEST_CASE("objective gradients match finite differences") {
    const TrainConfig cfg = small_config();
    for (int which = 0; which < 2; ++which) {
        const PinnObjective obj = which == 0 ? helmholtz_objective() : burgers_objective();
        CAPTURE(obj.problem().name);
        const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {6, 5}, false, 1), cfg);
        const FeatureEvaluation ev = obj.evaluate(basis, true);
        VectorXd theta(basis.feature_count());
        for (Index i = 0; i < theta.size(); ++i) theta(i) = std::sin(1.0 + i);
        const double lambda = 0.3;

        const VectorXd g_omega = obj.omega_gradient(basis, ev, theta, lambda);
        const auto L_omega = [&](const VectorXd& flat) {
            FeatureBasis b = basis;
            b.params.assign(flat);
            return obj.loss(obj.evaluate(b, false), theta, lambda);
        };
        CHECK(fd::rel_err(g_omega, fd::gradient(L_omega, basis.params.flatten())) < 1e-5);

        const VectorXd g_theta = obj.readout_gradient(ev, theta, lambda);
        const auto L_theta = [&](const VectorXd& t) { return obj.loss(ev, t, lambda); };
        CHECK(fd::rel_err(g_theta, fd::gradient(L_theta, theta)) < 1e-6);
    }
}

TEST_CASE("chunked and cached evaluations give the same design") {
    const PinnObjective obj = helmholtz_objective();
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {6, 5}, false, 1), small_config());
    const FeatureEvaluation a = obj.evaluate(basis, true);
    const FeatureEvaluation b = obj.evaluate(basis, false, 7);
    CHECK((a.R_f - b.R_f).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((a.B_u - b.B_u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("streaming assembly equals the dense assembly") {
    const PinnObjective obj = helmholtz_objective();
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {6, 5}, false, 1), small_config());
    const QpSystem dense = obj.assemble(obj.evaluate(basis, false), 0.05);
    const QpSystem streamed = obj.assemble_streaming(basis, 0.05, 17);
    CHECK((dense.Q - streamed.Q).cwiseAbs().maxCoeff() < 1e-12 * dense.Q.cwiseAbs().maxCoeff());
    CHECK((dense.c - streamed.c).cwiseAbs().maxCoeff() < 1e-12 * dense.c.cwiseAbs().maxCoeff());
    CHECK(streamed.b == doctest::Approx(dense.b).epsilon(1e-13));
    CHECK(streamed.n_interior == dense.n_interior);
}

TEST_CASE("zero bi-level epochs return the one-shot lower solve") {
    const PinnObjective obj = helmholtz_objective();
    TrainConfig cfg = small_config();
    cfg.ifef_epochs = 0;
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {6, 5}, false, 1), cfg);
    const IfefResult r = ifef_train(obj, basis, cfg);
    CHECK(r.metrics.empty());
    const VectorXd direct = lower_solve(obj, obj.evaluate(basis, false), cfg, VectorXd());
    CHECK(fd::rel_err(r.theta, direct) < 1e-8);
    CHECK((r.basis.params.flatten() - basis.params.flatten()).norm() == 0.0);
}

TEST_CASE("implicit hypergradient matches finite differences through the lower solve") {
    TrainConfig cfg = small_config();
    cfg.gamma = 1e-6;
    cfg.lambda_upper = 0.2;
    const PinnObjective obj = helmholtz_objective(60, 200);
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {6, 5}, false, 7), cfg);
    const VectorXd hyper = hypergradient_ift(obj, basis, cfg);
    const auto total = [&](const VectorXd& flat) {
        FeatureBasis b = basis;
        b.params.assign(flat);
        const FeatureEvaluation ev = obj.evaluate(b, false);
        const VectorXd theta = lower_solve(obj, ev, cfg, VectorXd());
        return obj.loss(ev, theta, cfg.upper_lambda());
    };
    const VectorXd numeric = fd::gradient(total, basis.params.flatten(), 1e-5);
    CHECK(fd::rel_err(hyper, numeric) < 1e-4);
    // The total derivative differs from the partial one when lambda_upper != lambda_ll.
    const FeatureEvaluation ev = obj.evaluate(basis, true);
    const VectorXd theta = lower_solve(obj, ev, cfg, VectorXd());
    const VectorXd partial = obj.omega_gradient(basis, ev, theta, cfg.upper_lambda());
    CHECK((partial - numeric).norm() > 1e-3 * numeric.norm());
}

TEST_CASE("primal-dual weight update is clamped") {
    CHECK(primal_dual_update(1.0, 2.0, 0.5) == 2.0);
    CHECK(primal_dual_update(1.0, 0.0, 0.5) == 1.0);
    CHECK(primal_dual_update(9.0, 10.0, 1.0, 1e-8, 10.0) == 10.0);
    CHECK_THROWS_AS(primal_dual_update(1.0, std::nan(""), 0.1), NumericError);
}

TEST_CASE("warm start reduces the loss and is deterministic") {
    const PinnObjective obj = helmholtz_objective();
    TrainConfig cfg = small_config();
    cfg.extension = Extension::None;
    const NetworkParams p0 = NetworkParams::xavier(2, {8, 8}, true, 3);
    const PretrainResult none = pretrain_vanilla(obj, p0, cfg, nullptr, 0);
    CHECK((none.params.flatten() - p0.flatten()).norm() == 0.0);
    CHECK(none.metrics.empty());
    const EvalTarget target = target_for(obj);
    const PretrainResult a = pretrain_vanilla(obj, p0, cfg, &target, 300);
    const PretrainResult b = pretrain_vanilla(obj, p0, cfg, &target, 300);
    REQUIRE(a.metrics.size() == 300);
    CHECK(a.metrics.back().upper_loss < 0.9 * a.metrics.front().upper_loss);
    CHECK((a.params.flatten() - b.params.flatten()).norm() == 0.0);
    CHECK(std::isfinite(a.metrics.back().rel_l2));
    NetworkParams no_readout = p0;
    no_readout.readout.reset();
    CHECK_THROWS_AS(pretrain_vanilla(obj, no_readout, cfg, nullptr, 1), ConfigError);
}

TEST_CASE("bi-level loop: monotone lower level, decreasing upper loss, reproducible") {
    const PinnObjective obj = helmholtz_objective(60, 200);
    TrainConfig cfg = small_config();
    cfg.gamma = 0.0;
    cfg.ifef_epochs = 60;
    cfg.upper_lr = 1e-2;
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {8, 8}, false, 5), cfg);
    const EvalTarget target = target_for(obj);
    int seen = 0;
    const IfefResult a = ifef_train(obj, basis, cfg, &target, [&](const EpochMetrics&) { ++seen; });
    CHECK(seen == 60);
    REQUIRE(a.metrics.size() == 60);
    CHECK(std::isnan(a.metrics[0].lower_loss_prev));
    for (std::size_t k = 1; k < a.metrics.size(); ++k)
        CHECK(a.metrics[k].lower_loss <= a.metrics[k].lower_loss_prev * (1.0 + 1e-9) + 1e-14);
    CHECK(a.metrics.back().upper_loss < a.metrics.front().upper_loss);
    CHECK(std::isfinite(a.final_rel_l2));
    const IfefResult b = ifef_train(obj, basis, cfg, &target);
    CHECK((a.basis.params.flatten() - b.basis.params.flatten()).norm() == 0.0);
    CHECK((a.theta - b.theta).norm() == 0.0);

    SUBCASE("primal-dual variant moves the physics weight") {
        cfg.variant = Variant::IfefPd;
        cfg.dual_lr = 1.0;
        cfg.ifef_epochs = 5;
        const IfefResult pd = ifef_train(obj, basis, cfg);
        CHECK(pd.metrics.back().lambda > pd.metrics.front().lambda);
    }
    SUBCASE("underdetermined systems warn with gamma > 0 and fail without") {
        const PinnObjective tiny = helmholtz_objective(4, 8);
        cfg.ifef_epochs = 1;
        CHECK_THROWS_AS(ifef_train(tiny, basis, cfg), SingularSystemError);
        cfg.gamma = 1e-6;
        CHECK(ifef_train(tiny, basis, cfg).warnings.size() == 1);
    }
}

TEST_CASE("Burgers lower level starts from the linear closed form") {
    const PinnObjective obj = burgers_objective();
    TrainConfig cfg = small_config();
    cfg.nonlinear_lower = {100, 1e-3};
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {8, 8}, false, 5), cfg);
    const FeatureEvaluation ev = obj.evaluate(basis, true);
    const VectorXd theta = lower_solve(obj, ev, cfg, VectorXd());
    cfg.nonlinear_lower.steps = 0;
    const VectorXd start = lower_solve(obj, ev, cfg, VectorXd());
    CHECK(obj.loss(ev, theta, cfg.lambda_ll) <= obj.loss(ev, start, cfg.lambda_ll));
    CHECK_THROWS_AS(hypergradient_ift(obj, basis, cfg), ConfigError);
}
