#include "ifef/checks.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "ifef/error.hpp"
#include "ifef/qp.hpp"
#include "ifef/rng.hpp"
#include "ifef/trainer.hpp"

namespace ifef {

namespace {

std::string sci(double v) {
    std::ostringstream out;
    out.precision(3);
    out << std::scientific << v;
    return out.str();
}

VectorXd central_gradient(const std::function<double(const VectorXd&)>& f, VectorXd x, double h) {
    VectorXd g(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double xi = x(i);
        x(i) = xi + h;
        const double fp = f(x);
        x(i) = xi - h;
        const double fm = f(x);
        x(i) = xi;
        g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
}

Box unit_box(int dims, double lo, double hi) {
    return Box{VectorXd::Constant(dims, lo), VectorXd::Constant(dims, hi)};
}

MatrixXd gaussian(Index r, Index c, Rng& rng) {
    MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

std::vector<PdeProblem> closed_form_problems() {
    return {make_helmholtz(1.0, 4.0, unit_box(2, -1.0, 1.0)),
            make_helmholtz(100.0, 100.0, unit_box(2, 0.0, 0.2)),
            make_convection(50.0),
            make_convection(200.0),
            make_convection_diffusion(1.0, 5e-5, 1.0, 0.1, 4.0 * std::numbers::pi, 60.0 * std::numbers::pi),
            make_multisine_convection(1.0, {1, 2, 5, 10, 30, 40, 50, 60, 70, 80},
                                      std::vector<double>(10, 1.0))};
}

PinnObjective small_objective(const PdeProblem& p, Index nb, Index nf, std::uint64_t seed) {
    return PinnObjective(p, sample_lhs(p, nb, nf, seed));
}

}  // namespace

CheckResult check_jet_derivatives(int networks, int points, double tol_grad, double tol_diag2) {
    Rng rng(11);
    double worst1 = 0.0, worst2 = 0.0;
    const double h1 = 1e-5, h2 = 1e-4;
    for (int n = 0; n < networks; ++n) {
        const int dims = 1 + n % 3;
        std::vector<int> widths(1 + n % 3);
        for (int& w : widths) w = 4 + static_cast<int>(rng.below(13));
        NetworkParams net = NetworkParams::xavier(dims, widths, false, 100 + n);
        if (n % 2 == 1) net.set_input_range(VectorXd::Constant(dims, -3.0), VectorXd::LinSpaced(dims, 1.0, 4.0));
        const int per_net = points;
        MatrixXd x(dims, per_net);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0, 2.0);
        const JetBatch jets = forward_hidden(net, x, 2);
        for (int i = 0; i < dims; ++i) {
            MatrixXd xp = x, xm = x;
            xp.row(i).array() += h1;
            xm.row(i).array() -= h1;
            const MatrixXd fd1 = (forward_hidden(net, xp, 0).value() - forward_hidden(net, xm, 0).value()) / (2 * h1);
            worst1 = std::max(worst1, ((jets.grad(i) - fd1).array().abs() / (1.0 + fd1.array().abs())).maxCoeff());
            xp = x;
            xm = x;
            xp.row(i).array() += h2;
            xm.row(i).array() -= h2;
            const MatrixXd fd2 = (forward_hidden(net, xp, 0).value() - 2.0 * forward_hidden(net, x, 0).value() +
                                  forward_hidden(net, xm, 0).value()) /
                                 (h2 * h2);
            worst2 = std::max(worst2, ((jets.diag2(i) - fd2).array().abs() / (1.0 + fd2.array().abs())).maxCoeff());
        }
    }
    const bool pass = worst1 <= tol_grad && worst2 <= tol_diag2;
    return {"jet_derivatives", pass,
            "networks=" + std::to_string(networks) + " points=" + std::to_string(points) +
                " max_err_grad=" + sci(worst1) + " max_err_diag2=" + sci(worst2)};
}

CheckResult check_parameter_gradient(double tol) {
    double worst = 0.0;
    Index max_params = 0;
    const std::vector<PdeProblem> problems{make_helmholtz(1.0, 4.0, unit_box(2, -1.0, 1.0)), make_convection(5.0)};
    for (std::size_t k = 0; k < problems.size(); ++k) {
        const PinnObjective obj = small_objective(problems[k], 24, 60, 5 + k);
        NetworkParams net = NetworkParams::xavier(2, {4, 4}, true, 21 + k);
        net.set_input_range(problems[k].domain.lo, problems[k].domain.hi);
        max_params = std::max(max_params, net.parameter_count());
        VectorXd grad;
        vanilla_loss(obj, net, 0.3, &grad);
        const auto f = [&](const VectorXd& flat) {
            NetworkParams p = net;
            p.assign(flat);
            return vanilla_loss(obj, p, 0.3);
        };
        const VectorXd fd = central_gradient(f, net.flatten(), 1e-5);
        worst = std::max(worst, (grad - fd).norm() / fd.norm());
    }
    return {"parameter_gradient", worst <= tol,
            "parameters=" + std::to_string(max_params) + " rel_err=" + sci(worst)};
}

CheckResult check_qp_equivalence(int systems, double tol_loss, double tol_solve) {
    Rng rng(17);
    double worst_loss = 0.0, worst_solve = 0.0;
    for (int s = 0; s < systems; ++s) {
        const Index dim = s % 2 == 0 ? 6 : 20;
        const Index nb = dim + 4 + static_cast<Index>(rng.below(10));
        const Index nf = 2 * dim + static_cast<Index>(rng.below(20));
        const MatrixXd B = gaussian(nb, dim, rng), R = gaussian(nf, dim, rng);
        const VectorXd G = gaussian(nb, 1, rng), F = gaussian(nf, 1, rng);
        const double lambda = rng.uniform(0.01, 2.0);
        const QpSystem sys = assemble(B, G, R, F, lambda);
        for (int t = 0; t < 3; ++t) {
            const VectorXd theta = gaussian(dim, 1, rng);
            const double direct = sampled_loss(B, G, R, F, lambda, theta);
            worst_loss = std::max(worst_loss, std::abs(sys.loss(theta) - direct) / std::abs(direct));
        }
        const double gamma = 1e-7;
        const VectorXd theta = solve_regularized(sys, gamma);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sys.Q);
        const double L = eig.eigenvalues().maxCoeff() + gamma;
        VectorXd it = VectorXd::Zero(dim);
        for (int k = 0; k < 500000; ++k) {
            const VectorXd g = sys.Q * it + gamma * it + sys.c;
            if (g.lpNorm<Eigen::Infinity>() < 1e-13) break;
            it -= g / L;
        }
        worst_solve = std::max(worst_solve, (it - theta).lpNorm<Eigen::Infinity>());
    }
    return {"qp_equivalence", worst_loss <= tol_loss && worst_solve <= tol_solve,
            "systems=" + std::to_string(systems) + " max_rel_loss_err=" + sci(worst_loss) +
                " max_solve_err=" + sci(worst_solve)};
}

CheckResult check_hypergradient(double tol) {
    TrainConfig cfg;
    cfg.D = 10;
    cfg.gamma = 1e-6;
    cfg.lambda_ll = 0.05;
    cfg.lambda_upper = 0.2;
    cfg.seed = 2;
    const PinnObjective obj = small_objective(make_helmholtz(1.0, 1.0, unit_box(2, -1.0, 1.0)), 60, 200, 3);
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {4, 4}, false, 7), cfg);
    const VectorXd hyper = hypergradient_ift(obj, basis, cfg);
    const auto total = [&](const VectorXd& flat) {
        FeatureBasis b = basis;
        b.params.assign(flat);
        const FeatureEvaluation ev = obj.evaluate(b, false);
        return obj.loss(ev, lower_solve(obj, ev, cfg, VectorXd()), cfg.upper_lambda());
    };
    const VectorXd fd = central_gradient(total, basis.params.flatten(), 1e-5);
    const double err = (hyper - fd).norm() / fd.norm();
    return {"hypergradient", err <= tol,
            "parameters=" + std::to_string(basis.params.parameter_count()) + " rel_err=" + sci(err)};
}

CheckResult check_rank_guard() {
    const PinnObjective obj = small_objective(make_helmholtz(1.0, 4.0, unit_box(2, -1.0, 1.0)), 8, 12, 1);
    TrainConfig cfg;
    cfg.D = 20;  // 2D = 40 > N_u + N_f = 20
    cfg.ifef_epochs = 1;
    const NetworkParams net = NetworkParams::xavier(2, {6}, false, 1);
    bool rejected = false;
    cfg.gamma = 0.0;
    try {
        ifef_train(obj, make_basis(net, cfg), cfg);
    } catch (const SingularSystemError&) {
        rejected = true;
    }
    cfg.gamma = 1e-7;
    bool solved = false, warned = false;
    try {
        const IfefResult r = ifef_train(obj, make_basis(net, cfg), cfg);
        solved = r.theta.allFinite() && r.theta.size() == 40;
        warned = !r.warnings.empty();
    } catch (const std::exception&) {
    }
    return {"rank_guard", rejected && solved && warned,
            std::string("rows=20 features=40 gamma0_rejected=") + (rejected ? "yes" : "no") +
                " gamma1e-7_solved=" + (solved ? "yes" : "no") + " warning=" + (warned ? "yes" : "no")};
}

CheckResult check_sufficient_decrease(int steps) {
    const PinnObjective obj = small_objective(make_convection(5.0), 30, 120, 2);
    TrainConfig cfg;
    cfg.D = 20;
    cfg.seed = 3;
    FeatureBasis basis = make_basis(NetworkParams::xavier(2, {8, 8}, false, 4), cfg);
    const VectorXd theta = lower_solve(obj, obj.evaluate(basis, false), cfg, VectorXd());
    UpperStepper stepper(UpperOptimizer::Gradient, 1e-4);
    std::vector<double> trace;
    for (int k = 0; k <= steps; ++k) {
        const FeatureEvaluation ev = obj.evaluate(basis, true);
        if (k == steps) {
            trace.push_back(obj.loss(ev, theta, cfg.lambda_ll));
            break;
        }
        trace.push_back(stepper.step(obj, basis, ev, theta, cfg.lambda_ll));
    }
    int increases = 0;
    for (std::size_t k = 1; k < trace.size(); ++k)
        if (trace[k] > trace[k - 1]) ++increases;
    return {"sufficient_decrease", increases == 0,
            "steps=" + std::to_string(steps) + " increases=" + std::to_string(increases) +
                " loss_first=" + sci(trace.front()) + " loss_last=" + sci(trace.back())};
}

CheckResult check_suite_consistency(int points, double tol) {
    Rng rng(23);
    double worst_interior = 0.0, worst_boundary = 0.0;
    int problems = 0;
    for (const PdeProblem& p : closed_form_problems()) {
        ++problems;
        for (int k = 0; k < points; ++k) {
            VectorXd x(p.dims());
            for (int i = 0; i < p.dims(); ++i) x(i) = rng.uniform(p.domain.lo(i), p.domain.hi(i));
            worst_interior = std::max(worst_interior, std::abs(interior_residual(p, (*p.exact_jet)(x), x)));
        }
        const BoundaryLayout layout = layout_boundary(p, sample_lhs(p, points, 1, 29));
        for (Index i = 0; i < layout.row_count(); ++i) {
            double lhs = 0.0;
            for (const auto& t : layout.rows[i]) lhs += t.coeff * (*p.exact_jet)(layout.points.col(t.point))[t.comp];
            worst_boundary = std::max(worst_boundary, std::abs(lhs - layout.targets(i)));
        }
    }
    return {"suite_consistency", worst_interior <= tol && worst_boundary <= tol,
            "problems=" + std::to_string(problems) + " points=" + std::to_string(points) +
                " max_interior=" + sci(worst_interior) + " max_boundary=" + sci(worst_boundary)};
}

CheckResult check_norm_identity(double tol) {
    TrainConfig cfg;
    cfg.D = 64;
    cfg.seed = 5;
    const FeatureBasis basis = make_basis(NetworkParams::xavier(2, {8, 8}, false, 6), cfg);
    Rng rng(31);
    MatrixXd x(2, 100);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-3.0, 3.0);
    const JetBatch psi = forward_features(basis, x, 0);
    const double worst = (psi.value().colwise().squaredNorm().array() - 1.0).abs().maxCoeff();
    return {"norm_identity", worst <= tol, "D=64 points=100 max_dev=" + sci(worst)};
}

std::vector<CheckResult> run_selfchecks() {
    std::vector<std::function<CheckResult()>> checks{
        [] { return check_jet_derivatives(); },    [] { return check_parameter_gradient(); },
        [] { return check_qp_equivalence(); },     [] { return check_hypergradient(); },
        [] { return check_rank_guard(); },         [] { return check_sufficient_decrease(); },
        [] { return check_suite_consistency(); },  [] { return check_norm_identity(); },
    };
    std::vector<CheckResult> out;
    for (const auto& c : checks) {
        try {
            out.push_back(c());
        } catch (const std::exception& e) {
            out.push_back({"exception", false, e.what()});
        }
    }
    return out;
}

}  // namespace ifef
