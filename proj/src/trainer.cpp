#include "ifef/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ifef/error.hpp"

namespace ifef {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

void fill_nonlinear(NonlinearDesign& d, const JetBatch& psi, Index start) {
    const auto& op = d.op;
    d.value.middleRows(start, psi.points()) = psi.value().transpose();
    d.dt.middleRows(start, psi.points()) = psi.grad(op.t_axis).transpose();
    d.dx.middleRows(start, psi.points()) = psi.grad(op.x_axis).transpose();
    d.dxx.middleRows(start, psi.points()) = psi.diag2(op.x_axis).transpose();
}

VectorXd nonlinear_residual(const NonlinearDesign& d, const VectorXd& theta) {
    const VectorXd u = d.value * theta;
    const VectorXd ux = d.dx * theta;
    return d.dt * theta + d.op.nonlinearity * u.cwiseProduct(ux) - d.op.nu * (d.dxx * theta) -
           d.source;
}

bool due(int epoch, int every, int total) { return (epoch + 1) % every == 0 || epoch + 1 == total; }

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Ifef: return "ifef";
        case Variant::IfefPd: return "ifef-pd";
        case Variant::Vanilla: return "vanilla";
    }
    return "?";
}

std::string to_string(Extension e) { return e == Extension::Rff ? "rff" : "none"; }

Variant parse_variant(const std::string& s) {
    if (s == "ifef") return Variant::Ifef;
    if (s == "ifef-pd" || s == "ifef_pd" || s == "pd") return Variant::IfefPd;
    if (s == "vanilla") return Variant::Vanilla;
    throw ConfigError("unknown variant '" + s + "' (expected ifef, ifef-pd or vanilla)");
}

Extension parse_extension(const std::string& s) {
    if (s == "rff") return Extension::Rff;
    if (s == "none") return Extension::None;
    throw ConfigError("unknown extension '" + s + "' (expected rff or none)");
}

void TrainConfig::validate() const {
    if (!(lambda_pretrain > 0.0)) throw ConfigError("lambda_pretrain must be positive");
    if (!(lambda_ll > 0.0)) throw ConfigError("lambda_ll must be positive");
    if (lambda_upper && !(*lambda_upper > 0.0)) throw ConfigError("lambda_upper must be positive");
    if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
    if (extension == Extension::Rff && D < 1) throw ConfigError("D must be at least 1");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (pretrain_epochs < 0 || ifef_epochs < 0) throw ConfigError("epoch counts must be non-negative");
    if (!(pretrain_lr > 0.0) || !(upper_lr > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(dual_lr >= 0.0)) throw ConfigError("dual_lr must be non-negative");
    if (!(lambda_min > 0.0) || !(lambda_min <= lambda_max))
        throw ConfigError("need 0 < lambda_min <= lambda_max");
    if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
    if (nonlinear_lower.steps < 0 || !(nonlinear_lower.lr > 0.0))
        throw ConfigError("invalid nonlinear lower solver options");
}

// ---- objective ----

PinnObjective::PinnObjective(PdeProblem problem, CollocationSet collocation)
    : problem_(std::move(problem)), collocation_(std::move(collocation)) {
    layout_ = layout_boundary(problem_, collocation_);
    if (layout_.row_count() < 1) throw ConfigError("no boundary rows");
    if (collocation_.interior_points() < 1) throw ConfigError("no interior points");
    source_ = evaluate_field(problem_.source, collocation_.interior);
}

FeatureEvaluation PinnObjective::evaluate(const FeatureBasis& basis, bool keep_cache,
                                          Index chunk) const {
    FeatureEvaluation ev;
    ev.cached = keep_cache;
    ev.psi_boundary = forward_features(basis, layout_.points, layout_.order,
                                       keep_cache ? &ev.cache_boundary : nullptr);
    require_finite(ev.psi_boundary, "boundary features");
    ev.B_u = boundary_design(layout_, ev.psi_boundary);

    const MatrixXd& X = collocation_.interior;
    const Index n = X.cols();
    const Index F = basis.feature_count();
    const int order = problem_.interior_order();
    const auto* nonlinear = std::get_if<NonlinearBurgers>(&problem_.op);
    if (nonlinear) {
        ev.nonlinear.op = *nonlinear;
        ev.nonlinear.source = source_;
        for (MatrixXd* m : {&ev.nonlinear.value, &ev.nonlinear.dt, &ev.nonlinear.dx, &ev.nonlinear.dxx})
            m->resize(n, F);
    } else {
        ev.R_f.resize(n, F);
    }
    if (keep_cache) chunk = n;
    for (Index start = 0; start < n; start += chunk) {
        const Index m = std::min(chunk, n - start);
        const JetBatch psi = forward_features(basis, X.middleCols(start, m), order,
                                              keep_cache ? &ev.cache_interior : nullptr);
        require_finite(psi, "interior features");
        if (nonlinear)
            fill_nonlinear(ev.nonlinear, psi, start);
        else
            ev.R_f.middleRows(start, m) =
                interior_design(std::get<LinearOperatorSpec>(problem_.op), psi);
    }
    return ev;
}

QpSystem PinnObjective::assemble(const FeatureEvaluation& ev, double lambda) const {
    if (!problem_.is_linear()) throw ConfigError("closed-form lower level needs a linear operator");
    return ifef::assemble(ev.B_u, layout_.targets, ev.R_f, source_, lambda);
}

QpSystem PinnObjective::assemble_streaming(const FeatureBasis& basis, double lambda,
                                           Index chunk) const {
    const auto* op = std::get_if<LinearOperatorSpec>(&problem_.op);
    if (!op) throw ConfigError("closed-form lower level needs a linear operator");
    if (!(lambda > 0.0)) throw ConfigError("lambda_ll must be positive");
    if (chunk < 1) throw ConfigError("chunk size must be positive");
    const JetBatch psi_b = forward_features(basis, layout_.points, layout_.order);
    require_finite(psi_b, "boundary features");
    const MatrixXd B_u = boundary_design(layout_, psi_b);
    const VectorXd& G = layout_.targets;
    const MatrixXd& X = collocation_.interior;
    const Index n = X.cols();
    const Index F = basis.feature_count();
    const double wb = 2.0 / static_cast<double>(B_u.rows());
    const double wf = 2.0 * lambda / static_cast<double>(n);

    QpSystem sys;
    MatrixXd lower = MatrixXd::Zero(F, F);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(B_u.transpose(), wb);
    sys.c = -wb * (B_u.transpose() * G);
    for (Index start = 0; start < n; start += chunk) {
        const Index m = std::min(chunk, n - start);
        const JetBatch psi = forward_features(basis, X.middleCols(start, m), problem_.interior_order());
        require_finite(psi, "interior features");
        const MatrixXd R = interior_design(*op, psi);
        lower.selfadjointView<Eigen::Lower>().rankUpdate(R.transpose(), wf);
        sys.c.noalias() -= wf * (R.transpose() * source_.segment(start, m));
    }
    sys.Q = lower.selfadjointView<Eigen::Lower>();
    sys.b = 0.5 * wb * G.squaredNorm() + 0.5 * wf * source_.squaredNorm();
    sys.n_boundary = B_u.rows();
    sys.n_interior = n;
    sys.lambda_ll = lambda;
    return sys;
}

double PinnObjective::loss(const FeatureEvaluation& ev, const VectorXd& readout, double lambda) const {
    if (problem_.is_linear()) return sampled_loss(ev.B_u, layout_.targets, ev.R_f, source_, lambda, readout);
    return nonlinear_loss(ev.B_u, layout_.targets, ev.nonlinear, lambda, readout);
}

double PinnObjective::mean_physics_residual(const FeatureEvaluation& ev, const VectorXd& readout) const {
    const VectorXd r = problem_.is_linear() ? VectorXd(ev.R_f * readout - source_)
                                            : nonlinear_residual(ev.nonlinear, readout);
    return r.squaredNorm() / static_cast<double>(r.size());
}

VectorXd PinnObjective::readout_gradient(const FeatureEvaluation& ev, const VectorXd& readout,
                                         double lambda) const {
    if (!problem_.is_linear()) {
        VectorXd g;
        nonlinear_loss(ev.B_u, layout_.targets, ev.nonlinear, lambda, readout, &g);
        return g;
    }
    const double nb = static_cast<double>(ev.B_u.rows());
    const double nf = static_cast<double>(ev.R_f.rows());
    return (2.0 / nb) * (ev.B_u.transpose() * (ev.B_u * readout - layout_.targets)) +
           (2.0 * lambda / nf) * (ev.R_f.transpose() * (ev.R_f * readout - source_));
}

JetBatch PinnObjective::interior_loss_adjoint(const FeatureEvaluation& ev, const VectorXd& readout,
                                              double weight) const {
    const int dims = problem_.dims();
    const int order = problem_.interior_order();
    if (problem_.is_linear()) {
        const VectorXd g = 2.0 * weight * (ev.R_f * readout - source_);
        const MatrixXd row_adj = readout * g.transpose();
        return scatter_interior_adjoint(std::get<LinearOperatorSpec>(problem_.op), row_adj, dims, order);
    }
    const NonlinearDesign& d = ev.nonlinear;
    const VectorXd u = d.value * readout;
    const VectorXd ux = d.dx * readout;
    const VectorXd g = 2.0 * weight * nonlinear_residual(d, readout);
    const double kappa = d.op.nonlinearity;
    JetBatch adj(readout.size(), d.value.rows(), dims, order);
    adj.value() = readout * (kappa * g.cwiseProduct(ux)).transpose();
    adj.grad(d.op.t_axis) = readout * g.transpose();
    adj.grad(d.op.x_axis) = readout * (kappa * g.cwiseProduct(u)).transpose();
    adj.diag2(d.op.x_axis) = readout * (-d.op.nu * g).transpose();
    return adj;
}

VectorXd PinnObjective::backprop(const FeatureBasis& basis, const FeatureEvaluation& ev,
                                 const MatrixXd& boundary_row_adjoint,
                                 const JetBatch& interior_adjoint) const {
    if (!ev.cached) throw ConfigError("gradient needs an evaluation with retained caches");
    const JetBatch b_adj = scatter_boundary_adjoint(layout_, boundary_row_adjoint, problem_.dims());
    return backward_features(basis, ev.cache_boundary, b_adj) +
           backward_features(basis, ev.cache_interior, interior_adjoint);
}

VectorXd PinnObjective::omega_gradient(const FeatureBasis& basis, const FeatureEvaluation& ev,
                                       const VectorXd& readout, double lambda) const {
    const double nb = static_cast<double>(ev.B_u.rows());
    const double nf = static_cast<double>(collocation_.interior_points());
    const VectorXd eb = ev.B_u * readout - layout_.targets;
    const MatrixXd b_rows = readout * ((2.0 / nb) * eb).transpose();
    return backprop(basis, ev, b_rows, interior_loss_adjoint(ev, readout, lambda / nf));
}

// ---- warm start ----

double vanilla_loss(const PinnObjective& objective, const NetworkParams& params, double lambda,
                    VectorXd* grad) {
    if (!params.readout) throw ConfigError("vanilla network needs a readout layer");
    FeatureBasis basis;
    basis.params = params;
    const FeatureEvaluation ev = objective.evaluate(basis, grad != nullptr);
    const VectorXd W = params.readout->transpose();
    if (grad) {
        grad->resize(params.parameter_count());
        const Index hidden = params.hidden_parameter_count();
        grad->head(hidden) = objective.omega_gradient(basis, ev, W, lambda);
        grad->tail(W.size()) = objective.readout_gradient(ev, W, lambda);
    }
    return objective.loss(ev, W, lambda);
}

PretrainResult pretrain_vanilla(const PinnObjective& objective, const NetworkParams& params0,
                                const TrainConfig& config, const EvalTarget* target, int epochs) {
    config.validate();
    if (epochs < 0) epochs = config.pretrain_epochs;
    PretrainResult result;
    result.params = params0;
    if (!result.params.readout)
        throw ConfigError("vanilla training needs a readout layer");
    result.params.validate();

    FeatureBasis basis;
    basis.params = result.params;
    VectorXd flat = result.params.flatten();
    const Index hidden = result.params.hidden_parameter_count();
    Adam adam(config.pretrain_lr);
    const double lambda = config.lambda_pretrain;

    for (int k = 0; k < epochs; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const FeatureEvaluation ev = objective.evaluate(basis, true);
        const VectorXd W = basis.params.readout->transpose();
        EpochMetrics m;
        m.epoch = k;
        m.lower_loss = kNaN;
        m.lower_loss_prev = kNaN;
        m.upper_loss = objective.loss(ev, W, lambda);
        m.lambda = lambda;
        m.rel_l2 = kNaN;
        if (!std::isfinite(m.upper_loss)) throw NumericError("non-finite loss in warm start", k);
        VectorXd grad(flat.size());
        grad.head(hidden) = objective.omega_gradient(basis, ev, W, lambda);
        grad.tail(W.size()) = objective.readout_gradient(ev, W, lambda);
        if (!grad.allFinite()) throw NumericError("non-finite gradient in warm start", k);
        if (target && !target->empty() && due(k, config.eval_every, epochs))
            m.rel_l2 = relative_l2(predict(basis, W, target->points), target->exact);
        adam.step(flat, grad);
        basis.params.assign(flat);
        m.wall_ms = config.record_wall_time ? elapsed_ms(t0) : 0.0;
        result.metrics.push_back(m);
    }
    result.params = basis.params;
    return result;
}

// ---- upper level ----

double UpperStepper::step(const PinnObjective& objective, FeatureBasis& basis,
                          const FeatureEvaluation& ev, const VectorXd& theta, double lambda) {
    const double loss = objective.loss(ev, theta, lambda);
    const VectorXd g = objective.omega_gradient(basis, ev, theta, lambda);
    if (!std::isfinite(loss) || !g.allFinite()) throw NumericError("non-finite upper-level gradient");
    VectorXd flat = basis.params.flatten();
    if (flat.size() != g.size()) throw ConfigError("basis parameters must not include a readout");
    if (kind_ == UpperOptimizer::Adam)
        adam_.step(flat, g);
    else
        gradient_step(flat, g, lr_);
    basis.params.assign(flat);
    return loss;
}

NetworkParams upper_step(const NetworkParams& omega, const VectorXd& theta,
                         const PinnObjective& objective, const FeatureBasis& basis_template,
                         double lr, double lambda, UpperOptimizer kind) {
    FeatureBasis basis = basis_template;
    basis.params = omega;
    basis.params.readout.reset();
    const FeatureEvaluation ev = objective.evaluate(basis, true);
    UpperStepper stepper(kind, lr);
    stepper.step(objective, basis, ev, theta, lambda);
    return basis.params;
}

// ---- lower level ----

VectorXd lower_solve(const PinnObjective& objective, const FeatureEvaluation& ev,
                     const TrainConfig& config, const VectorXd& theta_prev) {
    if (objective.problem().is_linear())
        return solve_regularized(objective.assemble(ev, config.lambda_ll), config.gamma);

    VectorXd theta0 = theta_prev;
    if (theta0.size() == 0) {
        const NonlinearDesign& d = ev.nonlinear;
        const MatrixXd R = d.dt - d.op.nu * d.dxx;
        const QpSystem sys = ifef::assemble(ev.B_u, objective.layout().targets, R, d.source,
                                            config.lambda_ll);
        const double floor = 1e-12 * sys.Q.diagonal().mean();
        RegularizedFactor factor(sys.Q, std::max(config.gamma, floor));
        theta0 = factor.solve(-sys.c);
    }
    return nonlinear_lower_solve(ev.B_u, objective.layout().targets, ev.nonlinear, config.lambda_ll,
                                 theta0, config.nonlinear_lower);
}

VectorXd hypergradient_ift(const PinnObjective& objective, const FeatureBasis& basis,
                           const TrainConfig& config) {
    if (!objective.problem().is_linear()) throw ConfigError("implicit hypergradient needs a linear operator");
    const FeatureEvaluation ev = objective.evaluate(basis, true);
    const QpSystem sys = objective.assemble(ev, config.lambda_ll);
    const RegularizedFactor factor(sys.Q, config.gamma);
    const VectorXd theta = factor.solve(-sys.c);
    const double lu = config.upper_lambda();

    const VectorXd v = factor.solve(objective.readout_gradient(ev, theta, lu));
    const VectorXd partial = objective.omega_gradient(basis, ev, theta, lu);

    // d/d omega of v^T ((Q + gamma I) theta + c) with theta, v held fixed.
    const double wb = 2.0 / static_cast<double>(sys.n_boundary);
    const double wf = 2.0 * config.lambda_ll / static_cast<double>(sys.n_interior);
    const VectorXd eb = ev.B_u * theta - objective.layout().targets;
    const VectorXd ef = ev.R_f * theta - objective.source();
    const MatrixXd b_adj = wb * (v * eb.transpose() + theta * (ev.B_u * v).transpose());
    const MatrixXd f_adj = wf * (v * ef.transpose() + theta * (ev.R_f * v).transpose());
    const JetBatch i_adj =
        scatter_interior_adjoint(std::get<LinearOperatorSpec>(objective.problem().op), f_adj,
                                 objective.problem().dims(), objective.problem().interior_order());
    return partial - objective.backprop(basis, ev, b_adj, i_adj);
}

double primal_dual_update(double lambda, double physics_residual_mean, double dual_lr, double lo,
                          double hi) {
    if (!std::isfinite(physics_residual_mean)) throw NumericError("non-finite physics residual");
    return std::clamp(lambda + dual_lr * physics_residual_mean, lo, hi);
}

// ---- bi-level loop ----

FeatureBasis make_basis(const NetworkParams& params, const TrainConfig& config) {
    FeatureBasis basis;
    basis.params = params;
    basis.params.readout.reset();
    if (config.extension == Extension::Rff)
        basis.rff = sample_rff(config.D, basis.params.width(), config.sigma, config.rff_seed());
    basis.validate();
    return basis;
}

IfefResult ifef_train(const PinnObjective& objective, FeatureBasis basis0, const TrainConfig& config,
                      const EvalTarget* target, const EpochCallback& on_epoch) {
    config.validate();
    if (config.variant == Variant::Vanilla) throw ConfigError("ifef_train runs the bi-level variants only");
    IfefResult result;
    result.basis = std::move(basis0);
    result.basis.params.readout.reset();
    result.basis.validate();

    const RankCheck check = rank_guard(objective.rows(), result.basis.feature_count(), config.gamma);
    if (check.status == RankCheck::Status::Singular) throw SingularSystemError(check.message, 0.0);
    if (check.status == RankCheck::Status::Underdetermined) result.warnings.push_back(check.message);

    UpperStepper stepper(config.upper_optimizer, config.upper_lr);
    double lambda = config.upper_lambda();
    VectorXd theta;
    const int epochs = config.ifef_epochs;
    const bool evaluate_error = target && !target->empty();

    for (int k = 0; k < epochs; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const FeatureEvaluation ev = objective.evaluate(result.basis, true);
        EpochMetrics m;
        m.epoch = k;
        m.lower_loss_prev = theta.size() ? objective.loss(ev, theta, config.lambda_ll) : kNaN;
        theta = lower_solve(objective, ev, config, theta);
        m.lower_loss = objective.loss(ev, theta, config.lambda_ll);
        m.rel_l2 = kNaN;
        if (evaluate_error && due(k, config.eval_every, epochs))
            m.rel_l2 = relative_l2(predict(result.basis, theta, target->points), target->exact);
        m.lambda = lambda;
        m.upper_loss = stepper.step(objective, result.basis, ev, theta, lambda);
        if (config.variant == Variant::IfefPd)
            lambda = primal_dual_update(lambda, objective.mean_physics_residual(ev, theta),
                                        config.dual_lr, config.lambda_min, config.lambda_max);
        if (!std::isfinite(m.lower_loss) || !std::isfinite(m.upper_loss))
            throw NumericError("non-finite loss in bi-level training", k);
        m.wall_ms = config.record_wall_time ? elapsed_ms(t0) : 0.0;
        result.metrics.push_back(m);
        if (on_epoch) on_epoch(m);
    }

    if (objective.problem().is_linear()) {
        result.theta = solve_regularized(objective.assemble_streaming(result.basis, config.lambda_ll),
                                         config.gamma);
    } else {
        const FeatureEvaluation ev = objective.evaluate(result.basis, false);
        result.theta = lower_solve(objective, ev, config, theta);
    }
    if (evaluate_error)
        result.final_rel_l2 = relative_l2(predict(result.basis, result.theta, target->points), target->exact);
    return result;
}

}  // namespace ifef
