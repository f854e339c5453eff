#include "ifef/qp.hpp"

#include <cmath>
#include <sstream>

#include "ifef/optim.hpp"

namespace ifef {

double QpSystem::loss(const VectorXd& theta) const {
    return 0.5 * theta.dot(Q * theta) + c.dot(theta) + b;
}

QpSystem assemble(const MatrixXd& B_u, const VectorXd& G_u, const MatrixXd& R_f,
                  const VectorXd& F_f, double lambda_ll) {
    if (!(lambda_ll > 0.0)) throw ConfigError("lambda_ll must be positive");
    if (B_u.rows() != G_u.size() || R_f.rows() != F_f.size() || B_u.cols() != R_f.cols())
        throw ConfigError("design matrix dimensions are inconsistent");
    if (B_u.rows() < 1 || R_f.rows() < 1) throw ConfigError("need boundary and interior rows");

    const double wb = 2.0 / static_cast<double>(B_u.rows());
    const double wf = 2.0 * lambda_ll / static_cast<double>(R_f.rows());
    const Index dim = B_u.cols();

    QpSystem sys;
    MatrixXd lower = MatrixXd::Zero(dim, dim);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(B_u.transpose(), wb);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(R_f.transpose(), wf);
    sys.Q = lower.selfadjointView<Eigen::Lower>();
    sys.c = -wb * (B_u.transpose() * G_u) - wf * (R_f.transpose() * F_f);
    sys.b = 0.5 * wb * G_u.squaredNorm() + 0.5 * wf * F_f.squaredNorm();
    sys.n_boundary = B_u.rows();
    sys.n_interior = R_f.rows();
    sys.lambda_ll = lambda_ll;
    return sys;
}

double sampled_loss(const MatrixXd& B_u, const VectorXd& G_u, const MatrixXd& R_f,
                    const VectorXd& F_f, double lambda, const VectorXd& theta) {
    return (B_u * theta - G_u).squaredNorm() / static_cast<double>(B_u.rows()) +
           lambda * (R_f * theta - F_f).squaredNorm() / static_cast<double>(R_f.rows());
}

RankCheck rank_guard(Index rows, Index features, double gamma) {
    RankCheck check;
    if (rows >= features) return check;
    std::ostringstream msg;
    msg << "N_u + N_f = " << rows << " < 2D = " << features << ": lower-level system is underdetermined";
    if (gamma > 0.0) {
        check.status = RankCheck::Status::Underdetermined;
        msg << " (regularized by gamma = " << gamma << ")";
    } else {
        check.status = RankCheck::Status::Singular;
    }
    check.message = msg.str();
    return check;
}

RankCheck rank_guard(const QpSystem& system, double gamma) {
    return rank_guard(system.n_boundary + system.n_interior, system.dimension(), gamma);
}

RegularizedFactor::RegularizedFactor(const MatrixXd& Q, double gamma) : shift_(gamma) {
    if (gamma < 0.0) throw ConfigError("gamma must be non-negative");
    if (Q.rows() != Q.cols()) throw ConfigError("Q must be square");
    if (!Q.allFinite()) throw NumericError("Q holds non-finite entries");
    for (int attempt = 0; attempt < 2; ++attempt) {
        matrix_ = Q;
        matrix_.diagonal().array() += shift_;
        llt_.compute(matrix_);
        if (llt_.info() == Eigen::Success) return;
        if (attempt == 0 && gamma > 0.0) {
            shift_ = 10.0 * gamma;
            continue;
        }
        break;
    }
    Eigen::LDLT<MatrixXd> ldlt(matrix_);
    const double pivot = ldlt.vectorD().minCoeff();
    std::ostringstream msg;
    msg << "Q + gamma I is not positive definite (gamma = " << shift_ << ", smallest pivot " << pivot
        << ")";
    throw SingularSystemError(msg.str(), pivot);
}

VectorXd RegularizedFactor::solve(const VectorXd& rhs) const {
    VectorXd x = llt_.solve(rhs);
    const double tol = 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    for (int refine = 0; refine < 3; ++refine) {
        const VectorXd r = rhs - matrix_ * x;
        if (r.lpNorm<Eigen::Infinity>() <= tol && x.allFinite()) return x;
        x += llt_.solve(r);
    }
    const double res = (rhs - matrix_ * x).lpNorm<Eigen::Infinity>();
    if (!(res <= tol)) {
        std::ostringstream msg;
        msg << "lower-level solve residual " << res << " exceeds tolerance " << tol;
        throw NumericError(msg.str());
    }
    return x;
}

VectorXd solve_regularized(const QpSystem& system, double gamma) {
    const RankCheck check = rank_guard(system, gamma);
    if (check.status == RankCheck::Status::Singular)
        throw SingularSystemError(check.message, 0.0);
    RegularizedFactor factor(system.Q, gamma);
    return factor.solve(-system.c);
}

double nonlinear_loss(const MatrixXd& B_u, const VectorXd& G_u, const NonlinearDesign& d,
                      double lambda, const VectorXd& theta, VectorXd* grad) {
    const VectorXd eb = B_u * theta - G_u;
    const VectorXd u = d.value * theta;
    const VectorXd ux = d.dx * theta;
    const VectorXd r = d.dt * theta + d.op.nonlinearity * u.cwiseProduct(ux) -
                       d.op.nu * (d.dxx * theta) - d.source;
    const double nb = static_cast<double>(B_u.rows());
    const double nf = static_cast<double>(d.value.rows());
    if (grad) {
        *grad = (2.0 / nb) * (B_u.transpose() * eb);
        const double w = 2.0 * lambda / nf;
        *grad += w * (d.dt.transpose() * r - d.op.nu * (d.dxx.transpose() * r));
        if (d.op.nonlinearity != 0.0)
            *grad += w * d.op.nonlinearity *
                     (d.dx.transpose() * r.cwiseProduct(u) + d.value.transpose() * r.cwiseProduct(ux));
    }
    return eb.squaredNorm() / nb + lambda * r.squaredNorm() / nf;
}

VectorXd nonlinear_lower_solve(const MatrixXd& B_u, const VectorXd& G_u,
                               const NonlinearDesign& design, double lambda,
                               const VectorXd& theta0, const NonlinearSolveOptions& options,
                               std::vector<double>* trace) {
    if (options.steps < 0 || !(options.lr >= 0.0)) throw ConfigError("invalid nonlinear solver options");
    VectorXd theta = theta0;
    VectorXd best = theta0;
    VectorXd grad;
    std::vector<double> losses;
    Adam adam(options.lr);
    const double initial = nonlinear_loss(B_u, G_u, design, lambda, theta, &grad);
    if (!std::isfinite(initial)) throw NumericError("non-finite initial nonlinear loss");
    double best_loss = initial;
    losses.push_back(initial);
    for (int step = 0; step < options.steps; ++step) {
        adam.step(theta, grad);
        const double loss = nonlinear_loss(B_u, G_u, design, lambda, theta, &grad);
        losses.push_back(loss);
        if (!std::isfinite(loss) || loss > 10.0 * initial)
            throw DivergenceError("nonlinear lower solve diverged at step " + std::to_string(step + 1),
                                  losses);
        if (loss < best_loss) {
            best_loss = loss;
            best = theta;
        }
    }
    if (trace) *trace = std::move(losses);
    return best;
}

}  // namespace ifef
