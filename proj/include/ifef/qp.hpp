#pragma once

#include <string>
#include <vector>

#include "ifef/pde.hpp"

namespace ifef {

/// Lower-level loss L(theta) = 0.5 theta^T Q theta + c^T theta + b, equal to
/// the sampled PINN loss (1/N_u)|B_u theta - G_u|^2 + (lambda/N_f)|R_f theta - F_f|^2.
struct QpSystem {
    MatrixXd Q;
    VectorXd c;
    double b = 0.0;
    Index n_boundary = 0;
    Index n_interior = 0;
    double lambda_ll = 1.0;

    Index dimension() const { return c.size(); }
    double loss(const VectorXd& theta) const;
};

QpSystem assemble(const MatrixXd& B_u, const VectorXd& G_u, const MatrixXd& R_f,
                  const VectorXd& F_f, double lambda_ll);

/// Same loss evaluated from residuals rather than the expanded form; this is
/// the numerically accurate route near the minimum.
double sampled_loss(const MatrixXd& B_u, const VectorXd& G_u, const MatrixXd& R_f,
                    const VectorXd& F_f, double lambda, const VectorXd& theta);

struct RankCheck {
    enum class Status { Ok, Underdetermined, Singular };
    Status status = Status::Ok;
    std::string message;
};

/// N_u + N_f >= 2D is necessary for Q to be definite. Below it, gamma > 0
/// gives a warning and gamma = 0 an error.
RankCheck rank_guard(const QpSystem& system, double gamma);
RankCheck rank_guard(Index rows, Index features, double gamma);

/// theta = -(Q + gamma I)^{-1} c by Cholesky. If the factorization fails the
/// shift is raised to 10*gamma once; a second failure throws
/// SingularSystemError with the smallest LDL^T pivot. The residual
/// |(Q + gamma I) theta + c|_inf <= 1e-8 (1 + |c|_inf) is enforced.
VectorXd solve_regularized(const QpSystem& system, double gamma);

/// Cholesky-backed solver reused for several right-hand sides (the
/// hypergradient needs a second solve with the same matrix).
class RegularizedFactor {
public:
    RegularizedFactor(const MatrixXd& Q, double gamma);
    VectorXd solve(const VectorXd& rhs) const;
    double shift() const { return shift_; }

private:
    MatrixXd matrix_;
    Eigen::LLT<MatrixXd> llt_;
    double shift_;
};

/// Burgers-type residual data at the interior points: feature values and the
/// derivative rows the operator reads, each N_f x F.
struct NonlinearDesign {
    MatrixXd value, dt, dx, dxx;
    VectorXd source;
    NonlinearBurgers op;
};

double nonlinear_loss(const MatrixXd& B_u, const VectorXd& G_u, const NonlinearDesign& design,
                      double lambda, const VectorXd& theta, VectorXd* grad = nullptr);

struct NonlinearSolveOptions {
    int steps = 2000;
    double lr = 1e-3;
};

/// First-order adaptive-moment descent on the nonlinear lower loss from
/// theta0. Returns the best iterate seen (never worse than theta0); throws
/// DivergenceError if the loss exceeds 10x its initial value.
VectorXd nonlinear_lower_solve(const MatrixXd& B_u, const VectorXd& G_u,
                               const NonlinearDesign& design, double lambda,
                               const VectorXd& theta0, const NonlinearSolveOptions& options,
                               std::vector<double>* trace = nullptr);

}  // namespace ifef
