#pragma once

#include <string>
#include <vector>

namespace ifef {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Hidden-layer jets of random tanh networks (1-3 layers, width <= 16,
/// input dimension 1-3) against central differences of the forward value.
/// Error per entry is |jet - fd| / (1 + |fd|).
CheckResult check_jet_derivatives(int networks = 6, int points = 200, double tol_grad = 1e-6,
                                  double tol_diag2 = 1e-4);

/// Parameter gradient of the sampled PINN loss of a vanilla network
/// (<= 50 parameters) on Helmholtz (Laplacian terms) and convection, against
/// central differences over the flat parameters; relative 2-norm error.
CheckResult check_parameter_gradient(double tol = 1e-5);

/// Random quadratic systems with 2D in {6, 20}: the expanded quadratic equals
/// the residual-form loss, and the regularized solve matches a converged
/// gradient-descent minimizer.
CheckResult check_qp_equivalence(int systems = 50, double tol_loss = 1e-12, double tol_solve = 1e-6);

/// Implicit hypergradient on a <= 40-parameter network against central
/// differences of omega -> L_upper(omega, theta*(omega)).
CheckResult check_hypergradient(double tol = 1e-4);

/// Underdetermined system: gamma = 0 is rejected, gamma = 1e-7 solves with a warning.
CheckResult check_rank_guard();

/// Plain gradient steps on the upper loss at fixed theta with a small fixed
/// step: the loss trace never increases.
CheckResult check_sufficient_decrease(int steps = 100);

/// Closed-form solutions satisfy their operator and boundary data at
/// `points` seeded points per problem, absolute residual <= tol.
CheckResult check_suite_consistency(int points = 100, double tol = 1e-8);

/// |psi_D(x)|^2 = 1 for the Fourier map at random points.
CheckResult check_norm_identity(double tol = 1e-12);

/// The fast oracle suite run by `selfcheck`.
std::vector<CheckResult> run_selfchecks();

}  // namespace ifef
