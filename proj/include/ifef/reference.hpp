#pragma once

#include "ifef/jet.hpp"

namespace ifef {

/// Viscous Burgers u_t + u u_x = nu u_xx on [-1, 1] with u(x, 0) = -sin(pi x)
/// and u(+-1, t) = 0, through the Cole-Hopf transform:
///   u = -int sin(pi (x - eta)) f(x - eta) G(eta) / int f(x - eta) G(eta)
///   f(y) = exp(-cos(pi y) / (2 pi nu)),  G = heat kernel of variance 2 nu t.
/// Both integrals use the trapezoid rule in the kernel variable with
/// log-sum-exp scaling, since f spans many orders of magnitude for small nu.
double burgers_cole_hopf(double x, double t, double nu, int quadrature_points = 4001);

/// (t, x, u) rows: t = 0, dt, ..., t_end and `nx` equispaced x in [-1, 1];
/// the same layout load_reference_csv reads.
MatrixXd burgers_reference_grid(double nu, int nt, double t_end, int nx);

}  // namespace ifef
