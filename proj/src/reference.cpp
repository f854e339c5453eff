#include "ifef/reference.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "ifef/error.hpp"

namespace ifef {

double burgers_cole_hopf(double x, double t, double nu, int quadrature_points) {
    constexpr double pi = std::numbers::pi;
    if (!(nu > 0.0)) throw ConfigError("viscosity must be positive");
    if (quadrature_points < 3) throw ConfigError("need at least 3 quadrature points");
    if (t <= 0.0) return -std::sin(pi * x);

    // eta = sqrt(4 nu t) s, kernel exp(-s^2), s in [-L, L].
    constexpr double L = 9.0;
    const double scale = std::sqrt(4.0 * nu * t);
    const double ds = 2.0 * L / (quadrature_points - 1);
    std::vector<double> log_w(quadrature_points), y(quadrature_points);
    double peak = -INFINITY;
    for (int k = 0; k < quadrature_points; ++k) {
        const double s = -L + k * ds;
        y[k] = x - scale * s;
        log_w[k] = -s * s - std::cos(pi * y[k]) / (2.0 * pi * nu);
        peak = std::max(peak, log_w[k]);
    }
    double num = 0.0, den = 0.0;
    for (int k = 0; k < quadrature_points; ++k) {
        const double w = std::exp(log_w[k] - peak);
        num += std::sin(pi * y[k]) * w;
        den += w;
    }
    return -num / den;
}

MatrixXd burgers_reference_grid(double nu, int nt, double t_end, int nx) {
    if (nt < 1 || nx < 2) throw ConfigError("reference grid needs nt >= 1 and nx >= 2");
    MatrixXd rows(static_cast<Index>(nt) * nx, 3);
    Index at = 0;
    for (int i = 0; i < nt; ++i) {
        const double t = nt == 1 ? 0.0 : t_end * i / (nt - 1);
        for (int j = 0; j < nx; ++j) {
            const double x = -1.0 + 2.0 * j / (nx - 1);
            rows.row(at++) << t, x, burgers_cole_hopf(x, t, nu);
        }
    }
    return rows;
}

}  // namespace ifef
