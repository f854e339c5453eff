#pragma once

#include "ifef/jet.hpp"

namespace ifef {

/// Derivatives 0..3 of a scalar map evaluated elementwise at z.value.
/// The third derivative is only needed by the reverse pass.
struct ElementwiseDerivs {
    MatrixXd f0, f1, f2, f3;
};

/// tanh through the vectorized exponential: 1 - 2 / (exp(2z) + 1).
inline MatrixXd fast_tanh(const MatrixXd& z) {
    return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

/// cos and sin of every entry: Cody-Waite reduction by pi/2 and minimax
/// polynomials on [-pi/4, pi/4], in a branch-free loop the compiler vectorizes.
/// Valid for |x| < 2^30.
inline void fast_sincos(const MatrixXd& x, MatrixXd& cos_out, MatrixXd& sin_out) {
    constexpr double two_over_pi = 0.636619772367581343076;
    constexpr double p1 = 1.57079632673412561417e+00;
    constexpr double p2 = 6.07710050630396597660e-11;
    constexpr double p3 = 2.02226624879595063154e-21;
    constexpr double shifter = 6755399441055744.0;  // 1.5 * 2^52: adding it rounds to an integer
    cos_out.resize(x.rows(), x.cols());
    sin_out.resize(x.rows(), x.cols());
    const double* in = x.data();
    double* co = cos_out.data();
    double* si = sin_out.data();
    const Index size = x.size();
    for (Index k = 0; k < size; ++k) {
        const double v = in[k];
        const double n = (v * two_over_pi + shifter) - shifter;
        const double r = ((v - n * p1) - n * p2) - n * p3;
        const double z = r * r;
        const double sp =
            r + r * z * (-1.66666666666666307295e-1 +
                         z * (8.33333333332211858878e-3 +
                              z * (-1.98412698295895385996e-4 +
                                   z * (2.75573136213857245213e-6 +
                                        z * (-2.50507477628578072866e-8 +
                                             z * 1.58962301576546568060e-10)))));
        const double cp =
            1.0 - 0.5 * z +
            z * z * (4.16666666666665929218e-2 +
                     z * (-1.38888888888730564116e-3 +
                          z * (2.48015872888517045348e-5 +
                               z * (-2.75573141792967388112e-7 +
                                    z * (2.08757008419747316778e-9 +
                                         z * -1.13585365213876817300e-11)))));
        const auto q = static_cast<long long>(n) & 3;
        const double s_base = (q & 1) ? cp : sp;
        const double c_base = (q & 1) ? sp : cp;
        si[k] = (q & 2) ? -s_base : s_base;
        co[k] = ((q + 1) & 2) ? -c_base : c_base;
    }
}

/// out = f(z) with the jet chain rule:
///   out.value = f, out.grad_i = f' z.grad_i, out.diag2_i = f' z.diag2_i + f'' z.grad_i^2
inline JetBatch map_elementwise(const JetBatch& z, const ElementwiseDerivs& f) {
    JetBatch out(z.rows(), z.points(), z.dims(), z.order(), JetBatch::Uninitialized{});
    out.value() = f.f0;
    for (int i = 0; i < z.dims(); ++i) {
        if (z.order() >= 1) out.grad(i) = f.f1.cwiseProduct(z.grad(i));
        if (z.order() >= 2)
            out.diag2(i) = f.f1.cwiseProduct(z.diag2(i)) +
                           f.f2.cwiseProduct(z.grad(i).cwiseAbs2());
    }
    return out;
}

/// Reverse of map_elementwise: adjoint of z given the adjoint of out.
inline JetBatch map_elementwise_adjoint(const JetBatch& z, const ElementwiseDerivs& f,
                                        const JetBatch& out_adj) {
    JetBatch z_adj(z.rows(), z.points(), z.dims(), z.order(), JetBatch::Uninitialized{});
    MatrixXd value_adj = out_adj.value().cwiseProduct(f.f1);
    for (int i = 0; i < z.dims(); ++i) {
        if (z.order() >= 1) {
            auto g = z.grad(i);
            auto g_adj = out_adj.grad(i);
            z_adj.grad(i) = g_adj.cwiseProduct(f.f1);
            value_adj.array() += g_adj.array() * g.array() * f.f2.array();
        }
        if (z.order() >= 2) {
            auto g = z.grad(i);
            auto d2 = z.diag2(i);
            auto d2_adj = out_adj.diag2(i);
            z_adj.grad(i).array() += 2.0 * d2_adj.array() * f.f2.array() * g.array();
            z_adj.diag2(i) = d2_adj.cwiseProduct(f.f1);
            value_adj.array() += d2_adj.array() * (d2.array() * f.f2.array() +
                                                   g.array().square() * f.f3.array());
        }
    }
    z_adj.value() = value_adj;
    return z_adj;
}

}  // namespace ifef
