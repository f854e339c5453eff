#include "ifef/features.hpp"

#include <cmath>
#include <numbers>

#include "ifef/elementwise.hpp"
#include "ifef/rng.hpp"

namespace ifef {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;


}  // namespace

RffMatrix sample_rff(Index D, Index p, double sigma, std::uint64_t seed) {
    if (D < 1 || p < 1) throw ConfigError("RFF dimensions must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("RFF sigma must be positive");
    Rng rng(seed);
    RffMatrix rff{MatrixXd(D, p), sigma, seed};
    for (Index r = 0; r < D; ++r)
        for (Index c = 0; c < p; ++c) rff.B(r, c) = sigma * rng.normal();
    return rff;
}

Index FeatureBasis::feature_count() const {
    return rff ? 2 * rff->features() : params.width();
}

void FeatureBasis::validate() const {
    params.validate();
    if (rff && rff->B.cols() != params.width())
        throw ConfigError("RFF matrix columns != hidden width");
}

JetBatch forward_features(const FeatureBasis& basis, const MatrixXd& points, int order,
                          FeatureCache* cache) {
    JetBatch h = forward_hidden(basis.params, points, order, cache ? &cache->hidden : nullptr);
    if (!basis.rff) return h;

    const MatrixXd& B = basis.rff->B;
    const Index D = B.rows();
    JetBatch z(D, h.points(), h.dims(), h.order(), JetBatch::Uninitialized{});
    z.data().noalias() = (kTwoPi * B) * h.data();

    const double scale = 1.0 / std::sqrt(static_cast<double>(D));
    MatrixXd C, S;
    fast_sincos(z.value(), C, S);
    JetBatch psi(2 * D, h.points(), h.dims(), h.order(), JetBatch::Uninitialized{});
    const auto c = C.array(), s = S.array();
    psi.value().topRows(D) = scale * C;
    psi.value().bottomRows(D) = scale * S;
    for (int i = 0; i < z.dims(); ++i) {
        if (z.order() < 1) break;
        const auto g = z.grad(i).array();
        psi.grad(i).topRows(D) = (-scale * s * g).matrix();
        psi.grad(i).bottomRows(D) = (scale * c * g).matrix();
        if (z.order() < 2) continue;
        const auto d2 = z.diag2(i).array();
        psi.diag2(i).topRows(D) = (-scale * (s * d2 + c * g.square())).matrix();
        psi.diag2(i).bottomRows(D) = (scale * (c * d2 - s * g.square())).matrix();
    }
    if (cache) {
        cache->z = std::move(z);
        cache->cos_z = std::move(C);
        cache->sin_z = std::move(S);
    }
    return psi;
}

VectorXd backward_features(const FeatureBasis& basis, const FeatureCache& cache,
                           const JetBatch& psi_adjoint) {
    if (!basis.rff) return backward_hidden(basis.params, cache.hidden, psi_adjoint);

    const MatrixXd& B = basis.rff->B;
    const Index D = B.rows();
    const JetBatch& z = cache.z;
    const double scale = 1.0 / std::sqrt(static_cast<double>(D));

    const auto c = cache.cos_z.array(), s = cache.sin_z.array();
    // With a, b the adjoints of the cos and sin halves, the chain rule needs
    //   P(a, b) = b cos z - a sin z   (first derivative, and minus the third)
    //   Q(a, b) = -(a cos z + b sin z) (second derivative)
    const auto P = [&](Component comp) {
        const auto a = psi_adjoint.block(comp).topRows(D).array();
        const auto b = psi_adjoint.block(comp).bottomRows(D).array();
        return (scale * (b * c - a * s)).eval();
    };
    const auto Q = [&](Component comp) {
        const auto a = psi_adjoint.block(comp).topRows(D).array();
        const auto b = psi_adjoint.block(comp).bottomRows(D).array();
        return (-scale * (a * c + b * s)).eval();
    };
    JetBatch z_adj(D, z.points(), z.dims(), z.order(), JetBatch::Uninitialized{});
    Eigen::ArrayXXd value_adj = P(Component::value());
    for (int i = 0; i < z.dims() && z.order() >= 1; ++i) {
        const auto g = z.grad(i).array();
        value_adj += Q(Component::grad(i)) * g;
        z_adj.grad(i) = P(Component::grad(i)).matrix();
        if (z.order() < 2) continue;
        const Eigen::ArrayXXd p2 = P(Component::diag2(i)), q2 = Q(Component::diag2(i));
        value_adj += q2 * z.diag2(i).array() - p2 * g.square();
        z_adj.grad(i).array() += 2.0 * q2 * g;
        z_adj.diag2(i) = p2.matrix();
    }
    z_adj.value() = value_adj.matrix();

    JetBatch h_adj(B.cols(), z.points(), z.dims(), z.order(), JetBatch::Uninitialized{});
    h_adj.data().noalias() = (kTwoPi * B.transpose()) * z_adj.data();
    return backward_hidden(basis.params, cache.hidden, h_adj);
}

std::vector<Jet2> psi_jets(const FeatureBasis& basis, const VectorXd& x, int order) {
    basis.validate();
    const JetBatch psi = forward_features(basis, x, order);
    require_finite(psi, "feature jets");
    std::vector<Jet2> out;
    out.reserve(psi.rows());
    for (Index k = 0; k < psi.rows(); ++k) out.push_back(psi.at(k, 0));
    return out;
}

}  // namespace ifef
