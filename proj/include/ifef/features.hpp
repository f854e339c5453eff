#pragma once

#include <cstdint>
#include <optional>

#include "ifef/network.hpp"

namespace ifef {

/// Constant frequency matrix B (D x p) of the random Fourier map.
struct RffMatrix {
    MatrixXd B;
    double sigma = 1.0;
    std::uint64_t seed = 0;

    Index features() const { return B.rows(); }  // D
};

/// Entries i.i.d. N(0, sigma^2), drawn row-major from Rng(seed). The first
/// D1 rows of a D2 > D1 draw equal the D1 draw with the same seed/sigma/p.
RffMatrix sample_rff(Index D, Index p, double sigma, std::uint64_t seed);

/// Extended basis psi = gamma_D o h_omega, or h_omega itself when `rff` is
/// empty (ablation without the Fourier extension).
struct FeatureBasis {
    NetworkParams params;
    std::optional<RffMatrix> rff;

    /// 2D with the extension, p without.
    Index feature_count() const;
    void validate() const;
};

struct FeatureCache {
    HiddenCache hidden;
    JetBatch z;  // 2*pi*B*h, only with the extension
    MatrixXd cos_z, sin_z;
};

/// psi_D jets at every column of `points`:
///   psi = D^{-1/2} [cos(2 pi B h); sin(2 pi B h)]
/// differentiated through h by the jet chain rule.
JetBatch forward_features(const FeatureBasis& basis, const MatrixXd& points, int order,
                          FeatureCache* cache = nullptr);

/// Gradient over hidden parameters of a loss whose adjoint with respect to
/// the feature jets is `psi_adjoint`.
VectorXd backward_features(const FeatureBasis& basis, const FeatureCache& cache,
                           const JetBatch& psi_adjoint);

/// Single-point convenience: feature_count() jets at x.
std::vector<Jet2> psi_jets(const FeatureBasis& basis, const VectorXd& x, int order);

}  // namespace ifef
