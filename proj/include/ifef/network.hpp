#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ifef/jet.hpp"

namespace ifef {

struct DenseLayer {
    MatrixXd weight;  // out x in
    VectorXd bias;    // out
};

/// Hidden tanh stack h_omega: R^n -> R^p, plus the optional linear readout W
/// (1 x p, no bias) used by vanilla PINN training.
///
/// Flat parameter order (gradients, finite-difference checks, checkpoints):
/// layer-major; within a layer the weight matrix row-major, then the bias;
/// the readout, when present, comes last.
struct NetworkParams {
    std::vector<DenseLayer> layers;
    std::optional<Eigen::RowVectorXd> readout;
    /// Fixed map x -> (x - input_center) .* input_scale in front of the first
    /// layer; empty vectors mean the identity. Not a trainable parameter.
    VectorXd input_center, input_scale;

    int input_dim() const;
    int width() const;  // p, the last hidden width
    Index hidden_parameter_count() const;
    Index parameter_count() const;

    /// Throws ConfigError if layer shapes do not chain.
    void validate() const;

    /// Maps the box [lo, hi] onto [-1, 1] per axis.
    void set_input_range(const VectorXd& lo, const VectorXd& hi);

    VectorXd flatten() const;
    void assign(const VectorXd& flat);

    /// Glorot-normal weights, zero biases; readout drawn the same way.
    static NetworkParams xavier(int input_dim, const std::vector<int>& widths, bool with_readout,
                                std::uint64_t seed);
};

/// Activations kept by the forward pass for the reverse pass.
struct HiddenCache {
    std::vector<JetBatch> inputs;   // inputs[k] feeds layer k; inputs.back() is h
    std::vector<JetBatch> preacts;  // preacts[k] = W_k inputs[k] + b_k
};

/// Jets of the coordinate functions at the columns of `points` (n x N),
/// after the optional affine input map of `params`.
JetBatch input_jets(const NetworkParams& params, const MatrixXd& points, int order);

/// Hidden features with input-derivatives up to `order` at every column of
/// `points`. Result has p rows and N points.
JetBatch forward_hidden(const NetworkParams& params, const MatrixXd& points, int order,
                        HiddenCache* cache = nullptr);

/// Gradient over the hidden parameters (flat order, readout excluded) of a
/// scalar loss whose adjoint with respect to the hidden jets is `h_adjoint`.
VectorXd backward_hidden(const NetworkParams& params, const HiddenCache& cache,
                         const JetBatch& h_adjoint);

/// Single-point convenience over forward_hidden: p jets.
std::vector<Jet2> hidden_jets(const NetworkParams& params, const VectorXd& x, int order);

/// Throws NumericError naming the first point (column) holding a NaN/Inf.
void require_finite(const JetBatch& jets, const char* what);

}  // namespace ifef
