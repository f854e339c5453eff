#include "ifef/network.hpp"

#include <cmath>
#include <limits>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "ifef/elementwise.hpp"
#include "ifef/rng.hpp"

namespace ifef {

int NetworkParams::input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int NetworkParams::width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

Index NetworkParams::hidden_parameter_count() const {
    Index count = 0;
    for (const auto& layer : layers) count += layer.weight.size() + layer.bias.size();
    return count;
}

Index NetworkParams::parameter_count() const {
    return hidden_parameter_count() + (readout ? readout->size() : 0);
}

void NetworkParams::validate() const {
    if (layers.empty()) throw ConfigError("network has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& layer = layers[k];
        if (layer.weight.rows() != layer.bias.size())
            throw ConfigError("layer " + std::to_string(k) + ": bias length != output width");
        if (k > 0 && layer.weight.cols() != layers[k - 1].weight.rows())
            throw ConfigError("layer " + std::to_string(k) + ": input width does not chain");
    }
    if (readout && readout->size() != width())
        throw ConfigError("readout length != hidden width");
    if (input_center.size() != input_scale.size() ||
        (input_center.size() != 0 && input_center.size() != input_dim()))
        throw ConfigError("input map size != network input dimension");
}

void NetworkParams::set_input_range(const VectorXd& lo, const VectorXd& hi) {
    if (lo.size() != input_dim() || hi.size() != input_dim())
        throw ConfigError("input range size != network input dimension");
    if (((hi - lo).array() <= 0.0).any()) throw ConfigError("input range must have hi > lo");
    input_center = 0.5 * (lo + hi);
    input_scale = 2.0 / (hi - lo).array();
}

VectorXd NetworkParams::flatten() const {
    VectorXd flat(parameter_count());
    Index at = 0;
    for (const auto& layer : layers) {
        for (Index r = 0; r < layer.weight.rows(); ++r)
            for (Index c = 0; c < layer.weight.cols(); ++c) flat(at++) = layer.weight(r, c);
        flat.segment(at, layer.bias.size()) = layer.bias;
        at += layer.bias.size();
    }
    if (readout) flat.segment(at, readout->size()) = readout->transpose();
    return flat;
}

void NetworkParams::assign(const VectorXd& flat) {
    if (flat.size() != parameter_count()) throw ConfigError("flat parameter vector has wrong length");
    Index at = 0;
    for (auto& layer : layers) {
        for (Index r = 0; r < layer.weight.rows(); ++r)
            for (Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat(at++);
        layer.bias = flat.segment(at, layer.bias.size());
        at += layer.bias.size();
    }
    if (readout) *readout = flat.segment(at, readout->size()).transpose();
}

NetworkParams NetworkParams::xavier(int input_dim, const std::vector<int>& widths,
                                    bool with_readout, std::uint64_t seed) {
    if (input_dim < 1 || widths.empty()) throw ConfigError("network needs inputs and >= 1 layer");
    Rng rng(seed);
    NetworkParams params;
    int fan_in = input_dim;
    for (int width : widths) {
        if (width < 1) throw ConfigError("layer width must be positive");
        const double scale = std::sqrt(2.0 / (fan_in + width));
        DenseLayer layer{MatrixXd(width, fan_in), VectorXd::Zero(width)};
        for (Index r = 0; r < width; ++r)
            for (Index c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * rng.normal();
        params.layers.push_back(std::move(layer));
        fan_in = width;
    }
    if (with_readout) {
        const double scale = std::sqrt(2.0 / (fan_in + 1));
        Eigen::RowVectorXd w(fan_in);
        for (Index c = 0; c < fan_in; ++c) w(c) = scale * rng.normal();
        params.readout = w;
    }
    return params;
}

JetBatch input_jets(const NetworkParams& params, const MatrixXd& points, int order) {
    const int dims = static_cast<int>(points.rows());
    JetBatch jets(dims, points.cols(), dims, order);
    const bool mapped = params.input_scale.size() != 0;
    if (mapped)
        jets.value() = params.input_scale.asDiagonal() * (points.colwise() - params.input_center);
    else
        jets.value() = points;
    if (order >= 1)
        for (int i = 0; i < dims; ++i) jets.grad(i).row(i).setConstant(mapped ? params.input_scale(i) : 1.0);
    return jets;
}

namespace {

#if defined(__GLIBC__)
// Keep large jet buffers in the heap arena rather than in per-allocation mappings.
[[maybe_unused]] const bool allocator_tuned = [] {
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
    return true;
}();
#endif

/// Derivatives of tanh from its values s = tanh(z).
ElementwiseDerivs tanh_derivs(MatrixXd s_values) {
    ElementwiseDerivs f;
    f.f0 = std::move(s_values);
    const auto s = f.f0.array();
    f.f1 = (1.0 - s.square()).matrix();
    f.f2 = (-2.0 * s * f.f1.array()).matrix();
    f.f3 = (f.f1.array() * (4.0 * s.square() - 2.0 * f.f1.array())).matrix();
    return f;
}

JetBatch affine(const DenseLayer& layer, const JetBatch& in) {
    JetBatch z(layer.weight.rows(), in.points(), in.dims(), in.order(), JetBatch::Uninitialized{});
    z.data().noalias() = layer.weight * in.data();
    z.value().colwise() += layer.bias;
    return z;
}

}  // namespace

JetBatch forward_hidden(const NetworkParams& params, const MatrixXd& points, int order,
                        HiddenCache* cache) {
    if (order < 0 || order > 2) throw ConfigError("jet order must be 0, 1 or 2");
    if (points.rows() != params.input_dim())
        throw ConfigError("point dimension " + std::to_string(points.rows()) +
                          " != network input " + std::to_string(params.input_dim()));
    if (params.input_scale.size() != 0 &&
        (params.input_scale.size() != points.rows() || params.input_center.size() != points.rows()))
        throw ConfigError("input map size != point dimension");
    for (Index j = 0; j < points.cols(); ++j)
        if (!points.col(j).allFinite())
            throw NumericError("non-finite collocation point " + std::to_string(j), static_cast<long>(j));
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
    }
    JetBatch a = input_jets(params, points, order);
    for (const auto& layer : params.layers) {
        JetBatch z = affine(layer, a);
        JetBatch next = map_elementwise(z, tanh_derivs(fast_tanh(z.value())));
        if (cache) {
            cache->inputs.push_back(std::move(a));
            cache->preacts.push_back(std::move(z));
        }
        a = std::move(next);
    }
    if (cache) cache->inputs.push_back(a);
    return a;
}

VectorXd backward_hidden(const NetworkParams& params, const HiddenCache& cache,
                         const JetBatch& h_adjoint) {
    const std::size_t depth = params.layers.size();
    if (cache.preacts.size() != depth) throw ConfigError("forward cache does not match network");
    std::vector<MatrixXd> weight_grads(depth);
    std::vector<VectorXd> bias_grads(depth);

    JetBatch a_adj = h_adjoint;
    for (std::size_t k = depth; k-- > 0;) {
        const JetBatch& z = cache.preacts[k];
        JetBatch z_adj = map_elementwise_adjoint(z, tanh_derivs(cache.inputs[k + 1].value()), a_adj);
        weight_grads[k].noalias() = z_adj.data() * cache.inputs[k].data().transpose();
        bias_grads[k] = z_adj.value().rowwise().sum();
        if (k > 0) {
            JetBatch prev(params.layers[k].weight.cols(), z.points(), z.dims(), z.order(),
                          JetBatch::Uninitialized{});
            prev.data().noalias() = params.layers[k].weight.transpose() * z_adj.data();
            a_adj = std::move(prev);
        }
    }

    VectorXd grad(params.hidden_parameter_count());
    Index at = 0;
    for (std::size_t k = 0; k < depth; ++k) {
        const MatrixXd& gw = weight_grads[k];
        for (Index r = 0; r < gw.rows(); ++r)
            for (Index c = 0; c < gw.cols(); ++c) grad(at++) = gw(r, c);
        grad.segment(at, bias_grads[k].size()) = bias_grads[k];
        at += bias_grads[k].size();
    }
    return grad;
}

std::vector<Jet2> hidden_jets(const NetworkParams& params, const VectorXd& x, int order) {
    const JetBatch h = forward_hidden(params, x, order);
    require_finite(h, "hidden jets");
    std::vector<Jet2> out;
    out.reserve(h.rows());
    for (Index k = 0; k < h.rows(); ++k) out.push_back(h.at(k, 0));
    return out;
}

void require_finite(const JetBatch& jets, const char* what) {
    if (jets.data().allFinite()) return;
    const Index n = jets.points();
    for (Index col = 0; col < jets.data().cols(); ++col) {
        if (!jets.data().col(col).allFinite())
            throw NumericError(std::string("non-finite value in ") + what + " at point " +
                                   std::to_string(col % n),
                               static_cast<long>(col % n));
    }
}

}  // namespace ifef
