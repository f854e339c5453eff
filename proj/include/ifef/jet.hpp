#pragma once

#include <cmath>
#include <Eigen/Dense>

#include "ifef/error.hpp"

namespace ifef {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Which derivative of a scalar field a quantity refers to. Only per-axis
/// first and second derivatives exist; there are no mixed partials.
struct Component {
    enum class Kind { Value, Grad, Diag2 };
    Kind kind = Kind::Value;
    int axis = 0;

    static constexpr Component value() { return {Kind::Value, 0}; }
    static constexpr Component grad(int axis) { return {Kind::Grad, axis}; }
    static constexpr Component diag2(int axis) { return {Kind::Diag2, axis}; }

    int order() const { return kind == Kind::Value ? 0 : (kind == Kind::Grad ? 1 : 2); }
    bool operator==(const Component&) const = default;
};

/// Value, gradient and per-axis second derivatives of a scalar at one point.
/// Entries above `order` are zero and must not be read.
struct Jet2 {
    double value = 0.0;
    VectorXd grad;
    VectorXd diag2;
    int order = 2;

    explicit Jet2(int dims = 0, int order_ = 2)
        : grad(VectorXd::Zero(dims)), diag2(VectorXd::Zero(dims)), order(order_) {}

    double operator[](Component c) const {
        switch (c.kind) {
            case Component::Kind::Value: return value;
            case Component::Kind::Grad: return grad(c.axis);
            case Component::Kind::Diag2: return diag2(c.axis);
        }
        return 0.0;
    }
};

/// Jets of `rows()` scalar quantities at `points()` points, stored as one
/// matrix whose column blocks are [value | d/dx_0 .. d/dx_{n-1} | d2/dx_0^2 ..].
/// Blocks beyond `order` are absent. Keeping every component in one matrix
/// lets a dense layer act on all of them with a single product.
class JetBatch {
public:
    struct Uninitialized {};

    JetBatch() = default;
    JetBatch(Index rows, Index points, int dims, int order)
        : data_(MatrixXd::Zero(rows, points * block_count(dims, order))),
          points_(points), dims_(dims), order_(order) {}
    /// Storage left unset; every block must be written before it is read.
    JetBatch(Index rows, Index points, int dims, int order, Uninitialized)
        : data_(rows, points * block_count(dims, order)), points_(points), dims_(dims), order_(order) {}

    static int block_count(int dims, int order) {
        return 1 + (order >= 1 ? dims : 0) + (order >= 2 ? dims : 0);
    }

    Index rows() const { return data_.rows(); }
    Index points() const { return points_; }
    int dims() const { return dims_; }
    int order() const { return order_; }
    int blocks() const { return block_count(dims_, order_); }

    int block_index(Component c) const {
        if (c.order() > order_) throw ConfigError("jet component above carried order");
        if (c.kind != Component::Kind::Value && (c.axis < 0 || c.axis >= dims_))
            throw ConfigError("jet axis out of range");
        switch (c.kind) {
            case Component::Kind::Value: return 0;
            case Component::Kind::Grad: return 1 + c.axis;
            case Component::Kind::Diag2: return 1 + dims_ + c.axis;
        }
        return 0;
    }

    auto block(Component c) { return data_.middleCols(block_index(c) * points_, points_); }
    auto block(Component c) const { return data_.middleCols(block_index(c) * points_, points_); }
    auto value() { return data_.leftCols(points_); }
    auto value() const { return data_.leftCols(points_); }
    auto grad(int axis) { return block(Component::grad(axis)); }
    auto grad(int axis) const { return block(Component::grad(axis)); }
    auto diag2(int axis) { return block(Component::diag2(axis)); }
    auto diag2(int axis) const { return block(Component::diag2(axis)); }

    MatrixXd& data() { return data_; }
    const MatrixXd& data() const { return data_; }

    /// Jet of quantity `row` at point `col`.
    Jet2 at(Index row, Index col) const;

private:
    MatrixXd data_;
    Index points_ = 0;
    int dims_ = 0;
    int order_ = 0;
};

inline Jet2 JetBatch::at(Index row, Index col) const {
    Jet2 jet(dims_, order_);
    jet.value = value()(row, col);
    for (int i = 0; i < dims_; ++i) {
        if (order_ >= 1) jet.grad(i) = grad(i)(row, col);
        if (order_ >= 2) jet.diag2(i) = diag2(i)(row, col);
    }
    return jet;
}

/// Scalar carrying value, first and second directional derivative along one
/// seeded axis. Used to differentiate closed-form expressions exactly.
struct HyperDual {
    double v = 0.0, d = 0.0, dd = 0.0;

    HyperDual() = default;
    HyperDual(double value) : v(value) {}  // NOLINT: implicit constant lift
    HyperDual(double value, double first, double second) : v(value), d(first), dd(second) {}

    static HyperDual variable(double x) { return {x, 1.0, 0.0}; }
};

inline HyperDual operator+(HyperDual a, HyperDual b) { return {a.v + b.v, a.d + b.d, a.dd + b.dd}; }
inline HyperDual operator-(HyperDual a, HyperDual b) { return {a.v - b.v, a.d - b.d, a.dd - b.dd}; }
inline HyperDual operator-(HyperDual a) { return {-a.v, -a.d, -a.dd}; }
inline HyperDual operator*(HyperDual a, HyperDual b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d, a.dd * b.v + 2.0 * a.d * b.d + a.v * b.dd};
}
inline HyperDual operator/(HyperDual a, HyperDual b) {
    const double inv = 1.0 / b.v;
    const double q = a.v * inv;
    const double qd = (a.d - q * b.d) * inv;
    const double qdd = (a.dd - 2.0 * qd * b.d - q * b.dd) * inv;
    return {q, qd, qdd};
}

// f(u) with f', f'' at u.v: chain rule through a unary map.
inline HyperDual apply_unary(HyperDual u, double f0, double f1, double f2) {
    return {f0, f1 * u.d, f1 * u.dd + f2 * u.d * u.d};
}
inline HyperDual sin(HyperDual u) {
    return apply_unary(u, std::sin(u.v), std::cos(u.v), -std::sin(u.v));
}
inline HyperDual cos(HyperDual u) {
    return apply_unary(u, std::cos(u.v), -std::sin(u.v), -std::cos(u.v));
}
inline HyperDual exp(HyperDual u) {
    const double e = std::exp(u.v);
    return apply_unary(u, e, e, e);
}
inline HyperDual tanh(HyperDual u) {
    const double t = std::tanh(u.v);
    const double d1 = 1.0 - t * t;
    return apply_unary(u, t, d1, -2.0 * t * d1);
}

}  // namespace ifef
