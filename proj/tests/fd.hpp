#pragma once

#include <functional>

#include <Eigen/Dense>

namespace fd {

using Eigen::VectorXd;

/// Central difference of f along e_i.
inline double partial(const std::function<double(const VectorXd&)>& f, const VectorXd& x, int i,
                      double h = 1e-5) {
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    return (f(a) - f(b)) / (2.0 * h);
}

inline double second(const std::function<double(const VectorXd&)>& f, const VectorXd& x, int i,
                     double h = 1e-4) {
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    return (f(a) - 2.0 * f(x) + f(b)) / (h * h);
}

inline VectorXd gradient(const std::function<double(const VectorXd&)>& f, const VectorXd& x,
                         double h = 1e-6) {
    VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = partial(f, x, static_cast<int>(i), h);
    return g;
}

/// max |a - b| / (1 + max |b|)
inline double rel_err(const VectorXd& a, const VectorXd& b) {
    return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

}  // namespace fd
