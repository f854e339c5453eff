#pragma once

#include "ifef/jet.hpp"

namespace ifef {

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8 by default).
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(VectorXd& params, const VectorXd& grad);
    void reset() { t_ = 0; m_.resize(0); v_.resize(0); }
    long steps_taken() const { return t_; }
    double lr() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    VectorXd m_, v_;
};

/// params -= lr * grad.
inline void gradient_step(VectorXd& params, const VectorXd& grad, double lr) { params -= lr * grad; }

}  // namespace ifef
