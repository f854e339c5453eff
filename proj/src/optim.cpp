#include "ifef/optim.hpp"

#include <cmath>

namespace ifef {

void Adam::step(VectorXd& params, const VectorXd& grad) {
    if (m_.size() != params.size()) {
        m_ = VectorXd::Zero(params.size());
        v_ = VectorXd::Zero(params.size());
        t_ = 0;
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace ifef
