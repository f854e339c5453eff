#include "ifef/eval.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "ifef/error.hpp"

namespace ifef {

double relative_l2(const VectorXd& pred, const VectorXd& exact) {
    if (pred.size() != exact.size()) throw MetricError("prediction and reference sizes differ");
    const double denom = exact.norm();
    if (!(denom > 0.0)) throw MetricError("reference solution has zero norm");
    return (pred - exact).norm() / denom;
}

ErrorReport error_report(const VectorXd& pred, const VectorXd& exact, const MatrixXd& points,
                         std::vector<int> grid) {
    ErrorReport report;
    report.relative_l2 = relative_l2(pred, exact);
    report.abs_error = (pred - exact).cwiseAbs();
    report.points = points;
    report.grid = std::move(grid);
    return report;
}

VectorXd predict(const FeatureBasis& basis, const VectorXd& readout, const MatrixXd& points,
                 Index chunk) {
    if (readout.size() != basis.feature_count()) throw ConfigError("readout length != feature count");
    VectorXd out(points.cols());
    for (Index start = 0; start < points.cols(); start += chunk) {
        const Index n = std::min(chunk, points.cols() - start);
        const JetBatch psi = forward_features(basis, points.middleCols(start, n), 0);
        out.segment(start, n) = psi.value().transpose() * readout;
    }
    return out;
}

void SpectrumConfig::validate() const {
    if (frequencies.size() != amplitudes.size() || frequencies.empty())
        throw ConfigError("spectrum frequencies and amplitudes must be non-empty and equal length");
    if (eval_points < 2) throw ConfigError("spectrum grid needs at least two points");
    for (double f : frequencies)
        if (!(f > 0.0) || f >= eval_points / 2.0)
            throw ConfigError("frequency " + std::to_string(f) + " aliases on a " +
                              std::to_string(eval_points) + "-point grid");
    for (double a : amplitudes)
        if (a == 0.0) throw ConfigError("spectrum amplitudes must be non-zero");
}

VectorXd spectrum_grid(int eval_points) {
    VectorXd x(eval_points);
    for (int m = 0; m < eval_points; ++m) x(m) = static_cast<double>(m) / eval_points;
    return x;
}

std::vector<double> spectrum_magnitudes(const VectorXd& samples, const SpectrumConfig& config) {
    config.validate();
    if (samples.size() != config.eval_points) throw ConfigError("sample count != spectrum grid size");
    const VectorXd x = spectrum_grid(config.eval_points);
    std::vector<double> out;
    out.reserve(config.frequencies.size());
    for (std::size_t i = 0; i < config.frequencies.size(); ++i) {
        std::complex<double> acc = 0.0;
        for (Index m = 0; m < x.size(); ++m)
            acc += samples(m) * std::polar(1.0, -2.0 * std::numbers::pi * config.frequencies[i] * x(m));
        out.push_back(2.0 * std::abs(acc) / config.eval_points / std::abs(config.amplitudes[i]));
    }
    return out;
}

std::vector<double> spectrum_magnitudes(const std::function<double(double)>& u,
                                        const SpectrumConfig& config) {
    config.validate();
    const VectorXd x = spectrum_grid(config.eval_points);
    VectorXd samples(x.size());
    for (Index m = 0; m < x.size(); ++m) samples(m) = u(x(m));
    return spectrum_magnitudes(samples, config);
}

}  // namespace ifef
