#pragma once

#include <functional>
#include <vector>

#include "ifef/features.hpp"

namespace ifef {

/// |pred - exact|_2 / |exact|_2. Throws MetricError when |exact| = 0.
double relative_l2(const VectorXd& pred, const VectorXd& exact);

struct ErrorReport {
    double relative_l2 = 0.0;
    VectorXd abs_error;
    MatrixXd points;
    std::vector<int> grid;
};

ErrorReport error_report(const VectorXd& pred, const VectorXd& exact, const MatrixXd& points,
                         std::vector<int> grid);

/// u(x) = readout . psi(x) at each column of `points`, evaluated in chunks.
VectorXd predict(const FeatureBasis& basis, const VectorXd& readout, const MatrixXd& points,
                 Index chunk = 4096);

struct SpectrumConfig {
    std::vector<double> frequencies{1, 2, 5, 10, 30, 40, 50, 60, 70, 80};
    std::vector<double> amplitudes = std::vector<double>(10, 1.0);
    int eval_points = 512;  // M, grid x_m = m / M on [0, 1)
    double time_slice = 0.0;
    std::vector<Index> d_sweep{400, 800, 1600, 2400, 3200, 4000};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

    void validate() const;
};

/// The M evaluation abscissae x_m = m / M.
VectorXd spectrum_grid(int eval_points);

/// |2/M sum_m u(x_m) exp(-2 pi i f x_m)| / A_f for every target frequency:
/// a unit-amplitude sinusoid at f maps to exactly 1.
std::vector<double> spectrum_magnitudes(const VectorXd& samples, const SpectrumConfig& config);
std::vector<double> spectrum_magnitudes(const std::function<double(double)>& u,
                                        const SpectrumConfig& config);

}  // namespace ifef
