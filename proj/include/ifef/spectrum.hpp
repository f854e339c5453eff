#pragma once

#include <string>
#include <vector>

#include "ifef/trainer.hpp"

namespace ifef {

/// Settings of the frequency-resolution experiment: a vanilla warm start on
/// the multi-sinusoid convection problem, then one-shot lower solves on
/// nested Fourier extensions of its hidden features.
struct SpectrumExperimentConfig {
    SpectrumConfig spectrum;
    TrainConfig train;  // pretrain_epochs, pretrain_lr, lambda_pretrain, lambda_ll, gamma, sigma
    double beta = 1.0;
    std::vector<int> widths = std::vector<int>(8, 64);
    bool normalize_inputs = true;
    std::vector<int> interior_grid{201, 201};
    Index boundary_points = 201;
    Index chunk = 1024;

    void validate() const;
};

struct SpectrumRow {
    std::string model;  // "vanilla" or "rff"
    Index D = 0;        // 0 for vanilla
    std::vector<double> magnitudes;  // mean over completed seeds, per frequency
    int completed = 0;
    std::vector<std::string> failures;  // "seed <s>: <reason>"
};

struct SpectrumTable {
    std::vector<double> frequencies;
    std::vector<SpectrumRow> rows;
};

using SpectrumProgress = std::function<void(const std::string&)>;

/// Rows: vanilla first, then one per D in ascending sweep order. A failed
/// cell is recorded in `failures` and left out of the mean.
SpectrumTable spectrum_experiment(const SpectrumExperimentConfig& config,
                                  const SpectrumProgress& progress = {});

/// CSV text: header `model,D,seeds,f<f_1>,...,f<f_n>`, one line per row.
std::string spectrum_csv(const SpectrumTable& table);

}  // namespace ifef
