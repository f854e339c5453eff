#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifef/config.hpp"

namespace ifef {

inline constexpr const char* kSuiteVersion = "1.0.0";

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<Variant> variant;
    std::optional<Extension> extension;
};

struct RunOutcome {
    bool ok = false;
    double final_rel_l2 = std::numeric_limits<double>::quiet_NaN();
    std::string error;  // set when !ok
    std::filesystem::path directory;
    std::vector<std::string> warnings;
};

using LogFn = std::function<void(const std::string&)>;

/// One training run into `out_dir`:
///   metrics.csv           main-phase metrics (IFeF epochs, or vanilla epochs)
///   pretrain_metrics.csv  warm-start metrics when a warm start ran
///   checkpoint.bin        final network, readout/theta and B_D description
///   manifest.json         config snapshot and hash, seeds, counts, file checksums
/// The manifest is written last, and also on failure (status "numeric_error"),
/// after which the NumericError is rethrown.
RunOutcome run_training(const ExperimentConfig& config, const RunOverrides& overrides,
                        const std::filesystem::path& out_dir, const LogFn& log = {});

struct CompareCell {
    Variant variant = Variant::Ifef;
    std::uint64_t seed = 0;
    double rel_l2 = std::numeric_limits<double>::quiet_NaN();
    std::string reason;
};

/// Every variant x seed of the config; a failed cell keeps NaN and its reason.
std::vector<CompareCell> run_compare(const ExperimentConfig& config,
                                     const std::vector<Variant>& variants,
                                     const std::vector<std::uint64_t>& seeds,
                                     std::optional<Extension> extension,
                                     const std::filesystem::path& out_dir, const LogFn& log = {});

/// Header `variant,seed,rel_l2,std,reason`. One row per cell, then one
/// summary row per variant with seed = "mean", rel_l2 = mean and std = sample
/// standard deviation over its finite cells.
std::string compare_csv(const std::vector<CompareCell>& cells, const std::vector<Variant>& variants);

}  // namespace ifef
