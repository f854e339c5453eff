#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifef/spectrum.hpp"
#include "ifef/trainer.hpp"

namespace ifef {

/// Problem selector. `kind` is one of helmholtz, convection,
/// convection_diffusion, burgers, multisine_convection; `params` holds the
/// numeric parameters that kind accepts (missing ones take the defaults of
/// the benchmark definition).
struct ProblemSpec {
    std::string kind = "convection";
    std::map<std::string, double> params;
    std::vector<double> frequencies, amplitudes;  // multisine_convection only

    PdeProblem build() const;
};

struct SamplerSpec {
    std::string kind = "uniform";   // uniform | lhs
    std::vector<int> interior_grid;  // uniform
    Index interior_points = 0;       // lhs
    Index boundary_points = 0;
    std::uint64_t seed = 0;          // base seed; a run adds its own seed
    FaceMeasure face_measure = FaceMeasure::Normalized;

    CollocationSet sample(const PdeProblem& problem, std::uint64_t run_seed) const;
};

/// Evaluation target: a tensor grid against the closed-form solution, or a
/// reference CSV (`t,x,u`) for problems without one.
struct EvalSpec {
    std::vector<int> grid;
    std::string reference;  // path, resolved against the config file's directory
};

struct ExperimentConfig {
    std::string name;
    ProblemSpec problem;
    SamplerSpec sampler;
    std::vector<int> widths;
    bool normalize_inputs = true;  // map the domain box onto [-1, 1] before the first layer
    TrainConfig train;
    bool pretrain = true;
    EvalSpec eval;
    std::string output_dir;
    std::vector<std::uint64_t> seeds{0};
    std::vector<Variant> variants{Variant::Ifef, Variant::Vanilla};
    std::optional<SpectrumExperimentConfig> spectrum;
    bool long_running = false;  // full-scale presets

    std::filesystem::path source_dir;  // set by the loader
    nlohmann::json snapshot;           // parsed document, as written

    /// Cross-field checks; throws ConfigError.
    void validate() const;
    /// TrainConfig for one run: the given seed, and zero pretrain epochs when
    /// pretraining is disabled.
    TrainConfig run_config(std::uint64_t seed) const;
};

/// Relative-L2 target of a config: the grid against the closed-form solution
/// or the reference file. `checksum` receives the SHA-256 of a reference file.
EvalTarget build_eval_target(const ExperimentConfig& config, const PdeProblem& problem,
                             std::string* checksum = nullptr);

/// Parses a JSON document. Unknown keys at any level throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// A path to an existing file, or a preset name looked up as
/// <dir>/<name>.json in each of `search_dirs`.
std::filesystem::path resolve_config(const std::string& name_or_path,
                                     const std::vector<std::filesystem::path>& search_dirs);

}  // namespace ifef
