#include "ifef/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ifef/error.hpp"

namespace ifef {

namespace {

std::vector<double> magnitudes_at_slice(const FeatureBasis& basis, const VectorXd& readout,
                                        const SpectrumConfig& cfg) {
    const VectorXd x = spectrum_grid(cfg.eval_points);
    MatrixXd pts(2, x.size());
    pts.row(0) = x.transpose();
    pts.row(1).setConstant(cfg.time_slice);
    return spectrum_magnitudes(predict(basis, readout, pts), cfg);
}

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

void SpectrumExperimentConfig::validate() const {
    spectrum.validate();
    train.validate();
    if (spectrum.d_sweep.empty()) throw ConfigError("d_sweep must not be empty");
    for (Index D : spectrum.d_sweep)
        if (D < 1) throw ConfigError("d_sweep entries must be positive");
    if (spectrum.seeds.empty()) throw ConfigError("spectrum experiment needs at least one seed");
    if (widths.empty()) throw ConfigError("network needs at least one hidden layer");
    if (interior_grid.size() != 2) throw ConfigError("interior grid needs two counts");
    if (boundary_points < 1 || chunk < 1) throw ConfigError("boundary points and chunk must be positive");
}

SpectrumTable spectrum_experiment(const SpectrumExperimentConfig& config,
                                  const SpectrumProgress& progress) {
    config.validate();
    const SpectrumConfig& sc = config.spectrum;
    std::vector<Index> sweep = sc.d_sweep;
    std::sort(sweep.begin(), sweep.end());
    sweep.erase(std::unique(sweep.begin(), sweep.end()), sweep.end());
    const Index max_D = sweep.back();
    const std::size_t nf = sc.frequencies.size();

    SpectrumTable table;
    table.frequencies = sc.frequencies;
    table.rows.push_back({"vanilla", 0, std::vector<double>(nf, 0.0), 0, {}});
    for (Index D : sweep) table.rows.push_back({"rff", D, std::vector<double>(nf, 0.0), 0, {}});

    const auto add = [&](SpectrumRow& row, const std::vector<double>& mags) {
        for (std::size_t i = 0; i < nf; ++i) row.magnitudes[i] += mags[i];
        ++row.completed;
    };
    const auto note = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    const PdeProblem problem = make_multisine_convection(config.beta, sc.frequencies, sc.amplitudes);
    for (std::uint64_t seed : sc.seeds) {
        TrainConfig tc = config.train;
        tc.seed = seed;
        tc.ifef_epochs = 0;
        tc.extension = Extension::Rff;
        std::optional<NetworkParams> warm;
        try {
            const PinnObjective objective(problem,
                                          sample_uniform(problem, config.interior_grid,
                                                         config.boundary_points, seed));
            NetworkParams p0 = NetworkParams::xavier(2, config.widths, true, seed);
            if (config.normalize_inputs) p0.set_input_range(problem.domain.lo, problem.domain.hi);
            warm = pretrain_vanilla(objective, p0, tc).params;
            FeatureBasis vanilla;
            vanilla.params = *warm;
            add(table.rows[0], magnitudes_at_slice(vanilla, warm->readout->transpose(), sc));
            note("seed " + std::to_string(seed) + ": vanilla done");

            const RffMatrix full = sample_rff(max_D, warm->width(), tc.sigma, tc.rff_seed());
            for (std::size_t j = 0; j < sweep.size(); ++j) {
                SpectrumRow& row = table.rows[j + 1];
                try {
                    FeatureBasis basis;
                    basis.params = *warm;
                    basis.params.readout.reset();
                    basis.rff = RffMatrix{full.B.topRows(sweep[j]), tc.sigma, tc.rff_seed()};
                    const QpSystem sys = objective.assemble_streaming(basis, tc.lambda_ll, config.chunk);
                    const VectorXd theta = solve_regularized(sys, tc.gamma);
                    add(row, magnitudes_at_slice(basis, theta, sc));
                    note("seed " + std::to_string(seed) + ": D = " + std::to_string(sweep[j]) + " done");
                } catch (const std::exception& e) {
                    row.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
                }
            }
        } catch (const std::exception& e) {
            const std::string reason = "seed " + std::to_string(seed) + ": " + e.what();
            for (auto& row : table.rows)
                if (row.D == 0 ? !warm : true) row.failures.push_back(reason);
        }
    }
    for (auto& row : table.rows)
        for (double& m : row.magnitudes)
            m = row.completed > 0 ? m / row.completed : std::numeric_limits<double>::quiet_NaN();
    return table;
}

std::string spectrum_csv(const SpectrumTable& table) {
    std::ostringstream out;
    out << "model,D,seeds";
    for (double f : table.frequencies) out << ",f" << format_number(f);
    out << "\n";
    for (const auto& row : table.rows) {
        out << row.model << "," << row.D << "," << row.completed;
        for (double m : row.magnitudes) out << "," << format_number(m);
        out << "\n";
    }
    return out.str();
}

}  // namespace ifef
