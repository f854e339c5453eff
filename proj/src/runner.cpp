#include "ifef/runner.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "ifef/error.hpp"
#include "ifef/eval.hpp"
#include "ifef/io.hpp"

namespace ifef {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json boundary_summary(const PdeProblem& problem, Index budget, FaceMeasure measure) {
    json groups = json::array();
    for (const auto& g : split_boundary_budget(problem, budget, measure)) {
        json names = json::array();
        for (int c : g.conditions) names.push_back(problem.conditions[c].name);
        groups.push_back({{"conditions", names},
                          {"periodic", g.periodic},
                          {"measure", g.measure},
                          {g.periodic ? "pairs" : "points", g.samples}});
    }
    return groups;
}

}  // namespace

RunOutcome run_training(const ExperimentConfig& config, const RunOverrides& overrides,
                        const fs::path& out_dir, const LogFn& log) {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    const auto note = [&](const std::string& msg) {
        if (log) log(msg);
    };

    const std::uint64_t seed = overrides.seed.value_or(config.seeds.front());
    TrainConfig train = config.run_config(seed);
    if (overrides.variant) train.variant = *overrides.variant;
    if (overrides.extension) train.extension = *overrides.extension;
    train.validate();

    RunOutcome outcome;
    outcome.directory = out_dir;
    fs::create_directories(out_dir);

    const PdeProblem problem = config.problem.build();
    const CollocationSet collocation = config.sampler.sample(problem, seed);
    std::string reference_checksum;
    const EvalTarget target = build_eval_target(config, problem, &reference_checksum);
    const PinnObjective objective(problem, collocation);

    json manifest;
    manifest["suite_version"] = kSuiteVersion;
    manifest["config"] = config.snapshot;
    manifest["config_sha256"] = sha256_hex(config.snapshot.dump());
    manifest["overrides"] = {{"seed", seed},
                             {"variant", to_string(train.variant)},
                             {"extension", to_string(train.extension)}};
    json params = json::object();
    for (const auto& [k, v] : problem.parameters) params[k] = v;
    manifest["problem"] = {{"name", problem.name}, {"parameters", params}};
    manifest["seeds"] = {{"run", seed},
                         {"network", seed},
                         {"sampler", config.sampler.seed + seed},
                         {"rff", train.rff_seed()},
                         {"all_config_seeds", config.seeds}};
    manifest["collocation"] = {{"sampler", collocation.sampler},
                               {"boundary_rows", collocation.boundary_rows()},
                               {"interior_points", collocation.interior_points()},
                               {"boundary_split", boundary_summary(problem, config.sampler.boundary_points, config.sampler.face_measure)}};
    manifest["data_checksums"] = json::object();
    if (!reference_checksum.empty()) manifest["data_checksums"][config.eval.reference] = reference_checksum;
    manifest["eval_points"] = target.exact.size();

    std::vector<EpochMetrics> pre_metrics, main_metrics;
    const auto finish = [&](const std::string& status, const std::string& message) {
        json files = json::object();
        for (const char* name : {"metrics.csv", "pretrain_metrics.csv", "checkpoint.bin"}) {
            const fs::path p = out_dir / name;
            if (fs::exists(p)) files[name] = {{"path", name}, {"sha256", sha256_file(p)}};
        }
        manifest["files"] = files;
        manifest["status"] = status;
        if (!message.empty()) manifest["message"] = message;
        manifest["epochs_completed"] = {{"pretrain", pre_metrics.size()}, {"main", main_metrics.size()}};
        manifest["final_rel_l2"] = number_or_null(outcome.final_rel_l2);
        manifest["warnings"] = outcome.warnings;
        const std::time_t start_time = std::chrono::system_clock::to_time_t(started);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&start_time));
        manifest["wall_clock"] = {
            {"started_utc", stamp},
            {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
        write_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    };

    try {
        NetworkParams p0 = NetworkParams::xavier(problem.dims(), config.widths, true, seed);
        if (config.normalize_inputs) p0.set_input_range(problem.domain.lo, problem.domain.hi);
        const auto log_epoch = [&](const char* phase, const EpochMetrics& m) {
            if (!std::isnan(m.rel_l2))
                note(std::string(phase) + " epoch " + std::to_string(m.epoch) + " loss " +
                     format_double(m.upper_loss) + " rel_l2 " + format_double(m.rel_l2));
        };
        Checkpoint ckpt;
        if (train.variant == Variant::Vanilla) {
            // Equal budget: the vanilla baseline gets the warm-start and bi-level epochs.
            const int epochs = train.pretrain_epochs + train.ifef_epochs;
            note("vanilla training, " + std::to_string(epochs) + " epochs");
            PretrainResult pr = pretrain_vanilla(objective, p0, train, &target, epochs);
            main_metrics = pr.metrics;
            for (const auto& m : main_metrics) log_epoch("vanilla", m);
            ckpt.params = pr.params;
            ckpt.theta = pr.params.readout->transpose();
            FeatureBasis basis;
            basis.params = pr.params;
            outcome.final_rel_l2 = relative_l2(predict(basis, ckpt.theta, target.points), target.exact);
        } else {
            NetworkParams warm = p0;
            if (train.pretrain_epochs > 0) {
                note("warm start, " + std::to_string(train.pretrain_epochs) + " epochs");
                PretrainResult pr = pretrain_vanilla(objective, p0, train, &target);
                pre_metrics = pr.metrics;
                for (const auto& m : pre_metrics) log_epoch("warm-start", m);
                warm = pr.params;
                write_atomic(out_dir / "pretrain_metrics.csv", metrics_csv(pre_metrics));
            }
            note(to_string(train.variant) + " training, " + std::to_string(train.ifef_epochs) + " epochs");
            IfefResult r = ifef_train(objective, make_basis(warm, train), train, &target,
                                      [&](const EpochMetrics& m) {
                                          main_metrics.push_back(m);
                                          log_epoch(to_string(train.variant).c_str(), m);
                                      });
            outcome.warnings = r.warnings;
            outcome.final_rel_l2 = r.final_rel_l2;
            ckpt.params = r.basis.params;
            ckpt.theta = r.theta;
            if (r.basis.rff)
                ckpt.rff = Checkpoint::Rff{static_cast<std::uint64_t>(r.basis.rff->features()),
                                           static_cast<std::uint64_t>(r.basis.rff->B.cols()),
                                           r.basis.rff->sigma, r.basis.rff->seed};
        }
        write_atomic(out_dir / "metrics.csv", metrics_csv(main_metrics));
        write_checkpoint(out_dir / "checkpoint.bin", ckpt);
        outcome.ok = true;
        finish("ok", "");
        note("final rel_l2 " + format_double(outcome.final_rel_l2));
        return outcome;
    } catch (const NumericError& e) {
        outcome.error = e.what();
        write_atomic(out_dir / "metrics.csv", metrics_csv(main_metrics));
        finish("numeric_error", e.what());
        throw;
    }
}

std::vector<CompareCell> run_compare(const ExperimentConfig& config, const std::vector<Variant>& variants,
                                     const std::vector<std::uint64_t>& seeds,
                                     std::optional<Extension> extension, const fs::path& out_dir,
                                     const LogFn& log) {
    if (variants.size() < 2) throw ConfigError("compare needs at least two variants");
    std::vector<CompareCell> cells;
    for (Variant v : variants) {
        for (std::uint64_t s : seeds) {
            CompareCell cell{v, s, std::numeric_limits<double>::quiet_NaN(), ""};
            const fs::path dir = out_dir / to_string(v) / ("seed_" + std::to_string(s));
            try {
                RunOverrides o{s, v, extension};
                const RunOutcome r = run_training(config, o, dir);
                cell.rel_l2 = r.final_rel_l2;
            } catch (const std::exception& e) {
                cell.reason = e.what();
            }
            if (log)
                log(to_string(v) + " seed " + std::to_string(s) + ": " +
                    (cell.reason.empty() ? "rel_l2 " + format_double(cell.rel_l2) : cell.reason));
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

std::string compare_csv(const std::vector<CompareCell>& cells, const std::vector<Variant>& variants) {
    const auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch == '\n' ? ' ' : ch);
        return q + "\"";
    };
    std::ostringstream out;
    out << "variant,seed,rel_l2,std,reason\n";
    for (const auto& c : cells)
        out << to_string(c.variant) << ',' << c.seed << ',' << format_double(c.rel_l2) << ",,"
            << quote(c.reason) << '\n';
    for (Variant v : variants) {
        std::vector<double> vals;
        for (const auto& c : cells)
            if (c.variant == v && std::isfinite(c.rel_l2)) vals.push_back(c.rel_l2);
        double mean = std::numeric_limits<double>::quiet_NaN(), sd = mean;
        if (!vals.empty()) {
            mean = 0.0;
            for (double x : vals) mean += x;
            mean /= vals.size();
            sd = 0.0;
            if (vals.size() > 1) {
                for (double x : vals) sd += (x - mean) * (x - mean);
                sd = std::sqrt(sd / (vals.size() - 1));
            }
        }
        out << to_string(v) << ",mean," << format_double(mean) << ',' << format_double(sd) << ','
            << (vals.empty() ? "no completed seeds" : "") << '\n';
    }
    return out.str();
}

}  // namespace ifef
