#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "ifef/checks.hpp"
#include "ifef/config.hpp"
#include "ifef/error.hpp"
#include "ifef/io.hpp"
#include "ifef/runner.hpp"

#ifndef IFEF_SOURCE_DIR
#define IFEF_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace ifef;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string sci(double v) {
    std::ostringstream out;
    out.precision(3);
    out << std::scientific << v;
    return out.str();
}

Outcome from_check(const CheckResult& r) { return {r.pass, r.name + " " + r.detail}; }

ExperimentConfig preset(const std::string& name) {
    return load_config(fs::path(IFEF_SOURCE_DIR) / "presets" / (name + ".json"));
}

fs::path work_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "ifef_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void progress(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

// 200 bi-level epochs on the desk convection preset; every lower update must
// not raise the lower loss at the new omega.
Outcome monotone_alternation() {
    ExperimentConfig c = preset("convection_beta50_ifef");
    c.train.ifef_epochs = 200;
    const PdeProblem problem = c.problem.build();
    const std::uint64_t seed = c.seeds.front();
    const TrainConfig train = c.run_config(seed);
    const PinnObjective objective(problem, c.sampler.sample(problem, seed));
    NetworkParams p0 = NetworkParams::xavier(problem.dims(), c.widths, true, seed);
    if (c.normalize_inputs) p0.set_input_range(problem.domain.lo, problem.domain.hi);
    const NetworkParams warm = pretrain_vanilla(objective, p0, train).params;
    const IfefResult r = ifef_train(objective, make_basis(warm, train), train);
    int violations = 0, checked = 0;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& m : r.metrics) {
        if (std::isnan(m.lower_loss_prev)) continue;
        ++checked;
        const double excess = m.lower_loss - m.lower_loss_prev;
        worst = std::max(worst, excess);
        if (excess > 1e-12) ++violations;
    }
    return {violations == 0 && checked == 199,
            "updates=" + std::to_string(checked) + " violations=" + std::to_string(violations) +
                " max(L_new - L_prev)=" + sci(worst)};
}

Outcome desk_reproduction() {
    const ExperimentConfig c = preset("convection_beta50_ifef");
    const fs::path dir = work_dir("c8");
    RunOverrides ifef, vanilla;
    ifef.variant = Variant::Ifef;
    vanilla.variant = Variant::Vanilla;
    const RunOutcome a = run_training(c, ifef, dir / "ifef", progress);
    const RunOutcome b = run_training(c, vanilla, dir / "vanilla", progress);
    const double ratio = b.final_rel_l2 / a.final_rel_l2;
    const int pre = c.pretrain ? c.train.pretrain_epochs : 0;
    const bool budget = pre <= 5000 && c.train.ifef_epochs <= 2000 && c.train.D == 200;
    return {budget && a.final_rel_l2 <= 1e-2 && ratio >= 5.0,
            "ifef=" + sci(a.final_rel_l2) + " vanilla=" + sci(b.final_rel_l2) + " ratio=" + sci(ratio) +
                " pretrain_epochs=" + std::to_string(pre) + " ifef_epochs=" + std::to_string(c.train.ifef_epochs) +
                " D=" + std::to_string(c.train.D)};
}

Outcome ablation_direction() {
    const ExperimentConfig c = preset("convection_highfreq_ablation");
    const fs::path dir = work_dir("c9");
    RunOverrides rff, none;
    rff.extension = Extension::Rff;
    none.extension = Extension::None;
    const RunOutcome a = run_training(c, rff, dir / "rff", progress);
    double none_err = std::numeric_limits<double>::infinity();
    std::string note;
    try {
        none_err = run_training(c, none, dir / "none", progress).final_rel_l2;
    } catch (const NumericError& e) {
        note = " none_failed=\"" + std::string(e.what()) + "\"";
    }
    const double ratio = none_err / a.final_rel_l2;
    return {ratio >= 10.0, "rff=" + sci(a.final_rel_l2) + " none=" + sci(none_err) + " ratio=" + sci(ratio) + note};
}

Outcome spectrum_trend() {
    const ExperimentConfig c = preset("spectrum");
    if (!c.spectrum) throw ConfigError("spectrum preset lacks a spectrum section");
    SpectrumExperimentConfig sc = *c.spectrum;
    sc.spectrum.d_sweep = {400, 1600, 3200};
    sc.spectrum.seeds = {0, 1, 2};
    const SpectrumTable t = spectrum_experiment(sc, progress);
    std::cerr << spectrum_csv(t);
    std::vector<double> means;
    bool complete = true;
    for (const auto& row : t.rows) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < t.frequencies.size(); ++i)
            if (t.frequencies[i] >= 30) {
                sum += row.magnitudes[i];
                ++n;
            }
        means.push_back(n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN());
        complete = complete && row.completed == 3;
    }
    bool above = true, monotone = true;
    for (std::size_t j = 1; j < means.size(); ++j) {
        above = above && means[j] > means[0];
        if (j > 1) monotone = monotone && means[j] >= means[j - 1];
    }
    std::ostringstream d;
    d << "mean magnitude over f>=30: vanilla=" << sci(means[0]);
    for (std::size_t j = 1; j < means.size(); ++j) d << " D" << t.rows[j].D << "=" << sci(means[j]);
    d << " above_vanilla=" << (above ? "yes" : "no") << " nondecreasing=" << (monotone ? "yes" : "no");
    return {complete && above && monotone, d.str()};
}

Outcome determinism(const std::string& cli) {
    if (cli.empty()) throw ConfigError("criterion 12 needs --cli <path to the ifef binary>");
    const fs::path dir = work_dir("c12");
    const std::string config = (fs::path(IFEF_SOURCE_DIR) / "presets" / "convection_smoke.json").string();
    for (const char* run : {"a", "b"}) {
        const std::string cmd = "\"" + cli + "\" train --config \"" + config + "\" --seed 3 --out \"" +
                                (dir / run).string() + "\" > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        if (status != 0)
            return {false, std::string("train run ") + run + " exited with status " + std::to_string(status)};
    }
    const auto metrics = [&](const char* run) {
        for (const auto& e : fs::recursive_directory_iterator(dir / run))
            if (e.path().filename() == "metrics.csv") return read_file(e.path());
        throw ConfigError(std::string("no metrics.csv under run ") + run);
    };
    const std::string a = metrics("a"), b = metrics("b");
    return {a == b && !a.empty(), "metrics.csv bytes=" + std::to_string(a.size()) +
                                      " identical=" + (a == b ? "yes" : "no") + " sha256=" + sha256_hex(a)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> selected;
    std::string cli;
    app.add_option("--criterion", selected, "Criteria to run (default: all)");
    app.add_option("--cli", cli, "Path to the ifef binary (criterion 12)");
    CLI11_PARSE(app, argc, argv);

    const std::map<int, std::function<Outcome()>> criteria{
        {1, [] { return from_check(check_jet_derivatives(6, 200, 1e-6, 1e-4)); }},
        {2, [] { return from_check(check_parameter_gradient(1e-5)); }},
        {3, [] { return from_check(check_qp_equivalence(50, 1e-12, 1e-6)); }},
        {4, [] { return from_check(check_hypergradient(1e-4)); }},
        {5, [] { return from_check(check_rank_guard()); }},
        {6, monotone_alternation},
        {7, [] { return from_check(check_sufficient_decrease(100)); }},
        {8, desk_reproduction},
        {9, ablation_direction},
        {10, spectrum_trend},
        {11, [] { return from_check(check_suite_consistency(100, 1e-8)); }},
        {12, [&] { return determinism(cli); }},
    };
    // Seconds; criteria without a stated runtime have no limit.
    const std::map<int, double> limits{{1, 10},  {2, 30},   {3, 30}, {4, 60},
                                       {8, 900}, {9, 1200}, {10, 1800}, {11, 5}};
    if (selected.empty())
        for (const auto& entry : criteria) selected.push_back(entry.first);

    int failures = 0;
    for (int n : selected) {
        const auto it = criteria.find(n);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion " << n << std::endl;
            return 2;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = it->second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto limit = limits.find(n);
        const bool in_time = limit == limits.end() || secs <= limit->second;
        const bool pass = o.pass && in_time;
        std::ostringstream t;
        t.precision(1);
        t << std::fixed << " time=" << secs << "s";
        if (limit != limits.end()) t << " limit=" << limit->second << "s";
        std::cout << "CRITERION " << n << " " << (pass ? "PASS" : "FAIL") << " " << o.detail << t.str()
                  << (in_time ? "" : " (over time limit)") << std::endl;
        if (!pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
