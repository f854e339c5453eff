#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ifef/checks.hpp"
#include "ifef/config.hpp"
#include "ifef/error.hpp"
#include "ifef/io.hpp"
#include "ifef/runner.hpp"

#ifndef IFEF_CONFIG_DIR
#define IFEF_CONFIG_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace ifef;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::vector<fs::path> preset_dirs(const char* argv0) {
    std::vector<fs::path> dirs{"presets"};
    std::error_code ec;
    const fs::path exe = fs::canonical(argv0, ec);
    if (!ec) {
        dirs.push_back(exe.parent_path() / "presets");
        dirs.push_back(exe.parent_path().parent_path() / "presets");
    }
    dirs.push_back(IFEF_CONFIG_DIR);
    return dirs;
}

fs::path output_dir(const ExperimentConfig& config, const std::string& out_flag, const std::string& suffix = {}) {
    if (!out_flag.empty()) return out_flag;
    const char* root = std::getenv("IFEF_OUTPUT_ROOT");
    fs::path base = root && *root ? fs::path(root) : fs::path("runs");
    base /= config.output_dir;
    return suffix.empty() ? base : base / suffix;
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

std::vector<Index> parse_sweep(const std::string& text) {
    std::vector<Index> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(item, &used);
            if (used != item.size() || v < 1) throw std::invalid_argument(item);
            out.push_back(static_cast<Index>(v));
        } catch (const std::exception&) {
            throw ConfigError("--d-sweep: '" + item + "' is not a positive integer");
        }
    }
    if (out.empty()) throw ConfigError("--d-sweep is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bi-level PINN training with Fourier-extended hidden features"};
    app.require_subcommand(1);

    std::string config_arg, out_flag, variant_flag, extension_flag, sweep_flag;
    std::optional<std::uint64_t> seed_flag;
    std::vector<std::string> variant_list;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_arg, "Config file or preset name")->required();
        sub->add_option("--out", out_flag, "Output directory (overrides IFEF_OUTPUT_ROOT)");
    };
    CLI::App* train = app.add_subcommand("train", "Run one training job");
    add_common(train);
    train->add_option("--seed", seed_flag, "Run seed (default: first seed of the config)");
    train->add_option("--variant", variant_flag, "ifef | ifef-pd | vanilla");
    train->add_option("--extension", extension_flag, "rff | none");

    CLI::App* compare = app.add_subcommand("compare", "Variants x seeds, final relative L2 table");
    add_common(compare);
    compare->add_option("--variant", variant_list, "Variants to compare (default: config list)");
    compare->add_option("--seed", seed_flag, "Run this seed only");
    compare->add_option("--extension", extension_flag, "rff | none");

    CLI::App* spectrum = app.add_subcommand("spectrum", "Frequency-resolution experiment");
    add_common(spectrum);
    spectrum->add_option("--d-sweep", sweep_flag, "Comma-separated feature counts, e.g. 400,1600");
    spectrum->add_option("--seed", seed_flag, "Run this seed only");

    app.add_subcommand("selfcheck", "Fast oracle suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (app.got_subcommand("selfcheck")) {
            bool all = true;
            for (const auto& r : run_selfchecks()) {
                std::cout << "CHECK " << r.name << ' ' << (r.pass ? "PASS" : "FAIL") << ' ' << r.detail << std::endl;
                all = all && r.pass;
            }
            return all ? 0 : 1;
        }

        const ExperimentConfig config = load_config(resolve_config(config_arg, preset_dirs(argv[0])));

        if (app.got_subcommand("train")) {
            RunOverrides o;
            o.seed = seed_flag;
            if (!variant_flag.empty()) o.variant = parse_variant(variant_flag);
            if (!extension_flag.empty()) o.extension = parse_extension(extension_flag);
            const std::uint64_t seed = seed_flag.value_or(config.seeds.front());
            const fs::path dir = output_dir(config, out_flag, "seed_" + std::to_string(seed));
            const RunOutcome r = run_training(config, o, dir, log_line);
            std::cout << "rel_l2 " << format_double(r.final_rel_l2) << "\n" << "output " << dir.string() << std::endl;
            for (const auto& w : r.warnings) std::cerr << "warning: " << w << std::endl;
            return 0;
        }
        if (app.got_subcommand("compare")) {
            std::vector<Variant> variants = config.variants;
            if (!variant_list.empty()) {
                variants.clear();
                for (const auto& v : variant_list) variants.push_back(parse_variant(v));
            }
            std::vector<std::uint64_t> seeds = config.seeds;
            if (seed_flag) seeds = {*seed_flag};
            std::optional<Extension> ext;
            if (!extension_flag.empty()) ext = parse_extension(extension_flag);
            const fs::path dir = output_dir(config, out_flag, "compare");
            const auto cells = run_compare(config, variants, seeds, ext, dir, log_line);
            const std::string csv = compare_csv(cells, variants);
            write_atomic(dir / "compare.csv", csv);
            std::cout << csv;
            return 0;
        }
        if (app.got_subcommand("spectrum")) {
            if (!config.spectrum) throw ConfigError("config has no 'spectrum' section");
            SpectrumExperimentConfig sc = *config.spectrum;
            if (!sweep_flag.empty()) sc.spectrum.d_sweep = parse_sweep(sweep_flag);
            if (seed_flag) sc.spectrum.seeds = {*seed_flag};
            const fs::path dir = output_dir(config, out_flag);
            const std::string csv = spectrum_csv(spectrum_experiment(sc, log_line));
            write_atomic(dir / "spectrum.csv", csv);
            std::cout << csv;
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << std::endl;
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
