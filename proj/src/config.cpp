#include "ifef/config.hpp"

#include <fstream>
#include <numbers>
#include <set>

#include "ifef/error.hpp"
#include "ifef/io.hpp"

namespace ifef {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Reads keys of one JSON object and rejects any it did not consume.
class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    void read(const std::string& key, T& out) {
        if (!j_.contains(key)) return;
        used_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <class T>
    T require(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(where_ + ": missing key '" + key + "'");
        T out{};
        read(key, out);
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }

    const std::string& where() const { return where_; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void check_params(const ProblemSpec& spec, std::set<std::string> allowed) {
    for (const auto& [key, value] : spec.params)
        if (!allowed.count(key))
            throw ConfigError("problem " + spec.kind + ": unknown parameter '" + key + "'");
}

TrainConfig parse_train(const json& j) {
    Fields f(j, "train");
    TrainConfig t;
    f.read("lambda_pretrain", t.lambda_pretrain);
    f.read("lambda_ll", t.lambda_ll);
    if (f.has("lambda_upper")) t.lambda_upper = f.require<double>("lambda_upper");
    f.read("gamma", t.gamma);
    f.read("D", t.D);
    f.read("sigma", t.sigma);
    f.read("pretrain_epochs", t.pretrain_epochs);
    f.read("ifef_epochs", t.ifef_epochs);
    f.read("pretrain_lr", t.pretrain_lr);
    f.read("upper_lr", t.upper_lr);
    if (f.has("upper_optimizer")) {
        const auto name = f.require<std::string>("upper_optimizer");
        if (name == "adam") t.upper_optimizer = UpperOptimizer::Adam;
        else if (name == "gd") t.upper_optimizer = UpperOptimizer::Gradient;
        else throw ConfigError("train.upper_optimizer: expected 'adam' or 'gd', got '" + name + "'");
    }
    f.read("dual_lr", t.dual_lr);
    f.read("lambda_min", t.lambda_min);
    f.read("lambda_max", t.lambda_max);
    if (f.has("extension")) t.extension = parse_extension(f.require<std::string>("extension"));
    if (f.has("variant")) t.variant = parse_variant(f.require<std::string>("variant"));
    f.read("eval_every", t.eval_every);
    f.read("record_wall_time", t.record_wall_time);
    if (f.has("nonlinear_lower")) {
        Fields n(f.at("nonlinear_lower"), "train.nonlinear_lower");
        n.read("steps", t.nonlinear_lower.steps);
        n.read("lr", t.nonlinear_lower.lr);
        n.finish();
    }
    f.finish();
    return t;
}

SpectrumExperimentConfig parse_spectrum(const json& j, const TrainConfig& train) {
    Fields f(j, "spectrum");
    SpectrumExperimentConfig s;
    s.train = train;
    f.read("frequencies", s.spectrum.frequencies);
    f.read("amplitudes", s.spectrum.amplitudes);
    f.read("eval_points", s.spectrum.eval_points);
    f.read("time_slice", s.spectrum.time_slice);
    f.read("d_sweep", s.spectrum.d_sweep);
    f.read("seeds", s.spectrum.seeds);
    f.read("beta", s.beta);
    f.read("widths", s.widths);
    f.read("normalize_inputs", s.normalize_inputs);
    f.read("interior_grid", s.interior_grid);
    f.read("boundary_points", s.boundary_points);
    f.read("chunk", s.chunk);
    f.finish();
    return s;
}

}  // namespace

PdeProblem ProblemSpec::build() const {
    constexpr double pi = std::numbers::pi;
    if (kind == "helmholtz") {
        check_params(*this, {"a1", "a2", "lo", "hi"});
        const double lo = param(params, "lo", -1.0), hi = param(params, "hi", 1.0);
        Box box{VectorXd::Constant(2, lo), VectorXd::Constant(2, hi)};
        return make_helmholtz(param(params, "a1", 1.0), param(params, "a2", 4.0), box);
    }
    if (kind == "convection") {
        check_params(*this, {"beta"});
        return make_convection(param(params, "beta", 50.0));
    }
    if (kind == "convection_diffusion") {
        check_params(*this, {"c", "d", "a_low", "a_high", "k_low", "k_high"});
        return make_convection_diffusion(param(params, "c", 1.0), param(params, "d", 5e-5),
                                         param(params, "a_low", 1.0), param(params, "a_high", 0.1),
                                         param(params, "k_low", 4.0 * pi),
                                         param(params, "k_high", 60.0 * pi));
    }
    if (kind == "burgers") {
        check_params(*this, {"nu", "nonlinearity"});
        return make_burgers(param(params, "nu", 0.01 / pi), param(params, "nonlinearity", 1.0));
    }
    if (kind == "multisine_convection") {
        check_params(*this, {"beta"});
        const SpectrumConfig defaults;
        return make_multisine_convection(param(params, "beta", 1.0),
                                         frequencies.empty() ? defaults.frequencies : frequencies,
                                         amplitudes.empty() ? defaults.amplitudes : amplitudes);
    }
    throw ConfigError("unknown problem kind '" + kind + "'");
}

CollocationSet SamplerSpec::sample(const PdeProblem& problem, std::uint64_t run_seed) const {
    const std::uint64_t s = seed + run_seed;
    if (kind == "uniform") return sample_uniform(problem, interior_grid, boundary_points, s, face_measure);
    if (kind == "lhs") return sample_lhs(problem, boundary_points, interior_points, s, face_measure);
    throw ConfigError("unknown sampler '" + kind + "'");
}

void ExperimentConfig::validate() const {
    train.validate();
    if (widths.empty()) throw ConfigError("network.widths must not be empty");
    for (int w : widths)
        if (w < 1) throw ConfigError("network.widths entries must be positive");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (variants.empty()) throw ConfigError("variants must not be empty");
    if (sampler.boundary_points < 1) throw ConfigError("sampler.boundary_points must be positive");
    if (sampler.kind == "uniform") {
        if (sampler.interior_grid.empty()) throw ConfigError("uniform sampler needs interior_grid");
    } else if (sampler.kind == "lhs") {
        if (sampler.interior_points < 1) throw ConfigError("lhs sampler needs interior_points");
    } else {
        throw ConfigError("sampler.kind must be 'uniform' or 'lhs'");
    }
    if (eval.grid.empty() == eval.reference.empty())
        throw ConfigError("eval needs exactly one of 'grid' and 'reference'");
    if (spectrum) spectrum->validate();
}

TrainConfig ExperimentConfig::run_config(std::uint64_t seed) const {
    TrainConfig t = train;
    t.seed = seed;
    if (!pretrain) t.pretrain_epochs = 0;
    return t;
}

EvalTarget build_eval_target(const ExperimentConfig& config, const PdeProblem& problem,
                             std::string* checksum) {
    EvalTarget target;
    if (!config.eval.reference.empty()) {
        fs::path path = config.eval.reference;
        if (path.is_relative()) path = config.source_dir / path;
        ReferenceData ref = load_reference_csv(path);
        if (checksum) *checksum = ref.checksum;
        return std::move(ref.target);
    }
    if (!problem.exact) throw ConfigError("problem " + problem.name + " has no closed form; set eval.reference");
    target.grid = config.eval.grid;
    target.points = tensor_grid(problem.domain, target.grid);
    target.exact = evaluate_field(*problem.exact, target.points);
    return target;
}

ExperimentConfig parse_config(const json& doc) {
    Fields f(doc, "config");
    ExperimentConfig c;
    c.snapshot = doc;
    c.name = f.require<std::string>("name");
    f.read("long_running", c.long_running);

    {
        Fields p(f.at("problem"), "problem");
        c.problem.kind = p.require<std::string>("kind");
        if (p.has("params")) {
            Fields params(p.at("params"), "problem.params");
            for (const auto& [key, value] : doc.at("problem").at("params").items()) {
                double v = 0.0;
                params.read(key, v);
                c.problem.params[key] = v;
            }
            params.finish();
        }
        p.read("frequencies", c.problem.frequencies);
        p.read("amplitudes", c.problem.amplitudes);
        p.finish();
    }
    {
        Fields s(f.at("sampler"), "sampler");
        c.sampler.kind = s.require<std::string>("kind");
        s.read("interior_grid", c.sampler.interior_grid);
        s.read("interior_points", c.sampler.interior_points);
        c.sampler.boundary_points = s.require<Index>("boundary_points");
        s.read("seed", c.sampler.seed);
        if (s.has("face_measure")) c.sampler.face_measure = parse_face_measure(s.require<std::string>("face_measure"));
        s.finish();
    }
    {
        Fields n(f.at("network"), "network");
        c.widths = n.require<std::vector<int>>("widths");
        n.read("normalize_inputs", c.normalize_inputs);
        n.finish();
    }
    if (f.has("train")) c.train = parse_train(f.at("train"));
    f.read("pretrain", c.pretrain);
    {
        Fields e(f.at("eval"), "eval");
        e.read("grid", c.eval.grid);
        e.read("reference", c.eval.reference);
        e.finish();
    }
    f.read("output_dir", c.output_dir);
    if (c.output_dir.empty()) c.output_dir = c.name;
    f.read("seeds", c.seeds);
    if (f.has("variants")) {
        c.variants.clear();
        for (const auto& v : f.require<std::vector<std::string>>("variants"))
            c.variants.push_back(parse_variant(v));
    }
    if (f.has("spectrum")) c.spectrum = parse_spectrum(f.at("spectrum"), c.train);
    f.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    ExperimentConfig c = parse_config(doc);
    c.source_dir = path.parent_path();
    return c;
}

fs::path resolve_config(const std::string& name_or_path, const std::vector<fs::path>& search_dirs) {
    if (fs::is_regular_file(name_or_path)) return name_or_path;
    for (const auto& dir : search_dirs) {
        const fs::path candidate = dir / (name_or_path + ".json");
        if (fs::is_regular_file(candidate)) return candidate;
    }
    throw ConfigError("no config file or preset named '" + name_or_path + "'");
}

}  // namespace ifef
