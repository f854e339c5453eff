#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "fd.hpp"
#include "ifef/config.hpp"
#include "ifef/error.hpp"
#include "ifef/io.hpp"
#include "ifef/reference.hpp"
#include "ifef/runner.hpp"

using namespace ifef;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ifef_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json tiny_config() {
    return json::parse(R"({
        "name": "tiny",
        "problem": {"kind": "convection", "params": {"beta": 2.0}},
        "sampler": {"kind": "uniform", "interior_grid": [9, 9], "boundary_points": 24},
        "network": {"widths": [8, 8]},
        "train": {"D": 12, "pretrain_epochs": 5, "ifef_epochs": 6, "eval_every": 2},
        "eval": {"grid": [11, 11]},
        "seeds": [0, 1]
    })");
}

}  // namespace

TEST_CASE("SHA-256 of known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic write leaves only the final file") {
    const fs::path dir = scratch_dir("atomic");
    write_atomic(dir / "sub" / "a.txt", "first");
    write_atomic(dir / "sub" / "a.txt", "second");
    CHECK(read_file(dir / "sub" / "a.txt") == "second");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir / "sub")) {
        (void)e;
        ++files;
    }
    CHECK(files == 1);
}

TEST_CASE("metrics CSV has the documented columns and round-trip precision") {
    EpochMetrics m;
    m.epoch = 3;
    m.lower_loss = 0.1;
    m.upper_loss = 1.0 / 3.0;
    m.rel_l2 = std::nan("");
    m.lambda = 1e-2;
    m.wall_ms = 0.0;
    const std::string csv = metrics_csv({m});
    CHECK(csv == "epoch,lower_loss,upper_loss,rel_l2,lambda,wall_ms\n3,0.1,0.3333333333333333,nan,0.01,0\n");
    CHECK(std::stod("0.3333333333333333") == 1.0 / 3.0);
}

TEST_CASE("checkpoint round trip") {
    Checkpoint c;
    c.params = NetworkParams::xavier(2, {5, 4}, true, 3);
    c.params.set_input_range(VectorXd::Zero(2), VectorXd::Constant(2, 2.0));
    c.theta = VectorXd::LinSpaced(8, -1.0, 1.0);
    c.rff = Checkpoint::Rff{4, 4, 1.0, 99};
    const std::string bytes = encode_checkpoint(c);
    CHECK(bytes.substr(0, 8) == "IFEFCKPT");
    const Checkpoint d = decode_checkpoint(bytes);
    CHECK((d.params.flatten() - c.params.flatten()).norm() == 0.0);
    CHECK((d.params.input_scale - c.params.input_scale).norm() == 0.0);
    CHECK((d.params.input_center - c.params.input_center).norm() == 0.0);
    CHECK((d.theta - c.theta).norm() == 0.0);
    REQUIRE(d.rff);
    CHECK(d.rff->seed == 99);
    const FeatureBasis basis = checkpoint_basis(d);
    CHECK(basis.rff->B == sample_rff(4, 4, 1.0, 99).B);
    CHECK(!basis.params.readout);

    CHECK_THROWS_AS(decode_checkpoint("NOTACKPT"), ConfigError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ConfigError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), ConfigError);
}

TEST_CASE("Cole-Hopf Burgers reference satisfies the equation and its data") {
    const double nu = 0.01 / std::numbers::pi;
    CHECK(burgers_cole_hopf(0.3, 0.0, nu) == doctest::Approx(-std::sin(std::numbers::pi * 0.3)));
    for (double t : {0.1, 0.5, 0.9}) {
        CHECK(std::abs(burgers_cole_hopf(-1.0, t, nu)) < 1e-12);
        CHECK(std::abs(burgers_cole_hopf(1.0, t, nu)) < 1e-12);
    }
    // Smooth region away from the front at x = 0.
    const double h = 1e-4;
    for (double t : {0.2, 0.5}) {
        for (double x : {-0.7, -0.4, 0.4, 0.7}) {
            const auto u = [&](double xx, double tt) { return burgers_cole_hopf(xx, tt, nu, 8001); };
            const double u0 = u(x, t);
            const double ut = (u(x, t + h) - u(x, t - h)) / (2 * h);
            const double ux = (u(x + h, t) - u(x - h, t)) / (2 * h);
            const double uxx = (u(x + h, t) - 2 * u0 + u(x - h, t)) / (h * h);
            CAPTURE(x);
            CAPTURE(t);
            CHECK(std::abs(ut + u0 * ux - nu * uxx) < 1e-5 * (1.0 + std::abs(ut)));
        }
    }
}

TEST_CASE("reference CSV loader") {
    const fs::path dir = scratch_dir("reference");
    write_atomic(dir / "ref.csv", "t,x,u\n0,-1,0\n0.5,0.25,-0.125\n");
    const ReferenceData ref = load_reference_csv(dir / "ref.csv");
    REQUIRE(ref.target.exact.size() == 2);
    CHECK(ref.target.points(0, 1) == 0.25);
    CHECK(ref.target.points(1, 1) == 0.5);
    CHECK(ref.target.exact(1) == -0.125);
    CHECK(ref.checksum == sha256_hex("t,x,u\n0,-1,0\n0.5,0.25,-0.125\n"));
    write_atomic(dir / "bad.csv", "x,t,u\n");
    CHECK_THROWS_AS(load_reference_csv(dir / "bad.csv"), ConfigError);
    write_atomic(dir / "bad2.csv", "t,x,u\n0,1\n");
    CHECK_THROWS_AS(load_reference_csv(dir / "bad2.csv"), ConfigError);
}

TEST_CASE("config parsing is strict") {
    const ExperimentConfig c = parse_config(tiny_config());
    CHECK(c.name == "tiny");
    CHECK(c.train.D == 12);
    CHECK(c.seeds.size() == 2);
    CHECK(c.normalize_inputs);
    CHECK(c.output_dir == "tiny");

    SUBCASE("unknown top-level key") {
        json j = tiny_config();
        j["lamda_ll"] = 0.1;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("unknown nested key") {
        json j = tiny_config();
        j["train"]["gama"] = 0.1;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("unknown problem parameter") {
        json j = tiny_config();
        j["problem"]["params"]["nu"] = 0.1;
        CHECK_THROWS_AS(parse_config(j).problem.build(), ConfigError);
    }
    SUBCASE("wrong type") {
        json j = tiny_config();
        j["train"]["D"] = "many";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("eval needs exactly one target") {
        json j = tiny_config();
        j["eval"]["reference"] = "x.csv";
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("invalid train value") {
        json j = tiny_config();
        j["train"]["gamma"] = -1.0;
        CHECK_THROWS_AS(parse_config(j), ConfigError);
    }
    SUBCASE("missing section") {
        json j = tiny_config();
        j.erase("sampler");
        CHECK_THROWS(parse_config(j));
    }
}

TEST_CASE("shipped presets parse") {
    int count = 0;
    for (const auto& e : fs::directory_iterator(IFEF_SOURCE_DIR "/presets")) {
        if (e.path().extension() != ".json") continue;
        CAPTURE(e.path().string());
        ++count;
        const ExperimentConfig c = load_config(e.path());
        CHECK_NOTHROW(c.problem.build());
        CHECK(c.name == e.path().stem().string());
    }
    CHECK(count >= 8);
}

TEST_CASE("training run writes artifacts and is deterministic") {
    const fs::path dir = scratch_dir("run");
    const ExperimentConfig c = parse_config(tiny_config());
    const RunOutcome a = run_training(c, {}, dir / "a");
    const RunOutcome b = run_training(c, {}, dir / "b");
    REQUIRE(a.ok);
    CHECK(std::isfinite(a.final_rel_l2));
    for (const char* f : {"metrics.csv", "pretrain_metrics.csv", "checkpoint.bin", "manifest.json"})
        CHECK(fs::exists(dir / "a" / f));
    CHECK(read_file(dir / "a" / "metrics.csv") == read_file(dir / "b" / "metrics.csv"));
    CHECK(read_file(dir / "a" / "checkpoint.bin") == read_file(dir / "b" / "checkpoint.bin"));

    const json m = json::parse(read_file(dir / "a" / "manifest.json"));
    CHECK(m["status"] == "ok");
    CHECK(m["config_sha256"] == sha256_hex(c.snapshot.dump()));
    CHECK(m["seeds"]["all_config_seeds"].size() == 2);
    CHECK(m["files"]["metrics.csv"]["sha256"] == sha256_file(dir / "a" / "metrics.csv"));
    CHECK(m["epochs_completed"]["main"] == 6);

    const Checkpoint ck = read_checkpoint(dir / "a" / "checkpoint.bin");
    const FeatureBasis basis = checkpoint_basis(ck);
    CHECK(basis.feature_count() == ck.theta.size());

    RunOverrides o;
    o.variant = Variant::Vanilla;
    const RunOutcome v = run_training(c, o, dir / "v");
    CHECK(v.ok);
    CHECK(!fs::exists(dir / "v" / "pretrain_metrics.csv"));
    const std::string csv = read_file(dir / "v" / "metrics.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 + 6);
}

TEST_CASE("numeric failure flushes the manifest") {
    const fs::path dir = scratch_dir("numeric");
    json j = tiny_config();
    j["train"]["pretrain_lr"] = 1e200;
    const ExperimentConfig c = parse_config(j);
    CHECK_THROWS_AS(run_training(c, {}, dir), NumericError);
    const json m = json::parse(read_file(dir / "manifest.json"));
    CHECK(m["status"] == "numeric_error");
    CHECK(m["message"].get<std::string>().size() > 0);
    CHECK(!fs::exists(dir / "checkpoint.bin"));
}

TEST_CASE("compare table: per-cell rows, summary rows, failures as NaN") {
    std::vector<CompareCell> cells{{Variant::Ifef, 0, 1.0, ""},
                                   {Variant::Ifef, 1, 3.0, ""},
                                   {Variant::Vanilla, 0, std::nan(""), "numeric failure, epoch 4"}};
    const std::string csv = compare_csv(cells, {Variant::Ifef, Variant::Vanilla});
    CHECK(csv ==
          "variant,seed,rel_l2,std,reason\n"
          "ifef,0,1,,\n"
          "ifef,1,3,,\n"
          "vanilla,0,nan,,\"numeric failure, epoch 4\"\n"
          "ifef,mean,2,1.4142135623730951,\n"
          "vanilla,mean,nan,nan,no completed seeds\n");

    const fs::path dir = scratch_dir("compare");
    const ExperimentConfig c = parse_config(tiny_config());
    const auto a = run_compare(c, {Variant::Ifef, Variant::Vanilla}, {0}, std::nullopt, dir);
    const auto b = run_compare(c, {Variant::Ifef, Variant::Vanilla}, {0}, std::nullopt, dir);
    CHECK(compare_csv(a, {Variant::Ifef, Variant::Vanilla}) == compare_csv(b, {Variant::Ifef, Variant::Vanilla}));
    CHECK_THROWS_AS(run_compare(c, {Variant::Ifef}, {0}, std::nullopt, dir), ConfigError);
}

TEST_CASE("spectrum CSV schema") {
    SpectrumExperimentConfig sc;
    sc.spectrum.frequencies = {1, 2};
    sc.spectrum.amplitudes = {1, 1};
    sc.spectrum.eval_points = 16;
    sc.spectrum.d_sweep = {8, 4};
    sc.spectrum.seeds = {0};
    sc.widths = {6};
    sc.interior_grid = {9, 9};
    sc.boundary_points = 12;
    sc.train.pretrain_epochs = 3;
    const SpectrumTable t = spectrum_experiment(sc);
    const std::string csv = spectrum_csv(t);
    CHECK(csv.substr(0, csv.find('\n')) == "model,D,seeds,f1,f2");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].model == "vanilla");
    CHECK(t.rows[1].D == 4);
    CHECK(t.rows[2].D == 8);
    for (const auto& r : t.rows) CHECK(r.completed == 1);
}
