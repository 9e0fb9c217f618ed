#include <doctest.h>

#include "ppide/errors.hpp"
#include "ppide/experiment.hpp"
#include "ppide/path.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <string>

using namespace ppide;
using nlohmann::json;

namespace {

json baseConfig(const std::string& kind) {
    json j;
    j["kind"] = kind;
    j["seed"] = 7;
    j["horizon"] = 1.0;
    j["characteristics"] = {{"drift", {0.1}},
                            {"sigma", {{0.2}}},
                            {"jumps", json::array({{{"z", {0.4}}, {"weight", 0.7}}})},
                            {"bound", 1.0},
                            {"min_jump_size", 0.3}};
    j["mc"] = {{"n_paths", 500}, {"h", 1.0 / 64.0}};
    return j;
}

int runCli(const std::string& args) {
#ifdef PPIDE_CLI_PATH
    const std::string cmd = std::string(PPIDE_CLI_PATH) + " " + args;
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
#else
    (void)args;
    return -1;
#endif
}

} // namespace

TEST_CASE("malformed or unknown configurations raise InputError") {
    CHECK_THROWS_AS(ExperimentConfig::fromText("{oops"), InputError);
    CHECK_THROWS_AS(ExperimentConfig::fromFile("/nonexistent/config.json"), InputError);
    CHECK_THROWS_AS(run(ExperimentConfig::fromText("{\"kind\":\"warp\"}")), InputError);
    // Missing required block.
    CHECK_THROWS_AS(run(ExperimentConfig::fromText("{\"kind\":\"simulate\"}")), InputError);
}

TEST_CASE("simulate experiment reports moments and is byte-reproducible") {
    const json cfg = baseConfig("simulate");
    const ExperimentConfig ec = ExperimentConfig::fromText(cfg.dump());
    const RunResult a = run(ec);
    const RunResult b = run(ec);
    CHECK(a.reportJson == b.reportJson);
    CHECK(a.configHash == b.configHash);

    const json rep = json::parse(a.reportJson);
    CHECK(rep.at("n_paths") == 500);
    CHECK(rep.contains("terminal_mean"));
    CHECK(rep.contains("terminal_var"));
    CHECK(rep.contains("mean_jumps_per_path"));

    json other = cfg;
    other["seed"] = 8;
    const RunResult c = run(ExperimentConfig::fromText(other.dump()));
    CHECK(c.configHash != a.configHash);
    CHECK(c.reportJson != a.reportJson);
}

TEST_CASE("simulate experiment writes its artifacts") {
    const auto dir = std::filesystem::temp_directory_path() / "ppide_test_out";
    std::filesystem::remove_all(dir);
    json cfg = baseConfig("simulate");
    cfg["max_path_files"] = 2;
    run(ExperimentConfig::fromText(cfg.dump()), dir.string());
    CHECK(std::filesystem::exists(dir / "report.json"));
    CHECK(std::filesystem::exists(dir / "sample_path_0.csv"));
    CHECK(std::filesystem::exists(dir / "sample_path_1.csv"));
    // The CSV artifact parses back into a path on the same horizon.
    std::ifstream in(dir / "sample_path_0.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    const CadlagPath p = CadlagPath::fromCsv(ss.str(), 1.0);
    CHECK(p.horizon() == 1.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("metric experiment evaluates the requested distance") {
    json cfg;
    cfg["kind"] = "metric";
    cfg["horizon"] = 1.0;
    cfg["metric"] = {{"kind", "j1"},
                     {"path_a", json::parse(CadlagPath::indicator(1.0, 0.3).toJson())},
                     {"path_b", json::parse(CadlagPath::indicator(1.0, 0.42).toJson())}};
    const RunResult r = run(ExperimentConfig::fromText(cfg.dump()));
    const json rep = json::parse(r.reportJson);
    CHECK(rep.at("metric_kind") == "j1");
    CHECK(rep.at("value").get<double>() >= 0.12 - 1e-12);
    CHECK(rep.at("value").get<double>() <= 0.125);
}

TEST_CASE("u0 experiment reports a value with its standard error") {
    json cfg = baseConfig("u0");
    cfg["driver"] = {{"type", "affine"}, {"alpha", 0.5}};
    cfg["xi"] = {{"type", "constant"}, {"c", 1.0}};
    const RunResult r = run(ExperimentConfig::fromText(cfg.dump()));
    const json rep = json::parse(r.reportJson);
    // Deterministic fixture: e^{alpha T} up to the first-order time bias.
    CHECK(rep.at("value").get<double>() == doctest::Approx(std::exp(0.5)).epsilon(0.01));
    CHECK(rep.at("se").get<double>() >= 0.0);
    CHECK(rep.at("basis_size").get<int>() >= 1);
}

TEST_CASE("residual experiment evaluates the quadratic jet") {
    json cfg = baseConfig("residual");
    cfg["jet"] = {{"a", 0.5}, {"b", -1.0}, {"c", 2.0}};
    const RunResult r = run(ExperimentConfig::fromText(cfg.dump()));
    const json rep = json::parse(r.reportJson);
    // Same closed form as the operator unit test, at x = 0, t = 0.
    const double expected = -0.5 - 0.1 * (-1.0) - 0.5 * 0.2 * 0.2 * 4.0 -
                            0.7 * 2.0 * 0.4 * 0.4;
    CHECK(rep.at("classical_residual").get<double>() ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("command line drives the launcher and maps errors to exit codes") {
#ifdef PPIDE_CLI_PATH
    const auto dir = std::filesystem::temp_directory_path() / "ppide_cli_test";
    std::filesystem::create_directories(dir);
    const auto cfgPath = dir / "cfg.json";
    {
        json cfg = baseConfig("simulate");
        cfg["mc"]["n_paths"] = 50;
        std::ofstream(cfgPath) << cfg.dump();
    }
    CHECK(runCli("simulate --config " + cfgPath.string() + " --out " + (dir / "out").string() +
                 " > /dev/null") == 0);
    CHECK(std::filesystem::exists(dir / "out" / "report.json"));

    // Invalid input is exit code 2.
    const auto badPath = dir / "bad.json";
    std::ofstream(badPath) << "{\"kind\":\"warp\"}";
    CHECK(runCli("simulate --config " + badPath.string() + " 2> /dev/null") == 2);
    CHECK(runCli("simulate --config /nonexistent.json 2> /dev/null") == 2);
    std::filesystem::remove_all(dir);
#endif
}
