#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "calsens/error.hpp"
#include "run_config.hpp"

using namespace calsens;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "calsens");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("calsens_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string config_text(const std::string& extra = "") {
    return "[data]\npath = data.csv\ntreatment = A\noutcome = Y\n\n[model]\nname = effect-diff\ngamma_grid = 0:2:0.5\n\n"
           "[inference]\nseed = 7\nfolds = 5\nout = out\n" + extra;
}

}  // namespace

TEST_CASE("gamma grid and bootstrap parsing") {
    const auto g = cli::parse_gamma_grid("0:1:0.25");
    CHECK(g == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(cli::parse_gamma_grid("0:1:0.1").size() == 11);
    CHECK_THROWS_AS(cli::parse_gamma_grid("0:1"), ConfigError);
    CHECK_THROWS_AS(cli::parse_gamma_grid("1:0:0.1"), ConfigError);
    CHECK_THROWS_AS(cli::parse_gamma_grid("0:1:0"), ConfigError);
    CHECK(cli::parse_bootstrap("200,500") == std::pair<int, std::size_t>{200, 500});
    CHECK_THROWS_AS(cli::parse_bootstrap("49,500"), ConfigError);
    CHECK_THROWS_AS(cli::parse_bootstrap("100"), ConfigError);
}

TEST_CASE("config loading validates sections and keys") {
    TempDir t("cfg");
    write(t.path / "run.ini", config_text("bootstrap = 60,300\n") + "\n[nuisance]\nepsilon = 0.02\n");
    const auto c = cli::load_run_config(t.path / "run.ini");
    CHECK(c.input == t.path / "data.csv");
    CHECK(c.out == t.path / "out");
    CHECK(c.seed == 7);
    CHECK(c.gamma_grid.size() == 5);
    CHECK(c.nuisance.epsilon == 0.02);
    CHECK(c.bootstrap_b == 60);
    CHECK(c.effective_variance() == "influence");
    CHECK(c.header_line().rfind("# config_hash=", 0) == 0);
    CHECK(c.hash().size() == 16);
    auto d = c;
    d.seed = 8;
    CHECK(d.hash() != c.hash());
    d.model = ModelKind::odds;
    CHECK(d.effective_variance() == "bootstrap");

    write(t.path / "bad.ini", config_text() + "\n[extra]\nx = 1\n");
    CHECK_THROWS_AS(cli::load_run_config(t.path / "bad.ini"), ConfigError);
    write(t.path / "bad2.ini", config_text("colour = red\n"));
    CHECK_THROWS_AS(cli::load_run_config(t.path / "bad2.ini"), ConfigError);
    write(t.path / "bad3.ini", "[data]\ntreatment = A\noutcome = Y\n");
    CHECK_THROWS_AS(cli::load_run_config(t.path / "bad3.ini"), ConfigError);
    CHECK_THROWS_AS(cli::load_run_config(t.path / "missing.ini"), ConfigError);
}

TEST_CASE("analyze writes every output with the config header and reruns identically") {
    TempDir t("analyze");
    REQUIRE(run({"generate", "binary", "--n", "800", "--seed", "3", "--out", (t.path / "data.csv").string()}) == 0);
    write(t.path / "run.ini", config_text());
    const auto cfg = (t.path / "run.ini").string();
    REQUIRE(run({"analyze", "--config", cfg}) == 0);
    const auto out = t.path / "out";
    for (const char* f : {"confounder_table.csv", "bound_curve.csv", "robustness.json", "regime.json", "manifest.json"})
        CHECK(fs::exists(out / f));
    const auto header = cli::load_run_config(cfg).header_line();
    const auto table = slurp(out / "confounder_table.csv");
    CHECK(table.rfind(header, 0) == 0);
    CHECK(table.find("X1") != std::string::npos);
    const auto curve = slurp(out / "bound_curve.csv");
    CHECK(curve.rfind(header, 0) == 0);
    const auto rob = nlohmann::json::parse(slurp(out / "robustness.json"));
    CHECK(rob.dump().find("closed-form") != std::string::npos);

    fs::rename(out, t.path / "first");
    REQUIRE(run({"analyze", "--config", cfg}) == 0);
    for (const char* f : {"confounder_table.csv", "bound_curve.csv", "robustness.json", "regime.json", "manifest.json"})
        CHECK(slurp(out / f) == slurp(t.path / "first" / f));

    // A flag override changes the hash and the numbers.
    REQUIRE(run({"analyze", "--config", cfg, "--seed", "8", "--out", (t.path / "s8").string()}) == 0);
    CHECK(slurp(t.path / "s8" / "bound_curve.csv") != slurp(out / "bound_curve.csv"));
}

TEST_CASE("errors map to exit codes and error records") {
    TempDir t("errors");
    REQUIRE(run({"generate", "binary", "--n", "300", "--seed", "1", "--out", (t.path / "data.csv").string()}) == 0);
    write(t.path / "run.ini", config_text());
    const auto cfg = (t.path / "run.ini").string();

    write(t.path / "wrong.ini",
          "[data]\npath = data.csv\ntreatment = A\noutcome = outcome_missing\n[inference]\nout = werr\n");
    CHECK(run({"analyze", "--config", (t.path / "wrong.ini").string()}) == 2);
    const auto err = nlohmann::json::parse(slurp(t.path / "werr" / "error.json"));
    CHECK(err["exit_code"] == 2);
    CHECK(err["message"].get<std::string>().find("outcome_missing") != std::string::npos);

    CHECK(run({"analyze", "--config", cfg, "--model", "tobit", "--out", (t.path / "e1").string()}) == 2);
    CHECK(run({"analyze", "--config", cfg, "--gamma-grid", "2:1:0.5", "--out", (t.path / "e2").string()}) == 2);
    CHECK(run({"analyze", "--config", cfg, "--bootstrap", "10,100", "--out", (t.path / "e3").string()}) == 2);
    CHECK(run({"analyze"}) == 2);
    CHECK(run({"frobnicate"}) == 2);
    CHECK(run({"simulate", "no-such-experiment", "--out", (t.path / "e4").string()}) == 2);
    CHECK(slurp(t.path / "e4" / "error.json").find("regime-map") != std::string::npos);
    CHECK(run({"generate", "nonsense"}) == 2);

    // Treated outcomes all exceed control outcomes: no amount of confounding reaches zero.
    {
        std::ofstream f(t.path / "far.csv");
        f << "X,A,Y\n";
        for (int i = 0; i < 200; ++i) f << (i % 7) / 7.0 << "," << (i % 2) << "," << 50.0 * (i % 2) + (i % 5) * 0.1 << "\n";
    }
    write(t.path / "far.ini", "[data]\npath = far.csv\ntreatment = A\noutcome = Y\n[model]\nname = odds\n"
                              "[inference]\nout = far_out\n");
    const int rc = run({"robustness", "--config", (t.path / "far.ini").string()});
    CHECK(rc == 3);
    CHECK(fs::exists(t.path / "far_out" / "error.json"));
}

TEST_CASE("robustness subcommand and simulate smoke run") {
    TempDir t("robust");
    REQUIRE(run({"generate", "smooth", "--n", "800", "--seed", "2", "--out", (t.path / "data.csv").string()}) == 0);
    write(t.path / "run.ini", config_text());
    REQUIRE(run({"robustness", "--config", (t.path / "run.ini").string(), "--model", "odds"}) == 0);
    const auto rob = nlohmann::json::parse(slurp(t.path / "out" / "robustness.json"));
    CHECK(rob.dump().find("z-root") != std::string::npos);

    REQUIRE(run({"simulate", "coverage-effect-diff", "--reps", "10", "--out", (t.path / "sim").string()}) == 0);
    const auto summary = slurp(t.path / "sim" / "coverage-effect-diff_summary.json");
    CHECK(summary.find("\"underpowered\": true") != std::string::npos);
    const auto reps = slurp(t.path / "sim" / "coverage-effect-diff_replicates.csv");
    CHECK(reps.rfind("# config_hash=", 0) == 0);
    CHECK(run({"simulate", "--list"}) == 0);
}
