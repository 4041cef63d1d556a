#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "calsens/error.hpp"
#include "calsens/experiments.hpp"
#include "calsens/inference.hpp"
#include "calsens/kernels.hpp"
#include "calsens/parallel.hpp"
#include "calsens/stats.hpp"
#include "run_config.hpp"

namespace calsens::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

std::string num(double v) { return stats::format_double(v); }

// Doubles go to JSON as numbers when finite, null otherwise.
json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct Overrides {
    std::string config;
    std::string model, grid, bootstrap, out;
    double alpha = -1.0, epsilon = -1.0;
    int folds = 0;
    long long seed = -1;
    int threads = -1;
};

RunConfig resolve(const Overrides& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    RunConfig c = load_run_config(o.config);
    if (!o.model.empty()) c.model = parse_model(o.model);
    if (!o.grid.empty()) c.gamma_grid = parse_gamma_grid(o.grid);
    if (o.alpha >= 0.0) c.alpha = o.alpha;
    if (o.epsilon >= 0.0) c.nuisance.epsilon = o.epsilon;
    if (o.folds != 0) c.folds = o.folds;
    if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
    if (o.threads >= 0) c.threads = static_cast<unsigned>(o.threads);
    if (!o.bootstrap.empty()) {
        if (o.bootstrap == "none") {
            c.variance = "influence";
        } else {
            std::tie(c.bootstrap_b, c.bootstrap_m) = parse_bootstrap(o.bootstrap);
            c.variance = "bootstrap";
        }
    }
    if (!o.out.empty()) c.out = o.out;
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(c.nuisance.epsilon >= 0.0 && c.nuisance.epsilon < 0.5)) throw ConfigError("epsilon must lie in [0, 0.5)");
    if (c.folds < 2) throw ConfigError("folds must be at least 2");
    if (c.gamma_grid.empty()) throw ConfigError("gamma grid is empty");
    return c;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + p.string());
    f << s;
}

struct Analysis {
    RunConfig cfg;
    Dataset data;
    FoldAssignment folds;
    ModelFit fit;
    IntervalReport report;
    std::optional<BootstrapResult> boot;
};

Analysis analyze_core(const RunConfig& cfg) {
    set_thread_count(cfg.threads);
    Dataset data = load_csv(cfg.input.string(), cfg.data);
    if (static_cast<std::size_t>(cfg.folds) > data.n()) throw ConfigError("more folds than observations");
    auto folds = make_folds(data.n(), cfg.folds, cfg.seed);
    ModelOptions mo;
    mo.nuisance = cfg.nuisance;
    auto fit = estimate_model(cfg.model, data, folds, mo);
    auto report = wald_intervals(fit.curve(cfg.gamma_grid), cfg.alpha);
    std::optional<BootstrapResult> boot;
    if (cfg.effective_variance() == "bootstrap") {
        BootstrapOptions bo;
        bo.replicates = cfg.bootstrap_b;
        bo.m = cfg.bootstrap_m;
        bo.seed = stats::derive_seed(cfg.seed, 0xb007);
        boot = bootstrap_variance(model_pipeline(cfg.model, mo, cfg.folds, cfg.gamma_grid), data, bo);
        apply_bootstrap(report, *boot);
    }
    return {cfg, std::move(data), std::move(folds), std::move(fit), std::move(report), std::move(boot)};
}

json robustness_json(const RobustnessValue& rv, const RunConfig& cfg, double psi, double m_hat) {
    json j;
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.seed;
    j["model"] = model_name(cfg.model);
    j["method"] = rv.method;
    j["gamma0"] = jnum(rv.gamma0);
    j["se"] = jnum(rv.se);
    j["alpha"] = cfg.alpha;
    j["ci_lower"] = jnum(rv.ci_lower);
    j["ci_upper"] = jnum(rv.ci_upper);
    j["crossing"] = rv.crossing;
    j["residual"] = jnum(rv.residual);
    j["psi_prime"] = jnum(rv.psi_prime);
    j["evaluations"] = rv.evaluations;
    j["psi_hat"] = jnum(psi);
    j["m_hat"] = jnum(m_hat);
    return j;
}

void write_confounder_table(const Analysis& a, const fs::path& dir) {
    const double z = stats::normal_quantile(1.0 - a.cfg.alpha / 2.0);
    std::ostringstream o;
    o << a.cfg.header_line() << "\n";
    o << "variable,arm,estimate,lower,upper,se,magnitude,selected\n";
    const auto& mc = a.fit.confounding;
    for (std::size_t i = 0; i < mc.components.size(); ++i) {
        const auto& c = mc.components[i];
        std::string label = c.label;
        if (label.find_first_of(",\"") != std::string::npos) label = "\"" + label + "\"";
        o << label << "," << (c.arm < 0 ? std::string() : std::to_string(c.arm)) << "," << num(c.estimate) << ","
          << num(c.estimate - z * c.se) << "," << num(c.estimate + z * c.se) << "," << num(c.se) << ","
          << num(c.magnitude) << "," << (i == mc.maximizer ? 1 : 0) << "\n";
    }
    write_text(dir / "confounder_table.csv", o.str());
}

void write_bound_curve(const Analysis& a, const fs::path& dir) {
    std::ostringstream o;
    o << a.cfg.header_line() << "\n";
    o << "gamma,lower,upper,lb,ub,lb2,ub2,se_lower,se_upper,posthoc_gamma,posthoc_lower,posthoc_upper,"
         "posthoc_lb2,posthoc_ub2,variance\n";
    const auto src = variance_source_name(a.report.source);
    for (const auto& r : a.report.rows) {
        const auto raw = a.fit.calibrated_parameters(r.gamma);
        std::string raw_s;
        for (std::size_t i = 0; i < raw.size(); ++i) raw_s += (i ? ";" : "") + num(raw[i]);
        o << num(r.gamma) << "," << num(r.lower) << "," << num(r.upper) << "," << num(r.lb) << "," << num(r.ub) << ","
          << num(r.lb2) << "," << num(r.ub2) << "," << num(r.se_lower) << "," << num(r.se_upper) << "," << raw_s
          << "," << num(r.ph_lower) << "," << num(r.ph_upper) << "," << num(r.ph_lb2) << "," << num(r.ph_ub2) << ","
          << src << "\n";
    }
    write_text(dir / "bound_curve.csv", o.str());
}

json regime_json(const Analysis& a) {
    json rows = json::array();
    const double m_hat = a.fit.confounding.value;
    for (double g : a.cfg.gamma_grid) {
        if (!(g > 0.0)) continue;
        const auto p = a.fit.at(g);
        json r;
        r["gamma"] = g;
        r["posthoc_gamma"] = g * m_hat;
        try {
            // u: M-hat held fixed; m: the calibration term, rescaled so that
            // u + (gamma/M) m is the calibrated influence function.
            const Eigen::VectorXd u = p.ph_phi_upper;
            const Eigen::VectorXd m_if = (p.phi_upper - u) / g;
            const auto rep = regime_analysis(u, m_if, g * m_hat, m_hat);
            r["rho"] = jnum(rep.rho);
            r["rrse"] = jnum(rep.rrse);
            r["variance_ratio"] = jnum(rep.ratio);
            r["direct_ratio"] = jnum(rep.direct_ratio);
            r["regime"] = rep.regime;
        } catch (const DegenerateError& e) {
            r["regime"] = nullptr;
            r["note"] = e.what();
        }
        rows.push_back(r);
    }
    json j;
    j["config_hash"] = a.cfg.hash();
    j["seed"] = a.cfg.seed;
    j["bound"] = "upper";
    j["rows"] = rows;
    return j;
}

json manifest_json(const Analysis& a, const std::vector<std::string>& files, const std::string& command) {
    json j;
    j["tool"] = "calsens";
    j["version"] = kVersion;
    j["command"] = command;
    j["config_hash"] = a.cfg.hash();
    j["seed"] = a.cfg.seed;
    j["fold_seed"] = a.folds.seed;
    j["input"] = a.cfg.input.generic_string();
    j["n"] = a.data.n();
    j["covariates"] = a.data.names();
    j["model"] = model_name(a.cfg.model);
    j["folds"] = a.cfg.folds;
    j["alpha"] = a.cfg.alpha;
    j["gamma_grid"] = a.cfg.gamma_grid;
    j["nuisance"] = {{"propensity", learner_name(a.cfg.nuisance.propensity)},
                     {"outcome", learner_name(a.cfg.nuisance.outcome)},
                     {"pseudo", learner_name(a.cfg.nuisance.pseudo)},
                     {"epsilon", a.cfg.nuisance.epsilon},
                     {"theta_sieve", learner_name(a.cfg.nuisance.theta.sieve)}};
    j["variance"] = a.cfg.effective_variance();
    if (a.boot) {
        j["bootstrap"] = {{"replicates", a.boot->replicates},
                          {"m", a.boot->m},
                          {"failures", a.boot->failures},
                          {"failure_log", a.boot->failure_log}};
    }
    j["psi_hat"] = jnum(a.fit.psi);
    j["psi_se"] = jnum(a.report.psi_se);
    j["m_hat"] = jnum(a.fit.confounding.value);
    j["maximizer"] = a.fit.confounding.maximizer_label;
    j["runner_up_gap"] = jnum(a.fit.confounding.runner_up_gap);
    std::vector<std::string> warnings = a.fit.warnings;
    warnings.insert(warnings.end(), a.report.warnings.begin(), a.report.warnings.end());
    j["warnings"] = warnings;
    j["simd_backend"] = std::string(kernels::backend_name(kernels::active_backend()));
    j["files"] = files;
    j["config"] = a.cfg.canonical();
    return j;
}

int cmd_analyze(const Overrides& o) {
    const auto cfg = resolve(o);
    fs::create_directories(cfg.out);
    auto a = analyze_core(cfg);
    write_confounder_table(a, cfg.out);
    write_bound_curve(a, cfg.out);
    std::vector<std::string> files = {"confounder_table.csv", "bound_curve.csv"};

    json rob;
    try {
        RobustnessOptions ro;
        ro.alpha = cfg.alpha;
        rob = robustness_json(robustness_value(a.fit, ro), cfg, a.fit.psi, a.fit.confounding.value);
    } catch (const DegenerateError& e) {
        rob = {{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"gamma0", nullptr}, {"error", e.what()}};
    }
    write_text(cfg.out / "robustness.json", rob.dump(2) + "\n");
    files.push_back("robustness.json");
    write_text(cfg.out / "regime.json", regime_json(a).dump(2) + "\n");
    files.push_back("regime.json");
    write_text(cfg.out / "manifest.json", manifest_json(a, files, "analyze").dump(2) + "\n");

    std::cout << "psi-hat " << num(a.fit.psi) << " (se " << num(a.report.psi_se) << "), M-hat "
              << num(a.fit.confounding.value) << " [" << a.fit.confounding.maximizer_label << "]\n";
    for (const auto& r : a.report.rows)
        std::cout << "Gamma " << num(r.gamma) << ": [" << num(r.lower) << ", " << num(r.upper) << "]  band ["
                  << num(r.lb2) << ", " << num(r.ub2) << "]\n";
    for (const auto& w : a.fit.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& w : a.report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << cfg.out.string() << "\n";
    return 0;
}

int cmd_robustness(const Overrides& o) {
    const auto cfg = resolve(o);
    fs::create_directories(cfg.out);
    set_thread_count(cfg.threads);
    const Dataset data = load_csv(cfg.input.string(), cfg.data);
    const auto folds = make_folds(data.n(), cfg.folds, cfg.seed);
    ModelOptions mo;
    mo.nuisance = cfg.nuisance;
    const auto fit = estimate_model(cfg.model, data, folds, mo);
    RobustnessOptions ro;
    ro.alpha = cfg.alpha;
    const auto rv = robustness_value(fit, ro);
    write_text(cfg.out / "robustness.json", robustness_json(rv, cfg, fit.psi, fit.confounding.value).dump(2) + "\n");
    std::cout << "Gamma0 " << num(rv.gamma0) << " [" << num(rv.ci_lower) << ", " << num(rv.ci_upper) << "] ("
              << rv.method << ", " << rv.crossing << " bound crosses zero, |L U| = " << num(rv.residual) << ")\n";
    return 0;
}

struct SimArgs {
    std::string name;
    int reps = 0;
    long long n = 0;
    long long seed = -1;
    int threads = -1;
    std::string out = "calsens_sim";
    bool list = false;
};

int cmd_simulate(const SimArgs& s) {
    if (s.list || s.name.empty()) {
        if (!s.list) throw ConfigError("simulate needs an experiment name");
        for (const auto& n : simlab::experiment_names()) std::cout << n << "\n";
        return 0;
    }
    if (s.threads >= 0) set_thread_count(static_cast<unsigned>(s.threads));
    simlab::ExperimentOptions eo;
    eo.reps = s.reps;
    if (s.n < 0) throw ConfigError("n must be positive");
    eo.n = static_cast<std::size_t>(s.n);
    if (s.seed >= 0) eo.seed = static_cast<std::uint64_t>(s.seed);
    const auto r = simlab::run_experiment(s.name, eo);
    std::ostringstream canon;
    canon << "experiment=" << r.name << "\nreps=" << r.reps << "\nn=" << r.n << "\nseed=" << r.seed << "\n";
    const std::string header =
        "# config_hash=" + stats::hex64(stats::fnv1a(canon.str())) + " seed=" + std::to_string(r.seed);
    write_experiment(r, s.out, header);
    std::cout << r.name << " (reps " << r.reps << ", n " << r.n << ", seed " << r.seed << ")"
              << (r.underpowered ? " [underpowered]" : "") << "\n";
    for (const auto& [k, v] : r.metrics) std::cout << "  " << k << " = " << num(v) << "\n";
    for (const auto& c : r.checks)
        std::cout << (c.pass ? "  PASS " : "  FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")")
                  << "\n";
    return 0;
}

struct GenArgs {
    std::string generator;
    long long n = 1000;
    long long seed = 1;
    std::string out;
};

int cmd_generate(const GenArgs& g) {
    if (g.n < 2) throw ConfigError("n must be at least 2");
    if (g.seed < 0) throw ConfigError("seed must be nonnegative");
    const auto n = static_cast<std::size_t>(g.n);
    const auto seed = static_cast<std::uint64_t>(g.seed);
    Dataset d = [&] {
        if (g.generator == "proxy-example-1") return simlab::gen_proxy_example_1(n, seed).data;
        if (g.generator == "proxy-example-2")
            return simlab::gen_proxy_example_2(n, seed, simlab::example2_theta_closed_form()).data;
        if (g.generator == "binary") return simlab::gen_binary(simlab::coverage_dgp(), n, seed);
        if (g.generator == "smooth") return simlab::gen_smooth(n, seed);
        throw ConfigError("unknown generator '" + g.generator +
                          "'; available: proxy-example-1, proxy-example-2, binary, smooth");
    }();
    std::ostringstream o;
    const auto names = d.names();
    for (const auto& nm : names) o << nm << ",";
    o << "A,Y\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t j = 0; j < d.d(); ++j) o << num(d.x(i, j)) << ",";
        o << d.a(i) << "," << num(d.y(i)) << "\n";
    }
    if (g.out.empty()) std::cout << o.str();
    else write_text(g.out, o.str());
    return 0;
}

void write_error(const std::string& out_dir, const std::string& kind, int code, const std::string& msg) {
    json j = {{"error", kind}, {"exit_code", code}, {"message", msg}};
    std::cerr << "error (" << kind << "): " << msg << "\n";
    if (out_dir.empty()) return;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    std::ofstream f(fs::path(out_dir) / "error.json");
    if (f) f << j.dump(2) << "\n";
}

void add_run_flags(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "INI config with [data], [model], [nuisance], [inference]")->required();
    sub->add_option("--model", o.model, "effect-diff | odds | outcome");
    sub->add_option("--gamma-grid", o.grid, "a:b:step");
    sub->add_option("--alpha", o.alpha, "level");
    sub->add_option("--folds", o.folds, "cross-fitting folds");
    sub->add_option("--seed", o.seed, "seed");
    sub->add_option("--epsilon", o.epsilon, "propensity truncation");
    sub->add_option("--bootstrap", o.bootstrap, "B,m (or none)");
    sub->add_option("--threads", o.threads, "worker cap (0: all cores)");
    sub->add_option("--out", o.out, "output directory");
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"calsens: calibrated sensitivity analysis for the average treatment effect"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    Overrides ao, ro;
    SimArgs so;
    auto* analyze = app.add_subcommand("analyze", "bounds, intervals and robustness value for a data set");
    add_run_flags(analyze, ao);
    auto* robust = app.add_subcommand("robustness", "robustness value only");
    add_run_flags(robust, ro);
    auto* sim = app.add_subcommand("simulate", "run a simulation experiment");
    sim->add_option("experiment", so.name, "experiment name");
    sim->add_flag("--list", so.list, "list experiments");
    sim->add_option("--reps", so.reps, "replicates");
    sim->add_option("--n", so.n, "sample size");
    sim->add_option("--seed", so.seed, "seed");
    sim->add_option("--threads", so.threads, "worker cap (0: all cores)");
    sim->add_option("--out", so.out, "output directory");

    GenArgs go;
    auto* gen = app.add_subcommand("generate", "write a simulated data set as CSV");
    gen->add_option("generator", go.generator, "proxy-example-1 | proxy-example-2 | binary | smooth")->required();
    gen->add_option("--n", go.n, "sample size");
    gen->add_option("--seed", go.seed, "seed");
    gen->add_option("--out", go.out, "CSV path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::validation);
    }

    std::string out_dir;
    if (analyze->parsed()) out_dir = ao.out;
    if (robust->parsed()) out_dir = ro.out;
    if (sim->parsed()) out_dir = so.out;
    try {
        if (analyze->parsed()) {
            if (out_dir.empty()) out_dir = resolve(ao).out.string();
            return cmd_analyze(ao);
        }
        if (robust->parsed()) {
            if (out_dir.empty()) out_dir = resolve(ro).out.string();
            return cmd_robustness(ro);
        }
        if (gen->parsed()) return cmd_generate(go);
        return cmd_simulate(so);
    } catch (const Error& e) {
        write_error(out_dir, e.kind(), static_cast<int>(e.exit_code()), e.what());
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        write_error(out_dir, "internal", static_cast<int>(ExitCode::numerical), e.what());
        return static_cast<int>(ExitCode::numerical);
    }
}

}  // namespace calsens::cli
