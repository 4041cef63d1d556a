#include "run_config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <map>
#include <cmath>
#include <sstream>

#include "calsens/error.hpp"
#include "calsens/stats.hpp"

namespace calsens::cli {
namespace {

namespace pt = boost::property_tree;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts, out;
    boost::split(parts, s, boost::is_any_of(","));
    for (auto& p : parts) {
        boost::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

double to_double(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto t = boost::trim_copy(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(what + ": '" + s + "' is not a finite number");
    return v;
}

long long to_int(const std::string& s, const std::string& what) {
    long long v = 0;
    const auto t = boost::trim_copy(s);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError(what + ": '" + s + "' is not an integer");
    return v;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

}  // namespace

std::vector<double> parse_gamma_grid(const std::string& spec) {
    std::vector<std::string> parts;
    boost::split(parts, spec, boost::is_any_of(":"));
    if (parts.size() != 3) throw ConfigError("gamma grid must look like a:b:step, got '" + spec + "'");
    const double a = to_double(parts[0], "gamma grid start");
    const double b = to_double(parts[1], "gamma grid end");
    const double step = to_double(parts[2], "gamma grid step");
    if (a < 0.0 || b < a || !(step > 0.0)) throw ConfigError("gamma grid needs 0 <= a <= b and step > 0");
    const auto k = static_cast<long long>(std::floor((b - a) / step + 1e-9));
    if (k > 100000) throw ConfigError("gamma grid has too many points");
    std::vector<double> g;
    for (long long i = 0; i <= k; ++i) g.push_back(a + static_cast<double>(i) * step);
    return g;
}

std::pair<int, std::size_t> parse_bootstrap(const std::string& spec) {
    const auto parts = split_list(spec);
    if (parts.size() != 2) throw ConfigError("bootstrap must look like B,m, got '" + spec + "'");
    const auto b = to_int(parts[0], "bootstrap replicates");
    const auto m = to_int(parts[1], "bootstrap resample size");
    if (b < 50) throw ConfigError("bootstrap needs at least 50 replicates");
    if (m < 2) throw ConfigError("bootstrap resample size must be at least 2");
    return {static_cast<int>(b), static_cast<std::size_t>(m)};
}

std::string RunConfig::effective_variance() const {
    if (!variance.empty()) return variance;
    return model == ModelKind::odds ? "bootstrap" : "influence";
}

std::string RunConfig::canonical() const {
    std::ostringstream o;
    o << "input=" << input.generic_string() << "\n";
    o << "treatment=" << data.treatment << "\noutcome=" << data.outcome << "\n";
    o << "covariates=" << join(data.covariates) << "\ncategorical=" << join(data.categorical) << "\n";
    for (const auto& [k, v] : data.groups) o << "group." << k << "=" << join(v) << "\n";
    o << "model=" << model_name(model) << "\ngamma_grid=";
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) o << (i ? "," : "") << stats::format_double(gamma_grid[i]);
    o << "\nalpha=" << stats::format_double(alpha) << "\nfolds=" << folds << "\nseed=" << seed << "\n";
    o << "propensity=" << learner_name(nuisance.propensity) << "\noutcome_learner=" << learner_name(nuisance.outcome)
      << "\npseudo=" << learner_name(nuisance.pseudo) << "\nepsilon=" << stats::format_double(nuisance.epsilon)
      << "\nknn_k=" << nuisance.learner.knn_k << "\ntheta_sieve=" << learner_name(nuisance.theta.sieve) << "\n";
    o << "variance=" << effective_variance() << "\n";
    if (effective_variance() == "bootstrap") o << "bootstrap=" << bootstrap_b << "," << bootstrap_m << "\n";
    return o.str();
}

std::string RunConfig::hash() const { return stats::hex64(stats::fnv1a(canonical())); }

std::string RunConfig::header_line() const { return "# config_hash=" + hash() + " seed=" + std::to_string(seed); }

RunConfig load_run_config(const std::filesystem::path& path) {
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("cannot read config '" + path.string() + "': " + e.message() +
                          (e.line() ? " (line " + std::to_string(e.line()) + ")" : ""));
    }
    static const std::map<std::string, std::vector<std::string>> allowed = {
        {"data", {"path", "treatment", "outcome", "covariates", "categorical"}},
        {"model", {"name", "gamma_grid"}},
        {"nuisance", {"propensity", "outcome", "pseudo", "epsilon", "knn_k", "theta_sieve"}},
        {"inference", {"alpha", "folds", "seed", "variance", "bootstrap", "threads", "out"}},
    };
    for (const auto& [name, section] : tree) {
        const auto it = allowed.find(name);
        if (it == allowed.end()) throw ConfigError("config: unknown section [" + name + "]");
        for (const auto& [key, _] : section) {
            const bool group = name == "data" && key.rfind("group.", 0) == 0;
            if (!group && std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError("config: unknown key '" + key + "' in [" + name + "]");
        }
    }

    RunConfig c;
    const auto get = [&](const std::string& key) { return tree.get_optional<std::string>(pt::ptree::path_type(key, '/')); };

    const auto input = get("data/path");
    if (!input) throw ConfigError("config: [data] needs 'path'");
    c.input = *input;
    if (c.input.is_relative()) c.input = path.parent_path() / c.input;
    const auto tr = get("data/treatment"), out = get("data/outcome");
    if (!tr || !out) throw ConfigError("config: [data] needs 'treatment' and 'outcome'");
    c.data.treatment = boost::trim_copy(*tr);
    c.data.outcome = boost::trim_copy(*out);
    if (auto v = get("data/covariates")) c.data.covariates = split_list(*v);
    if (auto v = get("data/categorical")) c.data.categorical = split_list(*v);
    if (auto d = tree.get_child_optional("data")) {
        for (const auto& [key, val] : *d) {
            if (key.rfind("group.", 0) != 0) continue;
            const auto label = key.substr(6);
            if (label.empty()) throw ConfigError("config: empty group label");
            c.data.groups[label] = split_list(val.data());
        }
    }

    if (auto v = get("model/name")) c.model = parse_model(boost::trim_copy(*v));
    if (auto v = get("model/gamma_grid")) c.gamma_grid = parse_gamma_grid(*v);

    if (auto v = get("nuisance/propensity")) c.nuisance.propensity = parse_learner(boost::trim_copy(*v));
    if (auto v = get("nuisance/outcome")) c.nuisance.outcome = parse_learner(boost::trim_copy(*v));
    if (auto v = get("nuisance/pseudo")) c.nuisance.pseudo = parse_learner(boost::trim_copy(*v));
    if (auto v = get("nuisance/epsilon")) c.nuisance.epsilon = to_double(*v, "epsilon");
    if (auto v = get("nuisance/knn_k")) c.nuisance.learner.knn_k = static_cast<int>(to_int(*v, "knn_k"));
    if (auto v = get("nuisance/theta_sieve")) c.nuisance.theta.sieve = parse_learner(boost::trim_copy(*v));

    if (auto v = get("inference/alpha")) c.alpha = to_double(*v, "alpha");
    if (auto v = get("inference/folds")) c.folds = static_cast<int>(to_int(*v, "folds"));
    if (auto v = get("inference/seed")) c.seed = static_cast<std::uint64_t>(to_int(*v, "seed"));
    if (auto v = get("inference/variance")) {
        c.variance = boost::trim_copy(*v);
        if (c.variance != "influence" && c.variance != "bootstrap")
            throw ConfigError("config: variance must be 'influence' or 'bootstrap'");
    }
    if (auto v = get("inference/bootstrap")) {
        std::tie(c.bootstrap_b, c.bootstrap_m) = parse_bootstrap(*v);
    }
    if (auto v = get("inference/threads")) c.threads = static_cast<unsigned>(to_int(*v, "threads"));
    if (auto v = get("inference/out")) {
        c.out = *v;
        if (c.out.is_relative()) c.out = path.parent_path() / c.out;
    }
    return c;
}

}  // namespace calsens::cli
