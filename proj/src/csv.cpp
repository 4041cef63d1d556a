#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "calsens/data.hpp"
#include "calsens/error.hpp"

namespace calsens {
namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    std::string out(s.substr(b, e - b));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            cur.push_back(c);
        } else if (c == ',' && !quoted) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool is_na(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" || cell == "." ||
           cell == "null";
}

bool parse_number(const std::string& cell, double& out) {
    const char* b = cell.data();
    const char* e = b + cell.size();
    if (b != e && *b == '+') ++b;
    auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
}

}  // namespace

Dataset load_csv(const std::string& path, const DataConfig& config) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path + "'");
    return parse_csv(in, config, path);
}

Dataset parse_csv(std::istream& in, const DataConfig& config, const std::string& source) {
    if (config.treatment.empty()) throw ConfigError("no treatment column configured");
    if (config.outcome.empty()) throw ConfigError("no outcome column configured");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError(source + ": empty file");
    const auto header = split_row(line);
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!index.emplace(header[j], j).second)
            throw ValidationError(source + ": duplicate column '" + header[j] + "'");
    }
    auto column = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw ConfigError(source + ": missing column '" + name + "'");
        return it->second;
    };
    const auto a_col = column(config.treatment);
    const auto y_col = column(config.outcome);

    std::vector<std::string> cov = config.covariates;
    if (cov.empty()) {
        for (const auto& h : header)
            if (h != config.treatment && h != config.outcome) cov.push_back(h);
    }
    if (cov.empty()) throw ConfigError(source + ": no covariate columns");
    std::vector<std::size_t> cov_cols;
    for (const auto& c : cov) cov_cols.push_back(column(c));
    const std::set<std::string> categorical(config.categorical.begin(), config.categorical.end());
    for (const auto& c : categorical)
        if (std::find(cov.begin(), cov.end(), c) == cov.end())
            throw ConfigError(source + ": categorical column '" + c + "' is not a covariate");

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_row(line);
        if (cells.size() != header.size())
            throw ValidationError(source + ": line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " fields, expected " +
                                  std::to_string(header.size()));
        rows.push_back(std::move(cells));
    }
    const std::size_t n = rows.size();

    auto numeric = [&](std::size_t r, std::size_t c) {
        const auto& cell = rows[r][c];
        if (is_na(cell))
            throw ValidationError(source + ": missing value at row " + std::to_string(r + 1) + ", column '" +
                                  header[c] + "'");
        double v = 0.0;
        if (!parse_number(cell, v))
            throw ValidationError(source + ": non-numeric value '" + cell + "' at row " + std::to_string(r + 1) +
                                  ", column '" + header[c] + "'");
        return v;
    };

    std::vector<int> a(n);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double av = numeric(r, a_col);
        if (av != 0.0 && av != 1.0)
            throw ValidationError(source + ": treatment value '" + rows[r][a_col] + "' at row " +
                                  std::to_string(r + 1) + " is not 0 or 1");
        a[r] = static_cast<int>(av);
        y[r] = numeric(r, y_col);
    }

    // Encoded columns in covariate order; categorical levels sorted, first dropped.
    std::vector<std::string> names;
    std::vector<std::vector<double>> encoded;
    std::map<std::string, std::vector<std::size_t>> source_cols;  // source covariate -> encoded indices
    for (std::size_t k = 0; k < cov.size(); ++k) {
        const auto c = cov_cols[k];
        if (categorical.count(cov[k])) {
            std::set<std::string> levels;
            for (std::size_t r = 0; r < n; ++r) {
                if (is_na(rows[r][c]))
                    throw ValidationError(source + ": missing value at row " + std::to_string(r + 1) +
                                          ", column '" + header[c] + "'");
                levels.insert(rows[r][c]);
            }
            if (levels.size() < 2)
                throw ValidationError(source + ": categorical column '" + cov[k] + "' has a single level");
            auto it = std::next(levels.begin());
            for (; it != levels.end(); ++it) {
                std::vector<double> col(n);
                for (std::size_t r = 0; r < n; ++r) col[r] = rows[r][c] == *it ? 1.0 : 0.0;
                source_cols[cov[k]].push_back(encoded.size());
                names.push_back(cov[k] + "=" + *it);
                encoded.push_back(std::move(col));
            }
        } else {
            std::vector<double> col(n);
            for (std::size_t r = 0; r < n; ++r) col[r] = numeric(r, c);
            source_cols[cov[k]].push_back(encoded.size());
            names.push_back(cov[k]);
            encoded.push_back(std::move(col));
        }
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(encoded.size()));
    for (std::size_t j = 0; j < encoded.size(); ++j)
        for (std::size_t r = 0; r < n; ++r) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = encoded[j][r];

    std::vector<ColumnGroup> groups;
    std::set<std::string> claimed;
    for (const auto& [label, members] : config.groups) {
        ColumnGroup g{label, {}};
        for (const auto& m : members) {
            auto it = source_cols.find(m);
            if (it == source_cols.end())
                throw ConfigError(source + ": group '" + label + "' names unknown covariate '" + m + "'");
            if (!claimed.insert(m).second)
                throw ConfigError(source + ": covariate '" + m + "' belongs to more than one group");
            g.columns.insert(g.columns.end(), it->second.begin(), it->second.end());
        }
        groups.push_back(std::move(g));
    }
    for (const auto& c : categorical) {
        if (claimed.count(c)) continue;
        groups.push_back(ColumnGroup{c, source_cols[c]});
    }

    return Dataset(std::move(x), std::move(a), std::move(y), std::move(names), std::move(groups));
}

}  // namespace calsens
