#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "pmsplan/errors.hpp"
#include "pmsplan/estimators.hpp"
#include "pmsplan/inference.hpp"
#include "pmsplan/loss.hpp"
#include "pmsplan/priors.hpp"
#include "pmsplan/supply_model.hpp"
#include "pmsplan/utility.hpp"

namespace pms {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error(what + ": '" + s + "' is not a number");
    }
}

inline long parse_long(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw config_error(what + ": '" + s + "' is not an integer");
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
    return out;
}

// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw numeric_error("cannot format value");
    return std::string(buf.data(), end);
}

} // namespace detail

// Flat key/value configuration file: `key = value` lines, '#' starts a
// comment. Unknown or duplicate keys are rejected so typos surface as errors.
class Config {
public:
    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("cannot open config file '" + path + "'");
        return parse_stream(in, path);
    }

    static Config parse_stream(std::istream& in, const std::string& label) {
        static const std::set<std::string> known = {
            "threshold_l", "underestimation_v", "weight_slope_m", "prior_variance_nu",
            "score", "use_prioritization", "sensitivity", "specificity", "budget",
            "interval", "h1", "h2", "seed", "confidence_level", "test_nodes", "supply_nodes"};
        Config cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
            std::string body = detail::trim(line);
            if (body.empty()) continue;
            auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw config_error(label + ":" + std::to_string(line_no) +
                                   ": expected 'key = value'");
            }
            std::string key = detail::trim(body.substr(0, eq));
            std::string value = detail::trim(body.substr(eq + 1));
            if (key.empty() || value.empty()) {
                throw config_error(label + ":" + std::to_string(line_no) + ": empty key or value");
            }
            bool recognized = known.count(key) > 0 || key.starts_with("risk.") ||
                              key.starts_with("catchment.");
            if (!recognized) {
                throw config_error(label + ":" + std::to_string(line_no) + ": unknown key '" +
                                   key + "'");
            }
            if (!cfg.entries_.try_emplace(key, value).second) {
                throw config_error(label + ":" + std::to_string(line_no) + ": duplicate key '" +
                                   key + "'");
            }
        }
        return cfg;
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw config_error("config key '" + key + "' is required");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : detail::parse_double(it->second, "config key " + key);
    }

    long get_long(const std::string& key, long fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : detail::parse_long(it->second, "config key " + key);
    }

    long require_long(const std::string& key) const {
        return detail::parse_long(require_string(key), "config key " + key);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        std::string v = it->second;
        std::transform(v.begin(), v.end(), v.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw config_error("config key " + key + ": '" + it->second + "' is not a boolean");
    }

    // All keys with the given prefix, with the prefix stripped.
    std::vector<std::pair<std::string, std::string>> with_prefix(const std::string& prefix) const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& [k, v] : entries_) {
            if (k.starts_with(prefix)) out.emplace_back(k.substr(prefix.size()), v);
        }
        return out;
    }

private:
    std::map<std::string, std::string> entries_;
};

// Node lists, catchments, and risk levels from the config.
inline Network network_from_config(const Config& cfg) {
    Network net;
    for (const std::string& id : detail::split(cfg.require_string("test_nodes"), ',')) {
        std::string t = detail::trim(id);
        if (t.empty()) throw config_error("test_nodes contains an empty identifier");
        net.test_nodes.push_back(t);
    }
    for (const std::string& id : detail::split(cfg.require_string("supply_nodes"), ',')) {
        std::string t = detail::trim(id);
        if (t.empty()) throw config_error("supply_nodes contains an empty identifier");
        net.supply_nodes.push_back(t);
    }
    auto catchments = cfg.with_prefix("catchment.");
    if (!catchments.empty()) {
        net.catchments.assign(net.test_nodes.size(), -1.0);
        for (const auto& [id, value] : catchments) {
            net.catchments[net.test_index(id)] = detail::parse_double(value, "catchment." + id);
        }
        for (std::size_t a = 0; a < net.test_nodes.size(); ++a) {
            if (net.catchments[a] < 0.0) {
                throw config_error("catchment missing for test node '" + net.test_nodes[a] + "'");
            }
        }
    }
    for (const auto& [id, value] : cfg.with_prefix("risk.")) {
        bool is_node = std::find(net.test_nodes.begin(), net.test_nodes.end(), id) !=
                           net.test_nodes.end() ||
                       std::find(net.supply_nodes.begin(), net.supply_nodes.end(), id) !=
                           net.supply_nodes.end();
        if (!is_node) throw config_error("risk.* names unknown node '" + id + "'");
        net.risk_levels[id] = static_cast<int>(detail::parse_long(value, "risk." + id));
    }
    net.validate();
    return net;
}

inline LossSpec loss_from_config(const Config& cfg) {
    LossSpec spec;
    std::string kind = cfg.get_string("score", "assessment");
    if (kind == "assessment") {
        spec.score_kind = ScoreKind::assessment;
    } else if (kind == "classification") {
        spec.score_kind = ScoreKind::classification;
    } else {
        throw config_error("score must be 'assessment' or 'classification', got '" + kind + "'");
    }
    spec.threshold_l = cfg.get_double("threshold_l", 0.2);
    spec.underestimation_v = cfg.get_double("underestimation_v", 1.0);
    spec.weight_slope_m = cfg.get_double("weight_slope_m", 0.6);
    spec.validate();
    return spec;
}

// Testing-record file: header `test_node,supply_node,result` with optional
// trailing `sensitivity,specificity` columns. Empty diagnostic cells fall back
// to the provided defaults.
inline Dataset read_records(const std::string& path, const Network& network,
                            double default_sensitivity, double default_specificity) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open records file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ":1: missing header");
    std::vector<std::string> header = detail::split(detail::trim(line), ',');
    for (std::string& h : header) h = detail::trim(h);
    const std::vector<std::string> short_form = {"test_node", "supply_node", "result"};
    const std::vector<std::string> long_form = {"test_node", "supply_node", "result",
                                                "sensitivity", "specificity"};
    bool has_diag;
    if (header == long_form) {
        has_diag = true;
    } else if (header == short_form) {
        has_diag = false;
    } else {
        throw data_error(path + ":1: header must be 'test_node,supply_node,result" +
                         "[,sensitivity,specificity]'");
    }

    auto check_prob = [&](double p, const char* what, std::size_t line_no) {
        if (!(p > 0.5 && p <= 1.0)) {
            throw data_error(path + ":" + std::to_string(line_no) + ": " + what +
                             " must lie in (0.5, 1]");
        }
    };
    check_prob(default_sensitivity, "default sensitivity", 1);
    check_prob(default_specificity, "default specificity", 1);

    Dataset out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        std::vector<std::string> cells = detail::split(body, ',');
        for (std::string& c : cells) c = detail::trim(c);
        std::size_t expected = has_diag ? 5 : 3;
        if (cells.size() != expected) {
            throw data_error(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(expected) + " fields, got " +
                             std::to_string(cells.size()));
        }
        TestRecord rec;
        try {
            rec.test_node = network.test_index(cells[0]);
            rec.supply_node = network.supply_index(cells[1]);
        } catch (const data_error& e) {
            throw data_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (cells[2] == "0") {
            rec.result = 0;
        } else if (cells[2] == "1") {
            rec.result = 1;
        } else {
            throw data_error(path + ":" + std::to_string(line_no) + ": result must be 0 or 1");
        }
        rec.sensitivity = default_sensitivity;
        rec.specificity = default_specificity;
        if (has_diag) {
            if (!cells[3].empty()) {
                rec.sensitivity = detail::parse_double(cells[3], path + ":" +
                                                                      std::to_string(line_no) +
                                                                      " sensitivity");
            }
            if (!cells[4].empty()) {
                rec.specificity = detail::parse_double(cells[4], path + ":" +
                                                                      std::to_string(line_no) +
                                                                      " specificity");
            }
        }
        check_prob(rec.sensitivity, "sensitivity", line_no);
        check_prob(rec.specificity, "specificity", line_no);
        out.records.push_back(rec);
    }
    return out;
}

inline void write_records(const std::filesystem::path& path, const Dataset& dataset,
                          const Network& network) {
    auto out = detail::open_output(path);
    out << "test_node,supply_node,result,sensitivity,specificity\n";
    for (const TestRecord& rec : dataset.records) {
        out << network.test_nodes[rec.test_node] << ',' << network.supply_nodes[rec.supply_node]
            << ',' << rec.result << ',' << detail::format_double(rec.sensitivity) << ','
            << detail::format_double(rec.specificity) << '\n';
    }
}

// Named plan weights: header `plan,node,weight`, one row per (plan, node)
// pair; unlisted nodes get weight 0. Plans keep file order.
inline std::vector<std::pair<std::string, std::vector<double>>> read_plans(
    const std::string& path, const Network& network) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open plans file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ":1: missing header");
    std::vector<std::string> header = detail::split(detail::trim(line), ',');
    for (std::string& h : header) h = detail::trim(h);
    if (header != std::vector<std::string>{"plan", "node", "weight"}) {
        throw data_error(path + ":1: header must be 'plan,node,weight'");
    }

    std::vector<std::pair<std::string, std::vector<double>>> plans;
    std::map<std::string, std::size_t> index;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        std::vector<std::string> cells = detail::split(body, ',');
        for (std::string& c : cells) c = detail::trim(c);
        if (cells.size() != 3) {
            throw data_error(path + ":" + std::to_string(line_no) + ": expected 3 fields");
        }
        std::size_t a;
        try {
            a = network.test_index(cells[1]);
        } catch (const data_error&) {
            throw data_error(path + ":" + std::to_string(line_no) + ": plan '" + cells[0] +
                             "' names unknown test node '" + cells[1] + "'");
        }
        double w = detail::parse_double(cells[2], path + ":" + std::to_string(line_no) + " weight");
        if (w < 0.0) {
            throw data_error(path + ":" + std::to_string(line_no) + ": weight must be nonnegative");
        }
        auto [it, inserted] = index.try_emplace(cells[0], plans.size());
        if (inserted) {
            plans.emplace_back(cells[0], std::vector<double>(network.n_test(), 0.0));
        }
        plans[it->second].second[a] = w;
    }
    if (plans.empty()) throw data_error(path + ": no plans listed");
    for (const auto& [name, weights] : plans) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) {
            throw data_error("plan '" + name + "' has all-zero weights");
        }
    }
    return plans;
}

inline void write_draws(const std::filesystem::path& path, const DrawSet& draws,
                        const Network& network) {
    auto out = detail::open_output(path);
    for (std::size_t g = 0; g < network.n_nodes(); ++g) {
        out << (g ? "," : "") << network.node_name(g);
    }
    out << '\n';
    for (const RateVector& rv : draws.draws) {
        for (std::size_t g = 0; g < network.n_nodes(); ++g) {
            out << (g ? "," : "") << detail::format_double(rv.node(g));
        }
        out << '\n';
    }
}

inline void write_summary(const std::filesystem::path& path, const DrawSet& draws,
                          const Network& network) {
    auto out = detail::open_output(path);
    out << "node,median,q05,q95\n";
    for (std::size_t g = 0; g < network.n_nodes(); ++g) {
        std::vector<double> col = draws.node_column(g);
        out << network.node_name(g) << ',' << detail::format_double(sample_quantile(col, 0.5))
            << ',' << detail::format_double(sample_quantile(col, 0.05)) << ','
            << detail::format_double(sample_quantile(col, 0.95)) << '\n';
    }
}

// Allocation tables round-trip exactly: integer allocations, one row per
// (policy, replication, budget, node).
inline void write_allocations(
    const std::filesystem::path& path, const Network& network,
    const std::vector<std::tuple<std::string, int, long, SamplingPlan>>& rows) {
    auto out = detail::open_output(path);
    out << "policy,replication,budget,node,allocation\n";
    for (const auto& [policy, rep, budget, plan] : rows) {
        for (std::size_t a = 0; a < network.n_test(); ++a) {
            out << policy << ',' << rep << ',' << budget << ',' << network.test_nodes[a] << ','
                << plan.alloc[a] << '\n';
        }
    }
}

inline std::map<std::tuple<std::string, int, long>, SamplingPlan> read_allocations(
    const std::string& path, const Network& network) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open allocations file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ":1: missing header");
    if (detail::trim(line) != "policy,replication,budget,node,allocation") {
        throw data_error(path + ":1: unexpected header");
    }
    std::map<std::tuple<std::string, int, long>, SamplingPlan> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = detail::trim(line);
        if (body.empty()) continue;
        std::vector<std::string> cells = detail::split(body, ',');
        if (cells.size() != 5) {
            throw data_error(path + ":" + std::to_string(line_no) + ": expected 5 fields");
        }
        auto key = std::make_tuple(detail::trim(cells[0]),
                                   static_cast<int>(detail::parse_long(cells[1], "replication")),
                                   detail::parse_long(cells[2], "budget"));
        auto [it, inserted] = out.try_emplace(key, SamplingPlan{});
        if (inserted) it->second.alloc.assign(network.n_test(), 0);
        it->second.alloc[network.test_index(detail::trim(cells[3]))] =
            detail::parse_long(cells[4], "allocation");
    }
    return out;
}

} // namespace pms
