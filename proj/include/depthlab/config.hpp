#pragma once

// Flat `key = value` configuration files.
//
//   # comment
//   p = [2]
//   epsilon = [0.1, 0.2]
//   estimators = [SCOV, MM]
//   output = records.csv

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "depthlab/dataset.hpp"
#include "depthlab/error.hpp"
#include "depthlab/simlab.hpp"

namespace depthlab {

class ConfigFile {
public:
    static ConfigFile parse(std::istream& in, const std::string& name = "config") {
        ConfigFile cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
            if (cfg.values_.count(key)) throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key " + key);
            std::vector<std::string> items;
            if (!value.empty() && value.front() == '[') {
                if (value.back() != ']') throw ConfigError(name + ":" + std::to_string(lineno) + ": unterminated list");
                value = value.substr(1, value.size() - 2);
                std::string cur;
                for (char c : value + ",") {
                    if (c == ',') {
                        if (!trim(cur).empty()) items.push_back(trim(cur));
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
            } else {
                items.push_back(value);
            }
            cfg.values_[key] = items;
        }
        return cfg;
    }

    static ConfigFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config " + path);
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::map<std::string, std::vector<std::string>>& values() const { return values_; }

    std::vector<std::string> strings(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key " + key);
        return it->second;
    }

    std::string string(const std::string& key) const {
        const auto v = strings(key);
        if (v.size() != 1) throw ConfigError("key " + key + " expects a single value");
        return v.front();
    }

    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : strings(key)) {
            double v;
            if (!detail::parse_double(s, v)) throw ConfigError("key " + key + ": not a number: " + s);
            out.push_back(v);
        }
        return out;
    }

    std::vector<int> integers(const std::string& key) const {
        std::vector<int> out;
        for (double v : reals(key)) {
            if (v != std::floor(v) || std::fabs(v) > 1e9) throw ConfigError("key " + key + ": not an integer");
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    std::map<std::string, std::vector<std::string>> values_;
};

struct SimulationConfig {
    std::vector<int> p{2};
    std::vector<int> n{};
    std::vector<int> n_factor{10};
    std::vector<double> epsilon{0.1, 0.2};
    std::vector<double> k{0, 1, 5, 10, 15, 20, 25};
    int replicates = 50;
    std::vector<EstimatorId> estimators{all_estimators().begin(), all_estimators().end()};
    std::uint64_t seed = 20240101;
    std::string output = "records.csv";
    Measure measure = Measure::median;
    int threads = 0;

    static SimulationConfig from(const ConfigFile& f) {
        static const std::vector<std::string> known = {"p", "n", "n_factor", "epsilon", "k", "replicates",
                                                       "estimators", "seed", "output", "measure", "threads"};
        for (const auto& [key, v] : f.values())
            if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown key " + key);
        SimulationConfig c;
        if (f.has("p")) c.p = f.integers("p");
        if (f.has("n")) {
            c.n = f.integers("n");
            c.n_factor.clear();
        }
        if (f.has("n_factor")) c.n_factor = f.integers("n_factor");
        if (f.has("epsilon")) c.epsilon = f.reals("epsilon");
        if (f.has("k")) c.k = f.reals("k");
        if (f.has("replicates")) c.replicates = f.integers("replicates").at(0);
        if (f.has("estimators")) {
            c.estimators.clear();
            for (const auto& s : f.strings("estimators")) {
                const auto id = parse_estimator(s);
                if (!id) throw ConfigError("unknown estimator " + s);
                c.estimators.push_back(*id);
            }
        }
        if (f.has("seed")) {
            const std::string s = f.string("seed");
            try {
                std::size_t used = 0;
                c.seed = std::stoull(s, &used, 0);
                if (used != s.size()) throw ConfigError("bad seed " + s);
            } catch (const std::logic_error&) {
                throw ConfigError("bad seed " + s);
            }
        }
        if (f.has("output")) c.output = f.string("output");
        if (f.has("measure")) c.measure = parse_measure(f.string("measure"));
        if (f.has("threads")) c.threads = f.integers("threads").at(0);
        c.grid().validate();
        return c;
    }

    GridSpec grid() const {
        GridSpec g = GridSpec::product(p, n, n_factor, epsilon, k);
        g.replicates = replicates;
        g.estimators = estimators;
        g.seed = seed;
        try {
            g.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        return g;
    }
};

}  // namespace depthlab
