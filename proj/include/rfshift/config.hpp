// config.hpp — experiment configuration: line-oriented `key = value` text.
//
// `#` starts a comment, list values are comma-separated, duplicate keys are
// last-one-wins with a recorded warning. Unknown or missing required keys are
// parse errors that name the key and line.

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfshift/datagen.hpp"
#include "rfshift/features.hpp"
#include "rfshift/risk.hpp"
#include "rfshift/spectrum.hpp"

namespace rfshift {

struct SpectrumSource {
    enum class Kind { sim1, sim2, example1, example2, file } kind = Kind::sim1;
    double s = 0.0;   // example1 parameter
    std::string path; // file kind

    bool operator==(const SpectrumSource&) const = default;
};

struct ShiftSpec {
    ShiftConstruction construction = ShiftConstruction::isotropic;
    double parameter = 0.0; // tau for assumption2_default, variance c for isotropic

    bool operator==(const ShiftSpec&) const = default;
};

struct ExperimentConfig {
    std::string setting_name;
    SpectrumSource spectrum;
    GroundTruthKind ground_truth = GroundTruthKind::linear;
    int n = 0;
    int p = 0;
    std::vector<int> m_values;
    int K = 2;
    double sigma = 0.0;
    ShiftSpec shift;
    int n_test = 1000;
    int trials = 500;
    double b = 1.0;
    double xi = 0.5;
    std::uint64_t master_seed = 0;
    Activation activation = Activation::relu;
    std::vector<Metric> metrics{Metric::id_mse, Metric::ood_mse};

    bool operator==(const ExperimentConfig&) const = default;
};

struct ParsedConfig {
    ExperimentConfig config;
    std::vector<std::string> warnings;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace cfgdetail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "name(arg)" -> {name, arg}; "name" -> {name, nullopt}
inline std::pair<std::string, std::optional<double>> parse_call(const std::string& s,
                                                                const std::string& key, int line) {
    const auto open = s.find('(');
    if (open == std::string::npos) return {s, std::nullopt};
    const auto close = s.find(')', open);
    if (close == std::string::npos)
        throw ConfigError("config: malformed value for key '" + key + "' on line " +
                          std::to_string(line));
    try {
        return {trim(s.substr(0, open)), std::stod(s.substr(open + 1, close - open - 1))};
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric argument for key '" + key + "' on line " +
                          std::to_string(line));
    }
}

} // namespace cfgdetail

inline ParsedConfig parse_config_text(std::istream& in) {
    using cfgdetail::trim;
    ParsedConfig parsed;
    std::map<std::string, std::pair<std::string, int>> kv; // key -> (value, line)
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' on line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key on line " + std::to_string(lineno));
        if (kv.count(key))
            parsed.warnings.push_back("duplicate key '" + key + "' on line " +
                                      std::to_string(lineno) + "; last value wins");
        kv[key] = {value, lineno};
    }

    static const std::vector<std::string> known = {
        "setting_name", "spectrum", "ground_truth", "n", "p", "m_values", "K", "sigma",
        "shift", "n_test", "trials", "b", "xi", "master_seed", "activation", "metrics"};
    for (const auto& [key, value_line] : kv)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("config: unknown key '" + key + "' on line " +
                              std::to_string(value_line.second));
    for (const std::string required :
         {"n", "p", "m_values", "sigma", "spectrum", "ground_truth", "master_seed"})
        if (!kv.count(required))
            throw ConfigError("config: missing required key '" + std::string(required) + "'");

    auto get = [&](const std::string& key) -> std::optional<std::pair<std::string, int>> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    auto to_int = [](const std::pair<std::string, int>& v, const std::string& key) {
        try {
            return std::stoi(v.first);
        } catch (const std::exception&) {
            throw ConfigError("config: bad integer for key '" + key + "' on line " +
                              std::to_string(v.second));
        }
    };
    auto to_double = [](const std::pair<std::string, int>& v, const std::string& key) {
        try {
            return std::stod(v.first);
        } catch (const std::exception&) {
            throw ConfigError("config: bad number for key '" + key + "' on line " +
                              std::to_string(v.second));
        }
    };

    ExperimentConfig& cfg = parsed.config;
    if (auto v = get("setting_name")) cfg.setting_name = v->first;
    cfg.n = to_int(*get("n"), "n");
    cfg.p = to_int(*get("p"), "p");
    cfg.sigma = to_double(*get("sigma"), "sigma");
    if (auto v = get("K")) cfg.K = to_int(*v, "K");
    if (auto v = get("n_test")) cfg.n_test = to_int(*v, "n_test");
    if (auto v = get("trials")) cfg.trials = to_int(*v, "trials");
    if (auto v = get("b")) cfg.b = to_double(*v, "b");
    if (auto v = get("xi")) cfg.xi = to_double(*v, "xi");
    if (auto v = get("master_seed")) {
        try {
            cfg.master_seed = std::stoull(v->first);
        } catch (const std::exception&) {
            throw ConfigError("config: bad integer for key 'master_seed' on line " +
                              std::to_string(v->second));
        }
    }

    {
        const auto [value, line_no] = *get("m_values");
        for (const auto& item : cfgdetail::split_list(value))
            cfg.m_values.push_back(to_int({item, line_no}, "m_values"));
        if (cfg.m_values.empty())
            throw ConfigError("config: key 'm_values' on line " + std::to_string(line_no) +
                              " must list at least one value");
    }
    {
        const auto [value, line_no] = *get("spectrum");
        const auto [name, arg] = cfgdetail::parse_call(value, "spectrum", line_no);
        if (name == "sim1") cfg.spectrum.kind = SpectrumSource::Kind::sim1;
        else if (name == "sim2") cfg.spectrum.kind = SpectrumSource::Kind::sim2;
        else if (name == "example2") cfg.spectrum.kind = SpectrumSource::Kind::example2;
        else if (name == "example1") {
            cfg.spectrum.kind = SpectrumSource::Kind::example1;
            if (!arg)
                throw ConfigError("config: spectrum example1 needs its s parameter (line " +
                                  std::to_string(line_no) + ")");
            cfg.spectrum.s = *arg;
        } else if (name.rfind("file:", 0) == 0) {
            cfg.spectrum.kind = SpectrumSource::Kind::file;
            cfg.spectrum.path = name.substr(5);
        } else {
            throw ConfigError("config: unknown spectrum '" + name + "' on line " +
                              std::to_string(line_no));
        }
    }
    {
        const auto [value, line_no] = *get("ground_truth");
        if (value == "linear") cfg.ground_truth = GroundTruthKind::linear;
        else if (value == "softplus") cfg.ground_truth = GroundTruthKind::softplus;
        else
            throw ConfigError("config: unknown ground_truth '" + value + "' on line " +
                              std::to_string(line_no));
    }
    if (auto v = get("shift")) {
        const auto [name, arg] = cfgdetail::parse_call(v->first, "shift", v->second);
        if (!arg)
            throw ConfigError("config: shift needs a parameter on line " +
                              std::to_string(v->second));
        if (name == "isotropic") {
            cfg.shift = {ShiftConstruction::isotropic, *arg};
        } else if (name == "assumption2_default") {
            cfg.shift = {ShiftConstruction::assumption2_default, *arg};
        } else {
            throw ConfigError("config: unknown shift '" + name + "' on line " +
                              std::to_string(v->second));
        }
    }
    if (auto v = get("activation")) {
        if (v->first == "relu") cfg.activation = Activation::relu;
        else if (v->first == "identity") cfg.activation = Activation::identity;
        else
            throw ConfigError("config: unknown activation '" + v->first + "' on line " +
                              std::to_string(v->second));
    }
    if (auto v = get("metrics")) {
        cfg.metrics.clear();
        for (const auto& item : cfgdetail::split_list(v->first)) {
            if (item == "id_excess") cfg.metrics.push_back(Metric::id_excess);
            else if (item == "ood_excess") cfg.metrics.push_back(Metric::ood_excess);
            else if (item == "id_mse") cfg.metrics.push_back(Metric::id_mse);
            else if (item == "ood_mse") cfg.metrics.push_back(Metric::ood_mse);
            else
                throw ConfigError("config: unknown metric '" + item + "' on line " +
                                  std::to_string(v->second));
        }
        if (cfg.metrics.empty())
            throw ConfigError("config: key 'metrics' on line " + std::to_string(v->second) +
                              " must list at least one metric");
    }

    if (cfg.n < 1 || cfg.p < 1) throw ConfigError("config: n and p must be >= 1");
    if (cfg.K < 1) throw ConfigError("config: K must be >= 1");
    if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (cfg.n_test < 1) throw ConfigError("config: n_test must be >= 1");
    for (int m : cfg.m_values)
        if (m < 1) throw ConfigError("config: m_values must all be >= 1");
    return parsed;
}

inline ParsedConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config_text(in);
}

inline std::string spectrum_source_to_string(const SpectrumSource& src) {
    switch (src.kind) {
    case SpectrumSource::Kind::sim1: return "sim1";
    case SpectrumSource::Kind::sim2: return "sim2";
    case SpectrumSource::Kind::example2: return "example2";
    case SpectrumSource::Kind::example1: {
        std::ostringstream out;
        out.precision(17);
        out << "example1(" << src.s << ")";
        return out.str();
    }
    case SpectrumSource::Kind::file: return "file:" + src.path;
    }
    return "?";
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "setting_name = " << cfg.setting_name << "\n";
    out << "spectrum = " << spectrum_source_to_string(cfg.spectrum) << "\n";
    out << "ground_truth = "
        << (cfg.ground_truth == GroundTruthKind::linear ? "linear" : "softplus") << "\n";
    out << "n = " << cfg.n << "\n";
    out << "p = " << cfg.p << "\n";
    out << "m_values = ";
    for (std::size_t i = 0; i < cfg.m_values.size(); ++i)
        out << (i ? "," : "") << cfg.m_values[i];
    out << "\n";
    out << "K = " << cfg.K << "\n";
    out << "sigma = " << cfg.sigma << "\n";
    out << "shift = "
        << (cfg.shift.construction == ShiftConstruction::isotropic ? "isotropic"
                                                                   : "assumption2_default")
        << "(" << cfg.shift.parameter << ")\n";
    out << "n_test = " << cfg.n_test << "\n";
    out << "trials = " << cfg.trials << "\n";
    out << "b = " << cfg.b << "\n";
    out << "xi = " << cfg.xi << "\n";
    out << "master_seed = " << cfg.master_seed << "\n";
    out << "activation = " << (cfg.activation == Activation::relu ? "relu" : "identity") << "\n";
    out << "metrics = ";
    for (std::size_t i = 0; i < cfg.metrics.size(); ++i)
        out << (i ? "," : "") << to_string(cfg.metrics[i]);
    out << "\n";
    return out.str();
}

// Materialize the configured spectrum at dimension cfg.p.
inline Spectrum build_spectrum(const ExperimentConfig& cfg) {
    switch (cfg.spectrum.kind) {
    case SpectrumSource::Kind::sim1:
        return make_example_spectrum(ExampleKind::sim1, cfg.p);
    case SpectrumSource::Kind::sim2:
        return make_example_spectrum(ExampleKind::sim2, cfg.p);
    case SpectrumSource::Kind::example1: {
        Spectrum s = make_example_spectrum(ExampleKind::example1, cfg.n, cfg.spectrum.s);
        if (s.size() != cfg.p)
            throw ConfigError("config: example1 spectrum has p = n^5; set p accordingly");
        return s;
    }
    case SpectrumSource::Kind::example2: {
        Spectrum s = make_example_spectrum(ExampleKind::example2, cfg.n);
        if (s.size() != cfg.p)
            throw ConfigError("config: example2 spectrum has p = n^5; set p accordingly");
        return s;
    }
    case SpectrumSource::Kind::file: {
        Spectrum s = load_spectrum(cfg.spectrum.path);
        if (s.size() != cfg.p)
            throw ConfigError("config: spectrum file length does not match p");
        return s;
    }
    }
    throw ConfigError("config: unknown spectrum kind");
}

} // namespace rfshift
