#pragma once
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcslab/geometry.hpp"

namespace rcslab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// section.key -> value, insertion ordered
struct IniFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const {
        for (auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }
    std::string get(const std::string& key) const {
        for (auto& [k, v] : entries)
            if (k == key) return v;
        throw ConfigError("missing config key '" + key + "'");
    }
};

inline IniFile parse_ini(std::istream& in) {
    IniFile f;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
        std::string full = section + "." + key;
        if (f.has(full)) throw ConfigError("duplicate config key '" + full + "'");
        f.entries.push_back({full, val});
    }
    return f;
}

inline IniFile parse_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_ini(in);
}

// every key any subcommand understands; a typo anywhere is a hard error
inline const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "model.p", "model.q", "model.beta", "model.boundary",
        "geometry.fiber", "geometry.width", "geometry.height", "geometry.coupling",
        "experiment.n_list", "experiment.p_grid", "experiment.p_list", "experiment.samples",
        "experiment.tolerance", "experiment.delta", "experiment.aspect", "experiment.direction",
        "experiment.x", "experiment.y", "experiment.rects", "experiment.gluing_n",
        "output.dir", "output.seed", "output.plot", "output.threads",
    };
    return keys;
}

struct RunConfig {
    std::string subcommand;
    // model
    double p = 0.5, q = 1.0, beta = 1.0;
    bool wired = false;
    // geometry
    std::string fiber_name = "trivial";
    FiberGraph fiber;
    int width = 8, height = 8;
    std::string coupling;  // empty = nearest-neighbour slab
    // experiment
    std::vector<int> n_list;
    std::vector<double> p_grid, p_list;
    u64 samples = 10000;
    double tolerance = 0.01, delta = 1.0, aspect = 2.0;
    char direction = 'h';
    int x = 0, y = -1;  // potts endpoints as base indices; -1 = far corner
    std::vector<std::pair<int, int>> rects;
    int gluing_n = 1;
    // output
    std::string out_dir = ".";
    u64 seed = 0x5EEDCAFEULL;
    bool plot = false;
    int threads = 1;

    std::vector<std::string> echo;  // defaults applied, for the log
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an integer");
    }
}

inline u64 parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos;
        unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an unsigned integer");
    }
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

// applies the file on top of defaults; unknown keys are fatal
inline RunConfig apply_ini(const IniFile& ini, RunConfig cfg = {}) {
    auto& known = known_config_keys();
    for (auto& [k, v] : ini.entries) {
        bool ok = false;
        for (auto& kk : known)
            if (kk == k) ok = true;
        if (!ok) throw ConfigError("unknown config key '" + k + "'");
    }
    auto get = [&](const char* key) { return ini.get(key); };
    auto mark_default = [&](const char* key, const std::string& shown) {
        if (!ini.has(key)) cfg.echo.push_back(std::string(key) + " = " + shown + " (default)");
    };

    if (ini.has("model.p")) cfg.p = detail::parse_double("model.p", get("model.p"));
    mark_default("model.p", "0.5");
    if (ini.has("model.q")) cfg.q = detail::parse_double("model.q", get("model.q"));
    mark_default("model.q", "1");
    if (ini.has("model.beta")) cfg.beta = detail::parse_double("model.beta", get("model.beta"));
    mark_default("model.beta", "1");
    if (ini.has("model.boundary")) {
        std::string b = get("model.boundary");
        if (b == "free") cfg.wired = false;
        else if (b == "wired") cfg.wired = true;
        else throw ConfigError("model.boundary must be 'free' or 'wired', got '" + b + "'");
    }
    mark_default("model.boundary", "free");

    if (ini.has("geometry.fiber")) cfg.fiber_name = get("geometry.fiber");
    mark_default("geometry.fiber", "trivial");
    if (ini.has("geometry.width")) cfg.width = (int)detail::parse_int("geometry.width", get("geometry.width"));
    mark_default("geometry.width", "8");
    if (ini.has("geometry.height")) cfg.height = (int)detail::parse_int("geometry.height", get("geometry.height"));
    mark_default("geometry.height", "8");
    if (ini.has("geometry.coupling")) cfg.coupling = get("geometry.coupling");

    if (ini.has("experiment.n_list")) {
        cfg.n_list.clear();
        for (auto& s : detail::split_list(get("experiment.n_list")))
            cfg.n_list.push_back((int)detail::parse_int("experiment.n_list", s));
    }
    if (ini.has("experiment.p_grid")) {
        cfg.p_grid.clear();
        for (auto& s : detail::split_list(get("experiment.p_grid")))
            cfg.p_grid.push_back(detail::parse_double("experiment.p_grid", s));
    }
    if (ini.has("experiment.p_list")) {
        cfg.p_list.clear();
        for (auto& s : detail::split_list(get("experiment.p_list")))
            cfg.p_list.push_back(detail::parse_double("experiment.p_list", s));
    }
    if (ini.has("experiment.samples")) cfg.samples = detail::parse_u64("experiment.samples", get("experiment.samples"));
    mark_default("experiment.samples", "10000");
    if (ini.has("experiment.tolerance")) cfg.tolerance = detail::parse_double("experiment.tolerance", get("experiment.tolerance"));
    mark_default("experiment.tolerance", "0.01");
    if (ini.has("experiment.delta")) cfg.delta = detail::parse_double("experiment.delta", get("experiment.delta"));
    mark_default("experiment.delta", "1");
    if (ini.has("experiment.aspect")) cfg.aspect = detail::parse_double("experiment.aspect", get("experiment.aspect"));
    mark_default("experiment.aspect", "2");
    if (ini.has("experiment.direction")) {
        std::string d = get("experiment.direction");
        if (d != "h" && d != "v") throw ConfigError("experiment.direction must be 'h' or 'v'");
        cfg.direction = d[0];
    }
    mark_default("experiment.direction", "h");
    if (ini.has("experiment.x")) cfg.x = (int)detail::parse_int("experiment.x", get("experiment.x"));
    if (ini.has("experiment.y")) cfg.y = (int)detail::parse_int("experiment.y", get("experiment.y"));
    if (ini.has("experiment.rects")) {
        cfg.rects.clear();
        for (auto& s : detail::split_list(get("experiment.rects"))) {
            std::size_t xp = s.find('x');
            if (xp == std::string::npos)
                throw ConfigError("experiment.rects entries look like WxH, got '" + s + "'");
            cfg.rects.push_back({(int)detail::parse_int("experiment.rects", s.substr(0, xp)),
                                 (int)detail::parse_int("experiment.rects", s.substr(xp + 1))});
        }
    }
    if (ini.has("experiment.gluing_n")) cfg.gluing_n = (int)detail::parse_int("experiment.gluing_n", get("experiment.gluing_n"));
    mark_default("experiment.gluing_n", "1");

    if (ini.has("output.dir")) cfg.out_dir = get("output.dir");
    mark_default("output.dir", ".");
    if (ini.has("output.seed")) cfg.seed = detail::parse_u64("output.seed", get("output.seed"));
    if (ini.has("output.plot")) {
        std::string b = get("output.plot");
        if (b == "true" || b == "1") cfg.plot = true;
        else if (b == "false" || b == "0") cfg.plot = false;
        else throw ConfigError("output.plot must be true or false");
    }
    if (ini.has("output.threads")) cfg.threads = (int)detail::parse_int("output.threads", get("output.threads"));
    mark_default("output.threads", "1");
    return cfg;
}

inline void validate_config(RunConfig& cfg) {
    if (cfg.q < 1) throw ConfigError("q must be >= 1");
    if (cfg.p < 0 || cfg.p > 1) throw ConfigError("p must lie in [0,1], got " + std::to_string(cfg.p));
    if (cfg.beta < 0) throw ConfigError("beta must be >= 0");
    if (cfg.width < 1 || cfg.height < 1) throw ConfigError("window must be at least 1x1");
    if (cfg.samples < 1) throw ConfigError("samples must be >= 1");
    if (cfg.tolerance <= 0) throw ConfigError("tolerance must be positive");
    if (cfg.delta <= 0) throw ConfigError("delta must be positive");
    if (cfg.aspect < 1) throw ConfigError("aspect must be >= 1");
    if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
    if (cfg.gluing_n < 1) throw ConfigError("gluing_n must be >= 1");
    try {
        cfg.fiber = fiber_by_name(cfg.fiber_name);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

// stable identity of a run: every effective setting, hashed
inline u64 config_hash(const RunConfig& cfg) {
    std::ostringstream os;
    os << "rcslab1|" << cfg.subcommand << "|p=" << cfg.p << "|q=" << cfg.q << "|beta=" << cfg.beta
       << "|bc=" << (cfg.wired ? "wired" : "free") << "|fiber=" << cfg.fiber_name << "|w=" << cfg.width
       << "|h=" << cfg.height << "|coupling=" << cfg.coupling << "|n=";
    for (int n : cfg.n_list) os << n << ";";
    os << "|pg=";
    for (double p : cfg.p_grid) os << p << ";";
    os << "|pl=";
    for (double p : cfg.p_list) os << p << ";";
    os << "|s=" << cfg.samples << "|tol=" << cfg.tolerance << "|delta=" << cfg.delta
       << "|aspect=" << cfg.aspect << "|dir=" << cfg.direction << "|x=" << cfg.x << "|y=" << cfg.y
       << "|rects=";
    for (auto& [w, h] : cfg.rects) os << w << "x" << h << ";";
    os << "|gn=" << cfg.gluing_n << "|seed=" << cfg.seed;
    std::string s = os.str();
    u64 h = FNV_SEED;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace rcslab
