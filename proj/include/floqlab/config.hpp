#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "floqlab/circuit.hpp"
#include "floqlab/common.hpp"

namespace floqlab {

// Plain key-value run configuration. Lines are `key = value`; '#' starts a
// comment; `substep`, `observable` and `statistic` may repeat.

struct ObservableDecl {
    std::string name;
    std::string kind;
    std::vector<int> sites;
    std::optional<MatrixXcd> matrix;  // custom templates
};

struct StatRequest {
    std::string kind;
    std::map<std::string, std::string> opts;

    std::string opt(const std::string& key, const std::string& fallback = "") const {
        auto it = opts.find(key);
        return it == opts.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return opts.count(key) > 0; }
};

struct RunConfig {
    std::string mode = "cue";
    int n = 0;  // cue mode dimension

    std::vector<int> dims;
    int q = 2;
    std::vector<std::string> boundary;
    std::string schedule = "brickwork";
    std::vector<Substep> explicit_schedule;
    long dim_cap = 4096;

    long ensemble_size = 0;
    u64 master_seed = 0;
    int blocks = 20;
    int workers = 0;
    double z_gate = 4.0;
    std::string out_dir = "out";
    bool save_spectra = false;
    bool check_identities = true;

    std::vector<ObservableDecl> observables;
    std::vector<StatRequest> statistics;
};

namespace confdetail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline long parse_long(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const long v = std::stol(trim(s), &pos, 0);
        if (pos != trim(s).size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw InvalidArgument("config: cannot parse integer for " + what + ": '" + s + "'");
    }
}

inline u64 parse_u64(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const u64 v = std::stoull(trim(s), &pos, 0);
        if (pos != trim(s).size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw InvalidArgument("config: cannot parse unsigned integer for " + what + ": '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        size_t pos = 0;
        const double v = std::stod(trim(s), &pos);
        if (pos != trim(s).size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw InvalidArgument("config: cannot parse number for " + what + ": '" + s + "'");
    }
}

inline bool parse_bool(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InvalidArgument("config: cannot parse boolean for " + what + ": '" + s + "'");
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
    std::vector<int> out;
    for (const auto& part : split(s, ',')) {
        if (trim(part).empty()) continue;
        out.push_back(static_cast<int>(parse_long(part, what)));
    }
    return out;
}

inline std::vector<long> parse_long_list(const std::string& s, const std::string& what) {
    std::vector<long> out;
    for (const auto& part : split(s, ','))
        if (!trim(part).empty()) out.push_back(parse_long(part, what));
    return out;
}

// "(0,1) (2,3)" -> one substep of site pairs
inline Substep parse_pair_list(const std::string& s) {
    Substep step;
    size_t pos = 0;
    while (pos < s.size()) {
        const auto open = s.find('(', pos);
        if (open == std::string::npos) break;
        const auto close = s.find(')', open);
        if (close == std::string::npos) throw InvalidArgument("config: unbalanced '(' in substep");
        const auto parts = split(s.substr(open + 1, close - open - 1), ',');
        if (parts.size() != 2) throw InvalidArgument("config: substep pairs need two sites");
        step.push_back({static_cast<int>(parse_long(parts[0], "substep")),
                        static_cast<int>(parse_long(parts[1], "substep"))});
        pos = close + 1;
    }
    if (step.empty()) throw InvalidArgument("config: empty substep line");
    return step;
}

// rows ';'-separated, entries ','-separated at paren depth zero; each entry
// either a bare real or "(re,im)"
inline MatrixXcd parse_matrix(const std::string& s) {
    std::vector<std::vector<cplx>> rows;
    for (const auto& row_text : split(s, ';')) {
        std::vector<cplx> row;
        std::string cur;
        int depth = 0;
        auto flush = [&]() {
            const std::string t = trim(cur);
            cur.clear();
            if (t.empty()) return;
            if (t.front() == '(') {
                if (t.back() != ')') throw InvalidArgument("config: malformed complex entry " + t);
                const auto parts = split(t.substr(1, t.size() - 2), ',');
                if (parts.size() != 2)
                    throw InvalidArgument("config: complex entry needs (re,im): " + t);
                row.push_back(cplx(parse_double(parts[0], "matrix"), parse_double(parts[1], "matrix")));
            } else {
                row.push_back(cplx(parse_double(t, "matrix"), 0.0));
            }
        };
        for (char c : row_text) {
            if (c == '(') ++depth;
            if (c == ')') --depth;
            if (c == ',' && depth == 0) {
                flush();
            } else {
                cur += c;
            }
        }
        flush();
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument("config: empty matrix");
    const size_t n = rows.size();
    MatrixXcd m(n, n);
    for (size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n)
            throw InvalidArgument("config: matrix must be square, row " + std::to_string(i) +
                                  " has " + std::to_string(rows[i].size()) + " entries");
        for (size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

// "name key=val key=val" -> (name, option map)
inline std::pair<std::string, std::map<std::string, std::string>> parse_decl(
    const std::string& value) {
    std::istringstream is(value);
    std::string head;
    is >> head;
    std::map<std::string, std::string> opts;
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config: expected key=value, got '" + tok + "'");
        opts[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return {head, opts};
}

}  // namespace confdetail

inline RunConfig parse_config_text(const std::string& text) {
    using namespace confdetail;
    RunConfig cfg;
    std::istringstream in(text);
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
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "mode") {
            cfg.mode = value;
        } else if (key == "n") {
            cfg.n = static_cast<int>(parse_long(value, key));
        } else if (key == "dims") {
            cfg.dims = parse_int_list(value, key);
        } else if (key == "q") {
            cfg.q = static_cast<int>(parse_long(value, key));
        } else if (key == "boundary") {
            for (const auto& b : split(value, ',')) cfg.boundary.push_back(trim(b));
        } else if (key == "schedule") {
            cfg.schedule = value;
        } else if (key == "substep") {
            cfg.explicit_schedule.push_back(parse_pair_list(value));
        } else if (key == "dim_cap") {
            cfg.dim_cap = parse_long(value, key);
        } else if (key == "ensemble_size") {
            cfg.ensemble_size = parse_long(value, key);
        } else if (key == "master_seed") {
            cfg.master_seed = parse_u64(value, key);
        } else if (key == "blocks") {
            cfg.blocks = static_cast<int>(parse_long(value, key));
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(parse_long(value, key));
        } else if (key == "z_gate") {
            cfg.z_gate = parse_double(value, key);
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (key == "save_spectra") {
            cfg.save_spectra = parse_bool(value, key);
        } else if (key == "check_identities") {
            cfg.check_identities = parse_bool(value, key);
        } else if (key == "observable") {
            auto [name, opts] = parse_decl(value);
            ObservableDecl decl;
            decl.name = name;
            decl.kind = opts.count("kind") ? opts["kind"] : "custom";
            if (opts.count("sites")) decl.sites = parse_int_list(opts["sites"], "sites");
            if (opts.count("matrix")) decl.matrix = parse_matrix(opts["matrix"]);
            cfg.observables.push_back(std::move(decl));
        } else if (key == "statistic") {
            auto [name, opts] = parse_decl(value);
            cfg.statistics.push_back(StatRequest{name, std::move(opts)});
        } else {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
        }
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline CircuitSpec to_circuit_spec(const RunConfig& cfg) {
    CircuitSpec spec;
    spec.lattice.dims = cfg.dims;
    for (size_t a = 0; a < cfg.dims.size(); ++a) {
        std::string b = a < cfg.boundary.size() ? cfg.boundary[a] : "open";
        if (b == "open")
            spec.lattice.boundary.push_back(Boundary::open);
        else if (b == "periodic")
            spec.lattice.boundary.push_back(Boundary::periodic);
        else
            throw InvalidArgument("config: unknown boundary '" + b + "'");
    }
    spec.q = cfg.q;
    spec.ensemble_size = cfg.ensemble_size;
    spec.master_seed = cfg.master_seed;
    spec.dim_cap = cfg.dim_cap;
    if (cfg.schedule == "brickwork")
        spec.schedule = brickwork_schedule(spec.lattice);
    else if (cfg.schedule == "sequential")
        spec.schedule = sequential_schedule(spec.lattice);
    else if (cfg.schedule == "explicit")
        spec.schedule = cfg.explicit_schedule;
    else
        throw InvalidArgument("config: unknown schedule '" + cfg.schedule + "'");
    return spec;
}

}  // namespace floqlab
