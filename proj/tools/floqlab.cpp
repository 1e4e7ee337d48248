// Command-line front end: validate configs, run ensembles, emit prediction
// tables, inspect persisted binaries, and compare two run outputs.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "floqlab/harness.hpp"
#include "floqlab/rmt.hpp"

namespace fs = std::filesystem;
using namespace floqlab;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<u64> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<double> z_gate;
};

RunConfig load_config(const CommonFlags& flags) {
    RunConfig cfg = parse_config_file(flags.config_path);
    if (flags.seed) cfg.master_seed = *flags.seed;
    if (flags.workers) cfg.workers = *flags.workers;
    if (flags.out_dir) cfg.out_dir = *flags.out_dir;
    if (flags.z_gate) cfg.z_gate = *flags.z_gate;
    return cfg;
}

int cmd_validate(const CommonFlags& flags) {
    const RunConfig cfg = parse_config_file(flags.config_path);
    const auto errors = validate_config(cfg);
    if (cfg.mode == "circuit" && !cfg.dims.empty()) {
        try {
            const CircuitSpec spec = to_circuit_spec(cfg);
            for (const auto& issue : validate_spec(spec))
                if (issue.severity == SpecIssue::Severity::warning)
                    std::cout << "warning: " << issue.message << "\n";
        } catch (const std::exception&) {
            // reported through validate_config below
        }
    }
    if (errors.empty()) {
        std::cout << "config OK: " << cfg.statistics.size() << " statistic(s), ensemble size "
                  << cfg.ensemble_size << "\n";
        return 0;
    }
    for (const auto& e : errors) std::cout << "error: " << e << "\n";
    return 1;
}

int cmd_run(const CommonFlags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto errors = validate_config(cfg);
    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << e << "\n";
        return 2;
    }
    const EnsembleSource source = make_source(cfg);
    auto pipelines = make_pipelines(cfg, source.dim());

    RunOptions opts;
    opts.samples = cfg.ensemble_size;
    opts.blocks = cfg.blocks;
    opts.workers = cfg.workers;
    opts.check_identities = cfg.check_identities;
    const RunOutput out = run_ensemble(source, pipelines, opts);

    if (cfg.save_spectra) persist_samples(cfg.out_dir, source, cfg.ensemble_size, true);
    const RunSummary summary = write_run_outputs(cfg.out_dir, out, cfg.z_gate);
    std::cout << summary.text;
    std::cout << (summary.passed ? "RESULT: PASS" : "RESULT: FAIL") << " (z gate " << cfg.z_gate
              << ", outputs in " << cfg.out_dir << ")\n";
    return summary.passed ? 0 : 1;
}

int cmd_predict(const std::string& name, const std::map<std::string, std::string>& params,
                const std::string& out_path) {
    PredictParams p;
    auto get = [&](const char* key, double fallback, bool required = false) {
        auto it = params.find(key);
        if (it == params.end()) {
            if (required) throw InvalidArgument(std::string("predict: missing param ") + key);
            return fallback;
        }
        return confdetail::parse_double(it->second, key);
    };
    p.n = static_cast<int>(get("N", 0, true));
    p.n_a = static_cast<int>(get("NA", 0));
    p.tr_o = get("trO", 0.0);
    p.tr_o2 = get("trO2", 0.0);
    p.tr_op = get("trOp", p.tr_o);
    p.tr_oop = get("trOOp", p.tr_o2);
    p.eta = get("eta", 0.0);
    p.rho0_entry = get("rho0", 0.0);
    p.rho_diagonal = get("diag", 1.0) != 0.0;
    if (params.count("category"))
        p.category = harnessdetail::parse_category(params.at("category"));
    const std::string variant = params.count("variant") ? params.at("variant") : "exact";
    p.variant = variant == "leading"    ? Variant::leading
                : variant == "smoothed" ? Variant::smoothed
                                        : Variant::exact;

    std::vector<double> grid;
    const bool freq_domain = name == "r2" || name == "r2_smoothed" || name == "corr_freq" ||
                             name == "opcorr";
    if (freq_domain) {
        const int bins =
            static_cast<int>(get("bins", 65.0));
        const OmegaGrid g = OmegaGrid::histogram(bins);
        for (int b = 0; b < g.bins; ++b) grid.push_back(g.center(b));
    } else {
        const long t_max = static_cast<long>(get("t_max", 0.0, true));
        for (long t = 0; t <= t_max; ++t) grid.push_back(static_cast<double>(t));
    }

    const PredictionTable tab =
        (p.eta > 0.0 && name == "r2") ? smoothed_variant("r2", p, p.eta, grid)
                                      : predict(name, p, grid);

    std::ostream* outp = &std::cout;
    std::ofstream file;
    if (!out_path.empty() && out_path != "-") {
        file.open(out_path);
        if (!file) throw IoError("predict: cannot open '" + out_path + "'");
        outp = &file;
    }
    *outp << "label,grid,predicted\n";
    for (size_t k = 0; k < tab.grid.size(); ++k)
        *outp << "," << csv_number(tab.grid[k]) << "," << csv_number(tab.values[k]) << "\n";
    for (const auto& [loc, mass] : tab.delta_masses)
        *outp << "delta," << csv_number(loc) << "," << csv_number(mass) << "\n";
    return 0;
}

int cmd_inspect(const std::vector<std::string>& paths) {
    for (const auto& p : paths) std::cout << inspect_container(p) << "\n";
    return 0;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("compare: cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const auto cells = confdetail::split(line, ',');
        if (first) {
            t.header = cells;
            first = false;
        } else if (!line.empty()) {
            t.rows.push_back(cells);
        }
    }
    return t;
}

int cmd_compare(const std::string& dir_a, const std::string& dir_b, double gate) {
    int status = 0;
    bool any = false;
    for (const auto& entry : fs::directory_iterator(dir_a)) {
        if (entry.path().extension() != ".csv") continue;
        const fs::path other = fs::path(dir_b) / entry.path().filename();
        if (!fs::exists(other)) {
            std::cout << entry.path().filename().string() << ": missing in " << dir_b << "\n";
            status = 1;
            continue;
        }
        any = true;
        const CsvTable a = read_csv(entry.path().string());
        const CsvTable b = read_csv(other.string());
        // join on (label, grid); columns: label,grid,measured,error,...
        std::map<std::pair<std::string, std::string>, std::pair<double, double>> bmap;
        for (const auto& row : b.rows)
            if (row.size() >= 4)
                bmap[{row[0], row[1]}] = {std::stod(row[2]), std::stod(row[3])};
        double worst = 0.0;
        long joined = 0;
        for (const auto& row : a.rows) {
            if (row.size() < 4) continue;
            auto it = bmap.find({row[0], row[1]});
            if (it == bmap.end()) continue;
            ++joined;
            const double ma = std::stod(row[2]), ea = std::stod(row[3]);
            const double mb = it->second.first, eb = it->second.second;
            const double denom = std::sqrt(ea * ea + eb * eb) + 1e-300;
            worst = std::max(worst, std::abs(ma - mb) / denom);
        }
        std::cout << entry.path().filename().string() << ": " << joined
                  << " joined rows, max |z_diff| = " << worst << "\n";
        if (worst > gate) status = 1;
    }
    if (!any) {
        std::cout << "no CSV files found in " << dir_a << "\n";
        return 1;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Floquet circuit and CUE spectral-statistics laboratory"};
    app.require_subcommand(1);

    CommonFlags flags;
    u64 seed_val = 0;
    int workers_val = 0;
    std::string out_val;
    double z_val = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config_path, "run configuration file")->required();
        sub->add_option("--seed", seed_val, "override master seed");
        sub->add_option("--workers", workers_val, "worker thread count (0 = auto)");
        sub->add_option("--out", out_val, "output directory");
        sub->add_option("--z-gate", z_val, "z-score gate for the summary verdict");
    };
    auto collect_common = [&](CLI::App* sub) {
        if (sub->count("--seed")) flags.seed = seed_val;
        if (sub->count("--workers")) flags.workers = workers_val;
        if (sub->count("--out")) flags.out_dir = out_val;
        if (sub->count("--z-gate")) flags.z_gate = z_val;
    };

    CLI::App* validate = app.add_subcommand("validate", "check a configuration file");
    add_common(validate);

    CLI::App* run = app.add_subcommand("run", "run the full pipeline");
    add_common(run);

    CLI::App* predict = app.add_subcommand("predict", "emit closed-form prediction tables");
    std::string pred_name;
    std::vector<std::string> pred_params;
    std::string pred_out;
    predict->add_option("--name", pred_name, "statistic name (sff, r2, r2_smoothed, psff, corr_time, corr_freq, opcorr, opcorr_time, rho_entry, eth_offdiag, f_envelope)")
        ->required();
    predict->add_option("--param", pred_params, "key=value parameter (repeatable), e.g. N=32");
    predict->add_option("--out", pred_out, "output file ('-' for stdout)");

    CLI::App* inspect = app.add_subcommand("inspect", "dump persisted binary containers");
    std::vector<std::string> inspect_paths;
    inspect->add_option("files", inspect_paths, "container files")->required();

    CLI::App* compare = app.add_subcommand("compare", "join two run output directories");
    std::string dir_a, dir_b;
    double cmp_gate = 5.0;
    compare->add_option("--a", dir_a, "first run directory")->required();
    compare->add_option("--b", dir_b, "second run directory")->required();
    compare->add_option("--z-gate", cmp_gate, "difference gate in combined-sigma units");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            collect_common(validate);
            return cmd_validate(flags);
        }
        if (run->parsed()) {
            collect_common(run);
            return cmd_run(flags);
        }
        if (predict->parsed()) {
            std::map<std::string, std::string> params;
            for (const auto& kv : pred_params) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw InvalidArgument("predict: --param needs key=value, got '" + kv + "'");
                params[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
            return cmd_predict(pred_name, params, pred_out);
        }
        if (inspect->parsed()) return cmd_inspect(inspect_paths);
        if (compare->parsed()) return cmd_compare(dir_a, dir_b, cmp_gate);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
