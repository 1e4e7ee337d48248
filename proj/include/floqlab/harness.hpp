#pragma once

#include <cctype>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "floqlab/config.hpp"
#include "floqlab/ensemble.hpp"
#include "floqlab/io.hpp"
#include "floqlab/pipelines.hpp"

namespace floqlab {

inline EnsembleSource make_source(const RunConfig& cfg) {
    if (cfg.mode == "cue") {
        if (cfg.n < 2) throw InvalidArgument("config: cue mode needs n >= 2");
        return EnsembleSource::cue(cfg.n, cfg.master_seed);
    }
    if (cfg.mode == "circuit") {
        CircuitSpec spec = to_circuit_spec(cfg);
        const auto issues = validate_spec(spec);
        if (has_errors(issues))
            throw InvalidArgument("config: invalid circuit\n" + format_issues(issues));
        return EnsembleSource::from_circuit(std::move(spec));
    }
    throw InvalidArgument("config: unknown mode '" + cfg.mode + "'");
}

// Resolves a declared observable against the source dimension. Circuit mode
// embeds named or custom site templates; cue mode offers identity, the
// traceless half-spectrum diagonal `block_z`, and full custom matrices.
inline ObservableOp resolve_observable(const ObservableDecl& decl, const RunConfig& cfg,
                                       int dim) {
    if (cfg.mode == "circuit") {
        const CircuitSpec spec = to_circuit_spec(cfg);
        if (decl.kind == "custom") {
            if (!decl.matrix) throw InvalidArgument("observable " + decl.name + ": custom needs matrix=");
            if (decl.matrix->rows() == dim) return ObservableOp::from_matrix(*decl.matrix);
            return build_local_observable(*decl.matrix, decl.sites, spec);
        }
        return build_local_observable(decl.kind, decl.sites, spec);
    }
    if (decl.kind == "identity") return ObservableOp::from_matrix(MatrixXcd::Identity(dim, dim));
    if (decl.kind == "block_z") {
        if (dim % 2 != 0) throw InvalidArgument("observable block_z needs even dimension");
        MatrixXcd m = MatrixXcd::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) m(k, k) = (k < dim / 2) ? 1.0 : -1.0;
        return ObservableOp::from_matrix(std::move(m));
    }
    if (decl.kind == "custom") {
        if (!decl.matrix || decl.matrix->rows() != dim)
            throw InvalidArgument("observable " + decl.name + ": cue mode needs a full N x N matrix");
        return ObservableOp::from_matrix(*decl.matrix);
    }
    throw InvalidArgument("observable " + decl.name + ": unknown kind '" + decl.kind +
                          "' for cue mode");
}

namespace harnessdetail {

inline TupleCategory parse_category(const std::string& s) {
    if (s == "cat1" || s == "1") return TupleCategory::cat1;
    if (s == "cat1_offdiag" || s == "1_offdiag") return TupleCategory::cat1_offdiag;
    if (s == "cat1_diag" || s == "1_diag") return TupleCategory::cat1_diag;
    if (s == "cat2" || s == "2") return TupleCategory::cat2;
    if (s == "cat3" || s == "3") return TupleCategory::cat3;
    throw InvalidArgument("config: unknown tuple category '" + s + "'");
}

inline std::vector<std::array<int, 4>> parse_tuples(const std::string& s) {
    std::vector<std::array<int, 4>> out;
    for (const auto& part : confdetail::split(s, ';')) {
        if (confdetail::trim(part).empty()) continue;
        const auto idx = confdetail::split(part, ':');
        if (idx.size() != 4) throw InvalidArgument("config: tuples need n:n':m':m");
        out.push_back({static_cast<int>(confdetail::parse_long(idx[0], "tuple")),
                       static_cast<int>(confdetail::parse_long(idx[1], "tuple")),
                       static_cast<int>(confdetail::parse_long(idx[2], "tuple")),
                       static_cast<int>(confdetail::parse_long(idx[3], "tuple"))});
    }
    return out;
}

inline std::vector<long> time_grid(const StatRequest& st, const std::string& what) {
    if (st.has("times")) return confdetail::parse_long_list(st.opt("times"), what);
    const long t_max = confdetail::parse_long(st.opt("t_max", "0"), what + " t_max");
    if (t_max < 1) throw InvalidArgument("config: " + what + " needs t_max or times");
    std::vector<long> ts;
    for (long t = 0; t <= t_max; ++t) ts.push_back(t);
    return ts;
}

inline OmegaGrid omega_grid(const StatRequest& st) {
    const int bins = static_cast<int>(confdetail::parse_long(st.opt("bins", "65"), "bins"));
    if (st.has("eta")) {
        const double eta = confdetail::parse_double(st.opt("eta"), "eta");
        const int t_max = static_cast<int>(confdetail::parse_long(
            st.opt("t_max", std::to_string(std::lround(30.0 / eta))), "t_max"));
        return OmegaGrid::lorentzian(bins, eta, t_max);
    }
    return OmegaGrid::histogram(bins);
}

}  // namespace harnessdetail

inline std::vector<std::unique_ptr<StatisticPipeline>> make_pipelines(const RunConfig& cfg,
                                                                      int dim) {
    using namespace harnessdetail;
    std::map<std::string, ObservableOp> obs;
    for (const auto& decl : cfg.observables)
        obs.emplace(decl.name, resolve_observable(decl, cfg, dim));
    auto need_obs = [&](const std::string& name) -> const ObservableOp& {
        auto it = obs.find(name);
        if (it == obs.end())
            throw InvalidArgument("config: statistic references unknown observable '" + name + "'");
        return it->second;
    };

    std::vector<std::unique_ptr<StatisticPipeline>> out;
    for (const auto& st : cfg.statistics) {
        if (st.kind == "sff") {
            const long t_max = confdetail::parse_long(st.opt("t_max", "0"), "sff t_max");
            out.push_back(std::make_unique<SffPipeline>(dim, static_cast<int>(t_max), cfg.blocks));
        } else if (st.kind == "r2") {
            out.push_back(std::make_unique<R2Pipeline>(dim, omega_grid(st), cfg.blocks));
        } else if (st.kind == "psff") {
            const long t_max = confdetail::parse_long(st.opt("t_max", "0"), "psff t_max");
            SubsystemSplit split =
                st.has("sites")
                    ? SubsystemSplit::sites(to_circuit_spec(cfg),
                                            confdetail::parse_int_list(st.opt("sites"), "sites"))
                    : SubsystemSplit::block(
                          dim, static_cast<int>(confdetail::parse_long(st.opt("na", "0"), "na")));
            out.push_back(
                std::make_unique<PsffPipeline>(std::move(split), static_cast<int>(t_max), cfg.blocks));
        } else if (st.kind == "entry_moment2") {
            out.push_back(std::make_unique<EntryMoment2Pipeline>(dim, cfg.blocks, cfg.z_gate));
        } else if (st.kind == "corr_time" || st.kind == "corr_freq") {
            ProbeSpec probe;
            std::string label;
            if (st.has("tuples")) {
                probe = ProbeSpec::explicit_tuples(parse_tuples(st.opt("tuples")));
                label = "tuples";
            } else {
                const long budget = confdetail::parse_long(st.opt("budget", "256"), "budget");
                const TupleCategory cat = parse_category(st.opt("category", "cat1_offdiag"));
                probe = ProbeSpec::for_category(cat, dim, budget, cfg.master_seed);
                label = category_name(cat);
            }
            if (st.kind == "corr_time") {
                out.push_back(std::make_unique<CorrTimePipeline>(
                    dim, std::move(probe), time_grid(st, "corr_time"), cfg.blocks, label));
            } else {
                out.push_back(std::make_unique<CorrFreqPipeline>(dim, std::move(probe),
                                                                 omega_grid(st), cfg.blocks, label));
            }
        } else if (st.kind == "eth") {
            const int bins = static_cast<int>(confdetail::parse_long(st.opt("bins", "17"), "bins"));
            out.push_back(std::make_unique<EthPipeline>(need_obs(st.opt("observable")),
                                                        OmegaGrid::histogram(bins), cfg.blocks));
        } else if (st.kind == "opcorr") {
            const ObservableOp& a = need_obs(st.opt("a"));
            const ObservableOp& b = need_obs(st.opt("b", st.opt("a")));
            if (st.opt("domain", "freq") == "freq") {
                out.push_back(
                    std::make_unique<OpCorrPipeline>(a, b, omega_grid(st), cfg.blocks));
            } else {
                out.push_back(std::make_unique<OpCorrPipeline>(a, b, time_grid(st, "opcorr"),
                                                               cfg.blocks));
            }
        } else if (st.kind == "rho") {
            const std::string init = st.opt("init", "basis:0");
            DensityMatrix rho0 = DensityMatrix::thermal(dim);
            if (init.rfind("basis:", 0) == 0) {
                rho0 = DensityMatrix::basis_state(
                    dim, static_cast<int>(confdetail::parse_long(init.substr(6), "rho init")));
            } else if (init == "thermal") {
                rho0 = DensityMatrix::thermal(dim);
            } else if (init == "uniform") {
                rho0 = DensityMatrix::uniform_superposition(dim);
            } else {
                throw InvalidArgument("config: unknown rho init '" + init + "'");
            }
            std::vector<RhoProbe> probes;
            const std::string probe_opt = st.opt("probes", "default");
            if (probe_opt == "default") {
                probes = RhoEstimator::default_probes(dim);
            } else if (probe_opt == "diag") {
                for (int k = 0; k < dim; ++k) probes.push_back({k, k});
            } else {
                for (const auto& part : confdetail::split(probe_opt, ';')) {
                    const auto rc = confdetail::split(part, ':');
                    if (rc.size() != 2) throw InvalidArgument("config: rho probes need row:col");
                    probes.push_back({static_cast<int>(confdetail::parse_long(rc[0], "probe")),
                                      static_cast<int>(confdetail::parse_long(rc[1], "probe"))});
                }
            }
            std::vector<ObservableOp> tracks;
            std::vector<std::string> track_names;
            if (st.has("observable")) {
                for (const auto& name : confdetail::split(st.opt("observable"), ',')) {
                    tracks.push_back(need_obs(confdetail::trim(name)));
                    track_names.push_back(confdetail::trim(name));
                }
            }
            out.push_back(std::make_unique<RhoPipeline>(
                std::move(rho0), std::move(probes),
                confdetail::parse_long_list(st.opt("times", "0"), "rho times"), std::move(tracks),
                std::move(track_names), cfg.blocks));
        } else {
            throw InvalidArgument("config: unknown statistic '" + st.kind + "'");
        }
    }
    return out;
}

// Full validation: structural checks plus a dry resolution of every
// statistic. Returns all problems found.
inline std::vector<std::string> validate_config(const RunConfig& cfg) {
    std::vector<std::string> errors;
    if (cfg.mode != "cue" && cfg.mode != "circuit")
        errors.push_back("mode must be 'cue' or 'circuit'");
    if (cfg.ensemble_size < 1) errors.push_back("ensemble_size must be >= 1");
    if (cfg.blocks < 1) errors.push_back("blocks must be >= 1");
    if (cfg.ensemble_size < 2L * cfg.blocks)
        errors.push_back("ensemble_size must be at least twice the jackknife block count");
    if (cfg.statistics.empty()) errors.push_back("no statistics requested");
    if (cfg.mode == "cue" && cfg.n < 2) errors.push_back("cue mode needs n >= 2");
    if (cfg.mode == "circuit") {
        if (cfg.dims.empty()) {
            errors.push_back("circuit mode needs dims");
        } else {
            try {
                const CircuitSpec spec = to_circuit_spec(cfg);
                for (const auto& issue : validate_spec(spec))
                    if (issue.severity == SpecIssue::Severity::error) errors.push_back(issue.message);
            } catch (const std::exception& e) {
                errors.push_back(e.what());
            }
        }
    }
    if (errors.empty()) {
        try {
            const EnsembleSource src = make_source(cfg);
            (void)make_pipelines(cfg, src.dim());
        } catch (const std::exception& e) {
            errors.push_back(e.what());
        }
    }
    return errors;
}

// --- run outputs ------------------------------------------------------------------

inline std::string sanitize_filename(const std::string& s) {
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

inline void write_report_csv(const std::string& path, const StatReport& rep) {
    CsvWriter csv(path);
    csv.header({"label", "grid", "measured", "error", "predicted", "z", "imag", "imag_error",
                "samples"});
    for (const auto& r : rep.rows) {
        csv.row({r.label, csv_number(r.grid), csv_number(r.measured), csv_number(r.error),
                 csv_number(r.predicted), csv_number(r.zscore()), csv_number(r.imag),
                 csv_number(r.imag_error), std::to_string(rep.samples)});
    }
}

struct RunSummary {
    bool passed = true;
    std::string text;
};

inline RunSummary summarize_run(const RunOutput& out, double global_gate) {
    RunSummary s;
    std::ostringstream os;
    os << "samples " << out.diagnostics.samples_done << ", failures "
       << out.diagnostics.failures << "\n";
    os << "max unitarity residual " << out.diagnostics.max_unitarity_residual
       << ", max eigendecomposition residual " << out.diagnostics.max_recon_residual
       << ", max trace-identity deviation " << out.diagnostics.max_trace_identity_dev << "\n";
    for (const auto& rep : out.reports) {
        double gate = global_gate;
        const double worst = rep.max_gated_z(global_gate, &gate);
        const bool ok = rep.passes(global_gate);
        os << (ok ? "OK   " : "FAIL ") << rep.name << ": max |z| = " << worst << " (gate " << gate
           << ", " << rep.rows.size() << " rows)";
        if (rep.max_identity_dev > 0.0) os << ", mean integral dev " << rep.max_identity_dev;
        os << "\n";
        s.passed = s.passed && ok;
    }
    s.text = os.str();
    return s;
}

inline RunSummary write_run_outputs(const std::string& out_dir, const RunOutput& out,
                                    double global_gate) {
    std::filesystem::create_directories(out_dir);
    for (const auto& rep : out.reports)
        write_report_csv(out_dir + "/" + sanitize_filename(rep.name) + ".csv", rep);
    RunSummary s = summarize_run(out, global_gate);
    std::ofstream sum(out_dir + "/summary.txt");
    sum << s.text;
    sum << (s.passed ? "RESULT: PASS\n" : "RESULT: FAIL\n");
    return s;
}

// saves per-sample binaries when requested
inline void persist_samples(const std::string& out_dir, const EnsembleSource& source, long count,
                            bool with_spectra) {
    std::filesystem::create_directories(out_dir + "/samples");
    for (long k = 0; k < count; ++k) {
        const UnitaryMatrix u = source(k);
        Container c;
        c.dim = static_cast<u64>(u.dim());
        c.op = u.mat();
        if (with_spectra) {
            const SpectralData sd = diagonalize(u);
            c.energies = sd.energies;
            c.vectors = sd.vectors;
        }
        write_container(out_dir + "/samples/sample_" + std::to_string(k) + ".flqb", c);
    }
}

}  // namespace floqlab
