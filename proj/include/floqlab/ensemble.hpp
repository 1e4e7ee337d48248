#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "floqlab/accum.hpp"
#include "floqlab/circuit.hpp"
#include "floqlab/haar.hpp"
#include "floqlab/report.hpp"
#include "floqlab/spectral.hpp"

namespace floqlab {

// Where samples come from: a circuit family or direct CUE draws. Sample k is
// a pure function of (seed, k).
struct EnsembleSource {
    std::optional<CircuitSpec> circuit;
    int cue_dim = 0;
    u64 seed = 0;

    static EnsembleSource cue(int dim, u64 seed) {
        EnsembleSource s;
        s.cue_dim = dim;
        s.seed = seed;
        return s;
    }

    static EnsembleSource from_circuit(CircuitSpec spec) {
        EnsembleSource s;
        s.seed = spec.master_seed;
        s.circuit = std::move(spec);
        return s;
    }

    int dim() const {
        return circuit ? static_cast<int>(circuit->hilbert_dim()) : cue_dim;
    }

    UnitaryMatrix operator()(long k) const {
        if (circuit) return build_floquet(*circuit, k);
        RngStream rng = RngStream::derived(seed, {0x637565ull, static_cast<u64>(k)});
        return sample_cue(cue_dim, rng);
    }
};

struct SamplePayload {
    const UnitaryMatrix& op;
    const SpectralData* spectral;  // null when no pipeline asked for it
    long index;

    const SpectralData& spec() const {
        if (!spectral) throw Error("SamplePayload: spectral data was not requested");
        return *spectral;
    }
};

class StatisticPipeline {
  public:
    virtual ~StatisticPipeline() = default;
    virtual std::string name() const = 0;
    virtual bool needs_spectral() const { return true; }
    virtual std::vector<BlockAccumulator> make_accumulators() const = 0;
    virtual void accumulate(const SamplePayload& payload, int block,
                            std::vector<BlockAccumulator>& accs) const = 0;
    virtual StatReport finalize(const std::vector<BlockAccumulator>& accs) const = 0;
};

struct RunOptions {
    long samples = 0;
    int blocks = 20;
    int workers = 0;  // 0: one per hardware thread, capped by block count
    bool check_identities = true;
    double unitarity_tol = 1e-10;
    double trace_identity_tol = 1e-10;
    double max_failure_rate = 0.01;
};

struct RunDiagnostics {
    long samples_done = 0;
    long failures = 0;
    double max_unitarity_residual = 0.0;
    double max_recon_residual = 0.0;
    double max_vtv_residual = 0.0;
    double max_trace_identity_dev = 0.0;
};

struct RunOutput {
    std::vector<StatReport> reports;
    RunDiagnostics diagnostics;
};

namespace detail {

// first sample index of a jackknife block (inverse of block_of_sample)
inline long block_first_sample(int block, long m, int blocks) {
    return (static_cast<long>(block) * m + blocks - 1) / blocks;
}

// |Tr U(t)|^2 computed through the eigenvector overlaps must match the
// quasienergy-only route; this ties the eigenbasis to the spectrum.
inline double trace_identity_dev(const SpectralData& sd, long t) {
    const MatrixXd p = sd.vectors.cwiseAbs2();
    cplx via_overlap(0.0, 0.0);
    cplx via_energy(0.0, 0.0);
    for (int nu = 0; nu < sd.dim; ++nu) {
        const cplx phase = std::polar(1.0, -sd.energies(nu) * static_cast<double>(t));
        via_energy += phase;
        via_overlap += p.col(nu).sum() * phase;
    }
    return std::abs(std::norm(via_overlap) - std::norm(via_energy));
}

}  // namespace detail

// Drives the ensemble: workers own contiguous block ranges, samples inside a
// block are processed in ascending order by one owner, and worker
// accumulators merge in ascending block order. Output is therefore
// bit-identical for any worker count.
template <typename Sampler>
RunOutput run_ensemble(const Sampler& sampler,
                       const std::vector<std::unique_ptr<StatisticPipeline>>& pipelines,
                       const RunOptions& opts) {
    if (opts.samples < 1) throw InvalidArgument("run_ensemble: need at least one sample");
    if (opts.blocks < 1) throw InvalidArgument("run_ensemble: need at least one block");

    bool any_spectral = false;
    for (const auto& p : pipelines) any_spectral |= p->needs_spectral();

    int workers = opts.workers;
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (workers > opts.blocks) workers = opts.blocks;
    if (workers > opts.samples) workers = static_cast<int>(opts.samples);

    struct WorkerState {
        std::vector<std::vector<BlockAccumulator>> accs;  // [pipeline][sub]
        RunDiagnostics diag;
        std::string error;
    };
    std::vector<WorkerState> states(workers);
    for (auto& st : states) {
        for (const auto& p : pipelines) {
            st.accs.push_back(p->make_accumulators());
            for (const auto& acc : st.accs.back())
                if (acc.blocks() != opts.blocks)
                    throw InvalidArgument("run_ensemble: pipeline '" + p->name() + "' uses " +
                                          std::to_string(acc.blocks()) + " jackknife blocks but " +
                                          "the run is configured for " +
                                          std::to_string(opts.blocks));
        }
    }

    auto work = [&](int w) {
        WorkerState& st = states[w];
        const int b_lo = static_cast<int>(static_cast<long>(w) * opts.blocks / workers);
        const int b_hi = static_cast<int>(static_cast<long>(w + 1) * opts.blocks / workers);
        const long k_lo = detail::block_first_sample(b_lo, opts.samples, opts.blocks);
        const long k_hi = detail::block_first_sample(b_hi, opts.samples, opts.blocks);
        try {
            for (long k = k_lo; k < k_hi; ++k) {
                const int block = block_of_sample(k, opts.samples, opts.blocks);
                try {
                    const UnitaryMatrix u = sampler(k);
                    if (opts.check_identities) {
                        const double res = unitarity_residual(u.mat());
                        st.diag.max_unitarity_residual =
                            std::max(st.diag.max_unitarity_residual, res);
                        if (res > opts.unitarity_tol)
                            throw SolverError("unitarity residual above tolerance", res);
                    }
                    std::optional<SpectralData> sd;
                    if (any_spectral) {
                        sd = diagonalize(u);
                        st.diag.max_recon_residual =
                            std::max(st.diag.max_recon_residual, sd->residual);
                        st.diag.max_vtv_residual =
                            std::max(st.diag.max_vtv_residual, sd->vtv_residual);
                        if (opts.check_identities) {
                            for (long t : {1L, static_cast<long>(u.dim())}) {
                                const double dev = detail::trace_identity_dev(*sd, t);
                                st.diag.max_trace_identity_dev =
                                    std::max(st.diag.max_trace_identity_dev, dev);
                                if (dev > opts.trace_identity_tol)
                                    throw SolverError("trace identity violated", dev);
                            }
                        }
                    }
                    const SamplePayload payload{u, sd ? &*sd : nullptr, k};
                    for (size_t p = 0; p < pipelines.size(); ++p)
                        pipelines[p]->accumulate(payload, block, st.accs[p]);
                    ++st.diag.samples_done;
                } catch (const SolverError&) {
                    ++st.diag.failures;
                }
            }
        } catch (const std::exception& e) {
            st.error = e.what();
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
        for (auto& t : threads) t.join();
    }

    RunOutput out;
    for (const auto& st : states) {
        if (!st.error.empty()) throw Error("run_ensemble worker failed: " + st.error);
        out.diagnostics.samples_done += st.diag.samples_done;
        out.diagnostics.failures += st.diag.failures;
        out.diagnostics.max_unitarity_residual =
            std::max(out.diagnostics.max_unitarity_residual, st.diag.max_unitarity_residual);
        out.diagnostics.max_recon_residual =
            std::max(out.diagnostics.max_recon_residual, st.diag.max_recon_residual);
        out.diagnostics.max_vtv_residual =
            std::max(out.diagnostics.max_vtv_residual, st.diag.max_vtv_residual);
        out.diagnostics.max_trace_identity_dev =
            std::max(out.diagnostics.max_trace_identity_dev, st.diag.max_trace_identity_dev);
    }
    const double failure_rate =
        static_cast<double>(out.diagnostics.failures) / static_cast<double>(opts.samples);
    if (out.diagnostics.failures > 0 && failure_rate > opts.max_failure_rate)
        throw Error("run_ensemble: " + std::to_string(out.diagnostics.failures) + " of " +
                    std::to_string(opts.samples) + " samples failed validation (rate " +
                    std::to_string(failure_rate) + " above " +
                    std::to_string(opts.max_failure_rate) + ")");

    // merge in ascending worker (= block-range) order
    std::vector<std::vector<BlockAccumulator>> merged = std::move(states[0].accs);
    for (int w = 1; w < workers; ++w)
        for (size_t p = 0; p < pipelines.size(); ++p)
            for (size_t s = 0; s < merged[p].size(); ++s) merged[p][s].merge(states[w].accs[p][s]);

    for (size_t p = 0; p < pipelines.size(); ++p)
        out.reports.push_back(pipelines[p]->finalize(merged[p]));
    return out;
}

}  // namespace floqlab
