#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "floqlab/eigencorr.hpp"
#include "floqlab/ensemble.hpp"
#include "floqlab/eth.hpp"
#include "floqlab/rmt.hpp"

namespace floqlab {

// Concrete statistic pipelines. Each knows its estimator, its closed-form
// prediction, and how to lay both out as report rows. Predictions are always
// the CUE forms; for circuit sources that comparison is the point.

class SffPipeline final : public StatisticPipeline {
  public:
    SffPipeline(int dim, int t_max, int blocks) : dim_(dim), t_max_(t_max), blocks_(blocks) {
        if (t_max < 1) throw InvalidArgument("sff: t_max must be >= 1");
    }

    std::string name() const override { return "sff"; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {BlockAccumulator("sff", t_max_ + 1, 1, blocks_)};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        const VectorXd k = sff_sample(payload.spec(), t_max_);
        for (int t = 0; t <= t_max_; ++t) accs[0].add(block, t, 0, k(t));
        accs[0].count_sample(block);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        StatReport rep;
        rep.name = name();
        rep.samples = accs[0].samples();
        for (int t = 0; t <= t_max_; ++t) {
            const JackknifeValue v = jackknife_mean(accs[0], t);
            StatRow row;
            row.grid = t;
            row.measured = v.value;
            row.error = v.error;
            row.predicted = sff_cue(t, dim_);
            rep.rows.push_back(row);
        }
        return rep;
    }

  private:
    int dim_, t_max_, blocks_;
};

class R2Pipeline final : public StatisticPipeline {
  public:
    R2Pipeline(int dim, OmegaGrid grid, int blocks) : dim_(dim), grid_(grid), blocks_(blocks) {}

    std::string name() const override { return "r2"; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {BlockAccumulator("r2", grid_.bins, 1, blocks_)};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        const SpectralData& sd = payload.spec();
        if (grid_.mode == OmegaGrid::Mode::histogram) {
            const VectorXd h = r2_sample(sd, grid_);
            for (int b = 0; b < grid_.bins; ++b) accs[0].add(block, b, 0, h(b));
        } else {
            const VectorXd k = sff_sample(sd, grid_.t_max);
            for (int b = 0; b < grid_.bins; ++b) {
                const double w = grid_.center(b);
                double s = k(0);
                for (int t = 1; t <= grid_.t_max; ++t)
                    s += 2.0 * std::exp(-grid_.eta * t) * std::cos(w * t) * k(t);
                accs[0].add(block, b, 0, s / kTwoPi);
            }
        }
        accs[0].count_sample(block);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        StatReport rep;
        rep.name = name();
        rep.samples = accs[0].samples();
        for (int b = 0; b < grid_.bins; ++b) {
            const JackknifeValue v = jackknife_mean(accs[0], b);
            StatRow row;
            row.grid = grid_.center(b);
            row.measured = v.value;
            row.error = v.error;
            if (grid_.mode == OmegaGrid::Mode::histogram) {
                row.predicted = r2_cue_smooth_binavg(grid_.lower_edge(b), grid_.upper_edge(b), dim_);
                if (b == grid_.center_index())
                    row.predicted += r2_cue_delta_mass(dim_) / grid_.width();
            } else {
                row.predicted = r2_smoothed_eta(row.grid, dim_, grid_.eta);
            }
            rep.rows.push_back(row);
        }
        return rep;
    }

  private:
    int dim_;
    OmegaGrid grid_;
    int blocks_;
};

class PsffPipeline final : public StatisticPipeline {
  public:
    PsffPipeline(SubsystemSplit split, int t_max, int blocks)
        : split_(std::move(split)), t_max_(t_max), blocks_(blocks) {
        if (t_max < 1) throw InvalidArgument("psff: t_max must be >= 1");
    }

    std::string name() const override { return "psff"; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {BlockAccumulator("psff", t_max_ + 1, 1, blocks_)};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        const VectorXd k = psff_sample(payload.spec(), split_, t_max_);
        for (int t = 0; t <= t_max_; ++t) accs[0].add(block, t, 0, k(t));
        accs[0].count_sample(block);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        StatReport rep;
        rep.name = name();
        rep.samples = accs[0].samples();
        for (int t = 0; t <= t_max_; ++t) {
            const JackknifeValue v = jackknife_mean(accs[0], t);
            StatRow row;
            row.grid = t;
            row.measured = v.value;
            row.error = v.error;
            row.predicted = psff_rmt(t, split_.dim(), split_.dim_a(), Variant::exact);
            rep.rows.push_back(row);
        }
        return rep;
    }

  private:
    SubsystemSplit split_;
    int t_max_, blocks_;
};

// Per-entry second moment <|U_ij|^2> against 1/N, with a
// multiplicity-adjusted gate over the N^2 simultaneous comparisons.
class EntryMoment2Pipeline final : public StatisticPipeline {
  public:
    EntryMoment2Pipeline(int dim, int blocks, double base_gate = 4.0)
        : dim_(dim), blocks_(blocks), base_gate_(base_gate) {}

    std::string name() const override { return "entry_moment2"; }
    bool needs_spectral() const override { return false; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {BlockAccumulator("entry_moment2", dim_ * dim_, 1, blocks_)};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        const MatrixXd p = payload.op.mat().cwiseAbs2();
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) accs[0].add(block, i * dim_ + j, 0, p(i, j));
        accs[0].count_sample(block);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        StatReport rep;
        rep.name = name();
        rep.samples = accs[0].samples();
        const double gate = bonferroni_gate(base_gate_, static_cast<long>(dim_) * dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) {
                const JackknifeValue v = jackknife_mean(accs[0], i * dim_ + j);
                StatRow row;
                row.label = std::to_string(i) + "," + std::to_string(j);
                row.grid = i * dim_ + j;
                row.measured = v.value;
                row.error = v.error;
                row.predicted = 1.0 / dim_;
                row.gate_z = gate;
                rep.rows.push_back(row);
            }
        return rep;
    }

  private:
    int dim_, blocks_;
    double base_gate_;
};

class CorrTimePipeline final : public StatisticPipeline {
  public:
    CorrTimePipeline(int dim, ProbeSpec probe, std::vector<long> ts, int blocks,
                     std::string label = "")
        : dim_(dim),
          est_(std::move(probe), std::move(ts), blocks),
          label_(label.empty() ? est_.probe().id() : std::move(label)) {
        est_.probe().check_indices(dim);
    }

    std::string name() const override { return "corr_time." + label_; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {est_.make_accumulator()};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        est_.accumulate(payload.spec(), block, accs[0]);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        const CorrEstimate est = est_.finalize(accs[0]);
        const CorrCoeffs wts = probe_delta_weights(est_.probe(), dim_);
        StatReport rep;
        rep.name = name();
        rep.samples = est.samples;
        for (size_t k = 0; k < est.grid.size(); ++k) {
            const CorrCoeffs c =
                corr_coeffs_time(static_cast<long>(est.grid[k]), dim_, Variant::exact);
            StatRow row;
            row.grid = est.grid[k];
            row.measured = est.re[k].value;
            row.error = est.re[k].error;
            if (!est.tuple_err.empty())
                row.error = std::sqrt(row.error * row.error + est.tuple_err[k] * est.tuple_err[k]);
            row.predicted = wts.c1 * c.c1 + wts.c2 * c.c2;
            row.has_imag = true;
            row.imag = est.im[k].value;
            row.imag_error = est.im[k].error;
            row.imag_predicted = 0.0;
            rep.rows.push_back(row);
        }
        return rep;
    }

    static CorrCoeffs probe_delta_weights(const ProbeSpec& probe, int dim) {
        if (probe.fast_path) return category_weights(probe.category, dim);
        CorrCoeffs w;
        for (const auto& t : probe.tuples) {
            if (t[0] == t[1] && t[2] == t[3]) w.c1 += 1.0;
            if (t[0] == t[3] && t[1] == t[2]) w.c2 += 1.0;
        }
        w.c1 /= static_cast<double>(probe.tuples.size());
        w.c2 /= static_cast<double>(probe.tuples.size());
        return w;
    }

  private:
    int dim_;
    CorrTimeEstimator est_;
    std::string label_;
};

class CorrFreqPipeline final : public StatisticPipeline {
  public:
    CorrFreqPipeline(int dim, ProbeSpec probe, OmegaGrid grid, int blocks, std::string label = "")
        : dim_(dim),
          est_(std::move(probe), grid, blocks),
          label_(label.empty() ? est_.probe().id() : std::move(label)) {
        est_.probe().check_indices(dim);
    }

    std::string name() const override { return "corr_freq." + label_; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {est_.make_accumulator()};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        est_.accumulate(payload.spec(), block, accs[0]);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        const CorrEstimate est = est_.finalize(accs[0]);
        const CorrCoeffs wts = CorrTimePipeline::probe_delta_weights(est_.probe(), dim_);
        const OmegaGrid& grid = est_.grid();
        StatReport rep;
        rep.name = name();
        rep.samples = est.samples;
        rep.max_identity_dev = est.max_integral_dev;
        for (int b = 0; b < grid.bins; ++b) {
            StatRow row;
            row.grid = grid.center(b);
            row.measured = est.re[b].value;
            row.error = est.re[b].error;
            row.has_imag = true;
            row.imag = est.im[b].value;
            row.imag_error = est.im[b].error;
            if (grid.mode == OmegaGrid::Mode::histogram) {
                const CorrCoeffs c = corr_coeffs_freq_smooth_binavg(
                    grid.lower_edge(b), grid.upper_edge(b), dim_, Variant::exact);
                row.predicted = wts.c1 * c.c1 + wts.c2 * c.c2;
            } else {
                const double r2 = r2_smoothed_eta(row.grid, dim_, grid.eta);
                const double nn = dim_;
                const CorrCoeffs mass = corr_explicit_delta_mass(dim_);
                row.predicted =
                    wts.c1 * (r2 / (nn * nn - 1.0)) + wts.c2 * (-r2 / (nn * (nn * nn - 1.0))) +
                    (wts.c1 * mass.c1 + wts.c2 * mass.c2) * lorentzian_periodic(row.grid, grid.eta);
            }
            rep.rows.push_back(row);
        }
        if (grid.mode == OmegaGrid::Mode::histogram) {
            const CorrCoeffs mass = corr_delta_mass(dim_, Variant::exact);
            StatRow drow;
            drow.label = "delta";
            drow.grid = 0.0;
            drow.measured = est.delta_re.value;
            drow.error = est.delta_re.error;
            drow.predicted = wts.c1 * mass.c1 + wts.c2 * mass.c2;
            drow.has_imag = true;
            drow.imag = est.delta_im.value;
            drow.imag_error = est.delta_im.error;
            rep.rows.push_back(drow);
        }
        return rep;
    }

  private:
    int dim_;
    CorrFreqEstimator est_;
    std::string label_;
};

class EthPipeline final : public StatisticPipeline {
  public:
    EthPipeline(ObservableOp op, OmegaGrid grid, int blocks)
        : est_(std::move(op), grid, blocks) {}

    std::string name() const override { return "eth"; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {est_.make_accumulator()};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        est_.accumulate(payload.spec(), block, accs[0]);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        const EthEstimate est = est_.finalize(accs[0]);
        const ObservableOp& op = est_.observable();
        const int n = op.dim();
        const EthPrediction pred = eth_rmt_prediction(op.trace(), op.trace_sq(), n);
        StatReport rep;
        rep.name = name();
        rep.samples = est.samples;
        for (size_t b = 0; b < est.grid.size(); ++b) {
            StatRow row;
            row.label = "offdiag_second";
            row.grid = est.grid[b];
            row.measured = est.offdiag_second[b].value;
            row.error = est.offdiag_second[b].error;
            row.predicted = pred.offdiag_second;
            rep.rows.push_back(row);

            StatRow frow;
            frow.label = "f_envelope";
            frow.grid = est.grid[b];
            frow.measured = est.f_envelope[b].value;
            frow.error = est.f_envelope[b].error;
            frow.predicted = pred.f_envelope;
            rep.rows.push_back(frow);
        }
        auto scalar = [&](const char* label, const JackknifeValue& v, double predicted,
                          bool gated = true) {
            StatRow row;
            row.label = label;
            row.measured = v.value;
            row.error = v.error;
            row.predicted = predicted;
            row.gated = gated;
            rep.rows.push_back(row);
        };
        scalar("pooled_offdiag", est.pooled_offdiag, pred.offdiag_second);
        scalar("diag_mean", est.diag_mean, pred.diag_mean);
        scalar("diag_second", est.diag_second, pred.diag_second);
        scalar("diag_var", est.diag_var, pred.diag_second - pred.diag_mean * pred.diag_mean);
        // distributional diagnostics are reported, not asserted
        scalar("kurtosis_re", est.kurt_re, 0.0, false);
        scalar("kurtosis_im", est.kurt_im, 0.0, false);
        scalar("neighbor_corr", est.neighbor_corr, 0.0, false);
        return rep;
    }

  private:
    EthEstimator est_;
};

class OpCorrPipeline final : public StatisticPipeline {
  public:
    OpCorrPipeline(ObservableOp a, ObservableOp b, std::vector<long> ts, int blocks)
        : est_(std::move(a), std::move(b), std::move(ts), blocks) {}

    OpCorrPipeline(ObservableOp a, ObservableOp b, OmegaGrid grid, int blocks)
        : est_(std::move(a), std::move(b), grid, blocks) {}

    std::string name() const override {
        return est_.frequency_domain() ? "opcorr_freq" : "opcorr_time";
    }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {est_.make_accumulator()};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        est_.accumulate(payload.spec(), block, accs[0]);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        const OpCorrEstimator::Estimate est = est_.finalize(accs[0]);
        const int n = est_.op_a().dim();
        const double tr_ab = (est_.op_a().mat() * est_.op_b().mat()).trace().real();
        const double tr_a = est_.op_a().trace(), tr_b = est_.op_b().trace();
        StatReport rep;
        rep.name = name();
        rep.samples = est.samples;
        rep.max_identity_dev = est.max_integral_dev;
        if (est_.frequency_domain()) {
            const OpCorrPrediction pred = opcorr_rmt(tr_ab, tr_a, tr_b, n, Variant::exact);
            const OmegaGrid& grid = est_.grid();
            for (int b = 0; b < grid.bins; ++b) {
                StatRow row;
                row.grid = grid.center(b);
                row.measured = est.re[b].value;
                row.error = est.re[b].error;
                row.predicted =
                    pred.r2_coeff *
                    r2_cue_smooth_binavg(grid.lower_edge(b), grid.upper_edge(b), n);
                row.has_imag = true;
                row.imag = est.im[b].value;
                row.imag_error = est.im[b].error;
                rep.rows.push_back(row);
            }
            StatRow drow;
            drow.label = "delta";
            drow.measured = est.delta_re.value;
            drow.error = est.delta_re.error;
            drow.predicted = pred.delta_mass;
            drow.has_imag = true;
            drow.imag = est.delta_im.value;
            drow.imag_error = est.delta_im.error;
            rep.rows.push_back(drow);
        } else {
            for (size_t k = 0; k < est.grid.size(); ++k) {
                StatRow row;
                row.grid = est.grid[k];
                row.measured = est.re[k].value;
                row.error = est.re[k].error;
                row.predicted =
                    opcorr_rmt_time(static_cast<long>(est.grid[k]), tr_ab, tr_a, tr_b, n);
                row.has_imag = true;
                row.imag = est.im[k].value;
                row.imag_error = est.im[k].error;
                rep.rows.push_back(row);
            }
        }
        return rep;
    }

  private:
    OpCorrEstimator est_;
};

class RhoPipeline final : public StatisticPipeline {
  public:
    RhoPipeline(DensityMatrix rho0, std::vector<RhoProbe> probes, std::vector<long> ts,
                std::vector<ObservableOp> tracks, std::vector<std::string> track_names, int blocks)
        : est_(std::move(rho0), std::move(probes), std::move(ts), std::move(tracks), blocks),
          track_names_(std::move(track_names)) {}

    std::string name() const override { return "rho"; }

    std::vector<BlockAccumulator> make_accumulators() const override {
        return {est_.make_accumulator()};
    }

    void accumulate(const SamplePayload& payload, int block,
                    std::vector<BlockAccumulator>& accs) const override {
        est_.accumulate(payload.spec(), block, accs[0]);
    }

    StatReport finalize(const std::vector<BlockAccumulator>& accs) const override {
        const RhoEstimator::Estimate est = est_.finalize(accs[0]);
        const int n = est_.rho0().dim();
        StatReport rep;
        rep.name = name();
        rep.samples = est.samples;
        for (size_t p = 0; p < est_.probes().size(); ++p) {
            const RhoProbe pr = est_.probes()[p];
            const cplx rho0 = est_.rho0().mat()(pr.row, pr.col);
            for (size_t k = 0; k < est.ts.size(); ++k) {
                const cplx pred = rho_rmt_entry(rho0, pr.row == pr.col, est.ts[k], n);
                StatRow row;
                row.label = "rho_" + std::to_string(pr.row) + "_" + std::to_string(pr.col);
                row.grid = static_cast<double>(est.ts[k]);
                row.measured = est.entries_re[p][k].value;
                row.error = est.entries_re[p][k].error;
                row.predicted = pred.real();
                row.has_imag = true;
                row.imag = est.entries_im[p][k].value;
                row.imag_error = est.entries_im[p][k].error;
                row.imag_predicted = pred.imag();
                rep.rows.push_back(row);
            }
        }
        for (size_t o = 0; o < est_.tracks().size(); ++o) {
            const ObservableOp& op = est_.tracks()[o];
            const double tr_orho = (op.mat() * est_.rho0().mat()).trace().real();
            for (size_t k = 0; k < est.ts.size(); ++k) {
                StatRow row;
                row.label = "track_" + track_names_[o];
                row.grid = static_cast<double>(est.ts[k]);
                row.measured = est.track_re[o][k].value;
                row.error = est.track_re[o][k].error;
                row.predicted = rho_rmt_expectation(op.trace(), tr_orho, est.ts[k], n);
                row.has_imag = true;
                row.imag = est.track_im[o][k].value;
                row.imag_error = est.track_im[o][k].error;
                rep.rows.push_back(row);
            }
        }
        return rep;
    }

  private:
    RhoEstimator est_;
    std::vector<std::string> track_names_;
};

}  // namespace floqlab
