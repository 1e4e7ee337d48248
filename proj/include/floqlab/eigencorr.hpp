#pragma once

#include <array>
#include <string>
#include <vector>

#include "floqlab/accum.hpp"
#include "floqlab/common.hpp"
#include "floqlab/rmt.hpp"
#include "floqlab/rng.hpp"
#include "floqlab/spectral.hpp"

namespace floqlab {

// Which tuples (n, n', m', m) an estimate averages over: a whole index
// category (subsampled uniformly once the category outgrows the budget) or
// an explicit tuple list.
struct ProbeSpec {
    enum class Kind { category, tuples };

    Kind kind = Kind::category;
    TupleCategory category = TupleCategory::cat1_offdiag;
    std::vector<std::array<int, 4>> tuples;
    bool subsampled = false;
    bool fast_path = false;  // exhaustive category average via closed-form sums

    static ProbeSpec for_category(TupleCategory cat, int dim, long budget, u64 tuple_seed) {
        ProbeSpec p;
        p.kind = Kind::category;
        p.category = cat;
        const double size = category_tuple_count(cat, dim);
        if (size <= static_cast<double>(budget)) {
            if (cat == TupleCategory::cat3) {
                for (int n = 0; n < dim; ++n)
                    for (int np = 0; np < dim; ++np)
                        for (int mp = 0; mp < dim; ++mp)
                            for (int m = 0; m < dim; ++m)
                                if (classify_tuple(n, np, mp, m) == TupleCategory::cat3)
                                    p.tuples.push_back({n, np, mp, m});
            } else {
                p.fast_path = true;
            }
        } else if (cat == TupleCategory::cat3) {
            RngStream rng = RngStream::derived(tuple_seed, {0x74757031ull});
            while (static_cast<long>(p.tuples.size()) < budget) {
                const int n = static_cast<int>(rng.next_u64() % dim);
                const int np = static_cast<int>(rng.next_u64() % dim);
                const int mp = static_cast<int>(rng.next_u64() % dim);
                const int m = static_cast<int>(rng.next_u64() % dim);
                if (classify_tuple(n, np, mp, m) == TupleCategory::cat3)
                    p.tuples.push_back({n, np, mp, m});
            }
            p.subsampled = true;
        } else {
            RngStream rng = RngStream::derived(tuple_seed, {0x74757032ull});
            while (static_cast<long>(p.tuples.size()) < budget) {
                const int n = static_cast<int>(rng.next_u64() % dim);
                int m = static_cast<int>(rng.next_u64() % (dim - 1));
                if (m >= n) ++m;  // distinct second index
                switch (cat) {
                    case TupleCategory::cat1_offdiag: p.tuples.push_back({n, n, m, m}); break;
                    case TupleCategory::cat2: p.tuples.push_back({n, m, m, n}); break;
                    case TupleCategory::cat1_diag: p.tuples.push_back({n, n, n, n}); break;
                    case TupleCategory::cat1: {
                        // mixed category: second index drawn independently, equality allowed
                        const int mm = static_cast<int>(rng.next_u64() % dim);
                        p.tuples.push_back({n, n, mm, mm});
                        break;
                    }
                    default: break;
                }
            }
            p.subsampled = true;
        }
        return p;
    }

    static ProbeSpec explicit_tuples(std::vector<std::array<int, 4>> list) {
        if (list.empty()) throw InvalidArgument("ProbeSpec: empty tuple list");
        ProbeSpec p;
        p.kind = Kind::tuples;
        p.tuples = std::move(list);
        return p;
    }

    void check_indices(int dim) const {
        for (const auto& t : tuples)
            for (int k : t)
                if (k < 0 || k >= dim) throw InvalidArgument("ProbeSpec: tuple index out of range");
    }

    long effective_tuple_count(int dim) const {
        if (fast_path) return static_cast<long>(category_tuple_count(category, dim));
        return static_cast<long>(tuples.size());
    }

    // average over the probe of delta_{nn'} delta_{mm'}: the exact value of
    // the full-period integral of C(omega), per sample
    double integral_target(int dim) const {
        if (fast_path) {
            switch (category) {
                case TupleCategory::cat1:
                case TupleCategory::cat1_offdiag:
                case TupleCategory::cat1_diag: return 1.0;
                default: return 0.0;
            }
        }
        double s = 0.0;
        for (const auto& t : tuples)
            if (t[0] == t[1] && t[2] == t[3]) s += 1.0;
        return s / static_cast<double>(tuples.size());
    }

    std::string id() const {
        if (kind == Kind::category)
            return std::string("category:") + category_name(category) +
                   (subsampled ? ":sub" + std::to_string(tuples.size()) : "");
        std::string s = "tuples:";
        for (const auto& t : tuples)
            s += std::to_string(t[0]) + "," + std::to_string(t[1]) + "," + std::to_string(t[2]) +
                 "," + std::to_string(t[3]) + ";";
        return s;
    }
};

namespace detail {

// phase matrix phi(nu, k) = e^{-i E_nu t_k}
inline MatrixXcd phase_matrix(const SpectralData& sd, const std::vector<long>& ts) {
    MatrixXcd phi(sd.dim, ts.size());
    for (size_t k = 0; k < ts.size(); ++k)
        for (int nu = 0; nu < sd.dim; ++nu)
            phi(nu, k) = std::polar(1.0, -sd.energies(nu) * static_cast<double>(ts[k]));
    return phi;
}

inline MatrixXd overlap_probabilities(const SpectralData& sd) { return sd.vectors.cwiseAbs2(); }

}  // namespace detail

// C value at the requested times for a single tuple and a single sample:
// (sum_nu a_nu e^{-i E_nu t}) (sum_mu b_mu e^{+i E_mu t}) with
// a_nu = <n|nu><nu|n'> and b_mu = <mu|m><m'|mu>.
inline VectorXcd corr_tuple_time_sample(const SpectralData& sd, const std::array<int, 4>& tuple,
                                        const std::vector<long>& ts) {
    const auto [n, np, mp, m] = tuple;
    const MatrixXcd phi = detail::phase_matrix(sd, ts);
    VectorXcd a(sd.dim), b(sd.dim);
    for (int nu = 0; nu < sd.dim; ++nu) {
        a(nu) = sd.vectors(n, nu) * std::conj(sd.vectors(np, nu));
        b(nu) = std::conj(sd.vectors(m, nu)) * sd.vectors(mp, nu);
    }
    VectorXcd out(ts.size());
    const VectorXcd at = phi.transpose() * a;  // sum_nu a_nu e^{-i E_nu t}
    const VectorXcd bt = phi.adjoint() * b;    // sum_mu b_mu e^{+i E_mu t}
    for (size_t k = 0; k < ts.size(); ++k) out(k) = at(k) * bt(k);
    return out;
}

// Pair-weight matrix w(nu, mu) for a probe, so that the sample's
// probe-averaged C(omega) is the histogram of w over wrapped energy
// differences. Closed forms cover the categories built on the two delta
// structures; tuple probes sum outer products a b^T.
inline MatrixXcd corr_pair_weights(const SpectralData& sd, const ProbeSpec& probe) {
    const int n = sd.dim;
    if (probe.fast_path) {
        const MatrixXd p = detail::overlap_probabilities(sd);
        const MatrixXd g = p.transpose() * p;
        MatrixXd w;
        switch (probe.category) {
            case TupleCategory::cat1:
                w = MatrixXd::Constant(n, n, 1.0 / (static_cast<double>(n) * n));
                break;
            case TupleCategory::cat1_offdiag:
                w = (MatrixXd::Ones(n, n) - g) / (static_cast<double>(n) * (n - 1.0));
                break;
            case TupleCategory::cat1_diag:
                w = g / static_cast<double>(n);
                break;
            case TupleCategory::cat2:
                w = (MatrixXd::Identity(n, n) - g) / (static_cast<double>(n) * (n - 1.0));
                break;
            default:
                throw InvalidArgument("corr_pair_weights: category has no closed-form path");
        }
        return w.cast<cplx>();
    }
    MatrixXcd w = MatrixXcd::Zero(n, n);
    VectorXcd a(n), b(n);
    for (const auto& t : probe.tuples) {
        const auto [tn, tnp, tmp, tm] = t;
        for (int nu = 0; nu < n; ++nu) {
            a(nu) = sd.vectors(tn, nu) * std::conj(sd.vectors(tnp, nu));
            b(nu) = std::conj(sd.vectors(tm, nu)) * sd.vectors(tmp, nu);
        }
        w.noalias() += a * b.transpose();
    }
    return w / static_cast<double>(probe.tuples.size());
}

// Probe-averaged time series for one sample.
inline VectorXcd corr_time_sample(const SpectralData& sd, const ProbeSpec& probe,
                                  const std::vector<long>& ts) {
    const int n = sd.dim;
    if (probe.fast_path) {
        const MatrixXcd phi = detail::phase_matrix(sd, ts);
        const MatrixXd p = detail::overlap_probabilities(sd);
        // diag(U(t)) for every t: D = P * phi
        const MatrixXcd diag_t = p * phi;
        VectorXcd out(ts.size());
        for (size_t k = 0; k < ts.size(); ++k) {
            const cplx tr = diag_t.col(k).sum();
            const double abs2_tr = std::norm(tr);
            const double s = diag_t.col(k).cwiseAbs2().sum();
            switch (probe.category) {
                case TupleCategory::cat1:
                    out(k) = abs2_tr / (static_cast<double>(n) * n);
                    break;
                case TupleCategory::cat1_offdiag:
                    out(k) = (abs2_tr - s) / (static_cast<double>(n) * (n - 1.0));
                    break;
                case TupleCategory::cat1_diag:
                    out(k) = s / static_cast<double>(n);
                    break;
                case TupleCategory::cat2:
                    out(k) = (n - s) / (static_cast<double>(n) * (n - 1.0));
                    break;
                default:
                    throw InvalidArgument("corr_time_sample: category has no closed-form path");
            }
        }
        return out;
    }
    VectorXcd out = VectorXcd::Zero(ts.size());
    for (const auto& t : probe.tuples) out += corr_tuple_time_sample(sd, t, ts);
    return out / static_cast<double>(probe.tuples.size());
}

struct CorrFreqSample {
    VectorXcd bins;       // histogram of nu != mu pair weights, per unit omega
    cplx delta_weight;    // exact sum of nu == mu contributions
    double integral_dev;  // |binned integral + delta - completeness target|
};

inline CorrFreqSample corr_freq_sample(const SpectralData& sd, const ProbeSpec& probe,
                                       const OmegaGrid& grid) {
    const MatrixXcd w = corr_pair_weights(sd, probe);
    const int n = sd.dim;
    CorrFreqSample out;
    out.bins = VectorXcd::Zero(grid.bins);
    cplx total(0.0, 0.0);
    for (int nu = 0; nu < n; ++nu)
        for (int mu = 0; mu < n; ++mu) {
            total += w(nu, mu);
            if (nu == mu) continue;
            out.bins(grid.bin_of(sd.energies(nu) - sd.energies(mu))) += w(nu, mu);
        }
    out.delta_weight = w.diagonal().sum();
    out.integral_dev = std::abs(total - cplx(probe.integral_target(n), 0.0));
    out.bins /= grid.width();
    return out;
}

// eta-smoothed frequency estimate from the truncated time series.
inline VectorXcd corr_freq_sample_lorentzian(const SpectralData& sd, const ProbeSpec& probe,
                                             const OmegaGrid& grid) {
    std::vector<long> ts;
    for (long t = -grid.t_max; t <= grid.t_max; ++t) ts.push_back(t);
    const VectorXcd series = corr_time_sample(sd, probe, ts);
    VectorXcd out = VectorXcd::Zero(grid.bins);
    for (int b = 0; b < grid.bins; ++b) {
        const double omega = grid.center(b);
        cplx s(0.0, 0.0);
        for (size_t k = 0; k < ts.size(); ++k) {
            const double t = static_cast<double>(ts[k]);
            s += series(k) * std::polar(std::exp(-grid.eta * std::abs(t)), omega * t);
        }
        out(b) = s / kTwoPi;
    }
    return out;
}

// --- ensemble-level estimates -------------------------------------------------

struct CorrEstimate {
    std::string probe_id;
    std::string domain;  // "time" or "freq"
    std::vector<double> grid;
    std::vector<JackknifeValue> re, im;
    JackknifeValue delta_re, delta_im;   // freq histogram only
    std::vector<double> tuple_err;       // extra spread error when the probe is subsampled
    double max_integral_dev = 0.0;
    long samples = 0;

    double combined_error(size_t k) const {
        const double jk2 = re[k].error * re[k].error + im[k].error * im[k].error;
        const double tu = tuple_err.empty() ? 0.0 : tuple_err[k];
        return std::sqrt(jk2 + tu * tu);
    }
};

class CorrTimeEstimator {
  public:
    CorrTimeEstimator(ProbeSpec probe, std::vector<long> ts, int blocks)
        : probe_(std::move(probe)), ts_(std::move(ts)), blocks_(blocks) {}

    const ProbeSpec& probe() const { return probe_; }
    const std::vector<long>& times() const { return ts_; }

    // channels: re, im, and for subsampled probes the cross-tuple second
    // moment, from which a (conservative) tuple-sampling error is derived
    BlockAccumulator make_accumulator() const {
        return BlockAccumulator("corr_time:" + probe_.id(),
                                static_cast<int>(ts_.size()), 3, blocks_);
    }

    void accumulate(const SpectralData& sd, int block, BlockAccumulator& acc) const {
        if (probe_.subsampled) {
            VectorXcd sum = VectorXcd::Zero(ts_.size());
            VectorXd sumsq = VectorXd::Zero(ts_.size());
            for (const auto& t : probe_.tuples) {
                const VectorXcd v = corr_tuple_time_sample(sd, t, ts_);
                sum += v;
                sumsq += v.cwiseAbs2();
            }
            const double nt = static_cast<double>(probe_.tuples.size());
            for (size_t k = 0; k < ts_.size(); ++k) {
                acc.add(block, static_cast<int>(k), 0, sum(k).real() / nt);
                acc.add(block, static_cast<int>(k), 1, sum(k).imag() / nt);
                acc.add(block, static_cast<int>(k), 2, sumsq(k) / nt);
            }
        } else {
            const VectorXcd v = corr_time_sample(sd, probe_, ts_);
            for (int k = 0; k < v.size(); ++k) {
                acc.add(block, k, 0, v(k).real());
                acc.add(block, k, 1, v(k).imag());
            }
        }
        acc.count_sample(block);
    }

    CorrEstimate finalize(const BlockAccumulator& acc) const {
        CorrEstimate est;
        est.probe_id = probe_.id();
        est.domain = "time";
        est.samples = acc.samples();
        const double m = static_cast<double>(std::max<long>(1, acc.samples()));
        for (size_t k = 0; k < ts_.size(); ++k) {
            est.grid.push_back(static_cast<double>(ts_[k]));
            est.re.push_back(jackknife_mean(acc, static_cast<int>(k), 0));
            est.im.push_back(jackknife_mean(acc, static_cast<int>(k), 1));
            if (probe_.subsampled) {
                const double m2 = acc.total(static_cast<int>(k), 2) / m;
                const double mu2 = est.re.back().value * est.re.back().value +
                                   est.im.back().value * est.im.back().value;
                const double spread2 = std::max(0.0, m2 - mu2);
                est.tuple_err.push_back(
                    std::sqrt(spread2 / static_cast<double>(probe_.tuples.size())));
            }
        }
        return est;
    }

  private:
    ProbeSpec probe_;
    std::vector<long> ts_;
    int blocks_;
};

class CorrFreqEstimator {
  public:
    CorrFreqEstimator(ProbeSpec probe, OmegaGrid grid, int blocks)
        : probe_(std::move(probe)), grid_(grid), blocks_(blocks) {}

    const ProbeSpec& probe() const { return probe_; }
    const OmegaGrid& grid() const { return grid_; }

    // channels: bins (re, im) + trailing point for the delta weight;
    // one extra channel on the delta point records the integral deviation max
    BlockAccumulator make_accumulator() const {
        return BlockAccumulator("corr_freq:" + probe_.id(), grid_.bins + 1, 3, blocks_);
    }

    void accumulate(const SpectralData& sd, int block, BlockAccumulator& acc) const {
        if (grid_.mode == OmegaGrid::Mode::lorentzian) {
            const VectorXcd v = corr_freq_sample_lorentzian(sd, probe_, grid_);
            for (int b = 0; b < grid_.bins; ++b) {
                acc.add(block, b, 0, v(b).real());
                acc.add(block, b, 1, v(b).imag());
            }
        } else {
            const CorrFreqSample s = corr_freq_sample(sd, probe_, grid_);
            // completeness identity, enforced per sample: binned mass plus the
            // separated delta weight must integrate to the exact delta product
            if (s.integral_dev > 1e-10)
                throw SolverError("corr_freq: completeness integral off by " +
                                      std::to_string(s.integral_dev),
                                  s.integral_dev);
            for (int b = 0; b < grid_.bins; ++b) {
                acc.add(block, b, 0, s.bins(b).real());
                acc.add(block, b, 1, s.bins(b).imag());
            }
            acc.add(block, grid_.bins, 0, s.delta_weight.real());
            acc.add(block, grid_.bins, 1, s.delta_weight.imag());
            acc.add(block, grid_.bins, 2, s.integral_dev);  // summed; report mean
        }
        acc.count_sample(block);
    }

    CorrEstimate finalize(const BlockAccumulator& acc) const {
        CorrEstimate est;
        est.probe_id = probe_.id();
        est.domain = "freq";
        est.samples = acc.samples();
        for (int b = 0; b < grid_.bins; ++b) {
            est.grid.push_back(grid_.center(b));
            est.re.push_back(jackknife_mean(acc, b, 0));
            est.im.push_back(jackknife_mean(acc, b, 1));
        }
        if (grid_.mode == OmegaGrid::Mode::histogram) {
            est.delta_re = jackknife_mean(acc, grid_.bins, 0);
            est.delta_im = jackknife_mean(acc, grid_.bins, 1);
            est.max_integral_dev =
                acc.samples() > 0 ? acc.total(grid_.bins, 2) / acc.samples() : 0.0;
        }
        return est;
    }

  private:
    ProbeSpec probe_;
    OmegaGrid grid_;
    int blocks_;
};

// --- Fourier-domain cross-check -------------------------------------------------

struct FourierCheckReport {
    double max_abs_discrepancy = 0.0;
    double delta_discrepancy = 0.0;
    double tail_bound = 0.0;
    double max_combined_error = 0.0;
};

// Compares the truncated Fourier resummation of a (two-sided) time-domain
// estimate against a frequency-domain estimate of the same probe.
//
// Histogram mode: the time series is split into its late-time plateau
// (which carries the delta mass) and a decaying remainder; the remainder is
// resummed with analytic bin-average weights. The tail bound extrapolates
// the residual magnitude seen in the last quarter of the series.
//
// Lorentzian mode: both sides apply identical e^{-eta|t|} weights, so the
// comparison is an algebraic identity up to roundoff when t_max matches.
inline FourierCheckReport fourier_check(const CorrEstimate& time_est,
                                        const CorrEstimate& freq_est, const OmegaGrid& grid) {
    if (time_est.probe_id != freq_est.probe_id)
        throw InvalidArgument("fourier_check: probe mismatch: " + time_est.probe_id + " vs " +
                              freq_est.probe_id);
    if (time_est.domain != "time" || freq_est.domain != "freq")
        throw InvalidArgument("fourier_check: expected one time and one freq estimate");

    const size_t nt = time_est.grid.size();
    FourierCheckReport rep;

    if (grid.mode == OmegaGrid::Mode::lorentzian) {
        for (int b = 0; b < grid.bins; ++b) {
            const double omega = grid.center(b);
            cplx s(0.0, 0.0);
            double err2 = 0.0;
            for (size_t k = 0; k < nt; ++k) {
                const double t = time_est.grid[k];
                const double wmag = std::exp(-grid.eta * std::abs(t)) / kTwoPi;
                s += cplx(time_est.re[k].value, time_est.im[k].value) *
                     std::polar(wmag, omega * t);
                err2 += wmag * wmag *
                        (time_est.re[k].error * time_est.re[k].error +
                         time_est.im[k].error * time_est.im[k].error);
            }
            const double diff = std::abs(s - cplx(freq_est.re[b].value, freq_est.im[b].value));
            rep.max_abs_discrepancy = std::max(rep.max_abs_discrepancy, diff);
            rep.max_combined_error = std::max(
                rep.max_combined_error,
                std::sqrt(err2 + freq_est.re[b].error * freq_est.re[b].error +
                          freq_est.im[b].error * freq_est.im[b].error));
        }
        return rep;
    }

    // plateau estimate from the last quarter of |t|
    double t_abs_max = 0.0;
    for (double t : time_est.grid) t_abs_max = std::max(t_abs_max, std::abs(t));
    const double t_cut = 0.75 * t_abs_max;
    cplx plateau(0.0, 0.0);
    int n_plateau = 0;
    for (size_t k = 0; k < nt; ++k) {
        if (std::abs(time_est.grid[k]) >= t_cut && time_est.grid[k] != 0.0) {
            plateau += cplx(time_est.re[k].value, time_est.im[k].value);
            ++n_plateau;
        }
    }
    if (n_plateau > 0) plateau /= static_cast<double>(n_plateau);

    // residual tail estimate: last-quarter mean |C - plateau| extrapolated
    double resid = 0.0;
    for (size_t k = 0; k < nt; ++k)
        if (std::abs(time_est.grid[k]) >= t_cut && time_est.grid[k] != 0.0)
            resid += std::abs(cplx(time_est.re[k].value, time_est.im[k].value) - plateau);
    if (n_plateau > 0) resid /= n_plateau;
    rep.tail_bound = 3.0 * resid / (kPi * std::max(1.0, t_cut) * grid.width());

    rep.delta_discrepancy =
        std::abs(plateau - cplx(freq_est.delta_re.value, freq_est.delta_im.value));

    // The plateau carries all non-dephasing weight: it resums to a pure
    // delta, so it lands in the central bin of the reconstruction, while
    // the measured delta weight joins the central bin of the histogram.
    // Comparing the combined central masses keeps degenerate spectra exact.
    for (int b = 0; b < grid.bins; ++b) {
        const double lo = grid.lower_edge(b), hi = grid.upper_edge(b);
        cplx s(0.0, 0.0);
        double err2 = 0.0;
        for (size_t k = 0; k < nt; ++k) {
            const double t = time_est.grid[k];
            cplx coeff;
            if (t == 0.0) {
                coeff = cplx(1.0 / kTwoPi, 0.0);
            } else {
                coeff = (std::polar(1.0, hi * t) - std::polar(1.0, lo * t)) /
                        (cplx(0.0, 1.0) * kTwoPi * t * grid.width());
            }
            const cplx c = cplx(time_est.re[k].value, time_est.im[k].value) - plateau;
            s += c * coeff;
            err2 += std::norm(coeff) * (time_est.re[k].error * time_est.re[k].error +
                                        time_est.im[k].error * time_est.im[k].error);
        }
        cplx measured(freq_est.re[b].value, freq_est.im[b].value);
        if (b == grid.center_index()) {
            s += plateau / grid.width();
            measured += cplx(freq_est.delta_re.value, freq_est.delta_im.value) / grid.width();
        }
        const double diff = std::abs(s - measured);
        rep.max_abs_discrepancy = std::max(rep.max_abs_discrepancy, diff);
        rep.max_combined_error =
            std::max(rep.max_combined_error,
                     std::sqrt(err2 + freq_est.re[b].error * freq_est.re[b].error +
                               freq_est.im[b].error * freq_est.im[b].error));
    }
    return rep;
}

}  // namespace floqlab
