#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "floqlab/accum.hpp"
#include "floqlab/circuit.hpp"
#include "floqlab/common.hpp"
#include "floqlab/spectral.hpp"

namespace floqlab {

// Hermitian observable with site-support metadata and cached traces.
class ObservableOp {
  public:
    static ObservableOp from_matrix(MatrixXcd m, std::vector<int> support = {},
                                    double tol = 1e-12) {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw InvalidArgument("ObservableOp: matrix must be square");
        const double herm = hermiticity_residual(m);
        if (herm > tol)
            throw InvalidArgument("ObservableOp: matrix is not Hermitian (residual " +
                                  std::to_string(herm) + ")");
        ObservableOp o;
        o.mat_ = std::move(m);
        o.support_ = std::move(support);
        o.trace_ = o.mat_.trace().real();
        o.trace_sq_ = (o.mat_ * o.mat_).trace().real();
        return o;
    }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const MatrixXcd& mat() const { return mat_; }
    const std::vector<int>& support() const { return support_; }
    double trace() const { return trace_; }
    double trace_sq() const { return trace_sq_; }

  private:
    MatrixXcd mat_;
    std::vector<int> support_;
    double trace_ = 0.0, trace_sq_ = 0.0;
};

// Named single-site templates. spin_z is the diagonal ladder
// ((q-1)/2, ..., -(q-1)/2); the Pauli matrices require q = 2.
inline MatrixXcd observable_template(const std::string& kind, int q) {
    if (kind == "identity") return MatrixXcd::Identity(q, q);
    if (kind == "spin_z") {
        MatrixXcd m = MatrixXcd::Zero(q, q);
        for (int k = 0; k < q; ++k) m(k, k) = 0.5 * (q - 1) - k;
        return m;
    }
    if (kind == "pauli_x" || kind == "pauli_y" || kind == "pauli_z") {
        if (q != 2) throw InvalidArgument("observable_template: Pauli templates need q = 2");
        MatrixXcd m = MatrixXcd::Zero(2, 2);
        if (kind == "pauli_x") {
            m(0, 1) = m(1, 0) = 1.0;
        } else if (kind == "pauli_y") {
            m(0, 1) = cplx(0.0, -1.0);
            m(1, 0) = cplx(0.0, 1.0);
        } else {
            m(0, 0) = 1.0;
            m(1, 1) = -1.0;
        }
        return m;
    }
    throw InvalidArgument("observable_template: unknown kind '" + kind + "'");
}

// Embeds a q x q (one site) or q^2 x q^2 (two sites) Hermitian template at
// the given sites under the module-wide ordering convention.
inline ObservableOp build_local_observable(const MatrixXcd& templ, const std::vector<int>& sites,
                                           const CircuitSpec& spec) {
    if (hermiticity_residual(templ) > 1e-12)
        throw InvalidArgument("build_local_observable: template is not Hermitian");
    const int n = static_cast<int>(spec.hilbert_dim());
    const int total_sites = spec.lattice.sites();
    MatrixXcd full = MatrixXcd::Identity(n, n);
    if (sites.size() == 1 && templ.rows() == spec.q) {
        apply_single_site_gate(full, templ, sites[0], spec.q, total_sites);
    } else if (sites.size() == 2 && templ.rows() == spec.q * spec.q) {
        if (sites[0] == sites[1])
            throw InvalidArgument("build_local_observable: two-site template needs distinct sites");
        apply_two_site_gate(full, templ, sites[0], sites[1], spec.q, total_sites);
    } else {
        throw InvalidArgument(
            "build_local_observable: template dimension must be q (one site) or q^2 (two sites)");
    }
    return ObservableOp::from_matrix(std::move(full), sites);
}

inline ObservableOp build_local_observable(const std::string& kind, const std::vector<int>& sites,
                                           const CircuitSpec& spec) {
    if (kind == "zz") {
        if (spec.q != 2) throw InvalidArgument("build_local_observable: zz template needs q = 2");
        const MatrixXcd z = observable_template("pauli_z", 2);
        MatrixXcd zz = MatrixXcd::Zero(4, 4);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) zz(a * 2 + b, a * 2 + b) = z(a, a) * z(b, b);
        return build_local_observable(zz, sites, spec);
    }
    return build_local_observable(observable_template(kind, spec.q), sites, spec);
}

// O in the quasienergy eigenbasis: V^dagger O V.
inline MatrixXcd matrix_elements(const ObservableOp& op, const SpectralData& sd) {
    if (op.dim() != sd.dim) throw InvalidArgument("matrix_elements: dimension mismatch");
    MatrixXcd m = sd.vectors.adjoint() * op.mat() * sd.vectors;
    const double herm = hermiticity_residual(m);
    if (herm > 1e-10)
        throw SolverError("matrix_elements: result lost Hermiticity (residual " +
                              std::to_string(herm) + ")",
                          herm);
    return m;
}

class DensityMatrix {
  public:
    static DensityMatrix checked(MatrixXcd m) {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw InvalidArgument("DensityMatrix: matrix must be square");
        if (hermiticity_residual(m) > 1e-12)
            throw InvalidArgument("DensityMatrix: not Hermitian");
        if (std::abs(m.trace().real() - 1.0) > 1e-10 || std::abs(m.trace().imag()) > 1e-10)
            throw InvalidArgument("DensityMatrix: trace must be 1");
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw InvalidArgument("DensityMatrix: negative eigenvalue");
        DensityMatrix d;
        d.mat_ = std::move(m);
        return d;
    }

    static DensityMatrix basis_state(int n, int k) {
        if (k < 0 || k >= n) throw InvalidArgument("DensityMatrix: basis index out of range");
        MatrixXcd m = MatrixXcd::Zero(n, n);
        m(k, k) = 1.0;
        return checked(std::move(m));
    }

    static DensityMatrix thermal(int n) {
        return checked(MatrixXcd::Identity(n, n) / static_cast<double>(n));
    }

    // |+><+| for the uniform superposition: every entry 1/N
    static DensityMatrix uniform_superposition(int n) {
        return checked(MatrixXcd::Constant(n, n, cplx(1.0 / n, 0.0)));
    }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const MatrixXcd& mat() const { return mat_; }

  private:
    MatrixXcd mat_;
};

// --- matrix-element statistics ---------------------------------------------------

struct EthEstimate {
    std::vector<double> grid;                   // omega bin centers
    std::vector<JackknifeValue> offdiag_second; // per-pair <|O_numu|^2> by bin
    std::vector<JackknifeValue> f_envelope;     // sqrt(N * offdiag_second)
    JackknifeValue pooled_offdiag;
    JackknifeValue diag_mean, diag_second, diag_var;
    JackknifeValue kurt_re, kurt_im;            // excess kurtosis, diagnostic only
    JackknifeValue neighbor_corr;               // |O_{nu,nu+1}|^2 vs |O_{nu+1,nu+2}|^2
    long samples = 0;
};

// Diagonal mean/variance, off-diagonal variance resolved in omega, and the
// envelope f(omega) extracted from the measured pair density of the same
// ensemble (not the analytic one), so the matrix-element relation is tested
// independently of the level statistics.
class EthEstimator {
  public:
    EthEstimator(ObservableOp op, OmegaGrid grid, int blocks)
        : op_(std::move(op)), grid_(grid), blocks_(blocks) {
        if (grid_.mode != OmegaGrid::Mode::histogram)
            throw InvalidArgument("EthEstimator: histogram grid required");
    }

    const ObservableOp& observable() const { return op_; }
    const OmegaGrid& grid() const { return grid_; }

    // points: per-bin [sum |O|^2, pair count], then diag, kurtosis,
    // neighbor-correlation and pooled-offdiag scalar points
    BlockAccumulator make_accumulator() const {
        return BlockAccumulator("eth", grid_.bins + 4, 6, blocks_);
    }

    void accumulate(const SpectralData& sd, int block, BlockAccumulator& acc) const {
        const MatrixXcd m = matrix_elements(op_, sd);
        const int n = sd.dim;
        const int p_diag = grid_.bins, p_kurt = grid_.bins + 1, p_nbr = grid_.bins + 2,
                  p_pool = grid_.bins + 3;
        for (int nu = 0; nu < n; ++nu) {
            const double d = m(nu, nu).real();
            acc.add(block, p_diag, 0, d);
            acc.add(block, p_diag, 1, d * d);
            acc.add(block, p_diag, 2, 1.0);
            for (int mu = 0; mu < n; ++mu) {
                if (nu == mu) continue;
                const cplx o = m(nu, mu);
                const double a2 = std::norm(o);
                const int b = grid_.bin_of(sd.energies(nu) - sd.energies(mu));
                acc.add(block, b, 0, a2);
                acc.add(block, b, 1, 1.0);
                acc.add(block, p_pool, 0, a2);
                acc.add(block, p_pool, 1, 1.0);
                const double re = o.real(), im = o.imag();
                acc.add(block, p_kurt, 0, re * re);
                acc.add(block, p_kurt, 1, re * re * re * re);
                acc.add(block, p_kurt, 2, im * im);
                acc.add(block, p_kurt, 3, im * im * im * im);
                acc.add(block, p_kurt, 4, 1.0);
            }
        }
        for (int nu = 0; nu + 2 < n; ++nu) {
            const double x = std::norm(m(nu, nu + 1));
            const double y = std::norm(m(nu + 1, nu + 2));
            acc.add(block, p_nbr, 0, x * y);
            acc.add(block, p_nbr, 1, x);
            acc.add(block, p_nbr, 2, y);
            acc.add(block, p_nbr, 3, x * x);
            acc.add(block, p_nbr, 4, y * y);
            acc.add(block, p_nbr, 5, 1.0);
        }
        acc.count_sample(block);
    }

    EthEstimate finalize(const BlockAccumulator& acc) const {
        EthEstimate est;
        est.samples = acc.samples();
        const int n = op_.dim();
        auto pair_mean = [](const std::vector<double>& s, long) {
            return s[1] > 0.0 ? s[0] / s[1] : 0.0;
        };
        auto envelope = [n](const std::vector<double>& s, long) {
            return s[1] > 0.0 ? std::sqrt(std::max(0.0, n * s[0] / s[1])) : 0.0;
        };
        for (int b = 0; b < grid_.bins; ++b) {
            est.grid.push_back(grid_.center(b));
            est.offdiag_second.push_back(jackknife_point(acc, b, pair_mean));
            est.f_envelope.push_back(jackknife_point(acc, b, envelope));
        }
        const int p_diag = grid_.bins, p_kurt = grid_.bins + 1, p_nbr = grid_.bins + 2,
                  p_pool = grid_.bins + 3;
        est.pooled_offdiag = jackknife_point(acc, p_pool, pair_mean);
        est.diag_mean = jackknife_point(acc, p_diag, [](const std::vector<double>& s, long) {
            return s[2] > 0.0 ? s[0] / s[2] : 0.0;
        });
        est.diag_second = jackknife_point(acc, p_diag, [](const std::vector<double>& s, long) {
            return s[2] > 0.0 ? s[1] / s[2] : 0.0;
        });
        est.diag_var = jackknife_point(acc, p_diag, [](const std::vector<double>& s, long) {
            if (s[2] <= 0.0) return 0.0;
            const double mean = s[0] / s[2];
            return s[1] / s[2] - mean * mean;
        });
        auto kurt = [](int c2, int c4) {
            return [c2, c4](const std::vector<double>& s, long) {
                if (s[4] <= 0.0) return 0.0;
                const double m2 = s[c2] / s[4], m4 = s[c4] / s[4];
                return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
            };
        };
        est.kurt_re = jackknife_point(acc, p_kurt, kurt(0, 1));
        est.kurt_im = jackknife_point(acc, p_kurt, kurt(2, 3));
        est.neighbor_corr = jackknife_point(acc, p_nbr, [](const std::vector<double>& s, long) {
            if (s[5] <= 0.0) return 0.0;
            const double mx = s[1] / s[5], my = s[2] / s[5];
            const double cov = s[0] / s[5] - mx * my;
            const double vx = s[3] / s[5] - mx * mx, vy = s[4] / s[5] - my * my;
            return (vx > 0.0 && vy > 0.0) ? cov / std::sqrt(vx * vy) : 0.0;
        });
        return est;
    }

  private:
    ObservableOp op_;
    OmegaGrid grid_;
    int blocks_;
};

// --- dynamical operator correlator ------------------------------------------------

// C_{OO'}(t) = <Tr(O(t) O')>/N through the eigenbasis; frequency domain by
// binning the nu != mu pair weights with the nu == mu mass kept separate.
class OpCorrEstimator {
  public:
    OpCorrEstimator(ObservableOp a, ObservableOp b, std::vector<long> ts, int blocks)
        : a_(std::move(a)), b_(std::move(b)), ts_(std::move(ts)), blocks_(blocks) {
        if (a_.dim() != b_.dim()) throw InvalidArgument("OpCorrEstimator: dimension mismatch");
    }

    OpCorrEstimator(ObservableOp a, ObservableOp b, OmegaGrid grid, int blocks)
        : a_(std::move(a)), b_(std::move(b)), grid_(grid), freq_(true), blocks_(blocks) {
        if (a_.dim() != b_.dim()) throw InvalidArgument("OpCorrEstimator: dimension mismatch");
    }

    bool frequency_domain() const { return freq_; }
    const std::vector<long>& times() const { return ts_; }
    const OmegaGrid& grid() const { return grid_; }
    const ObservableOp& op_a() const { return a_; }
    const ObservableOp& op_b() const { return b_; }

    BlockAccumulator make_accumulator() const {
        const int pts = freq_ ? grid_.bins + 1 : static_cast<int>(ts_.size());
        return BlockAccumulator("opcorr", pts, 3, blocks_);
    }

    void accumulate(const SpectralData& sd, int block, BlockAccumulator& acc) const {
        const int n = sd.dim;
        const MatrixXcd am = matrix_elements(a_, sd);
        const MatrixXcd bm = matrix_elements(b_, sd);
        // pair weight M(nu, mu) = A_{mu nu} B'_{nu mu} / N
        MatrixXcd w(n, n);
        for (int nu = 0; nu < n; ++nu)
            for (int mu = 0; mu < n; ++mu) w(nu, mu) = am(mu, nu) * bm(nu, mu) / static_cast<double>(n);
        if (freq_) {
            cplx total(0.0, 0.0);
            for (int nu = 0; nu < n; ++nu)
                for (int mu = 0; mu < n; ++mu) {
                    total += w(nu, mu);
                    if (nu == mu) continue;
                    const int b = grid_.bin_of(sd.energies(nu) - sd.energies(mu));
                    acc.add(block, b, 0, w(nu, mu).real() / grid_.width());
                    acc.add(block, b, 1, w(nu, mu).imag() / grid_.width());
                }
            const cplx dm = w.diagonal().sum();
            acc.add(block, grid_.bins, 0, dm.real());
            acc.add(block, grid_.bins, 1, dm.imag());
            // integral identity: sum of all weights = Tr(A B)/N per sample
            acc.add(block, grid_.bins, 2,
                    std::abs(total - cplx((a_.mat() * b_.mat()).trace().real() / n, 0.0)));
        } else {
            VectorXcd phi(n);
            for (size_t k = 0; k < ts_.size(); ++k) {
                const double t = static_cast<double>(ts_[k]);
                for (int nu = 0; nu < n; ++nu) phi(nu) = std::polar(1.0, -sd.energies(nu) * t);
                const VectorXcd pc = phi.conjugate();
                const cplx v = pc.dot(w * pc);  // phi^T w conj(phi)
                acc.add(block, static_cast<int>(k), 0, v.real());
                acc.add(block, static_cast<int>(k), 1, v.imag());
            }
        }
        acc.count_sample(block);
    }

    struct Estimate {
        std::vector<double> grid;
        std::vector<JackknifeValue> re, im;
        JackknifeValue delta_re, delta_im;
        double max_integral_dev = 0.0;
        long samples = 0;
    };

    Estimate finalize(const BlockAccumulator& acc) const {
        Estimate est;
        est.samples = acc.samples();
        if (freq_) {
            for (int b = 0; b < grid_.bins; ++b) {
                est.grid.push_back(grid_.center(b));
                est.re.push_back(jackknife_mean(acc, b, 0));
                est.im.push_back(jackknife_mean(acc, b, 1));
            }
            est.delta_re = jackknife_mean(acc, grid_.bins, 0);
            est.delta_im = jackknife_mean(acc, grid_.bins, 1);
            est.max_integral_dev =
                est.samples > 0 ? acc.total(grid_.bins, 2) / est.samples : 0.0;
        } else {
            for (size_t k = 0; k < ts_.size(); ++k) {
                est.grid.push_back(static_cast<double>(ts_[k]));
                est.re.push_back(jackknife_mean(acc, static_cast<int>(k), 0));
                est.im.push_back(jackknife_mean(acc, static_cast<int>(k), 1));
            }
        }
        return est;
    }

  private:
    ObservableOp a_, b_;
    std::vector<long> ts_;
    OmegaGrid grid_;
    bool freq_ = false;
    int blocks_;
};

// --- density-matrix relaxation -------------------------------------------------------

struct RhoProbe {
    int row, col;
};

// Ensemble-averaged entries of U(t) rho0 U(t)^dagger at selected positions,
// plus <Tr(O rho(t))> tracks for registered observables.
class RhoEstimator {
  public:
    RhoEstimator(DensityMatrix rho0, std::vector<RhoProbe> probes, std::vector<long> ts,
                 std::vector<ObservableOp> tracks, int blocks)
        : rho0_(std::move(rho0)),
          probes_(std::move(probes)),
          ts_(std::move(ts)),
          tracks_(std::move(tracks)),
          blocks_(blocks) {
        for (const auto& p : probes_)
            if (p.row < 0 || p.row >= rho0_.dim() || p.col < 0 || p.col >= rho0_.dim())
                throw InvalidArgument("RhoEstimator: probe out of range");
        for (const auto& o : tracks_)
            if (o.dim() != rho0_.dim()) throw InvalidArgument("RhoEstimator: track dim mismatch");
    }

    // default probe set: all diagonal entries plus the first row
    static std::vector<RhoProbe> default_probes(int n) {
        std::vector<RhoProbe> p;
        for (int k = 0; k < n; ++k) p.push_back({k, k});
        for (int k = 1; k < n; ++k) p.push_back({0, k});
        return p;
    }

    const std::vector<RhoProbe>& probes() const { return probes_; }
    const std::vector<long>& times() const { return ts_; }
    const std::vector<ObservableOp>& tracks() const { return tracks_; }
    const DensityMatrix& rho0() const { return rho0_; }

    BlockAccumulator make_accumulator() const {
        const int pts = static_cast<int>((probes_.size() + tracks_.size()) * ts_.size());
        return BlockAccumulator("rho", pts, 2, blocks_);
    }

    void accumulate(const SpectralData& sd, int block, BlockAccumulator& acc) const {
        const int n = sd.dim;
        const MatrixXcd rho_e = sd.vectors.adjoint() * rho0_.mat() * sd.vectors;
        std::vector<MatrixXcd> track_e;
        track_e.reserve(tracks_.size());
        for (const auto& o : tracks_) track_e.push_back(sd.vectors.adjoint() * o.mat() * sd.vectors);

        VectorXcd phi(n);
        for (size_t k = 0; k < ts_.size(); ++k) {
            const double t = static_cast<double>(ts_[k]);
            for (int nu = 0; nu < n; ++nu) phi(nu) = std::polar(1.0, -sd.energies(nu) * t);
            const MatrixXcd evolved = phi.asDiagonal() * rho_e * phi.conjugate().asDiagonal();
            int point = static_cast<int>(k);
            for (const auto& p : probes_) {
                const cplx v =
                    (sd.vectors.row(p.row) * evolved * sd.vectors.row(p.col).adjoint()).value();
                acc.add(block, point, 0, v.real());
                acc.add(block, point, 1, v.imag());
                point += static_cast<int>(ts_.size());
            }
            for (const auto& ok : track_e) {
                // Tr(O rho(t)) in the eigenbasis
                const cplx v = (ok * evolved).trace();
                acc.add(block, point, 0, v.real());
                acc.add(block, point, 1, v.imag());
                point += static_cast<int>(ts_.size());
            }
        }
        acc.count_sample(block);
    }

    struct Estimate {
        std::vector<long> ts;
        // probe-major: entries[p][k], tracks[o][k]
        std::vector<std::vector<JackknifeValue>> entries_re, entries_im;
        std::vector<std::vector<JackknifeValue>> track_re, track_im;
        long samples = 0;
    };

    Estimate finalize(const BlockAccumulator& acc) const {
        Estimate est;
        est.ts = ts_;
        est.samples = acc.samples();
        const int nt = static_cast<int>(ts_.size());
        int base = 0;
        for (size_t p = 0; p < probes_.size(); ++p) {
            std::vector<JackknifeValue> re, im;
            for (int k = 0; k < nt; ++k) {
                re.push_back(jackknife_mean(acc, base + k, 0));
                im.push_back(jackknife_mean(acc, base + k, 1));
            }
            est.entries_re.push_back(std::move(re));
            est.entries_im.push_back(std::move(im));
            base += nt;
        }
        for (size_t o = 0; o < tracks_.size(); ++o) {
            std::vector<JackknifeValue> re, im;
            for (int k = 0; k < nt; ++k) {
                re.push_back(jackknife_mean(acc, base + k, 0));
                im.push_back(jackknife_mean(acc, base + k, 1));
            }
            est.track_re.push_back(std::move(re));
            est.track_im.push_back(std::move(im));
            base += nt;
        }
        return est;
    }

  private:
    DensityMatrix rho0_;
    std::vector<RhoProbe> probes_;
    std::vector<long> ts_;
    std::vector<ObservableOp> tracks_;
    int blocks_;
};

}  // namespace floqlab
