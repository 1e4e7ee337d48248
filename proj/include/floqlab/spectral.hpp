#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "floqlab/circuit.hpp"
#include "floqlab/common.hpp"
#include "floqlab/haar.hpp"

namespace floqlab {

// Eigendecomposition of a Floquet operator: U = V diag(e^{-i E_nu}) V^dagger
// with quasienergies in (-pi, pi], sorted ascending.
struct SpectralData {
    int dim = 0;
    VectorXd energies;   // ascending
    MatrixXcd vectors;   // columns are eigenstates
    double residual = 0.0;      // max_nu || U v - e^{-iE} v ||_2
    double vtv_residual = 0.0;  // || V^dagger V - I ||_max
};

// Unitary matrices are normal, so the Schur form is diagonal and the Schur
// basis is an orthonormal eigenbasis for free. Clusters of quasienergies
// closer than 1e-10 are re-orthonormalized by QR; with Schur vectors this
// is a no-op in practice but keeps the invariant explicit.
inline SpectralData diagonalize(const UnitaryMatrix& u, double residual_tol = 1e-8) {
    const int n = u.dim();
    Eigen::ComplexSchur<MatrixXcd> schur(u.mat(), /*computeU=*/true);
    if (schur.info() != Eigen::Success)
        throw SolverError("diagonalize: Schur iteration failed to converge", -1.0);

    SpectralData out;
    out.dim = n;
    out.energies.resize(n);
    out.vectors = schur.matrixU();
    VectorXd raw(n);
    for (int k = 0; k < n; ++k) {
        double e = -std::arg(schur.matrixT()(k, k));
        if (e <= -kPi) e += kTwoPi;
        raw(k) = e;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return raw(a) < raw(b); });
    MatrixXcd sorted(n, n);
    for (int k = 0; k < n; ++k) {
        out.energies(k) = raw(order[k]);
        sorted.col(k) = out.vectors.col(order[k]);
    }
    out.vectors = std::move(sorted);

    // degenerate clusters -> QR re-orthonormalization of the cluster block
    int start = 0;
    while (start < n) {
        int end = start + 1;
        while (end < n && out.energies(end) - out.energies(end - 1) < 1e-10) ++end;
        if (end - start > 1) {
            Eigen::HouseholderQR<MatrixXcd> qr(out.vectors.middleCols(start, end - start));
            out.vectors.middleCols(start, end - start) =
                MatrixXcd(qr.householderQ()).leftCols(end - start);
        }
        start = end;
    }

    MatrixXcd recon = u.mat() * out.vectors;
    for (int k = 0; k < n; ++k)
        recon.col(k) -= std::polar(1.0, -out.energies(k)) * out.vectors.col(k);
    out.residual = recon.colwise().norm().maxCoeff();
    out.vtv_residual = unitarity_residual(out.vectors);
    if (out.residual > residual_tol)
        throw SolverError("diagonalize: eigendecomposition residual " +
                              std::to_string(out.residual) + " exceeds tolerance",
                          out.residual);
    return out;
}

// Frequency grid on (-pi, pi]. Histogram mode needs an odd bin count so the
// bins tile the period exactly with omega = 0 a bin center (edges at odd
// multiples of half the width). Lorentzian mode evaluates eta-smoothed
// estimates at the same centers from a truncated time series.
struct OmegaGrid {
    enum class Mode { histogram, lorentzian };

    Mode mode = Mode::histogram;
    int bins = 65;
    double eta = 0.0;
    int t_max = 0;

    static OmegaGrid histogram(int bins) {
        if (bins < 1 || bins % 2 == 0)
            throw InvalidArgument("OmegaGrid: histogram bin count must be odd and positive");
        OmegaGrid g;
        g.mode = Mode::histogram;
        g.bins = bins;
        return g;
    }

    static OmegaGrid lorentzian(int bins, double eta, int t_max) {
        if (bins < 1 || bins % 2 == 0)
            throw InvalidArgument("OmegaGrid: bin count must be odd and positive");
        if (eta <= 0.0) throw InvalidArgument("OmegaGrid: eta must be positive");
        if (t_max < 1) throw InvalidArgument("OmegaGrid: truncation order must be >= 1");
        OmegaGrid g;
        g.mode = Mode::lorentzian;
        g.bins = bins;
        g.eta = eta;
        g.t_max = t_max;
        return g;
    }

    double width() const { return kTwoPi / bins; }
    int center_index() const { return bins / 2; }
    double center(int b) const { return (b - center_index()) * width(); }
    double lower_edge(int b) const { return center(b) - 0.5 * width(); }
    double upper_edge(int b) const { return center(b) + 0.5 * width(); }

    int bin_of(double omega) const {
        const double w = width();
        int j = static_cast<int>(std::floor((wrap_phase(omega) + 0.5 * w) / w));
        const int k = center_index();
        return std::clamp(j, -k, k) + k;
    }
};

// --- per-sample spectral statistics -----------------------------------------

// Tr U(t) for all t in [0, t_max], from quasienergies only.
inline VectorXcd trace_powers(const SpectralData& sd, int t_max) {
    VectorXcd tr(t_max + 1);
    for (int t = 0; t <= t_max; ++t) {
        cplx s(0.0, 0.0);
        for (int k = 0; k < sd.dim; ++k) s += std::polar(1.0, -sd.energies(k) * t);
        tr(t) = s;
    }
    return tr;
}

// |Tr U(t)|^2 for one sample.
inline VectorXd sff_sample(const SpectralData& sd, int t_max) {
    const VectorXcd tr = trace_powers(sd, t_max);
    return tr.cwiseAbs2();
}

// Ordered-pair histogram of wrapped quasienergy differences, divided by the
// bin width. The nu == mu diagonal lands in the central bin, so the sum of
// bin contents times the width is exactly N^2.
inline VectorXd r2_sample(const SpectralData& sd, const OmegaGrid& grid) {
    VectorXd h = VectorXd::Zero(grid.bins);
    for (int a = 0; a < sd.dim; ++a)
        for (int b = 0; b < sd.dim; ++b)
            h(grid.bin_of(sd.energies(a) - sd.energies(b))) += 1.0;
    return h / grid.width();
}

// Splits the full Hilbert index into (subsystem A, complement) components.
// Either an explicit site subset of a circuit lattice or, for structureless
// ensembles, a plain block factorization N = N_A * N_B with A the most
// significant block.
class SubsystemSplit {
  public:
    static SubsystemSplit block(int n, int n_a) {
        if (n_a <= 1 || n_a >= n)
            throw InvalidArgument(
                "SubsystemSplit: need 1 < N_A < N; an empty subsystem is the plain SFF and the "
                "full system is |Tr U|^2 -- use those estimators instead");
        if (n % n_a != 0) throw InvalidArgument("SubsystemSplit: N_A must divide N");
        SubsystemSplit s;
        s.n_ = n;
        s.na_ = n_a;
        s.stride_table_.clear();
        return s;
    }

    static SubsystemSplit sites(const CircuitSpec& spec, const std::vector<int>& subsystem) {
        const int sites_total = spec.lattice.sites();
        if (subsystem.empty() || static_cast<int>(subsystem.size()) >= sites_total)
            throw InvalidArgument(
                "SubsystemSplit: subsystem must be a nonempty proper subset of the sites; the "
                "degenerate cases reduce to sff_estimate or |Tr U|^2");
        std::vector<bool> in_a(sites_total, false);
        for (int s : subsystem) {
            if (s < 0 || s >= sites_total)
                throw InvalidArgument("SubsystemSplit: site index out of range");
            if (in_a[s]) throw InvalidArgument("SubsystemSplit: duplicate site in subsystem");
            in_a[s] = true;
        }
        SubsystemSplit out;
        out.n_ = static_cast<int>(spec.hilbert_dim());
        out.na_ = 1;
        for (size_t i = 0; i < subsystem.size(); ++i) out.na_ *= spec.q;
        // digit strides in site order: A digits first (most significant in a-index)
        for (int s = 0; s < sites_total; ++s) {
            const int stride = detail::site_stride(s, sites_total, spec.q);
            if (in_a[s])
                out.stride_table_.push_back({stride, spec.q, true});
            else
                out.stride_table_.push_back({stride, spec.q, false});
        }
        return out;
    }

    int dim() const { return n_; }
    int dim_a() const { return na_; }
    int dim_b() const { return n_ / na_; }

    std::pair<int, int> split(int n) const {
        if (stride_table_.empty()) return {n / dim_b(), n % dim_b()};
        int a = 0, b = 0;
        for (const auto& e : stride_table_) {
            const int digit = (n / e.stride) % e.q;
            if (e.in_a)
                a = a * e.q + digit;
            else
                b = b * e.q + digit;
        }
        return {a, b};
    }

  private:
    struct Entry {
        int stride;
        int q;
        bool in_a;
    };
    int n_ = 0, na_ = 0;
    std::vector<Entry> stride_table_;
};

// Tr_Abar[ Tr_A U(t) . Tr_A U(t)^dagger ] for t in [0, t_max]. The partial
// trace of |nu><nu| over A gives per-eigenstate coefficient matrices on the
// complement; each time point is then a phase-weighted sum of those.
inline VectorXd psff_sample(const SpectralData& sd, const SubsystemSplit& split, int t_max) {
    const int n = sd.dim;
    const int na = split.dim_a();
    const int nb = split.dim_b();
    // full index grouped by (a, b) components
    Eigen::MatrixXi idx_of(na, nb);
    for (int full = 0; full < n; ++full) {
        const auto [a, b] = split.split(full);
        idx_of(a, b) = full;
    }
    // B(j1, j2; nu) = sum_i V[(i,j1),nu] conj(V[(i,j2),nu]) = (Tr_A |nu><nu|)_{j1 j2}
    std::vector<MatrixXcd> partial(n, MatrixXcd::Zero(nb, nb));
    for (int nu = 0; nu < n; ++nu) {
        MatrixXcd& bmat = partial[nu];
        for (int a = 0; a < na; ++a)
            for (int j1 = 0; j1 < nb; ++j1) {
                const cplx v1 = sd.vectors(idx_of(a, j1), nu);
                for (int j2 = 0; j2 < nb; ++j2)
                    bmat(j1, j2) += v1 * std::conj(sd.vectors(idx_of(a, j2), nu));
            }
    }
    VectorXd out(t_max + 1);
    MatrixXcd acc(nb, nb);
    for (int t = 0; t <= t_max; ++t) {
        acc.setZero();
        for (int nu = 0; nu < n; ++nu) acc += std::polar(1.0, -sd.energies(nu) * t) * partial[nu];
        out(t) = acc.cwiseAbs2().sum();
    }
    return out;
}

}  // namespace floqlab
