#pragma once

#include <utility>
#include <vector>

#include <Eigen/QR>

#include "floqlab/common.hpp"
#include "floqlab/rng.hpp"

namespace floqlab {

// Dense unitary with its defining tolerance checked once at construction.
class UnitaryMatrix {
  public:
    static UnitaryMatrix checked(MatrixXcd m, double tol = 1e-12) {
        if (m.rows() != m.cols() || m.rows() < 1)
            throw InvalidArgument("UnitaryMatrix: matrix must be square and nonempty");
        const double res = unitarity_residual(m);
        if (res > tol)
            throw SolverError("UnitaryMatrix: unitarity residual " + std::to_string(res) +
                                  " exceeds tolerance " + std::to_string(tol),
                              res);
        return UnitaryMatrix(std::move(m), res);
    }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const MatrixXcd& mat() const { return mat_; }
    double residual() const { return residual_; }

  private:
    UnitaryMatrix(MatrixXcd m, double res) : mat_(std::move(m)), residual_(res) {}
    MatrixXcd mat_;
    double residual_;
};

// Haar-distributed unitary: complex Ginibre -> QR -> multiply Q by the
// phases of R's diagonal. Plain QR alone is not Haar; the phase fix makes
// the distribution left/right invariant.
inline UnitaryMatrix sample_cue(int dim, RngStream& rng) {
    if (dim < 1) throw InvalidArgument("sample_cue: dimension must be >= 1");
    MatrixXcd g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.complex_gaussian();
    Eigen::HouseholderQR<MatrixXcd> qr(g);
    MatrixXcd q = qr.householderQ();
    const MatrixXcd& r = qr.matrixQR();
    for (int j = 0; j < dim; ++j) {
        const cplx d = r(j, j);
        const double a = std::abs(d);
        q.col(j) *= (a > 0.0) ? d / a : cplx(1.0, 0.0);
    }
    return UnitaryMatrix::checked(std::move(q), 1e-12);
}

// <V_{ij} Vdag_{j'i'}> over the Haar measure: delta_{ii'} delta_{jj'} / N
inline double haar_moment2(int i, int i_prime, int j, int j_prime, int dim) {
    if (dim < 1) throw InvalidArgument("haar_moment2: dimension must be >= 1");
    for (int k : {i, i_prime, j, j_prime})
        if (k < 0 || k >= dim) throw InvalidArgument("haar_moment2: index out of range");
    return (i == i_prime && j == j_prime) ? 1.0 / dim : 0.0;
}

// <V_{i1 j1} V_{i2 j2} Vdag_{j1' i1'} Vdag_{j2' i2'}>: two-permutation
// Weingarten sum. dim == 1 is handled separately (the general formula
// divides by N^2-1); all indices are then forced to 0 and the value is 1.
inline double haar_moment4(int i1, int i2, int j1, int j2, int i1p, int i2p, int j1p, int j2p,
                           int dim) {
    if (dim < 1) throw InvalidArgument("haar_moment4: dimension must be >= 1");
    for (int k : {i1, i2, j1, j2, i1p, i2p, j1p, j2p})
        if (k < 0 || k >= dim) throw InvalidArgument("haar_moment4: index out of range");
    if (dim == 1) return 1.0;
    const double n = dim;
    const double direct_i = (i1 == i1p && i2 == i2p) ? 1.0 : 0.0;
    const double swap_i = (i1 == i2p && i2 == i1p) ? 1.0 : 0.0;
    const double direct_j = (j1 == j1p && j2 == j2p) ? 1.0 : 0.0;
    const double swap_j = (j1 == j2p && j2 == j1p) ? 1.0 : 0.0;
    return (direct_i * direct_j + swap_i * swap_j) / (n * n - 1.0) -
           (direct_i * swap_j + swap_i * direct_j) / (n * (n * n - 1.0));
}

// Monomial in matrix entries: product of V factors and conj(V) factors,
// each addressed by (row, col).
struct Monomial {
    std::vector<std::pair<int, int>> v_factors;
    std::vector<std::pair<int, int>> conj_factors;
};

struct MomentEstimate {
    cplx mean;
    double se_re = 0.0;
    double se_im = 0.0;
    long samples = 0;
};

// Monte Carlo mean and standard error of a monomial over M fresh samples.
// SampleFn: MatrixXcd(long sample_index).
template <typename SampleFn>
MomentEstimate estimate_moment(SampleFn&& sample, const Monomial& mono, long m_samples) {
    if (m_samples < 2) throw InvalidArgument("estimate_moment: need at least 2 samples");
    double sum_re = 0.0, sum_im = 0.0, sum_re2 = 0.0, sum_im2 = 0.0;
    for (long k = 0; k < m_samples; ++k) {
        const MatrixXcd u = sample(k);
        cplx val(1.0, 0.0);
        for (const auto& [r, c] : mono.v_factors) val *= u(r, c);
        for (const auto& [r, c] : mono.conj_factors) val *= std::conj(u(r, c));
        sum_re += val.real();
        sum_im += val.imag();
        sum_re2 += val.real() * val.real();
        sum_im2 += val.imag() * val.imag();
    }
    const double n = static_cast<double>(m_samples);
    MomentEstimate out;
    out.mean = cplx(sum_re / n, sum_im / n);
    const double var_re = std::max(0.0, sum_re2 / n - out.mean.real() * out.mean.real());
    const double var_im = std::max(0.0, sum_im2 / n - out.mean.imag() * out.mean.imag());
    out.se_re = std::sqrt(var_re / (n - 1.0));
    out.se_im = std::sqrt(var_im / (n - 1.0));
    out.samples = m_samples;
    return out;
}

}  // namespace floqlab
