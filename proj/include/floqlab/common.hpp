#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace floqlab {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using cplx = std::complex<double>;

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
    using Error::Error;
};

// Eigensolver failure; carries the residual actually achieved.
struct SolverError : Error {
    double residual;
    SolverError(const std::string& what, double res) : Error(what), residual(res) {}
};

struct IoError : Error {
    using Error::Error;
};

// Wraps a phase difference into (-pi, pi].
inline double wrap_phase(double x) {
    while (x > kPi) x -= kTwoPi;
    while (x <= -kPi) x += kTwoPi;
    return x;
}

// Max-norm of A^dagger A - I.
inline double unitarity_residual(const MatrixXcd& a) {
    MatrixXcd g = a.adjoint() * a;
    g.diagonal().array() -= 1.0;
    return g.cwiseAbs().maxCoeff();
}

inline double hermiticity_residual(const MatrixXcd& a) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace floqlab
