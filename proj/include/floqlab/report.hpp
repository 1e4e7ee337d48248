#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "floqlab/common.hpp"

namespace floqlab {

// One comparison row: a measured value with jackknife error against its
// closed-form prediction. Rows flagged gated participate in the run's
// z-gate; gate_z overrides the global threshold (used for
// multiplicity-adjusted families of rows).
struct StatRow {
    std::string label;
    double grid = 0.0;
    double measured = 0.0;
    double error = 0.0;
    double predicted = 0.0;
    bool has_imag = false;
    double imag = 0.0;
    double imag_error = 0.0;
    double imag_predicted = 0.0;
    bool gated = true;
    double gate_z = std::numeric_limits<double>::quiet_NaN();  // NaN: use the global gate

    double zscore() const {
        const double floor = 1e-12 * std::max(1.0, std::abs(predicted));
        double z = std::abs(measured - predicted) / std::max(error, floor);
        if (has_imag) {
            const double zfloor = 1e-12 * std::max(1.0, std::abs(imag_predicted));
            z = std::max(z, std::abs(imag - imag_predicted) / std::max(imag_error, zfloor));
        }
        return z;
    }
};

struct StatReport {
    std::string name;
    long samples = 0;
    std::vector<StatRow> rows;
    double max_identity_dev = 0.0;  // per-sample exactness diagnostics, when tracked

    double max_gated_z(double global_gate, double* exceeding_gate = nullptr) const {
        double worst = 0.0;
        for (const auto& r : rows) {
            if (!r.gated) continue;
            const double z = r.zscore();
            const double gate = std::isnan(r.gate_z) ? global_gate : r.gate_z;
            if (z > worst) {
                worst = z;
                if (exceeding_gate) *exceeding_gate = gate;
            }
        }
        return worst;
    }

    bool passes(double global_gate) const {
        for (const auto& r : rows) {
            if (!r.gated) continue;
            const double gate = std::isnan(r.gate_z) ? global_gate : r.gate_z;
            if (r.zscore() > gate) return false;
        }
        return true;
    }
};

// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9
// absolute accuracy; ample for multiplicity-adjusted gates).
inline double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw InvalidArgument("normal_quantile: p must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Raises a per-test threshold so a family of n_tests comparisons has the
// same familywise false-alarm rate as a single test at base_z.
inline double bonferroni_gate(double base_z, long n_tests) {
    if (n_tests <= 1) return base_z;
    const double p_family = normal_two_sided_p(base_z);
    return normal_quantile(1.0 - 0.5 * p_family / static_cast<double>(n_tests));
}

}  // namespace floqlab
