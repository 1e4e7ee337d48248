#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "floqlab/common.hpp"

namespace floqlab {

// Closed-form CUE predictions. Estimator modules compare against these;
// nothing here ever touches sampled data. Delta masses are first-class
// outputs, kept separate from the smooth parts, because histogram
// estimators need the mass assigned to the central bin explicitly.

enum class Variant { exact, leading, smoothed };

// K(t) = min(|t|, N) + N^2 [t == 0]
inline double sff_cue(long t, int n) {
    const long a = std::labs(t);
    double v = static_cast<double>(a < n ? a : n);
    if (t == 0) v += static_cast<double>(n) * n;
    return v;
}

// Smooth part of the pair-correlation density R2; the coincident-pair mass
// N delta(omega) is reported by r2_cue_delta_mass. The omega -> 0 limit of
// the oscillatory ratio is the removable value N^2.
inline double r2_cue_smooth(double omega, int n) {
    const double s = std::sin(0.5 * omega);
    double ratio;
    if (std::abs(s) < 1e-9) {
        ratio = static_cast<double>(n) * n;
    } else {
        const double sn = std::sin(0.5 * n * omega);
        ratio = (sn * sn) / (s * s);
    }
    return (static_cast<double>(n) * n - ratio) / kTwoPi;
}

inline double r2_cue_delta_mass(int n) { return static_cast<double>(n); }

// Average of the smooth part over [lo, hi], done analytically through the
// cosine series sin^2(N w/2)/sin^2(w/2) = sum_{|j|<N} (N-|j|) e^{i j w}.
inline double r2_cue_smooth_binavg(double lo, double hi, int n) {
    const double width = hi - lo;
    double osc = static_cast<double>(n) * width;  // j = 0 term
    for (int j = 1; j < n; ++j)
        osc += 2.0 * (n - j) * (std::sin(j * hi) - std::sin(j * lo)) / j;
    return (static_cast<double>(n) * n * width - osc) / (kTwoPi * width);
}

// Saddle-point (eta N >~ 1) smoothed form: N^2/2pi - 1/(4 pi sin^2(w/2)).
inline double r2_smoothed_saddle(double omega, int n) {
    const double s = std::sin(0.5 * omega);
    return static_cast<double>(n) * n / kTwoPi - 1.0 / (4.0 * kPi * s * s);
}

// 2pi-periodic Lorentzian of width eta: sum_k e^{i k w - |k| eta} / 2pi.
inline double lorentzian_periodic(double omega, double eta) {
    if (eta <= 0.0) throw InvalidArgument("lorentzian_periodic: eta must be positive");
    const double r = std::exp(-eta);
    return (1.0 - r * r) / (kTwoPi * (1.0 - 2.0 * r * std::cos(omega) + r * r));
}

// Exact eta-smoothed R2: the full resummation (1/2pi) sum_t K(t) e^{iwt-|t|eta}.
// Terms with t < N are summed directly; the constant plateau K = N beyond
// that has the geometric closed form N z^N / (1 - z). The plateau carries
// the coincident-pair delta, so this is the COMPLETE smoothed density --
// do not add a Lorentzian-smeared mass on top.
inline double r2_smoothed_eta(double omega, int n, double eta) {
    if (eta <= 0.0) throw InvalidArgument("r2_smoothed_eta: eta must be positive");
    const cplx z = std::polar(std::exp(-eta), omega);
    cplx partial(0.0, 0.0);
    cplx zt(1.0, 0.0);
    for (int t = 1; t < n; ++t) {
        zt *= z;
        partial += static_cast<double>(t) * zt;
    }
    zt *= z;  // z^N
    partial += static_cast<double>(n) * zt / (1.0 - z);
    return (static_cast<double>(n) * n + 2.0 * partial.real()) / kTwoPi;
}

// --- eigenstate correlation function ----------------------------------------

// C_{nn'm'm} decomposes on the two delta structures:
//   c1 multiplies delta_{nn'} delta_{mm'}, c2 multiplies delta_{nm} delta_{n'm'}.
struct CorrCoeffs {
    double c1 = 0.0;
    double c2 = 0.0;
};

inline CorrCoeffs corr_coeffs_time(long t, int n, Variant variant) {
    const double nn = static_cast<double>(n);
    const double k = sff_cue(t, n);
    CorrCoeffs c;
    switch (variant) {
        case Variant::exact:
            c.c1 = (k - 1.0) / (nn * nn - 1.0);
            c.c2 = (nn - k / nn) / (nn * nn - 1.0);
            break;
        case Variant::leading: {
            const double dt0 = (t == 0) ? 1.0 : 0.0;
            c.c1 = (k - 1.0 + dt0) / (nn * nn);
            c.c2 = (1.0 - dt0) / nn;
            break;
        }
        case Variant::smoothed:
            throw InvalidArgument("corr_coeffs_time: smoothed variant is frequency-domain only");
    }
    return c;
}

// Smooth (delta-free) part of the frequency-domain coefficients.
inline CorrCoeffs corr_coeffs_freq_smooth(double omega, int n, Variant variant) {
    const double nn = static_cast<double>(n);
    CorrCoeffs c;
    switch (variant) {
        case Variant::exact: {
            const double r2 = r2_cue_smooth(omega, n);
            c.c1 = r2 / (nn * nn - 1.0);
            c.c2 = -r2 / (nn * (nn * nn - 1.0));
            break;
        }
        case Variant::leading: {
            const double r2 = r2_cue_smooth(omega, n);
            c.c1 = (r2 + 1.0 / kTwoPi) / (nn * nn);
            c.c2 = -1.0 / (kTwoPi * nn);
            break;
        }
        case Variant::smoothed: {
            const double s = std::sin(0.5 * omega);
            c.c1 = (1.0 + (1.0 - 0.5 / (s * s)) / (nn * nn)) / kTwoPi;
            c.c2 = -1.0 / (kTwoPi * nn);
            break;
        }
    }
    return c;
}

// Bin-averaged smooth coefficients (exact variant averages the oscillatory
// R2 analytically; the others are smooth enough to average numerically).
inline CorrCoeffs corr_coeffs_freq_smooth_binavg(double lo, double hi, int n, Variant variant) {
    const double nn = static_cast<double>(n);
    if (variant == Variant::exact) {
        const double r2 = r2_cue_smooth_binavg(lo, hi, n);
        return {r2 / (nn * nn - 1.0), -r2 / (nn * (nn * nn - 1.0))};
    }
    // 9-point midpoint rule; integrands here have no fine structure on a bin
    CorrCoeffs acc;
    const int pts = 9;
    for (int k = 0; k < pts; ++k) {
        const double w = lo + (hi - lo) * (k + 0.5) / pts;
        const CorrCoeffs c = corr_coeffs_freq_smooth(w, n, variant);
        acc.c1 += c.c1 / pts;
        acc.c2 += c.c2 / pts;
    }
    return acc;
}

// Delta(omega) mass of the explicit term alone (the part of C that is not
// inside R2); used with the full eta-resummed R2, which already carries the
// coincident-pair mass.
inline CorrCoeffs corr_explicit_delta_mass(int n) {
    const double nn = static_cast<double>(n);
    return {-1.0 / (nn * nn - 1.0), nn / (nn * nn - 1.0)};
}

// Total delta(omega) masses of C_{nn'm'm}(omega), combining the explicit
// delta term with the coincident-pair mass inside R2.
inline CorrCoeffs corr_delta_mass(int n, Variant variant) {
    const double nn = static_cast<double>(n);
    switch (variant) {
        case Variant::exact:
            return {1.0 / (nn + 1.0), 1.0 / (nn + 1.0)};
        case Variant::leading:
            return {(nn - 1.0) / (nn * nn), 1.0 / nn};
        case Variant::smoothed:
            return {0.0, 0.0};  // absorbed into the smoothing
    }
    return {};
}

// Index categories of the tuple (n, n', m', m).
enum class TupleCategory { cat1, cat1_offdiag, cat1_diag, cat2, cat3 };

inline const char* category_name(TupleCategory c) {
    switch (c) {
        case TupleCategory::cat1: return "cat1";
        case TupleCategory::cat1_offdiag: return "cat1_offdiag";
        case TupleCategory::cat1_diag: return "cat1_diag";
        case TupleCategory::cat2: return "cat2";
        case TupleCategory::cat3: return "cat3";
    }
    return "?";
}

inline double category_tuple_count(TupleCategory c, int n) {
    const double nn = static_cast<double>(n);
    switch (c) {
        case TupleCategory::cat1: return nn * nn;
        case TupleCategory::cat1_offdiag: return nn * (nn - 1.0);
        case TupleCategory::cat1_diag: return nn;
        case TupleCategory::cat2: return nn * (nn - 1.0);
        case TupleCategory::cat3: return nn * nn * nn * nn - nn * nn - nn * (nn - 1.0);
    }
    return 0.0;
}

inline TupleCategory classify_tuple(int n, int np, int mp, int m) {
    if (n == np && mp == m) return (n == m) ? TupleCategory::cat1_diag : TupleCategory::cat1_offdiag;
    if (n == m && np == mp && n != np) return TupleCategory::cat2;
    return TupleCategory::cat3;
}

// Weights of the two delta structures for a category-averaged value.
inline CorrCoeffs category_weights(TupleCategory c, int n) {
    switch (c) {
        case TupleCategory::cat1: return {1.0, 1.0 / n};  // N diagonal tuples out of N^2
        case TupleCategory::cat1_offdiag: return {1.0, 0.0};
        case TupleCategory::cat1_diag: return {1.0, 1.0};
        case TupleCategory::cat2: return {0.0, 1.0};
        case TupleCategory::cat3: return {0.0, 0.0};
    }
    return {};
}

inline double corr_rmt_category_time(long t, int n, TupleCategory cat, Variant variant) {
    const CorrCoeffs c = corr_coeffs_time(t, n, variant);
    const CorrCoeffs w = category_weights(cat, n);
    return w.c1 * c.c1 + w.c2 * c.c2;
}

inline double corr_rmt_category_freq_smooth(double omega, int n, TupleCategory cat,
                                            Variant variant) {
    const CorrCoeffs c = corr_coeffs_freq_smooth(omega, n, variant);
    const CorrCoeffs w = category_weights(cat, n);
    return w.c1 * c.c1 + w.c2 * c.c2;
}

inline double corr_rmt_category_delta(int n, TupleCategory cat, Variant variant) {
    const CorrCoeffs d = corr_delta_mass(n, variant);
    const CorrCoeffs w = category_weights(cat, n);
    return w.c1 * d.c1 + w.c2 * d.c2;
}

// --- partial spectral form factor -------------------------------------------

inline double psff_rmt(long t, int n, int n_a, Variant variant) {
    if (n_a <= 1 || n_a >= n || n % n_a != 0)
        throw InvalidArgument("psff_rmt: need 1 < N_A < N with N_A dividing N");
    const double nn = static_cast<double>(n);
    const double na = static_cast<double>(n_a);
    const double k = sff_cue(t, n);
    switch (variant) {
        case Variant::exact:
            return ((nn * na - nn / na) * k + nn * nn * nn / na - nn * na) / (nn * nn - 1.0);
        case Variant::leading:
            return (na / nn) * k + (nn / na - na / nn) * (t == 0 ? 0.0 : 1.0);
        case Variant::smoothed:
            throw InvalidArgument("psff_rmt: no smoothed variant");
    }
    return 0.0;
}

// --- observable statistics ----------------------------------------------------

struct EthPrediction {
    double diag_mean;        // <O_nunu> = Tr O / N
    double offdiag_second;   // <|O_numu|^2>, nu != mu, exact
    double diag_second;      // <|O_nunu|^2>, exact
    double leading_sigma;    // sqrt(Tr O^2/N^2 - Tr^2 O/N^3)
    double f_envelope;       // sqrt(Tr O^2 / N)
};

inline EthPrediction eth_rmt_prediction(double tr_o, double tr_o2, int n) {
    if (n < 2) throw InvalidArgument("eth_rmt_prediction: need N >= 2");
    const double nn = static_cast<double>(n);
    EthPrediction p;
    p.diag_mean = tr_o / nn;
    p.offdiag_second = tr_o2 / (nn * nn - 1.0) - tr_o * tr_o / (nn * (nn * nn - 1.0));
    p.diag_second = p.offdiag_second + tr_o * tr_o / (nn * nn - 1.0) - tr_o2 / (nn * (nn * nn - 1.0));
    p.leading_sigma = std::sqrt(std::max(0.0, tr_o2 / (nn * nn) - tr_o * tr_o / (nn * nn * nn)));
    p.f_envelope = std::sqrt(tr_o2 / nn);
    return p;
}

// Dynamical operator correlator C_{OO'}: smooth part is a multiple of R2,
// plus a constant floor and a delta mass.
struct OpCorrPrediction {
    double r2_coeff;     // multiplies the smooth R2(omega)
    double delta_mass;   // mass at omega = 0
    double flat = 0.0;   // omega-independent offset (leading variant only)
};

inline OpCorrPrediction opcorr_rmt(double tr_oop, double tr_o, double tr_op, int n,
                                   Variant variant) {
    const double nn = static_cast<double>(n);
    const double x = tr_oop / nn - tr_o * tr_op / (nn * nn);
    OpCorrPrediction p{};
    switch (variant) {
        case Variant::exact:
            p.r2_coeff = x / (nn * nn - 1.0);
            p.delta_mass = x * (nn - 1.0) / (nn * nn - 1.0) + tr_o * tr_op / (nn * nn);
            break;
        case Variant::leading:
            p.r2_coeff = tr_oop / (nn * nn * nn);
            p.flat = tr_oop / (kTwoPi * nn * nn * nn) - tr_o * tr_op / (kTwoPi * nn * nn);
            p.delta_mass = -tr_oop / (nn * nn * nn) + tr_o * tr_op / (nn * nn);
            break;
        case Variant::smoothed:
            throw InvalidArgument("opcorr_rmt: no smoothed variant");
    }
    return p;
}

inline double opcorr_rmt_time(long t, double tr_oop, double tr_o, double tr_op, int n) {
    const double nn = static_cast<double>(n);
    const double x = tr_oop / nn - tr_o * tr_op / (nn * nn);
    return (sff_cue(t, n) - 1.0) * x / (nn * nn - 1.0) + tr_o * tr_op / (nn * nn);
}

// --- density-matrix relaxation -------------------------------------------------

// <rho_nm(t)> = rho_th (N^2 - K)/(N^2-1) + rho_nm(0) (K - 1)/(N^2-1)
inline cplx rho_rmt_entry(cplx rho0_entry, bool diagonal, long t, int n) {
    const double nn = static_cast<double>(n);
    const double k = sff_cue(t, n);
    const double th = diagonal ? 1.0 / nn : 0.0;
    return th * (nn * nn - k) / (nn * nn - 1.0) + rho0_entry * ((k - 1.0) / (nn * nn - 1.0));
}

// <Tr(O rho(t))>
inline double rho_rmt_expectation(double tr_o, double tr_o_rho0, long t, int n) {
    const double nn = static_cast<double>(n);
    const double k = sff_cue(t, n);
    return (tr_o / nn) * (nn * nn - k) / (nn * nn - 1.0) + tr_o_rho0 * (k - 1.0) / (nn * nn - 1.0);
}

// --- generic prediction tables --------------------------------------------------

struct PredictionTable {
    std::string statistic;
    std::string variant;
    std::map<std::string, double> params;
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<std::pair<double, double>> delta_masses;  // (location, mass)
};

struct PredictParams {
    int n = 0;
    int n_a = 0;
    double tr_o = 0.0, tr_o2 = 0.0, tr_op = 0.0, tr_oop = 0.0;
    double eta = 0.0;
    double rho0_entry = 0.0;
    bool rho_diagonal = true;
    TupleCategory category = TupleCategory::cat1_offdiag;
    Variant variant = Variant::exact;
};

// Pure dispatch over the statistic name; identical inputs give identical
// tables. Time-domain statistics take integer grids, frequency-domain ones
// take omega grids in (-pi, pi].
inline PredictionTable predict(const std::string& statistic, const PredictParams& p,
                               const std::vector<double>& grid) {
    if (p.n < 2) throw InvalidArgument("predict: need N >= 2");
    PredictionTable tab;
    tab.statistic = statistic;
    tab.grid = grid;
    tab.params["N"] = p.n;
    tab.variant = (p.variant == Variant::exact)     ? "exact"
                  : (p.variant == Variant::leading) ? "leading"
                                                    : "smoothed";
    auto fill = [&](auto&& fn) {
        tab.values.reserve(grid.size());
        for (double g : grid) tab.values.push_back(fn(g));
    };

    if (statistic == "sff") {
        fill([&](double t) { return sff_cue(std::lround(t), p.n); });
    } else if (statistic == "r2") {
        fill([&](double w) { return r2_cue_smooth(w, p.n); });
        tab.delta_masses.push_back({0.0, r2_cue_delta_mass(p.n)});
    } else if (statistic == "r2_smoothed") {
        if (p.eta > 0.0) {
            tab.params["eta"] = p.eta;
            fill([&](double w) { return r2_smoothed_eta(w, p.n, p.eta); });
        } else {
            fill([&](double w) { return r2_smoothed_saddle(w, p.n); });
        }
    } else if (statistic == "psff") {
        tab.params["N_A"] = p.n_a;
        fill([&](double t) { return psff_rmt(std::lround(t), p.n, p.n_a, p.variant); });
    } else if (statistic == "corr_time") {
        fill([&](double t) {
            return corr_rmt_category_time(std::lround(t), p.n, p.category, p.variant);
        });
    } else if (statistic == "corr_freq") {
        fill([&](double w) { return corr_rmt_category_freq_smooth(w, p.n, p.category, p.variant); });
        const double mass = corr_rmt_category_delta(p.n, p.category, p.variant);
        if (mass != 0.0) tab.delta_masses.push_back({0.0, mass});
    } else if (statistic == "opcorr") {
        const OpCorrPrediction c = opcorr_rmt(p.tr_oop, p.tr_o, p.tr_op, p.n, p.variant);
        fill([&](double w) { return c.r2_coeff * r2_cue_smooth(w, p.n) + c.flat; });
        tab.delta_masses.push_back({0.0, c.delta_mass});
    } else if (statistic == "opcorr_time") {
        fill([&](double t) {
            return opcorr_rmt_time(std::lround(t), p.tr_oop, p.tr_o, p.tr_op, p.n);
        });
    } else if (statistic == "rho_entry") {
        fill([&](double t) {
            return rho_rmt_entry(p.rho0_entry, p.rho_diagonal, std::lround(t), p.n).real();
        });
    } else if (statistic == "eth_offdiag") {
        const EthPrediction e = eth_rmt_prediction(p.tr_o, p.tr_o2, p.n);
        fill([&](double) { return e.offdiag_second; });
    } else if (statistic == "f_envelope") {
        const EthPrediction e = eth_rmt_prediction(p.tr_o, p.tr_o2, p.n);
        fill([&](double) { return e.f_envelope; });
    } else {
        throw InvalidArgument("predict: unknown statistic '" + statistic + "'");
    }
    return tab;
}

// Replaces delta terms by the periodic Lorentzian and resums oscillatory
// parts with e^{-|t| eta} damping.
inline PredictionTable smoothed_variant(const std::string& statistic, const PredictParams& p,
                                        double eta, const std::vector<double>& grid) {
    if (eta <= 0.0) throw InvalidArgument("smoothed_variant: eta must be positive");
    PredictionTable tab;
    tab.statistic = statistic;
    tab.variant = "eta_smoothed";
    tab.params["N"] = p.n;
    tab.params["eta"] = eta;
    tab.grid = grid;
    if (statistic == "r2") {
        for (double w : grid) tab.values.push_back(r2_smoothed_eta(w, p.n, eta));
    } else if (statistic == "corr_freq") {
        const double nn = p.n;
        const CorrCoeffs wts = category_weights(p.category, p.n);
        const CorrCoeffs expl = corr_explicit_delta_mass(p.n);
        const double mass = wts.c1 * expl.c1 + wts.c2 * expl.c2;
        for (double w : grid) {
            // exact coefficients with the full R2 replaced by its eta-resummed
            // form; only the explicit delta needs smearing by hand
            const double r2 = r2_smoothed_eta(w, p.n, eta);
            const double smooth =
                wts.c1 * r2 / (nn * nn - 1.0) - wts.c2 * r2 / (nn * (nn * nn - 1.0));
            tab.values.push_back(smooth + mass * lorentzian_periodic(w, eta));
        }
    } else {
        throw InvalidArgument("smoothed_variant: no eta-smoothed form for '" + statistic + "'");
    }
    return tab;
}

}  // namespace floqlab
