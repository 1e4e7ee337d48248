#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "floqlab/eigencorr.hpp"
#include "test_util.hpp"

using namespace floqlab;

namespace {

std::vector<long> range_ts(long lo, long hi) {
    std::vector<long> ts;
    for (long t = lo; t <= hi; ++t) ts.push_back(t);
    return ts;
}

CorrEstimate estimate_time(const std::vector<SpectralData>& ens, const ProbeSpec& probe,
                           const std::vector<long>& ts, int blocks = 10) {
    CorrTimeEstimator est(probe, ts, blocks);
    BlockAccumulator acc = est.make_accumulator();
    for (size_t k = 0; k < ens.size(); ++k)
        est.accumulate(ens[k], block_of_sample(k, ens.size(), blocks), acc);
    return est.finalize(acc);
}

CorrEstimate estimate_freq(const std::vector<SpectralData>& ens, const ProbeSpec& probe,
                           const OmegaGrid& grid, int blocks = 10) {
    CorrFreqEstimator est(probe, grid, blocks);
    BlockAccumulator acc = est.make_accumulator();
    for (size_t k = 0; k < ens.size(); ++k)
        est.accumulate(ens[k], block_of_sample(k, ens.size(), blocks), acc);
    return est.finalize(acc);
}

}  // namespace

TEST_CASE("category combinatorics", "[eigencorr]") {
    REQUIRE(category_tuple_count(TupleCategory::cat1_offdiag, 4) == 12.0);
    REQUIRE(category_tuple_count(TupleCategory::cat2, 4) == 12.0);
    REQUIRE(category_tuple_count(TupleCategory::cat1_diag, 4) == 4.0);
    REQUIRE(category_tuple_count(TupleCategory::cat3, 4) == 228.0);
    // the enumerated category-3 probe at N = 4 is exhaustive under a big budget
    const ProbeSpec p = ProbeSpec::for_category(TupleCategory::cat3, 4, 1000, 1);
    REQUIRE(p.tuples.size() == 228);
    REQUIRE_FALSE(p.subsampled);
    for (const auto& t : p.tuples)
        REQUIRE(classify_tuple(t[0], t[1], t[2], t[3]) == TupleCategory::cat3);
    // subsampled when the budget is smaller
    const ProbeSpec q = ProbeSpec::for_category(TupleCategory::cat3, 8, 100, 1);
    REQUIRE(q.tuples.size() == 100);
    REQUIRE(q.subsampled);
}

TEST_CASE("all-index probe is exactly 1 at t = 0", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(8, 2, 31);
    const auto probe = ProbeSpec::explicit_tuples({{3, 3, 3, 3}});
    const VectorXcd v = corr_tuple_time_sample(ens[0], {3, 3, 3, 3}, {0});
    REQUIRE(v(0).real() == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(std::abs(v(0).imag()) < 1e-12);
}

TEST_CASE("per-sample unitarity identities", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(12, 3, 77);
    const int n = 12;
    for (const auto& sd : ens) {
        // row-sum identity: sum over n' of C-kernel (n, n', n', n) at any t is 1
        for (long t : {1L, 5L}) {
            cplx total(0.0, 0.0);
            for (int np = 0; np < n; ++np) {
                const VectorXcd v = corr_tuple_time_sample(sd, {2, np, np, 2}, {t});
                total += v(0);
            }
            REQUIRE(std::abs(total - cplx(1.0, 0.0)) < 1e-10);
        }
        // sum over (n, m) of the category-1 kernel equals |Tr U(t)|^2
        for (long t : {1L, 7L}) {
            cplx total(0.0, 0.0);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) total += corr_tuple_time_sample(sd, {a, a, b, b}, {t})(0);
            cplx tr(0.0, 0.0);
            for (int nu = 0; nu < n; ++nu)
                tr += std::polar(1.0, -sd.energies(nu) * static_cast<double>(t));
            REQUIRE(std::abs(total.real() - std::norm(tr)) < 1e-10);
            REQUIRE(std::abs(total.imag()) < 1e-10);
        }
    }
}

TEST_CASE("hermiticity of the time kernel", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(10, 2, 41);
    for (const auto& sd : ens) {
        // C_{n n' m' m}(t) = conj(C_{n' n m m'}(-t))
        const std::array<int, 4> tup{1, 4, 7, 2};
        const std::array<int, 4> swapped{4, 1, 2, 7};
        const VectorXcd a = corr_tuple_time_sample(sd, tup, {3});
        const VectorXcd b = corr_tuple_time_sample(sd, swapped, {-3});
        REQUIRE(std::abs(a(0) - std::conj(b(0))) < 1e-12);
    }
}

TEST_CASE("eigenvector phase gauge invariance", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(8, 1, 53);
    SpectralData sd = ens[0];
    const auto probe = ProbeSpec::for_category(TupleCategory::cat1_offdiag, 8, 1 << 20, 3);
    const auto ts = range_ts(0, 6);
    const VectorXcd before = corr_time_sample(sd, probe, ts);
    RngStream rng = RngStream::derived(99, {});
    for (int nu = 0; nu < 8; ++nu)
        sd.vectors.col(nu) *= std::polar(1.0, kTwoPi * rng.uniform01());
    const VectorXcd after = corr_time_sample(sd, probe, ts);
    REQUIRE((before - after).cwiseAbs().maxCoeff() < 1e-12);
    // same for an explicit mixed tuple
    const VectorXcd tb = corr_tuple_time_sample(ens[0], {0, 3, 5, 1}, ts);
    const VectorXcd ta = corr_tuple_time_sample(sd, {0, 3, 5, 1}, ts);
    REQUIRE((tb - ta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fast paths equal explicit tuple enumeration", "[eigencorr]") {
    const int n = 6;
    auto ens = testutil::diagonalize_cue_ensemble(n, 1, 97);
    const auto ts = range_ts(0, 5);
    // category 1 off-diagonal
    {
        const auto fast = ProbeSpec::for_category(TupleCategory::cat1_offdiag, n, 1 << 20, 5);
        REQUIRE(fast.fast_path);
        std::vector<std::array<int, 4>> tuples;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) tuples.push_back({a, a, b, b});
        const auto slow = ProbeSpec::explicit_tuples(tuples);
        const VectorXcd vf = corr_time_sample(ens[0], fast, ts);
        const VectorXcd vs = corr_time_sample(ens[0], slow, ts);
        REQUIRE((vf - vs).cwiseAbs().maxCoeff() < 1e-11);
    }
    // category 2
    {
        const auto fast = ProbeSpec::for_category(TupleCategory::cat2, n, 1 << 20, 5);
        std::vector<std::array<int, 4>> tuples;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) tuples.push_back({a, b, b, a});
        const auto slow = ProbeSpec::explicit_tuples(tuples);
        const VectorXcd vf = corr_time_sample(ens[0], fast, ts);
        const VectorXcd vs = corr_time_sample(ens[0], slow, ts);
        REQUIRE((vf - vs).cwiseAbs().maxCoeff() < 1e-11);
        // frequency-domain weights too
        const OmegaGrid grid = OmegaGrid::histogram(9);
        const CorrFreqSample ff = corr_freq_sample(ens[0], fast, grid);
        const CorrFreqSample fs = corr_freq_sample(ens[0], slow, grid);
        REQUIRE((ff.bins - fs.bins).cwiseAbs().maxCoeff() < 1e-10);
        REQUIRE(std::abs(ff.delta_weight - fs.delta_weight) < 1e-12);
    }
}

TEST_CASE("per-sample completeness integral", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(10, 3, 13);
    const OmegaGrid grid = OmegaGrid::histogram(21);
    for (const auto& sd : ens) {
        for (TupleCategory cat : {TupleCategory::cat1_offdiag, TupleCategory::cat1_diag,
                                  TupleCategory::cat2}) {
            const auto probe = ProbeSpec::for_category(cat, 10, 1 << 20, 4);
            const CorrFreqSample s = corr_freq_sample(sd, probe, grid);
            const double integral = s.bins.real().sum() * grid.width() + s.delta_weight.real();
            const double target = probe.integral_target(10);
            REQUIRE(std::abs(integral - target) < 1e-10);
            REQUIRE(s.integral_dev < 1e-10);
        }
        const auto mixed = ProbeSpec::explicit_tuples({{0, 1, 2, 3}, {2, 2, 5, 5}});
        const CorrFreqSample s = corr_freq_sample(sd, mixed, grid);
        const cplx integral = s.bins.sum() * grid.width() + s.delta_weight;
        REQUIRE(std::abs(integral - cplx(0.5, 0.0)) < 1e-10);
    }
}

TEST_CASE("time-domain estimates match the exact forms", "[eigencorr][slow]") {
    const int n = 16;
    const long m = 1500;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 1234);
    const auto ts = range_ts(1, 24);
    struct Case {
        TupleCategory cat;
    };
    for (TupleCategory cat : {TupleCategory::cat1_offdiag, TupleCategory::cat2,
                              TupleCategory::cat1_diag, TupleCategory::cat1}) {
        const auto probe = ProbeSpec::for_category(cat, n, 1 << 20, 8);
        const CorrEstimate est = estimate_time(ens, probe, ts);
        double max_z = 0.0;
        for (size_t k = 0; k < ts.size(); ++k) {
            const double pred = corr_rmt_category_time(ts[k], n, cat, Variant::exact);
            max_z = std::max(max_z, std::abs(est.re[k].value - pred) /
                                        std::max(est.re[k].error, 1e-14));
        }
        INFO(category_name(cat) << " max z = " << max_z);
        REQUIRE(max_z < 5.0);
    }
    // category 3 averages to zero within combined errors
    const auto p3 = ProbeSpec::for_category(TupleCategory::cat3, n, 128, 8);
    const CorrEstimate est3 = estimate_time(ens, p3, ts);
    double max_z3 = 0.0;
    for (size_t k = 0; k < ts.size(); ++k) {
        const double err = est3.combined_error(k);
        max_z3 = std::max(max_z3, std::hypot(est3.re[k].value, est3.im[k].value) / err);
    }
    INFO("cat3 max z = " << max_z3);
    REQUIRE(max_z3 < 5.0);
    REQUIRE_FALSE(est3.tuple_err.empty());
}

TEST_CASE("frequency-domain estimate matches bin-averaged forms", "[eigencorr][slow]") {
    const int n = 16;
    const long m = 2000;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 3456);
    const OmegaGrid grid = OmegaGrid::histogram(17);
    for (TupleCategory cat : {TupleCategory::cat1_offdiag, TupleCategory::cat2}) {
        const auto probe = ProbeSpec::for_category(cat, n, 1 << 20, 8);
        const CorrEstimate est = estimate_freq(ens, probe, grid);
        const CorrCoeffs wts = category_weights(cat, n);
        double max_z = 0.0;
        for (int b = 0; b < grid.bins; ++b) {
            const CorrCoeffs c = corr_coeffs_freq_smooth_binavg(grid.lower_edge(b),
                                                                grid.upper_edge(b), n, Variant::exact);
            const double pred = wts.c1 * c.c1 + wts.c2 * c.c2;
            max_z = std::max(max_z, std::abs(est.re[b].value - pred) /
                                        std::max(est.re[b].error, 1e-14));
        }
        const double delta_pred = corr_rmt_category_delta(n, cat, Variant::exact);
        max_z = std::max(max_z, std::abs(est.delta_re.value - delta_pred) /
                                    std::max(est.delta_re.error, 1e-14));
        INFO(category_name(cat) << " max z = " << max_z);
        REQUIRE(max_z < 5.0);
        REQUIRE(est.max_integral_dev < 1e-10);
    }
}

TEST_CASE("category 3 flat at zero in frequency domain", "[eigencorr][slow]") {
    const int n = 8;
    const long m = 3000;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 910);
    const OmegaGrid grid = OmegaGrid::histogram(9);
    const auto probe = ProbeSpec::for_category(TupleCategory::cat3, n, 200, 6);
    const CorrEstimate est = estimate_freq(ens, probe, grid);
    for (int b = 0; b < grid.bins; ++b) {
        REQUIRE(std::abs(est.re[b].value) < 4.5 * std::max(est.re[b].error, 1e-14));
        REQUIRE(std::abs(est.im[b].value) < 4.5 * std::max(est.im[b].error, 1e-14));
    }
}

TEST_CASE("fourier check: identity ensemble agrees exactly", "[eigencorr]") {
    // U = I has all quasienergies zero: C(t) is constant and the frequency
    // content is a pure delta; both domains must agree with zero tail
    SpectralData sd;
    sd.dim = 6;
    sd.energies = VectorXd::Zero(6);
    RngStream rng = RngStream::derived(4, {});
    sd.vectors = sample_cue(6, rng).mat();  // arbitrary unitary eigenbasis of I
    std::vector<SpectralData> ens{sd, sd};

    const auto probe = ProbeSpec::explicit_tuples({{0, 0, 1, 1}});
    const auto ts = range_ts(-8, 8);
    const OmegaGrid grid = OmegaGrid::histogram(9);
    const CorrEstimate te = estimate_time(ens, probe, ts, 2);
    const CorrEstimate fe = estimate_freq(ens, probe, grid, 2);
    const FourierCheckReport rep = fourier_check(te, fe, grid);
    REQUIRE(rep.max_abs_discrepancy < 1e-12);
}

TEST_CASE("fourier check: lorentzian mode is an algebraic identity", "[eigencorr]") {
    auto ens = testutil::diagonalize_cue_ensemble(8, 1, 2024);
    const auto probe = ProbeSpec::explicit_tuples({{0, 2, 3, 1}});
    const OmegaGrid grid = OmegaGrid::lorentzian(9, 0.4, 12);
    const auto ts = range_ts(-12, 12);
    const CorrEstimate te = estimate_time(ens, probe, ts, 1);
    const CorrEstimate fe = estimate_freq(ens, probe, grid, 1);
    const FourierCheckReport rep = fourier_check(te, fe, grid);
    REQUIRE(rep.max_abs_discrepancy < 1e-13);
}

TEST_CASE("fourier check: histogram mode within errors plus tail", "[eigencorr][slow]") {
    const int n = 16;
    auto ens = testutil::diagonalize_cue_ensemble(n, 400, 5678);
    const auto probe = ProbeSpec::for_category(TupleCategory::cat1_offdiag, n, 1 << 20, 3);
    const auto ts = range_ts(-3 * n, 3 * n);
    const OmegaGrid grid = OmegaGrid::histogram(9);
    const CorrEstimate te = estimate_time(ens, probe, ts, 10);
    const CorrEstimate fe = estimate_freq(ens, probe, grid, 10);
    const FourierCheckReport rep = fourier_check(te, fe, grid);
    INFO("discrepancy " << rep.max_abs_discrepancy << " combined " << rep.max_combined_error
                        << " tail " << rep.tail_bound);
    REQUIRE(rep.max_abs_discrepancy <= 4.0 * rep.max_combined_error + rep.tail_bound);
    // probe mismatch is rejected
    const auto other = ProbeSpec::for_category(TupleCategory::cat2, n, 1 << 20, 3);
    const CorrEstimate fo = estimate_freq(ens, other, grid, 10);
    REQUIRE_THROWS_AS(fourier_check(te, fo, grid), InvalidArgument);
}
