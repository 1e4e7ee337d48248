#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "floqlab/rmt.hpp"
#include "floqlab/spectral.hpp"
#include "test_util.hpp"

using namespace floqlab;

TEST_CASE("identity diagonalizes to zero quasienergies", "[spectral]") {
    const auto u = UnitaryMatrix::checked(MatrixXcd::Identity(4, 4));
    const SpectralData sd = diagonalize(u);
    REQUIRE(sd.energies.cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(sd.residual < 1e-12);
}

TEST_CASE("diagonal unitary phases read off and sorted", "[spectral]") {
    MatrixXcd m = MatrixXcd::Zero(4, 4);
    m(0, 0) = 1.0;
    m(1, 1) = cplx(0.0, 1.0);
    m(2, 2) = -1.0;
    m(3, 3) = cplx(0.0, -1.0);
    const SpectralData sd = diagonalize(UnitaryMatrix::checked(m));
    // eigenvalue e^{-iE}: 1 -> 0, i -> -pi/2, -1 -> pi, -i -> pi/2
    REQUIRE(sd.energies(0) == Catch::Approx(-kPi / 2).margin(1e-12));
    REQUIRE(sd.energies(1) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(sd.energies(2) == Catch::Approx(kPi / 2).margin(1e-12));
    REQUIRE(sd.energies(3) == Catch::Approx(kPi).margin(1e-12));
}

TEST_CASE("reconstruction residual for a CUE sample", "[spectral]") {
    RngStream rng = RngStream::derived(12, {});
    const UnitaryMatrix u = sample_cue(8, rng);
    const SpectralData sd = diagonalize(u);
    REQUIRE(sd.residual <= 1e-8);
    REQUIRE(sd.vtv_residual <= 1e-8);
    MatrixXcd recon = MatrixXcd::Zero(8, 8);
    for (int k = 0; k < 8; ++k)
        recon += std::polar(1.0, -sd.energies(k)) * (sd.vectors.col(k) * sd.vectors.col(k).adjoint());
    REQUIRE((recon - u.mat()).cwiseAbs().maxCoeff() <= 1e-8);
    for (int k = 1; k < 8; ++k) REQUIRE(sd.energies(k) >= sd.energies(k - 1));
}

TEST_CASE("omega grid tiles the period with a central bin", "[spectral]") {
    REQUIRE_THROWS_AS(OmegaGrid::histogram(64), InvalidArgument);
    const OmegaGrid g = OmegaGrid::histogram(9);
    REQUIRE(g.center(g.center_index()) == 0.0);
    double span = 0.0;
    for (int b = 0; b < g.bins; ++b) span += g.upper_edge(b) - g.lower_edge(b);
    REQUIRE(span == Catch::Approx(kTwoPi));
    REQUIRE(g.bin_of(0.0) == g.center_index());
    REQUIRE(g.bin_of(kPi) == g.bins - 1);
    REQUIRE(g.bin_of(-kPi + 1e-12) == 0);
    // wrapping: just above pi lands at the bottom of the window
    REQUIRE(g.bin_of(kPi + 0.1) == g.bin_of(-kPi + 0.1));
}

TEST_CASE("r2 per-sample integral is exactly N^2", "[spectral]") {
    auto ens = testutil::diagonalize_cue_ensemble(12, 3, 808);
    const OmegaGrid grid = OmegaGrid::histogram(31);
    for (const auto& sd : ens) {
        const VectorXd h = r2_sample(sd, grid);
        REQUIRE(h.sum() * grid.width() == Catch::Approx(144.0).epsilon(1e-13));
        // central bin holds at least the N coincident pairs
        REQUIRE(h(grid.center_index()) * grid.width() >= 12.0);
    }
}

TEST_CASE("r2 estimate matches the closed form", "[spectral][slow]") {
    const int n = 32;
    const long m = 1200;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 4242);
    const OmegaGrid grid = OmegaGrid::histogram(33);
    VectorXd sum = VectorXd::Zero(grid.bins), sumsq = VectorXd::Zero(grid.bins);
    for (const auto& sd : ens) {
        const VectorXd h = r2_sample(sd, grid);
        sum += h;
        sumsq += h.cwiseProduct(h);
    }
    double max_z = 0.0;
    for (int b = 0; b < grid.bins; ++b) {
        double pred = r2_cue_smooth_binavg(grid.lower_edge(b), grid.upper_edge(b), n);
        if (b == grid.center_index()) pred += r2_cue_delta_mass(n) / grid.width();
        const double mean = sum(b) / m;
        const double var = sumsq(b) / m - mean * mean;
        const double se = std::sqrt(var / (m - 1.0));
        max_z = std::max(max_z, std::abs(mean - pred) / se);
    }
    INFO("max z = " << max_z);
    REQUIRE(max_z < 5.0);
}

TEST_CASE("sff closed form", "[spectral]") {
    REQUIRE(sff_cue(0, 16) == 256.0);
    REQUIRE(sff_cue(5, 16) == 5.0);
    REQUIRE(sff_cue(40, 16) == 16.0);
    REQUIRE(sff_cue(-5, 16) == 5.0);
}

TEST_CASE("sff estimate: exact at t=0, ramp within errors", "[spectral][slow]") {
    const int n = 32;
    const long m = 800;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 616);
    const int t_max = 40;
    VectorXd sum = VectorXd::Zero(t_max + 1), sumsq = VectorXd::Zero(t_max + 1);
    for (const auto& sd : ens) {
        const VectorXd k = sff_sample(sd, t_max);
        sum += k;
        sumsq += k.cwiseProduct(k);
    }
    REQUIRE(sum(0) / m == Catch::Approx(1024.0).epsilon(1e-12));
    REQUIRE(sumsq(0) / m - std::pow(sum(0) / m, 2) == Catch::Approx(0.0).margin(1e-6));
    for (int t : {8, 32, 40}) {
        const double mean = sum(t) / m;
        const double se = std::sqrt((sumsq(t) / m - mean * mean) / (m - 1.0));
        REQUIRE(std::abs(mean - sff_cue(t, n)) < 4.5 * se);
    }
}

TEST_CASE("psff at t=0 is N * N_A and closed forms agree", "[spectral]") {
    const int n = 16, na = 4;
    const auto split = SubsystemSplit::block(n, na);
    auto ens = testutil::diagonalize_cue_ensemble(n, 2, 99);
    const VectorXd k = psff_sample(ens[0], split, 4);
    REQUIRE(k(0) == Catch::Approx(static_cast<double>(n) * na).epsilon(1e-10));

    REQUIRE(psff_rmt(0, n, na, Variant::exact) == Catch::Approx(static_cast<double>(n) * na));
    // plateau value N (N_A + N/N_A) / (N+1)
    REQUIRE(psff_rmt(100, n, na, Variant::exact) ==
            Catch::Approx(n * (na + static_cast<double>(n) / na) / (n + 1.0)));
    // leading vs exact gap is O(1/N) relative
    for (long t : {1L, 5L, 20L}) {
        const double ex = psff_rmt(t, n, na, Variant::exact);
        const double ld = psff_rmt(t, n, na, Variant::leading);
        REQUIRE(std::abs(ex - ld) / ex < 2.0 / n);
    }
}

TEST_CASE("psff estimate matches the exact prediction", "[spectral][slow]") {
    const int n = 16, na = 4;
    const long m = 600;
    const auto split = SubsystemSplit::block(n, na);
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 2718);
    const int t_max = 24;
    VectorXd sum = VectorXd::Zero(t_max + 1), sumsq = VectorXd::Zero(t_max + 1);
    for (const auto& sd : ens) {
        const VectorXd k = psff_sample(sd, split, t_max);
        sum += k;
        sumsq += k.cwiseProduct(k);
    }
    double max_z = 0.0;
    for (int t = 1; t <= t_max; ++t) {
        const double mean = sum(t) / m;
        const double se = std::sqrt((sumsq(t) / m - mean * mean) / (m - 1.0));
        max_z = std::max(max_z, std::abs(mean - psff_rmt(t, n, na, Variant::exact)) / se);
    }
    INFO("max z = " << max_z);
    REQUIRE(max_z < 5.0);
}

TEST_CASE("degenerate subsystems are rejected with guidance", "[spectral]") {
    REQUIRE_THROWS_AS(SubsystemSplit::block(16, 1), InvalidArgument);
    REQUIRE_THROWS_AS(SubsystemSplit::block(16, 16), InvalidArgument);
    REQUIRE_THROWS_AS(SubsystemSplit::block(16, 5), InvalidArgument);
    try {
        SubsystemSplit::block(16, 16);
    } catch (const InvalidArgument& e) {
        REQUIRE(std::string(e.what()).find("Tr U") != std::string::npos);
    }
}

TEST_CASE("site-subset split matches block split on a chain prefix", "[spectral]") {
    CircuitSpec spec;
    spec.lattice.dims = {4};
    spec.lattice.boundary = {Boundary::open};
    spec.q = 2;
    // sites {0,1} are the most significant digits, so the site split equals
    // the plain block split with N_A = 4
    const auto s1 = SubsystemSplit::sites(spec, {0, 1});
    const auto s2 = SubsystemSplit::block(16, 4);
    for (int idx = 0; idx < 16; ++idx) {
        REQUIRE(s1.split(idx) == s2.split(idx));
    }
    // a non-prefix subset still partitions consistently
    const auto s3 = SubsystemSplit::sites(spec, {1, 3});
    std::array<int, 16> seen{};
    for (int idx = 0; idx < 16; ++idx) {
        const auto [a, b] = s3.split(idx);
        REQUIRE(a >= 0);
        REQUIRE(a < 4);
        REQUIRE(b >= 0);
        REQUIRE(b < 4);
        ++seen[a * 4 + b];
    }
    for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("truncated sff resummation reproduces binned r2", "[spectral][slow]") {
    const int n = 16;
    const long m = 400;
    const int t_max = 3 * n;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 777001);
    const OmegaGrid grid = OmegaGrid::histogram(9);

    VectorXd ksum = VectorXd::Zero(t_max + 1), ksq = VectorXd::Zero(t_max + 1);
    VectorXd rsum = VectorXd::Zero(grid.bins), rsq = VectorXd::Zero(grid.bins);
    for (const auto& sd : ens) {
        const VectorXd k = sff_sample(sd, t_max);
        ksum += k;
        ksq += k.cwiseProduct(k);
        const VectorXd h = r2_sample(sd, grid);
        rsum += h;
        rsq += h.cwiseProduct(h);
    }
    // K(t) plateaus at the coincident-pair mass N; the remainder resums to
    // the smooth binned density. The truncation tail is MC noise only,
    // because the exact K is constant beyond t = N.
    for (int b = 0; b < grid.bins; ++b) {
        double recon = (b == grid.center_index()) ? n / grid.width() : 0.0;
        double recon_var = 0.0;
        for (int t = -t_max; t <= t_max; ++t) {
            const int at = std::abs(t);
            const double coeff =
                (t == 0) ? grid.width() / kTwoPi
                         : (std::sin(grid.upper_edge(b) * t) - std::sin(grid.lower_edge(b) * t)) /
                               (kTwoPi * t);
            const double kmean = ksum(at) / m;
            const double kvar = (ksq(at) / m - kmean * kmean) / (m - 1.0);
            recon += (kmean - n) * coeff / grid.width();
            recon_var += kvar * coeff * coeff / (grid.width() * grid.width());
        }
        const double rmean = rsum(b) / m;
        const double rerr = std::sqrt((rsq(b) / m - rmean * rmean) / (m - 1.0));
        const double combined = std::sqrt(recon_var + rerr * rerr);
        REQUIRE(std::abs(recon - rmean) < 5.0 * combined + 1e-9);
    }
}

TEST_CASE("lorentzian-mode r2 against the eta-resummed prediction", "[spectral][slow]") {
    const int n = 16;
    const long m = 400;
    const double eta = 0.25;
    auto ens = testutil::diagonalize_cue_ensemble(n, m, 5151);
    const OmegaGrid grid = OmegaGrid::lorentzian(17, eta, 120);  // e^-30 truncation
    VectorXd sum = VectorXd::Zero(grid.bins), sumsq = VectorXd::Zero(grid.bins);
    for (const auto& sd : ens) {
        const VectorXd k = sff_sample(sd, grid.t_max);
        VectorXd v(grid.bins);
        for (int b = 0; b < grid.bins; ++b) {
            const double w = grid.center(b);
            double s = k(0);
            for (int t = 1; t <= grid.t_max; ++t)
                s += 2.0 * std::exp(-eta * t) * std::cos(w * t) * k(t);
            v(b) = s / kTwoPi;
        }
        sum += v;
        sumsq += v.cwiseProduct(v);
    }
    double max_z = 0.0;
    for (int b = 0; b < grid.bins; ++b) {
        const double pred = r2_smoothed_eta(grid.center(b), n, eta);
        const double mean = sum(b) / m;
        const double se = std::sqrt((sumsq(b) / m - mean * mean) / (m - 1.0));
        max_z = std::max(max_z, std::abs(mean - pred) / se);
    }
    INFO("max z = " << max_z);
    REQUIRE(max_z < 5.0);
}
