#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "floqlab/rng.hpp"

using namespace floqlab;

TEST_CASE("streams are reproducible and order-independent", "[rng]") {
    RngStream a = RngStream::derived(42, {1, 2, 3});
    RngStream b = RngStream::derived(42, {1, 2, 3});
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // drawing stream k never depends on other streams having been touched
    RngStream c = RngStream::derived(42, {7});
    (void)c.next_u64();
    RngStream d = RngStream::derived(42, {1, 2, 3});
    RngStream e = RngStream::derived(42, {1, 2, 3});
    for (int i = 0; i < 100; ++i) (void)d.next_u64();
    RngStream f = RngStream::derived(42, {1, 2, 3});
    REQUIRE(e.next_u64() == f.next_u64());
}

TEST_CASE("distinct paths give distinct streams", "[rng]") {
    std::set<u64> firsts;
    for (u64 s = 0; s < 64; ++s) {
        RngStream r = RngStream::derived(9, {s});
        firsts.insert(r.next_u64());
    }
    REQUIRE(firsts.size() == 64);
    // key avalanche: one flipped seed bit decorrelates everything
    RngStream g = RngStream::derived(9, {0});
    RngStream h = RngStream::derived(9 ^ 1, {0});
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (g.next_u64() == h.next_u64()) ++same;
    REQUIRE(same == 0);
}

TEST_CASE("uniform doubles stay in range", "[rng]") {
    RngStream r = RngStream::derived(1, {0});
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        const double v = r.uniform_oc();
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("gaussian moments", "[rng]") {
    RngStream r = RngStream::derived(3, {0});
    const long m = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (long i = 0; i < m; ++i) {
        const double g = r.gaussian();
        s1 += g;
        s2 += g * g;
        s4 += g * g * g * g;
    }
    REQUIRE(std::abs(s1 / m) < 4.0 / std::sqrt(static_cast<double>(m)));
    REQUIRE(std::abs(s2 / m - 1.0) < 0.02);
    REQUIRE(std::abs(s4 / m - 3.0) < 0.1);

    // complex normal: E|z|^2 = 1
    double n2 = 0;
    for (long i = 0; i < m / 2; ++i) n2 += std::norm(r.complex_gaussian());
    REQUIRE(std::abs(n2 / (m / 2) - 1.0) < 0.02);
}

TEST_CASE("bit-uniformity smoke test", "[rng]") {
    RngStream r = RngStream::derived(11, {5});
    const int draws = 20000;
    std::vector<int> ones(64, 0);
    for (int i = 0; i < draws; ++i) {
        u64 x = r.next_u64();
        for (int b = 0; b < 64; ++b) ones[b] += static_cast<int>((x >> b) & 1);
    }
    for (int b = 0; b < 64; ++b) {
        const double p = static_cast<double>(ones[b]) / draws;
        REQUIRE(std::abs(p - 0.5) < 0.02);
    }
}
