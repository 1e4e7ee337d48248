#pragma once

#include <algorithm>
#include <cstdlib>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "floqlab/common.hpp"
#include "floqlab/haar.hpp"
#include "floqlab/rng.hpp"

namespace floqlab {

enum class Boundary { open, periodic };

// Qudit lattice: sites enumerated row-major over dims. The computational
// basis index is the base-q number whose most significant digit is site 0,
// so a gate on sites (0,1) of a 3-site chain embeds as kron(G, I_q).
struct Lattice {
    std::vector<int> dims;
    std::vector<Boundary> boundary;

    int axes() const { return static_cast<int>(dims.size()); }

    int sites() const {
        int n = 1;
        for (int d : dims) n *= d;
        return n;
    }

    std::vector<int> coords(int site) const {
        std::vector<int> c(dims.size());
        for (int a = axes() - 1; a >= 0; --a) {
            c[a] = site % dims[a];
            site /= dims[a];
        }
        return c;
    }

    int site_id(const std::vector<int>& c) const {
        int s = 0;
        for (int a = 0; a < axes(); ++a) s = s * dims[a] + c[a];
        return s;
    }

    bool are_neighbors(int a, int b) const {
        if (a == b) return false;
        const auto ca = coords(a), cb = coords(b);
        int diff_axis = -1;
        for (int ax = 0; ax < axes(); ++ax) {
            if (ca[ax] != cb[ax]) {
                if (diff_axis >= 0) return false;
                diff_axis = ax;
            }
        }
        if (diff_axis < 0) return false;
        const int d = std::abs(ca[diff_axis] - cb[diff_axis]);
        if (d == 1) return true;
        return boundary[diff_axis] == Boundary::periodic && d == dims[diff_axis] - 1 &&
               dims[diff_axis] > 2;
    }
};

using SitePair = std::pair<int, int>;
using Substep = std::vector<SitePair>;

struct CircuitSpec {
    Lattice lattice;
    int q = 2;
    std::vector<Substep> schedule;
    long ensemble_size = 1;
    u64 master_seed = 0;
    long dim_cap = 4096;

    long hilbert_dim() const {
        long n = 1;
        for (int s = 0; s < lattice.sites(); ++s) {
            if (n > dim_cap) return n;  // already beyond any sane cap
            n *= q;
        }
        return n;
    }
};

struct SpecIssue {
    enum class Severity { error, warning };
    Severity severity;
    std::string message;
};

// Checks every invariant and enumerates all violations instead of stopping
// at the first. A pair repeated across substeps of one period is legal but
// flagged as a warning.
inline std::vector<SpecIssue> validate_spec(const CircuitSpec& spec) {
    std::vector<SpecIssue> issues;
    auto err = [&](std::string m) {
        issues.push_back({SpecIssue::Severity::error, std::move(m)});
    };
    auto warn = [&](std::string m) {
        issues.push_back({SpecIssue::Severity::warning, std::move(m)});
    };

    if (spec.lattice.dims.empty()) err("lattice has no axes");
    for (size_t a = 0; a < spec.lattice.dims.size(); ++a)
        if (spec.lattice.dims[a] < 1)
            err("lattice axis " + std::to_string(a) + " has non-positive extent");
    if (spec.lattice.boundary.size() != spec.lattice.dims.size())
        err("boundary list length does not match number of axes");
    if (spec.q < 2) err("local dimension q must be >= 2");
    if (spec.ensemble_size < 1) err("ensemble_size must be >= 1");
    if (!issues.empty()) return issues;  // later checks need a well-formed lattice

    const int sites = spec.lattice.sites();
    if (spec.hilbert_dim() > spec.dim_cap)
        err("Hilbert dimension q^sites exceeds the dense-matrix cap " +
            std::to_string(spec.dim_cap));

    std::set<std::pair<int, int>> seen_pairs;
    for (size_t s = 0; s < spec.schedule.size(); ++s) {
        std::set<int> used;
        for (const auto& [a, b] : spec.schedule[s]) {
            const std::string where = "substep " + std::to_string(s) + " pair (" +
                                      std::to_string(a) + "," + std::to_string(b) + ")";
            if (a < 0 || a >= sites || b < 0 || b >= sites) {
                err(where + ": site out of range");
                continue;
            }
            if (a == b) {
                err(where + ": pair uses the same site twice");
                continue;
            }
            for (int site : {a, b}) {
                if (!used.insert(site).second)
                    err(where + ": site " + std::to_string(site) +
                        " already used in this substep");
            }
            if (!spec.lattice.are_neighbors(a, b))
                err(where + ": sites are not nearest neighbors under the declared boundary");
            auto key = std::minmax(a, b);
            if (!seen_pairs.insert(key).second)
                warn(where + ": pair already gated earlier in this period");
        }
    }
    return issues;
}

inline bool has_errors(const std::vector<SpecIssue>& issues) {
    for (const auto& i : issues)
        if (i.severity == SpecIssue::Severity::error) return true;
    return false;
}

inline std::string format_issues(const std::vector<SpecIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
        out += (i.severity == SpecIssue::Severity::error ? "error: " : "warning: ");
        out += i.message;
        out += '\n';
    }
    return out;
}

// Default schedules. Brickwork: per axis, all even-offset bonds, then all
// odd-offset bonds. The periodic wrap bond joins the odd layer when the
// extent is even; odd extents cannot 2-color the ring, so the wrap bond
// gets its own substep. Sequential: every bond as its own substep,
// lexicographic order.
inline std::vector<Substep> brickwork_schedule(const Lattice& lat) {
    std::vector<Substep> schedule;
    for (int ax = 0; ax < lat.axes(); ++ax) {
        const int extent = lat.dims[ax];
        if (extent < 2) continue;
        const bool wraps = lat.boundary[ax] == Boundary::periodic && extent > 2;
        Substep wrap_step;
        for (int parity = 0; parity < 2; ++parity) {
            Substep step;
            const int n = lat.sites();
            for (int s = 0; s < n; ++s) {
                auto c = lat.coords(s);
                if (c[ax] % 2 != parity) continue;
                auto c2 = c;
                c2[ax] = c[ax] + 1;
                if (c2[ax] >= extent) {
                    if (!wraps) continue;
                    c2[ax] = 0;
                    if (extent % 2 == 0) {
                        step.push_back({s, lat.site_id(c2)});  // fits the odd layer
                    } else {
                        wrap_step.push_back({s, lat.site_id(c2)});
                    }
                    continue;
                }
                step.push_back({s, lat.site_id(c2)});
            }
            if (!step.empty()) schedule.push_back(std::move(step));
        }
        if (!wrap_step.empty()) schedule.push_back(std::move(wrap_step));
    }
    return schedule;
}

inline std::vector<Substep> sequential_schedule(const Lattice& lat) {
    std::vector<Substep> schedule;
    const int n = lat.sites();
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (lat.are_neighbors(a, b)) schedule.push_back({{a, b}});
    return schedule;
}

namespace detail {

inline int site_stride(int site, int sites, int q) {
    int stride = 1;
    for (int s = sites - 1; s > site; --s) stride *= q;
    return stride;
}

}  // namespace detail

// Left-multiplies the embedded two-site gate into `acc`, transforming each
// column in place. Index arithmetic over tensor slots; the Kronecker factor
// is never materialized. Gate rows/cols are indexed as (digit_a * q + digit_b).
inline void apply_two_site_gate(MatrixXcd& acc, const MatrixXcd& gate, int site_a, int site_b,
                                int q, int sites) {
    const int n = static_cast<int>(acc.rows());
    const int qq = q * q;
    if (gate.rows() != qq || gate.cols() != qq)
        throw InvalidArgument("apply_two_site_gate: gate dimension must be q^2");
    if (site_a == site_b || site_a < 0 || site_b < 0 || site_a >= sites || site_b >= sites)
        throw InvalidArgument("apply_two_site_gate: sites must be distinct and in range");

    const int sa = detail::site_stride(site_a, sites, q);
    const int sb = detail::site_stride(site_b, sites, q);

    // base indices: all n with digit_a == digit_b == 0
    std::vector<int> bases;
    bases.reserve(n / qq);
    for (int idx = 0; idx < n; ++idx) {
        if ((idx / sa) % q == 0 && (idx / sb) % q == 0) bases.push_back(idx);
    }

    VectorXcd in(qq), out(qq);
    for (int col = 0; col < n; ++col) {
        for (int base : bases) {
            for (int ia = 0; ia < q; ++ia)
                for (int ib = 0; ib < q; ++ib) in(ia * q + ib) = acc(base + ia * sa + ib * sb, col);
            out.noalias() = gate * in;
            for (int ia = 0; ia < q; ++ia)
                for (int ib = 0; ib < q; ++ib) acc(base + ia * sa + ib * sb, col) = out(ia * q + ib);
        }
    }
}

// Same embedding for a one-site q x q operator.
inline void apply_single_site_gate(MatrixXcd& acc, const MatrixXcd& gate, int site, int q,
                                   int sites) {
    const int n = static_cast<int>(acc.rows());
    if (gate.rows() != q || gate.cols() != q)
        throw InvalidArgument("apply_single_site_gate: gate dimension must be q");
    if (site < 0 || site >= sites) throw InvalidArgument("apply_single_site_gate: site out of range");
    const int s = detail::site_stride(site, sites, q);
    std::vector<int> bases;
    bases.reserve(n / q);
    for (int idx = 0; idx < n; ++idx)
        if ((idx / s) % q == 0) bases.push_back(idx);
    VectorXcd in(q), out(q);
    for (int col = 0; col < n; ++col) {
        for (int base : bases) {
            for (int i = 0; i < q; ++i) in(i) = acc(base + i * s, col);
            out.noalias() = gate * in;
            for (int i = 0; i < q; ++i) acc(base + i * s, col) = out(i);
        }
    }
}

// One period of the circuit: the product over substeps (earliest substep
// acting first on states) of independently Haar-distributed two-site gates.
// The gate stream is keyed by (master_seed, sample, substep, pair), so any
// sample rebuilds bit-identically in isolation.
inline UnitaryMatrix build_floquet(const CircuitSpec& spec, long sample_index) {
    auto issues = validate_spec(spec);
    if (has_errors(issues))
        throw InvalidArgument("build_floquet: invalid circuit spec\n" + format_issues(issues));

    const int n = static_cast<int>(spec.hilbert_dim());
    const int sites = spec.lattice.sites();
    MatrixXcd acc = MatrixXcd::Identity(n, n);
    for (size_t s = 0; s < spec.schedule.size(); ++s) {
        for (const auto& [a, b] : spec.schedule[s]) {
            RngStream rng = RngStream::derived(
                spec.master_seed, {0x67617465ull /* gate tag */, static_cast<u64>(sample_index),
                                   static_cast<u64>(s), static_cast<u64>(a), static_cast<u64>(b)});
            UnitaryMatrix gate = sample_cue(spec.q * spec.q, rng);
            apply_two_site_gate(acc, gate.mat(), a, b, spec.q, sites);
        }
    }
    return UnitaryMatrix::checked(std::move(acc), 1e-10);
}

}  // namespace floqlab
