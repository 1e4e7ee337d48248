#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "floqlab/common.hpp"
#include "floqlab/spectral.hpp"

namespace floqlab {

// Binary container for operators and spectral data. Little-endian layout:
//   magic "FLQB" | u32 version | u64 dim | u32 block mask
// followed by the blocks the mask announces, in mask-bit order:
//   bit 0: operator entries, row-major interleaved re/im f64
//   bit 1: quasienergies, N f64
//   bit 2: eigenvectors, row-major interleaved re/im f64
struct Container {
    u64 dim = 0;
    std::optional<MatrixXcd> op;
    std::optional<VectorXd> energies;
    std::optional<MatrixXcd> vectors;
};

namespace detail {

constexpr char kMagic[4] = {'F', 'L', 'Q', 'B'};
constexpr u32 kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("container: truncated file");
    return v;
}

inline void write_complex_matrix(std::ostream& out, const MatrixXcd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            write_pod(out, m(i, j).real());
            write_pod(out, m(i, j).imag());
        }
}

inline MatrixXcd read_complex_matrix(std::istream& in, u64 dim) {
    MatrixXcd m(dim, dim);
    for (u64 i = 0; i < dim; ++i)
        for (u64 j = 0; j < dim; ++j) {
            const double re = read_pod<double>(in);
            const double im = read_pod<double>(in);
            m(i, j) = cplx(re, im);
        }
    return m;
}

}  // namespace detail

inline void write_container(const std::string& path, const Container& c) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("container: cannot open '" + path + "' for writing");
    out.write(detail::kMagic, 4);
    detail::write_pod(out, detail::kVersion);
    detail::write_pod(out, c.dim);
    u32 mask = 0;
    if (c.op) mask |= 1u;
    if (c.energies) mask |= 2u;
    if (c.vectors) mask |= 4u;
    detail::write_pod(out, mask);
    if (c.op) detail::write_complex_matrix(out, *c.op);
    if (c.energies)
        for (u64 k = 0; k < c.dim; ++k) detail::write_pod(out, (*c.energies)(k));
    if (c.vectors) detail::write_complex_matrix(out, *c.vectors);
    if (!out) throw IoError("container: write to '" + path + "' failed");
}

inline Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("container: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, detail::kMagic, 4) != 0)
        throw IoError("container: bad magic in '" + path + "'");
    const u32 version = detail::read_pod<u32>(in);
    if (version != detail::kVersion)
        throw IoError("container: unsupported version " + std::to_string(version));
    Container c;
    c.dim = detail::read_pod<u64>(in);
    if (c.dim == 0 || c.dim > (1u << 20)) throw IoError("container: implausible dimension");
    const u32 mask = detail::read_pod<u32>(in);
    if (mask & 1u) c.op = detail::read_complex_matrix(in, c.dim);
    if (mask & 2u) {
        VectorXd e(c.dim);
        for (u64 k = 0; k < c.dim; ++k) e(k) = detail::read_pod<double>(in);
        c.energies = std::move(e);
    }
    if (mask & 4u) c.vectors = detail::read_complex_matrix(in, c.dim);
    return c;
}

inline std::string inspect_container(const std::string& path) {
    const Container c = read_container(path);
    std::ostringstream os;
    os << path << ": dim " << c.dim;
    if (c.op) {
        os << "; operator block (unitarity residual " << unitarity_residual(*c.op) << ")";
    }
    if (c.energies)
        os << "; quasienergies in [" << c.energies->minCoeff() << ", " << c.energies->maxCoeff()
           << "]";
    if (c.vectors) os << "; eigenvector block (V residual " << unitarity_residual(*c.vectors) << ")";
    return os.str();
}

// CSV output: UTF-8, header row, '.' decimal separator, scientific notation
// with 17 significant digits. Formatting is locale-free so identical runs
// produce byte-identical files.
inline std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw IoError("csv: cannot open '" + path + "' for writing");
    }

    void header(const std::vector<std::string>& cols) { line(cols); }

    void row(const std::vector<std::string>& cells) { line(cells); }

    static std::string num(double v) { return csv_number(v); }

  private:
    void line(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
};

}  // namespace floqlab
