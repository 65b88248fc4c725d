#pragma once

// Dense row-major matrix kit: storage, elementwise algebra, products,
// seeded RNG and CSV round trips. Everything else in the library is
// expressed in these primitives.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastmu {

namespace detail {

inline void check_arg(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

inline void check_domain(bool ok, const std::string& msg) {
    if (!ok) throw std::domain_error(msg);
}

} // namespace detail

/// Dense real matrix, row-major, double precision. Values are treated as
/// immutable once an operation returns them; all free functions below are
/// pure and safe to call concurrently on shared inputs.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    /// Builds from nested braces: {{1,2},{3,4}}. Rows must have equal length.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            detail::check_arg(r.size() == cols_, "ragged initializer rows");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const std::vector<double>& values() const { return data_; }

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool same_shape(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
}

inline bool all_finite(const DenseMatrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

/// C = A * B. Throws std::invalid_argument on inner-dimension mismatch.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    detail::check_arg(a.cols() == b.rows(), "matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.data() + k * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

inline DenseMatrix transposed(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

namespace detail {

template <class Op>
DenseMatrix zip(const DenseMatrix& a, const DenseMatrix& b, Op op, const char* name) {
    check_arg(same_shape(a, b), std::string(name) + ": shape mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = op(a.data()[i], b.data()[i]);
    return c;
}

} // namespace detail

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
    return detail::zip(a, b, [](double x, double y) { return x + y; }, "add");
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
    return detail::zip(a, b, [](double x, double y) { return x - y; }, "sub");
}

/// Hadamard product.
inline DenseMatrix mul_ew(const DenseMatrix& a, const DenseMatrix& b) {
    return detail::zip(a, b, [](double x, double y) { return x * y; }, "mul_ew");
}

/// Hadamard division. A zero divisor entry is a domain error; callers are
/// expected to clip divisors first.
inline DenseMatrix div_ew(const DenseMatrix& a, const DenseMatrix& b) {
    detail::check_arg(same_shape(a, b), "div_ew: shape mismatch");
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        detail::check_domain(b.data()[i] != 0.0, "div_ew: zero divisor entry");
        c.data()[i] = a.data()[i] / b.data()[i];
    }
    return c;
}

inline DenseMatrix sqrt_ew(const DenseMatrix& a) {
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) {
        detail::check_domain(a.data()[i] >= 0.0, "sqrt_ew: negative entry");
        c.data()[i] = std::sqrt(a.data()[i]);
    }
    return c;
}

/// Entrywise max(x, lo); the clipping operator that keeps factors strictly
/// positive.
inline DenseMatrix clip_min(const DenseMatrix& a, double lo) {
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = std::max(a.data()[i], lo);
    return c;
}

inline DenseMatrix scaled(const DenseMatrix& a, double s) {
    DenseMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = a.data()[i] * s;
    return c;
}

inline double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
    return std::sqrt(s);
}

/// ||a - b||_F^2 without forming the difference.
inline double squared_distance(const DenseMatrix& a, const DenseMatrix& b) {
    detail::check_arg(same_shape(a, b), "squared_distance: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return s;
}

inline double min_entry(const DenseMatrix& a) {
    detail::check_arg(!a.empty(), "min_entry: empty matrix");
    return *std::min_element(a.values().begin(), a.values().end());
}

inline double max_entry(const DenseMatrix& a) {
    detail::check_arg(!a.empty(), "max_entry: empty matrix");
    return *std::max_element(a.values().begin(), a.values().end());
}

/// Row sums, a vector of length rows().
inline std::vector<double> row_sums(const DenseMatrix& a) {
    std::vector<double> s(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s[i] += a(i, j);
    return s;
}

/// Column sums, a vector of length cols().
inline std::vector<double> col_sums(const DenseMatrix& a) {
    std::vector<double> s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s[j] += a(i, j);
    return s;
}

inline std::vector<double> column(const DenseMatrix& a, std::size_t j) {
    std::vector<double> c(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) c[i] = a(i, j);
    return c;
}

/// Seeded RNG. The stream is the C++ standard MT19937-64 generator with the
/// top 53 bits of each draw mapped onto [0,1), so the same seed reproduces
/// the exact same uniforms on any conforming implementation. Single-owner;
/// not shareable across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0,1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

/// Matrix with i.i.d. uniform [0,1) entries, filled in row-major order.
inline DenseMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    detail::check_arg(rows >= 1 && cols >= 1, "uniform_matrix: empty shape");
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Reads a matrix from comma-separated decimal text, one row per line, no
/// header. Parse failures report 1-based line and column.
inline DenseMatrix load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        std::size_t col_no = 0, pos = 0;
        while (true) {
            ++col_no;
            std::size_t end = line.find(',', pos);
            std::string field = line.substr(pos, end == std::string::npos ? end : end - pos);
            const std::size_t b = field.find_first_not_of(" \t");
            const std::size_t e = field.find_last_not_of(" \t");
            if (b == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ":" +
                                         std::to_string(col_no) + ": empty field");
            field = field.substr(b, e - b + 1);
            double v = 0.0;
            auto res = std::from_chars(field.data(), field.data() + field.size(), v);
            if (res.ec != std::errc() || res.ptr != field.data() + field.size() ||
                !std::isfinite(v))
                throw std::runtime_error(path + ":" + std::to_string(line_no) + ":" +
                                         std::to_string(col_no) + ": bad number '" + field + "'");
            data.push_back(v);
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (rows == 0) {
            cols = col_no;
        } else if (col_no != cols) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ":1: row has " + std::to_string(col_no) +
                                     " fields, expected " + std::to_string(cols));
        }
        ++rows;
    }
    if (rows == 0) throw std::runtime_error("load_csv: " + path + " is empty");
    DenseMatrix m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

/// Writes a matrix as comma-separated decimals, shortest round-trip form,
/// one row per line, no header.
inline void save_csv(const DenseMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot open " + path);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

} // namespace fastmu
