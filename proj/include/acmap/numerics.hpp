#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "acmap/error.hpp"

namespace acmap {

// Execution policy for the data-parallel kernels. `parallel` dispatches to
// the OpenMP path; `serial` forces the plain loop. Both produce identical
// results: parallel loops only ever write disjoint output slots and
// reductions are performed in index order.
enum class Exec { serial, parallel };

// Dense row-major matrix. 64-bit entries are the default throughout the
// engine; the template exists so the hot kernels can also be instantiated
// at 32-bit for speed-sensitive callers.
template <typename T>
class MatT {
public:
    MatT() = default;
    MatT(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, T(0)) {}
    MatT(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    static MatT identity(std::size_t n) {
        MatT m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept {
        return data_[r * cols_ + c];
    }

    T* row_ptr(std::size_t r) noexcept { return data_.data() + r * cols_; }
    const T* row_ptr(std::size_t r) const noexcept { return data_.data() + r * cols_; }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool same_shape(const MatT& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = MatT<double>;
using Matrix32 = MatT<float>;
using Vector = std::vector<double>;

namespace detail {
inline void require(bool cond, const std::string& message) {
    if (!cond) throw ShapeError(message);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Kernels. OpenMP versions live in the main namespace; `ref::` keeps the
// plain serial loops used as the reference in tests and the benchmark.
// ---------------------------------------------------------------------------

template <typename T>
MatT<T> matmul(const MatT<T>& a, const MatT<T>& b, Exec exec = Exec::parallel);

Vector matvec(const Matrix& a, const Vector& x);

Matrix transpose(const Matrix& a);

// y += alpha * x, entrywise over equal-shape matrices.
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

Matrix scaled(const Matrix& a, double alpha);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);

// a'b / (|a||b|), clamped to [-1, 1]. Zero-norm input is rejected.
double cosine_sim(const Vector& a, const Vector& b);

// Scales every row of `m` to unit L2 norm. A zero row is degenerate.
Matrix row_l2_normalize(const Matrix& m);

// Central-difference gradient of an arbitrary scalar loss over a matrix.
// Test oracle for the hand-derived gradients; not used on any hot path.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, const Matrix& at,
                        double step);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

// FNV-1a over raw little-endian bytes; used for bitwise-identity checks.
std::uint64_t checksum_bytes(const void* data, std::size_t n);
std::uint64_t checksum(const Vector& v);
std::uint64_t checksum(const Matrix& m);

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) &&
           (a.size() == 0 ||
            std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

inline bool bitwise_equal(const Vector& a, const Vector& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

namespace ref {

// Naive triple-loop product, kept serial on purpose.
template <typename T>
MatT<T> matmul(const MatT<T>& a, const MatT<T>& b) {
    detail::require(a.cols() == b.rows(), "matmul: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " * " +
                                              std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
    MatT<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

}  // namespace ref

template <typename T>
MatT<T> matmul(const MatT<T>& a, const MatT<T>& b, Exec exec) {
    detail::require(a.cols() == b.rows(), "matmul: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " * " +
                                              std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
    MatT<T> c(a.rows(), b.cols());
    const std::int64_t n = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for if (exec == Exec::parallel && n > 16) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t row = static_cast<std::size_t>(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(row, k);
            const T* brow = b.row_ptr(k);
            T* crow = c.row_ptr(row);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

}  // namespace acmap
