#include "acmap/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace acmap {

Vector matvec(const Matrix& a, const Vector& x) {
    detail::require(a.cols() == x.size(), "matvec: " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " * vec[" +
                                              std::to_string(x.size()) + "]");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void axpy_inplace(Matrix& y, double alpha, const Matrix& x) {
    detail::require(y.same_shape(x), "axpy: shape mismatch");
    double* yd = y.data().data();
    const double* xd = x.data().data();
    for (std::size_t i = 0; i < y.size(); ++i) yd[i] += alpha * xd[i];
}

Matrix scaled(const Matrix& a, double alpha) {
    Matrix out = a;
    for (double& v : out.data()) v *= alpha;
    return out;
}

double dot(const Vector& a, const Vector& b) {
    detail::require(a.size() == b.size(), "dot: dim mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double cosine_sim(const Vector& a, const Vector& b) {
    detail::require(a.size() == b.size(), "cosine_sim: dim mismatch");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateInputError("cosine_sim: zero-norm vector");
    }
    if (a == b) return 1.0;  // identical vectors: exact, not 1 +- ulp
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Matrix row_l2_normalize(const Matrix& m) {
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        const double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) acc += row[j] * row[j];
        const double norm = std::sqrt(acc);
        if (norm == 0.0) {
            throw DegenerateInputError("row_l2_normalize: zero row " + std::to_string(i));
        }
        double* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) orow[j] /= norm;
    }
    return out;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, const Matrix& at,
                        double step) {
    if (!(step > 0.0)) throw NumericError("finite_diff_grad: step must be positive");
    Matrix grad(at.rows(), at.cols());
    Matrix probe = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double saved = probe.data()[i];
        probe.data()[i] = saved + step;
        const double up = loss(probe);
        probe.data()[i] = saved - step;
        const double down = loss(probe);
        probe.data()[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_grad: non-finite loss at entry " + std::to_string(i));
        }
        grad.data()[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

bool all_finite(const Vector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.data()); }

std::uint64_t checksum_bytes(const void* data, std::size_t n) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t checksum(const Vector& v) {
    return checksum_bytes(v.data(), v.size() * sizeof(double));
}

std::uint64_t checksum(const Matrix& m) {
    std::uint64_t h = checksum_bytes(m.data().data(), m.size() * sizeof(double));
    h ^= m.rows() * 0x9e3779b97f4a7c15ull + m.cols();
    return h;
}

}  // namespace acmap
