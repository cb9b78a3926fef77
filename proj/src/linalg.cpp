#include "kbrn/linalg.hpp"

#include <cmath>
#include <string>

namespace kbrn {

namespace {

std::string shape_of(const Matrix& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector mat_vec(const Matrix& m, const Vector& v) {
    if (m.cols != v.size()) {
        throw ShapeError("mat_vec: matrix " + shape_of(m) + " against vector of length " +
                         std::to_string(v.size()));
    }
    Vector out(m.rows, 0.0);
    const double* row = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

Vector mat_tvec(const Matrix& m, const Vector& v) {
    if (m.rows != v.size()) {
        throw ShapeError("mat_tvec: matrix " + shape_of(m) + " against vector of length " +
                         std::to_string(v.size()));
    }
    Vector out(m.cols, 0.0);
    const double* row = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        const double vi = v[i];
        for (std::size_t j = 0; j < m.cols; ++j) out[j] += row[j] * vi;
    }
    return out;
}

void add_outer(Matrix& m, const Vector& u, const Vector& v) {
    if (m.rows != u.size() || m.cols != v.size()) {
        throw ShapeError("add_outer: matrix " + shape_of(m) + " against outer product " +
                         std::to_string(u.size()) + "x" + std::to_string(v.size()));
    }
    double* row = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        const double ui = u[i];
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += ui * v[j];
    }
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: vectors of length " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const Vector& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double inf_norm(const Matrix& m) {
    double best = 0.0;
    const double* row = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i, row += m.cols) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += std::fabs(row[j]);
        if (acc > best) best = acc;
    }
    return best;
}

double frobenius_sq(const Matrix& m) {
    double acc = 0.0;
    for (double x : m.data) acc += x * x;
    return acc;
}

Vector solve_linear(Matrix a, Vector b) {
    if (a.rows != a.cols || a.rows != b.size()) {
        throw ShapeError("solve_linear: matrix " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " against vector of length " +
                         std::to_string(b.size()));
    }
    const std::size_t n = a.rows;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::fabs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double cand = std::fabs(a(i, k));
            if (cand > best) {
                best = cand;
                pivot = i;
            }
        }
        if (best < 1e-300) {
            throw NumericalError("solve_linear: singular matrix at pivot " + std::to_string(k));
        }
        if (pivot != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
            std::swap(b[k], b[pivot]);
        }
        const double akk = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / akk;
            if (f == 0.0) continue;
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    Vector x(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double acc = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= a(ii, j) * x[j];
        x[ii] = acc / a(ii, ii);
    }
    return x;
}

}  // namespace kbrn
