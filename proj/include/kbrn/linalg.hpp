#pragma once

#include <cstddef>
#include <vector>

#include "kbrn/errors.hpp"

namespace kbrn {

using Vector = std::vector<double>;

// Dense row-major matrix. Problem sizes here are tens of units, so there is
// no blocked or sparse storage; everything is double precision.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }

    static Matrix identity(std::size_t n);
};

// result[i] = sum_j m(i,j) * v[j]; throws ShapeError naming both shapes.
Vector mat_vec(const Matrix& m, const Vector& v);

// result[j] = sum_i m(i,j) * v[i]  (i.e. m^T v).
Vector mat_tvec(const Matrix& m, const Vector& v);

// m += u v^T (outer-product accumulation used by backward passes).
void add_outer(Matrix& m, const Vector& u, const Vector& v);

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& v);

// max_i sum_j |m(i,j)|
double inf_norm(const Matrix& m);

// Sum of squared entries.
double frobenius_sq(const Matrix& m);

// Solves A x = b by Gaussian elimination with partial pivoting.
// Throws NumericalError if a pivot is (numerically) zero.
Vector solve_linear(Matrix a, Vector b);

}  // namespace kbrn
