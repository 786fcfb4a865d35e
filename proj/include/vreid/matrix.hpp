#ifndef VREID_MATRIX_HPP
#define VREID_MATRIX_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace vreid {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Small and dumb on purpose: every
// consumer in this project iterates explicitly.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeMismatch("matmul: inner dimensions differ");
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                out(i, j) += aik * b(k, j);
        }
    return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ShapeMismatch("matmul_nt: inner dimensions differ");
    Matrix out(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k)
                s += a(i, k) * b(j, k);
            out(i, j) = s;
        }
    return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ShapeMismatch("matmul_tn: inner dimensions differ");
    Matrix out(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k)
        for (std::size_t i = 0; i < a.cols; ++i) {
            double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j)
                out(i, j) += aki * b(k, j);
        }
    return out;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
    if (a.cols != x.size()) throw ShapeMismatch("matvec: dimension mismatch");
    std::vector<double> out(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j)
            s += a(i, j) * x[j];
        out[i] = s;
    }
    return out;
}

} // namespace vreid

#endif // VREID_MATRIX_HPP
