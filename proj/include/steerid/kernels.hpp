#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace steerid {

// Dense row-major matrix of doubles. Small and unclever on purpose; the
// kernels below do the work.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double* operator[](std::size_t r) { return data.data() + r * cols; }
    const double* operator[](std::size_t r) const { return data.data() + r * cols; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { data.assign(data.size(), v); }
};

namespace kernels {

// Worker cap for all OpenMP regions in the library. 1 (the default) keeps
// every stage single-threaded. Parallel results are bit-identical to serial
// ones: each output element is reduced in a fixed order by exactly one
// thread, so the thread count never changes a rounding sequence.
void set_max_threads(int n);
int max_threads();

// Serial reference kernels. Kept un-parallelized for tests and benchmarks.
namespace serial {

// y = A x
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
// y += A x
void matvec_acc(const Matrix& a, std::span<const double> x, std::span<double> y);
// y = A^T x
void matvec_t(const Matrix& a, std::span<const double> x, std::span<double> y);
// A += u v^T
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> x, std::span<const double> y);

}  // namespace serial

// OpenMP variants with the same contracts (and bit-identical results).
namespace par {

void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
void matvec_acc(const Matrix& a, std::span<const double> x, std::span<double> y);
void matvec_t(const Matrix& a, std::span<const double> x, std::span<double> y);
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

}  // namespace par

// Dispatchers: route to par:: when threads are enabled and the operand is
// large enough to amortize the fork.
void matvec(const Matrix& a, std::span<const double> x, std::span<double> y);
void matvec_acc(const Matrix& a, std::span<const double> x, std::span<double> y);
void matvec_t(const Matrix& a, std::span<const double> x, std::span<double> y);
void add_outer(Matrix& a, std::span<const double> u, std::span<const double> v);

inline double dot(std::span<const double> x, std::span<const double> y) { return serial::dot(x, y); }

}  // namespace kernels
}  // namespace steerid
