#include <doctest.h>

#include <vector>

#include "steerid/kernels.hpp"
#include "steerid/rng.hpp"

using namespace steerid;

namespace {
Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}
}  // namespace

TEST_CASE("matvec matches a naive triple loop") {
    Rng rng(1);
    const Matrix a = random_matrix(7, 5, rng);
    const auto x = random_vector(5, rng);
    std::vector<double> y(7);
    kernels::serial::matvec(a, x, y);
    for (std::size_t r = 0; r < 7; ++r) {
        double expect = 0.0;
        for (std::size_t c = 0; c < 5; ++c) expect += a.at(r, c) * x[c];
        CHECK(y[r] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("parallel kernels are bit-identical to serial") {
    Rng rng(2);
    const Matrix a = random_matrix(193, 151, rng);
    const auto x = random_vector(151, rng);
    const auto xr = random_vector(193, rng);

    kernels::set_max_threads(4);
    std::vector<double> ys(193), yp(193);
    kernels::serial::matvec(a, x, ys);
    kernels::par::matvec(a, x, yp);
    CHECK(ys == yp);

    std::vector<double> ts(151), tp(151);
    kernels::serial::matvec_t(a, xr, ts);
    kernels::par::matvec_t(a, xr, tp);
    CHECK(ts == tp);

    Matrix os = a, op = a;
    kernels::serial::add_outer(os, xr, x);
    kernels::par::add_outer(op, xr, x);
    CHECK(os.data == op.data);

    std::vector<double> accs = ys, accp = ys;
    kernels::serial::matvec_acc(a, x, accs);
    kernels::par::matvec_acc(a, x, accp);
    CHECK(accs == accp);
    kernels::set_max_threads(1);
}

TEST_CASE("matvec_acc accumulates on top of existing values") {
    Rng rng(3);
    const Matrix a = random_matrix(4, 4, rng);
    const auto x = random_vector(4, rng);
    std::vector<double> once(4), twice(4);
    kernels::serial::matvec(a, x, once);
    kernels::serial::matvec(a, x, twice);
    kernels::serial::matvec_acc(a, x, twice);
    for (std::size_t i = 0; i < 4; ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
}
