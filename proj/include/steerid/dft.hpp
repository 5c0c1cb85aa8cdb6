#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace steerid {

// DFT of a fixed real input length. Radix-2 Cooley-Tukey when the length is
// a power of two, otherwise a direct transform against a precomputed twiddle
// table (window lengths here are small, e.g. 35 samples for a 3.5 s window,
// so O(n^2) with tables is cheap and exact-length).
class DftPlan {
public:
    explicit DftPlan(std::size_t n);

    std::size_t size() const { return n_; }

    // full complex spectrum X[0..n-1]
    void transform(std::span<const double> input, std::span<std::complex<double>> out) const;

    // |X[k]| for k = 0..n-1
    void magnitude(std::span<const double> input, std::span<double> out) const;

private:
    std::size_t n_;
    bool pow2_;
    std::vector<std::complex<double>> twiddle_;  // exp(-2*pi*i*k/n), k = 0..n-1
    std::vector<std::size_t> bitrev_;            // radix-2 permutation when pow2_
};

}  // namespace steerid
