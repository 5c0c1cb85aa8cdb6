#include "steerid/dft.hpp"

#include <cassert>
#include <cmath>

namespace steerid {

namespace {
bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace

DftPlan::DftPlan(std::size_t n) : n_(n), pow2_(is_pow2(n)) {
    assert(n >= 1);
    twiddle_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
        const double angle = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n_);
        twiddle_[k] = {std::cos(angle), std::sin(angle)};
    }
    if (pow2_) {
        bitrev_.resize(n_);
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n_) ++bits;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t rev = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) rev |= std::size_t{1} << (bits - 1 - b);
            bitrev_[i] = rev;
        }
    }
}

void DftPlan::transform(std::span<const double> input, std::span<std::complex<double>> out) const {
    assert(input.size() == n_ && out.size() == n_);
    if (pow2_) {
        for (std::size_t i = 0; i < n_; ++i) out[bitrev_[i]] = input[i];
        // iterative Cooley-Tukey, butterflies share the precomputed table
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t stride = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    const std::complex<double> w = twiddle_[k * stride];
                    const std::complex<double> even = out[start + k];
                    const std::complex<double> odd = w * out[start + k + len / 2];
                    out[start + k] = even + odd;
                    out[start + k + len / 2] = even - odd;
                }
            }
        }
        return;
    }
    for (std::size_t k = 0; k < n_; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n_; ++t) {
            const std::complex<double>& w = twiddle_[(k * t) % n_];
            re += input[t] * w.real();
            im += input[t] * w.imag();
        }
        out[k] = {re, im};
    }
}

void DftPlan::magnitude(std::span<const double> input, std::span<double> out) const {
    assert(input.size() == n_ && out.size() == n_);
    std::vector<std::complex<double>> spectrum(n_);
    transform(input, spectrum);
    for (std::size_t k = 0; k < n_; ++k) out[k] = std::abs(spectrum[k]);
}

}  // namespace steerid
