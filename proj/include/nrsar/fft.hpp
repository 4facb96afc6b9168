#pragma once

// Iterative radix-2 FFT with a precomputed twiddle table.

#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "nrsar/error.hpp"

namespace nrsar {

inline std::size_t next_pow2(std::size_t n) { return n <= 1 ? 1 : std::bit_ceil(n); }

class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
        if (n == 0 || !std::has_single_bit(n)) throw UsageError("FFT size must be a power of two");
        for (std::size_t k = 0; k < n / 2; ++k)
            twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
        const int bits = std::countr_zero(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
    }

    std::size_t size() const { return n_; }

    /// In-place transform; the inverse divides by n.
    void transform(std::span<std::complex<double>> data, bool inverse = false) const {
        if (data.size() != n_) throw DimensionError("FFT buffer size does not match plan");
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(data[i], data[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t step = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    std::complex<double> w = twiddle_[k * step];
                    if (inverse) w = std::conj(w);
                    const auto u = data[start + k];
                    const auto v = data[start + k + half] * w;
                    data[start + k] = u + v;
                    data[start + k + half] = u - v;
                }
            }
        }
        if (inverse) {
            const double scale = 1.0 / static_cast<double>(n_);
            for (auto& x : data) x *= scale;
        }
    }

    /// Zero-pads a real signal to the plan size and returns its spectrum.
    std::vector<std::complex<double>> forward_real(std::span<const double> x) const {
        if (x.size() > n_) throw DimensionError("signal longer than FFT size");
        std::vector<std::complex<double>> buf(n_);
        for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
        transform(buf);
        return buf;
    }

    /// Inverse transform keeping the real part of the first `count` samples.
    std::vector<double> inverse_real(std::vector<std::complex<double>> spectrum, std::size_t count) const {
        transform(spectrum, true);
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = spectrum[i].real();
        return out;
    }

private:
    std::size_t n_;
    std::vector<std::complex<double>> twiddle_;
    std::vector<std::size_t> rev_;
};

} // namespace nrsar
