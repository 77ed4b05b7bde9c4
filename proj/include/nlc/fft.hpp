#pragma once

#include "nlc/types.hpp"

#include <cstddef>
#include <span>

namespace nlc {

/// In-place complex FFT of fixed size over an owned, SIMD-aligned buffer.
///
/// Plans are created with FFTW_ESTIMATE so the chosen algorithm, and hence
/// the rounding, is identical across runs. Planning is serialized internally;
/// execution is safe from any thread as long as each thread owns its plan.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);
    ~FftPlan();

    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    FftPlan(FftPlan&& other) noexcept;
    FftPlan& operator=(FftPlan&& other) noexcept;

    std::size_t size() const noexcept { return n_; }
    std::span<cdouble> buffer() noexcept;

    /// Unnormalized forward transform (exponent sign -1).
    void forward();
    /// Inverse transform including the 1/n normalization.
    void inverse();

private:
    void release() noexcept;

    std::size_t n_ = 0;
    cdouble* data_ = nullptr;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
};

/// Angular frequency (rad/ps) of FFT bin `k` for an `n`-point transform at
/// sample rate `sample_rate_hz`. Bins above n/2 map to negative frequencies.
double bin_angular_frequency(std::size_t k, std::size_t n, double sample_rate_hz);

} // namespace nlc
