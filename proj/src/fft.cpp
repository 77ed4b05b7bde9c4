#include "nlc/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>
#include <utility>

namespace nlc {

namespace {

std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

} // namespace

FftPlan::FftPlan(std::size_t n) : n_(n)
{
    require(n > 0, "fft error", "transform size must be positive");
    std::lock_guard lock(planner_mutex());
    data_ = reinterpret_cast<cdouble*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (data_ == nullptr) throw std::bad_alloc();
    auto* buf = reinterpret_cast<fftw_complex*>(data_);
    const int size = static_cast<int>(n);
    fwd_ = fftw_plan_dft_1d(size, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_1d(size, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
    for (std::size_t i = 0; i < n; ++i) data_[i] = 0.0;
}

FftPlan::~FftPlan() { release(); }

FftPlan::FftPlan(FftPlan&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      data_(std::exchange(other.data_, nullptr)),
      fwd_(std::exchange(other.fwd_, nullptr)),
      inv_(std::exchange(other.inv_, nullptr))
{
}

FftPlan& FftPlan::operator=(FftPlan&& other) noexcept
{
    if (this != &other) {
        release();
        n_ = std::exchange(other.n_, 0);
        data_ = std::exchange(other.data_, nullptr);
        fwd_ = std::exchange(other.fwd_, nullptr);
        inv_ = std::exchange(other.inv_, nullptr);
    }
    return *this;
}

void FftPlan::release() noexcept
{
    if (data_ == nullptr) return;
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
    fftw_free(data_);
    data_ = nullptr;
}

std::span<cdouble> FftPlan::buffer() noexcept { return {data_, n_}; }

void FftPlan::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }

void FftPlan::inverse()
{
    fftw_execute(static_cast<fftw_plan>(inv_));
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) data_[i] *= scale;
}

double bin_angular_frequency(std::size_t k, std::size_t n, double sample_rate_hz)
{
    const auto signed_k = k < (n + 1) / 2 ? static_cast<double>(k)
                                          : static_cast<double>(k) - static_cast<double>(n);
    const double hz = signed_k * sample_rate_hz / static_cast<double>(n);
    return 2.0 * std::numbers::pi * hz * 1e-12;
}

} // namespace nlc
