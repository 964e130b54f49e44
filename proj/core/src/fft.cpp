#include "tinyshape/fft.hpp"

#include <cmath>
#include <numbers>
#include <map>
#include <mutex>
#include <stdexcept>

namespace tinyshape {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

namespace {

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Fft::Fft(std::size_t n) : n_(n), pow2_(is_power_of_two(n)) {
  if (n == 0) throw std::invalid_argument("Fft: length must be positive");
  if (pow2_) {
    twiddles_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddles_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1U) << (bits - 1 - b);
      bitrev_[i] = r;
    }
    return;
  }

  // Bluestein: X[k] = w[k] * sum_n (x[n] w[n]) conj(w[k-n]),  w[n] = exp(-j pi n^2 / N)
  const std::size_t m = next_power_of_two(2 * n - 1);
  inner_ = std::make_unique<Fft>(m);
  chirp_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // n^2 mod 2N keeps the phase argument small.
    const auto sq = static_cast<double>((i * i) % (2 * n));
    chirp_[i] = std::polar(1.0, -std::numbers::pi * sq / static_cast<double>(n));
  }
  kernel_spectrum_.assign(m, cplx{0.0, 0.0});
  kernel_spectrum_[0] = std::conj(chirp_[0]);
  for (std::size_t i = 1; i < n; ++i) {
    kernel_spectrum_[i] = std::conj(chirp_[i]);
    kernel_spectrum_[m - i] = std::conj(chirp_[i]);
  }
  inner_->forward(kernel_spectrum_);
}

Fft::~Fft() = default;
Fft::Fft(Fft&&) noexcept = default;
Fft& Fft::operator=(Fft&&) noexcept = default;

void Fft::forward(std::span<cplx> data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::forward: length mismatch");
  if (pow2_) {
    radix2(data, false);
  } else {
    bluestein(data, false);
  }
}

void Fft::inverse(std::span<cplx> data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::inverse: length mismatch");
  if (pow2_) {
    radix2(data, true);
  } else {
    bluestein(data, true);
  }
}

void Fft::radix2(std::span<cplx> data, bool inverse) const {
  const std::size_t n = n_;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = bitrev_[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const cplx a = data[start + k];
        const cplx b = data[start + k + half] * w;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
}

void Fft::bluestein(std::span<cplx> data, bool inverse) const {
  const std::size_t n = n_;
  const std::size_t m = inner_->size();
  std::vector<cplx> work(m, cplx{0.0, 0.0});
  // inverse(x) = conj(forward(conj(x)))
  for (std::size_t i = 0; i < n; ++i) {
    const cplx x = inverse ? std::conj(data[i]) : data[i];
    work[i] = x * chirp_[i];
  }
  inner_->forward(work);
  for (std::size_t i = 0; i < m; ++i) work[i] *= kernel_spectrum_[i];
  inner_->inverse(work);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) {
    const cplx y = work[k] * scale * chirp_[k];
    data[k] = inverse ? std::conj(y) : y;
  }
}

const Fft& fft_plan(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<Fft>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<Fft>(n);
  return *slot;
}

}  // namespace tinyshape
