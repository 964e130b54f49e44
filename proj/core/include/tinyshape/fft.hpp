#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "tinyshape/types.hpp"

namespace tinyshape {

/// Unnormalized complex DFT of fixed length.
///
///   forward: X[k] = sum_n x[n] exp(-j 2 pi k n / N)
///   inverse: x[n] = sum_k X[k] exp(+j 2 pi k n / N)
///
/// Powers of two use an iterative radix-2 kernel; other lengths go through
/// Bluestein's chirp-z algorithm on a power-of-two inner transform. Plans are
/// immutable after construction and safe to share between threads.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(Fft&&) noexcept;
  Fft& operator=(Fft&&) noexcept;

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

 private:
  void radix2(std::span<cplx> data, bool inverse) const;
  void bluestein(std::span<cplx> data, bool inverse) const;

  std::size_t n_ = 0;
  bool pow2_ = true;
  std::vector<cplx> twiddles_;
  std::vector<std::size_t> bitrev_;
  std::vector<cplx> chirp_;
  std::vector<cplx> kernel_spectrum_;
  std::unique_ptr<Fft> inner_;
};

/// Shared, lazily built plan for length n.
const Fft& fft_plan(std::size_t n);

bool is_power_of_two(std::size_t n) noexcept;

}  // namespace tinyshape
