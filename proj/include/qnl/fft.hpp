#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qnl::fft {

/// Fixed-size real transform pair. Construction plans under a global lock;
/// execution is safe from any thread as long as each thread owns its object.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// X_k = sum_j x_j exp(-2 pi i jk/n), k = 0..n/2.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  /// x_j = sum_k X_k exp(+2 pi i jk/n) over the Hermitian extension (unnormalized).
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  void release();

  std::size_t n_ = 0;
  double* real_ = nullptr;
  void* spec_ = nullptr;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
};

std::vector<std::complex<double>> rfft(std::span<const double> x);

}  // namespace qnl::fft
