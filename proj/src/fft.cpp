#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <memory>
#include <mutex>

namespace rircoh::fft {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Aligned FFTW buffer.
template <typename T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)))) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  T* ptr;
};

using RealBuf = FftwBuffer<double>;
using CplxBuf = FftwBuffer<fftw_complex>;

template <typename MakePlan>
void run(MakePlan&& make) {
  fftw_plan p;
  {
    std::lock_guard lock(planner_mutex());
    p = make();
  }
  fftw_execute(p);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(p);
}

void copy_in(fftw_complex* dst, const std::complex<double>* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i][0] = src[i].real();
    dst[i][1] = src[i].imag();
  }
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  if (n == 0) return out;
  RealBuf in(n);
  CplxBuf spec(out.size());
  std::copy(x.begin(), x.end(), in.ptr);
  run([&] { return fftw_plan_dft_r2c_1d(static_cast<int>(n), in.ptr, spec.ptr, FFTW_ESTIMATE); });
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {spec.ptr[k][0], spec.ptr[k][1]};
  return out;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
  std::vector<double> out(n);
  if (n == 0) return out;
  const std::size_t bins = n / 2 + 1;
  CplxBuf spec(bins);
  RealBuf time(n);
  for (std::size_t k = 0; k < bins; ++k) {
    const auto v = k < spectrum.size() ? spectrum[k] : std::complex<double>{};
    spec.ptr[k][0] = v.real();
    spec.ptr[k][1] = v.imag();
  }
  run([&] {
    return fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.ptr, time.ptr, FFTW_ESTIMATE);
  });
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = time.ptr[i] * scale;
  return out;
}

std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  if (n == 0) return out;
  CplxBuf in(n);
  CplxBuf res(n);
  copy_in(in.ptr, x.data(), n);
  run([&] {
    return fftw_plan_dft_1d(static_cast<int>(n), in.ptr, res.ptr,
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  });
  const double scale = inverse ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t i = 0; i < n; ++i) out[i] = {res.ptr[i][0] * scale, res.ptr[i][1] * scale};
  return out;
}

}  // namespace rircoh::fft
