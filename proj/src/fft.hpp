#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace rircoh::fft {

// Thin FFTW wrappers. Planning is serialised internally, execution is not, so
// these are safe to call from concurrent analysis tasks.

// One-sided spectrum of a real sequence, n/2 + 1 bins, unnormalised.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// Inverse of rfft for a length-n real sequence, scaled by 1/n.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

// Unnormalised complex DFT (sign -1) or its inverse scaled by 1/n.
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> x, bool inverse);

}  // namespace rircoh::fft
