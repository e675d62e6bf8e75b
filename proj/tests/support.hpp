#pragma once

#include "rircoh/dsp.hpp"
#include "rircoh/synth.hpp"
#include "rircoh/types.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testsupport {

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  rircoh::synth::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = sd * rng.gaussian();
  return v;
}

inline std::vector<rircoh::cplx> complex_gaussian(std::size_t n, std::uint64_t seed, double variance = 1.0) {
  rircoh::synth::Rng rng(seed);
  const double s = std::sqrt(variance / 2.0);
  std::vector<rircoh::cplx> v(n);
  for (auto& z : v) {
    const double re = rng.gaussian();
    z = {s * re, s * rng.gaussian()};
  }
  return v;
}

inline rircoh::Rir make_rir(std::vector<double> samples, int fs = 48000, std::string id = "r") {
  return rircoh::Rir(fs, std::move(samples), rircoh::RirMeta{std::move(id), "0", "S", "R", "c"});
}

inline std::vector<double> tone(std::size_t n, int fs, double freq, double amp = 1.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = amp * std::cos(2.0 * M_PI * freq * static_cast<double>(i) / fs);
  return v;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Spearman correlation via Pearson on (tie-averaged) ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double plain_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("rircoh-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

}  // namespace testsupport

