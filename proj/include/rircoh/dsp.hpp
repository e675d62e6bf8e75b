#pragma once

#include "rircoh/types.hpp"

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rircoh {

using cplx = std::complex<double>;

// Complex narrowband (or broadband analytic) representation of one RIR.
//
// Magnitudes are scaled so that the mean of |z|^2 equals the power the real
// recording carries inside the band: a tone with amplitude A at the band centre
// comes out with constant magnitude A / sqrt(2), its RMS value.
class BandSignal {
public:
  BandSignal(std::vector<cplx> samples, double sample_rate, BandLabel band, std::string source_rir);

  const std::vector<cplx>& samples() const { return samples_; }
  double sample_rate() const { return sample_rate_; }
  const BandLabel& band() const { return band_; }
  const std::string& source_rir() const { return source_rir_; }
  std::size_t size() const { return samples_.size(); }
  double time_at(std::size_t k) const { return static_cast<double>(k) / sample_rate_; }
  std::vector<double> times() const;

  // Time-integrated energy, sum |z|^2 / rate.
  double energy() const;

  bool operator==(const BandSignal&) const = default;

private:
  std::vector<cplx> samples_;
  double sample_rate_;
  BandLabel band_;
  std::string source_rir_;
};

struct StftGrid {
  std::vector<cplx> frames;  // time-major: frames[t * freqs.size() + k]
  std::vector<double> times; // frame centres, seconds
  std::vector<double> freqs; // 0 .. sample_rate/2
  std::size_t window_len = 0;
  std::size_t hop = 0;
  int sample_rate = 0;
  std::string window_kind = "hann-periodic";

  std::size_t n_frames() const { return times.size(); }
  std::size_t n_bins() const { return freqs.size(); }
  const cplx& at(std::size_t t, std::size_t k) const { return frames[t * freqs.size() + k]; }
  cplx& at(std::size_t t, std::size_t k) { return frames[t * freqs.size() + k]; }
};

// Lowpass prototype used by band_demodulate. `taps` is the 255-tap Kaiser
// (beta 8) windowed sinc normalised to unit DC gain; `zero_phase` is its
// autocorrelation, i.e. the impulse response of forward-backward filtering.
struct BandFilter {
  std::vector<double> taps;
  std::vector<double> zero_phase;
  double cutoff_hz = 0;
  int sample_rate = 0;
  double bandwidth_hz = 0;
};

inline constexpr std::size_t kBandFilterTaps = 255;
inline constexpr double kBandFilterKaiserBeta = 8.0;

// Lowpass for a band of the given width. The equivalent noise bandwidth of
// the zero-phase response equals the band width.
BandFilter design_band_filter(int sample_rate, double bandwidth_hz);

// Decimation factor used for a band: floor(rate / (4 * bandwidth)), at least 1.
std::size_t band_decimation(int sample_rate, double bandwidth_hz);

// Heterodyne to baseband, zero-phase lowpass, decimate to ~4x bandwidth.
BandSignal band_demodulate(const Rir& rir, const BandSpec& band, const AnalysisConfig& config);

// Full-rate analytic signal (x + jH{x}) / sqrt(2), labelled broadband.
BandSignal analytic_signal(const Rir& rir);

// Dispatches on the band label (nullopt -> analytic_signal).
BandSignal demodulate(const Rir& rir, const BandLabel& band, const AnalysisConfig& config);

// Window length in samples for a duration at a rate; throws ConfigError when
// shorter than 8 samples.
std::size_t window_samples(double window_s, double rate);

// Centred moving average over `window` samples, same length as the input.
// Edges average over the available samples only. For even windows the span is
// [n - W/2, n + W/2 - 1].
std::vector<double> moving_average(std::span<const double> values, std::size_t window);
std::vector<cplx> moving_average(std::span<const cplx> values, std::size_t window);

std::vector<double> short_time_average(std::span<const double> values, double window_s, double rate);
std::vector<cplx> short_time_average(std::span<const cplx> values, double window_s, double rate);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// One-sided STFT with a periodic Hann taper. No padding: the frame count is
// floor((N - window_len) / hop) + 1.
StftGrid stft(const Rir& rir, const AnalysisConfig& config);
StftGrid stft(std::span<const double> samples, int sample_rate, std::size_t window_len,
              std::size_t hop);

// Weighted overlap-add inverse of stft() (same window for analysis and
// synthesis). Returns `length` samples; positions no frame covers are zero.
std::vector<double> istft(const StftGrid& grid, std::size_t length);

struct TimeSegment {
  double start_s = 0;
  double end_s = 0;
};

struct NoiseFloorOptions {
  // Estimate on this segment instead of the final 5 % of the recording.
  std::optional<TimeSegment> segment;
  // The recording was cut before the noise floor was reached; the caller has
  // to supply E_n.
  bool noise_truncated = false;
  // Allow recordings shorter than one second.
  bool allow_short = false;
};

inline constexpr double kNoiseTailFraction = 0.05;

// Median of |z|^2 over the final 5 % of the band signal (or the override
// segment).
double estimate_noise_floor(const BandSignal& band, const NoiseFloorOptions& options = {});

// E_s(t) = max(short_time_average(|z|^2) - E_n, 0).
EnergyEnvelope energy_envelope(const BandSignal& band, double noise_energy,
                               const AnalysisConfig& config);

inline constexpr double kOnsetThreshold = 0.01;

// First index whose magnitude exceeds 1 % of the peak magnitude.
std::size_t detect_onset(const Rir& rir);

// Reverberation time from Schroeder backward integration with a -5 to -25 dB
// line fit extrapolated to -60 dB.
double estimate_rt(const Rir& rir);

// Median of a copy of the values (mean of the middle two for even counts).
double median(std::vector<double> values);

}  // namespace rircoh
