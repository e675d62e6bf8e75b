#include "rircoh/dsp.hpp"

#include "fft.hpp"
#include "rircoh/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <utility>

namespace rircoh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// TwoSum-compensated running sum.
class CompensatedSum {
public:
  void add(double v) {
    const double t = sum_ + v;
    const double bp = t - sum_;
    comp_ += (sum_ - (t - bp)) + (v - bp);
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0;
  double comp_ = 0;
};

std::pair<std::size_t, std::size_t> window_extent(std::size_t window) {
  // (samples before n, samples after n)
  if (window % 2 == 1) return {(window - 1) / 2, (window - 1) / 2};
  return {window / 2, window / 2 - 1};
}

std::vector<double> kaiser_window(std::size_t n, double beta) {
  std::vector<double> w(n);
  const double denom = std::cyl_bessel_i(0.0, beta);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
    w[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
  }
  return w;
}

std::vector<double> windowed_sinc(std::size_t n, double cutoff_hz, int sample_rate,
                                  const std::vector<double>& window) {
  std::vector<double> h(n);
  const double fc = cutoff_hz / sample_rate;
  const double mid = static_cast<double>(n - 1) / 2.0;
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = static_cast<double>(i) - mid;
    const double s = m == 0.0 ? 2.0 * fc : std::sin(kTwoPi * fc * m) / (std::numbers::pi * m);
    h[i] = s * window[i];
    sum += h[i];
  }
  for (auto& v : h) v /= sum;
  return h;
}

std::vector<double> autocorrelate(const std::vector<double>& h) {
  const std::size_t n = h.size();
  std::vector<double> g(2 * n - 1, 0.0);
  for (std::size_t lag = 0; lag < n; ++lag) {
    double acc = 0;
    for (std::size_t i = 0; i + lag < n; ++i) acc += h[i] * h[i + lag];
    g[n - 1 + lag] = acc;
    g[n - 1 - lag] = acc;
  }
  return g;
}

// Two-sided equivalent noise bandwidth of the zero-phase response, by Parseval.
double noise_bandwidth(const std::vector<double>& zero_phase, int sample_rate) {
  double s = 0;
  for (double v : zero_phase) s += v * v;
  return s * sample_rate;
}

BandFilter design_uncached(int sample_rate, double bandwidth_hz) {
  const auto window = kaiser_window(kBandFilterTaps, kBandFilterKaiserBeta);
  auto enbw_at = [&](double cutoff) {
    return noise_bandwidth(autocorrelate(windowed_sinc(kBandFilterTaps, cutoff, sample_rate, window)),
                           sample_rate);
  };
  double lo = bandwidth_hz / 4.0;
  double hi = std::min(bandwidth_hz * 2.0, 0.45 * sample_rate);
  if (enbw_at(hi) < bandwidth_hz) {
    // Band too narrow for the tap count or too wide for the rate; fall back to
    // the nominal half-bandwidth cutoff.
    lo = hi = bandwidth_hz / 2.0;
  }
  for (int it = 0; it < 60 && hi - lo > 1e-9 * bandwidth_hz; ++it) {
    const double mid = 0.5 * (lo + hi);
    (enbw_at(mid) < bandwidth_hz ? lo : hi) = mid;
  }
  BandFilter f;
  f.cutoff_hz = 0.5 * (lo + hi);
  f.taps = windowed_sinc(kBandFilterTaps, f.cutoff_hz, sample_rate, window);
  f.zero_phase = autocorrelate(f.taps);
  f.sample_rate = sample_rate;
  f.bandwidth_hz = bandwidth_hz;
  return f;
}

}  // namespace

BandSignal::BandSignal(std::vector<cplx> samples, double sample_rate, BandLabel band,
                       std::string source_rir)
    : samples_(std::move(samples)),
      sample_rate_(sample_rate),
      band_(std::move(band)),
      source_rir_(std::move(source_rir)) {
  if (!(sample_rate_ > 0)) throw ValidationError("BandSignal: sample rate must be positive");
  if (band_ && sample_rate_ < band_->bandwidth_hz())
    throw ValidationError("BandSignal: sample rate below band width (aliasing)");
}

std::vector<double> BandSignal::times() const {
  std::vector<double> t(samples_.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = time_at(k);
  return t;
}

double BandSignal::energy() const {
  double e = 0;
  for (const auto& z : samples_) e += std::norm(z);
  return e / sample_rate_;
}

BandFilter design_band_filter(int sample_rate, double bandwidth_hz) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, BandFilter> cache;
  const auto key = std::make_pair(sample_rate, bandwidth_hz);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  BandFilter f = design_uncached(sample_rate, bandwidth_hz);
  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(f)).first->second;
}

std::size_t band_decimation(int sample_rate, double bandwidth_hz) {
  const double d = std::floor(sample_rate / (4.0 * bandwidth_hz));
  return d < 1.0 ? 1 : static_cast<std::size_t>(d);
}

BandSignal band_demodulate(const Rir& rir, const BandSpec& band, const AnalysisConfig& config) {
  config.validate();
  band.check_against(rir.sample_rate());
  const auto& x = rir.samples();
  const std::size_t n = x.size();
  if (n < 4 * kBandFilterTaps) {
    std::ostringstream os;
    os << "band_demodulate: '" << rir.meta().id << "' has " << n << " samples, need at least "
       << 4 * kBandFilterTaps << " for filter warm-up";
    throw InputTooShortError(os.str());
  }
  const int fs = rir.sample_rate();
  const BandFilter filter = design_band_filter(fs, band.bandwidth_hz());
  const std::size_t dec = band_decimation(fs, band.bandwidth_hz());

  // Heterodyne, phase reduced modulo one cycle.
  std::vector<cplx> mixed(n);
  const double cycles_per_sample = band.center_hz() / fs;
  for (std::size_t i = 0; i < n; ++i) {
    const double cyc = std::fmod(cycles_per_sample * static_cast<double>(i), 1.0);
    mixed[i] = x[i] * std::polar(1.0, -kTwoPi * cyc);
  }

  // Forward-backward filtering equals convolution with the autocorrelation
  // kernel; evaluate it only at the retained output positions.
  const auto& g = filter.zero_phase;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(g.size() / 2);
  const std::size_t m = (n + dec - 1) / dec;
  std::vector<cplx> out(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(k * dec);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, c - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, c + half);
    double re = 0;
    double im = 0;
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double w = g[static_cast<std::size_t>(i - c + half)];
      re += w * mixed[static_cast<std::size_t>(i)].real();
      im += w * mixed[static_cast<std::size_t>(i)].imag();
    }
    out[k] = cplx(re, im) * std::numbers::sqrt2;
  }
  return BandSignal(std::move(out), static_cast<double>(fs) / static_cast<double>(dec), band,
                    rir.meta().id);
}

BandSignal analytic_signal(const Rir& rir) {
  const auto& x = rir.samples();
  const std::size_t n = x.size();
  // Zero-padded to 2n.
  const std::size_t m = 2 * n;
  std::vector<cplx> spec(m);
  for (std::size_t i = 0; i < n; ++i) spec[i] = x[i];
  spec = fft::dft(spec, false);
  // Keep DC and Nyquist, double positive frequencies, drop the negative ones.
  for (std::size_t k = 1; k < m; ++k) {
    if (k == n) continue;
    spec[k] = k < n ? 2.0 * spec[k] : cplx{};
  }
  auto full = fft::dft(spec, true);
  std::vector<cplx> z(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto& v : z) v /= std::numbers::sqrt2;
  return BandSignal(std::move(z), rir.sample_rate(), std::nullopt, rir.meta().id);
}

BandSignal demodulate(const Rir& rir, const BandLabel& band, const AnalysisConfig& config) {
  if (!band) return analytic_signal(rir);
  return band_demodulate(rir, *band, config);
}

std::size_t window_samples(double window_s, double rate) {
  const double w = std::round(window_s * rate);
  if (!(w >= 8.0)) {
    std::ostringstream os;
    os << "averaging window of " << window_s * 1e3 << " ms is " << w << " samples at " << rate
       << " Hz; need at least 8";
    throw ConfigError(os.str());
  }
  return static_cast<std::size_t>(w);
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  const std::size_t n = values.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  if (window == 0) throw ConfigError("moving_average: window must be positive");
  const auto [before, after] = window_extent(window);
  CompensatedSum sum;
  // Window for index 0 is [0, after].
  std::size_t hi = std::min(after, n - 1);
  for (std::size_t i = 0; i <= hi; ++i) sum.add(values[i]);
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) {
      if (k + after < n) sum.add(values[k + after]);
      if (k > before) sum.add(-values[k - before - 1]);
    }
    const std::size_t lo = k > before ? k - before : 0;
    const std::size_t top = std::min(k + after, n - 1);
    out[k] = sum.value() / static_cast<double>(top - lo + 1);
  }
  return out;
}

std::vector<cplx> moving_average(std::span<const cplx> values, std::size_t window) {
  std::vector<double> re(values.size());
  std::vector<double> im(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    re[i] = values[i].real();
    im[i] = values[i].imag();
  }
  const auto mre = moving_average(re, window);
  const auto mim = moving_average(im, window);
  std::vector<cplx> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {mre[i], mim[i]};
  return out;
}

std::vector<double> short_time_average(std::span<const double> values, double window_s, double rate) {
  return moving_average(values, window_samples(window_s, rate));
}

std::vector<cplx> short_time_average(std::span<const cplx> values, double window_s, double rate) {
  return moving_average(values, window_samples(window_s, rate));
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

StftGrid stft(std::span<const double> samples, int sample_rate, std::size_t window_len,
              std::size_t hop) {
  if (window_len == 0 || hop == 0 || hop > window_len)
    throw ConfigError("stft: need 0 < hop <= window_len");
  if (samples.size() <= window_len) {
    std::ostringstream os;
    os << "stft: " << samples.size() << " samples, need more than the " << window_len
       << "-sample window";
    throw InputTooShortError(os.str());
  }
  StftGrid grid;
  grid.window_len = window_len;
  grid.hop = hop;
  grid.sample_rate = sample_rate;
  const std::size_t frames = (samples.size() - window_len) / hop + 1;
  const std::size_t bins = window_len / 2 + 1;
  grid.freqs.resize(bins);
  for (std::size_t k = 0; k < bins; ++k)
    grid.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(window_len);
  grid.times.resize(frames);
  grid.frames.resize(frames * bins);
  const auto w = hann_window(window_len);
  std::vector<double> seg(window_len);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop;
    grid.times[t] = (static_cast<double>(start) + static_cast<double>(window_len) / 2.0) / sample_rate;
    for (std::size_t i = 0; i < window_len; ++i) seg[i] = samples[start + i] * w[i];
    const auto spec = fft::rfft(seg);
    std::copy(spec.begin(), spec.end(), grid.frames.begin() + static_cast<std::ptrdiff_t>(t * bins));
  }
  return grid;
}

StftGrid stft(const Rir& rir, const AnalysisConfig& config) {
  config.validate();
  return stft(rir.samples(), rir.sample_rate(), config.stft_window_len, config.stft_hop);
}

std::vector<double> istft(const StftGrid& grid, std::size_t length) {
  std::vector<double> out(length, 0.0);
  std::vector<double> norm(length, 0.0);
  const auto w = hann_window(grid.window_len);
  const std::size_t bins = grid.n_bins();
  for (std::size_t t = 0; t < grid.n_frames(); ++t) {
    std::span<const cplx> spec(grid.frames.data() + t * bins, bins);
    const auto seg = fft::irfft(spec, grid.window_len);
    const std::size_t start = t * grid.hop;
    for (std::size_t i = 0; i < grid.window_len && start + i < length; ++i) {
      out[start + i] += w[i] * seg[i];
      norm[start + i] += w[i] * w[i];
    }
  }
  for (std::size_t i = 0; i < length; ++i) out[i] = norm[i] > 1e-12 ? out[i] / norm[i] : 0.0;
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double estimate_noise_floor(const BandSignal& band, const NoiseFloorOptions& options) {
  if (options.noise_truncated)
    throw NoiseFloorError("recording '" + band.source_rir() +
                          "' is flagged noise-truncated; supply E_n explicitly");
  const std::size_t n = band.size();
  if (n == 0) throw InputTooShortError("estimate_noise_floor: empty band signal");
  std::size_t lo = 0;
  std::size_t hi = n;
  if (options.segment) {
    const auto& seg = *options.segment;
    if (!(seg.end_s > seg.start_s) || seg.start_s < 0)
      throw ValidationError("noise segment must satisfy 0 <= start < end");
    lo = static_cast<std::size_t>(std::ceil(seg.start_s * band.sample_rate()));
    hi = std::min(n, static_cast<std::size_t>(std::floor(seg.end_s * band.sample_rate())) + 1);
    if (lo >= hi) throw ValidationError("noise segment lies outside the recording");
  } else {
    const double duration = static_cast<double>(n) / band.sample_rate();
    if (duration < 1.0 && !options.allow_short) {
      std::ostringstream os;
      os << "recording '" << band.source_rir() << "' is " << duration
         << " s long; noise floor estimation needs 1 s or an explicit short flag";
      throw InputTooShortError(os.str());
    }
    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(kNoiseTailFraction * n));
    lo = n - tail;
  }
  std::vector<double> power;
  power.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) power.push_back(std::norm(band.samples()[i]));
  return median(std::move(power));
}

EnergyEnvelope energy_envelope(const BandSignal& band, double noise_energy,
                               const AnalysisConfig& config) {
  config.validate();
  if (!(noise_energy >= 0) || !std::isfinite(noise_energy))
    throw ValidationError("energy_envelope: noise energy must be finite and non-negative");
  std::vector<double> power(band.size());
  for (std::size_t i = 0; i < power.size(); ++i) power[i] = std::norm(band.samples()[i]);
  auto total = short_time_average(power, config.avg_window_s, band.sample_rate());
  std::vector<double> signal(total.size());
  for (std::size_t i = 0; i < total.size(); ++i) signal[i] = std::max(total[i] - noise_energy, 0.0);
  return EnergyEnvelope(band.times(), std::move(signal), std::move(total), noise_energy);
}

std::size_t detect_onset(const Rir& rir) {
  const auto& x = rir.samples();
  double peak = 0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double threshold = kOnsetThreshold * peak;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > threshold) return i;
  return 0;  // unreachable: Rir guarantees a non-zero sample
}

double estimate_rt(const Rir& rir) {
  const auto& x = rir.samples();
  const std::size_t n = x.size();
  const double fs = rir.sample_rate();
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = x[i] * x[i];

  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double noise = 0;
  for (std::size_t i = n - tail; i < n; ++i) noise += sq[i];
  noise /= static_cast<double>(tail);

  const std::size_t win = std::max<std::size_t>(8, static_cast<std::size_t>(std::round(0.010 * fs)));
  const auto smooth = moving_average(sq, win);
  const std::size_t onset = detect_onset(rir);
  const auto peak_it = std::max_element(smooth.begin() + static_cast<std::ptrdiff_t>(onset), smooth.end());
  const double peak = *peak_it;
  constexpr double kMinRangeDb = 35.0;
  if (noise > 0 && 10.0 * std::log10(peak / noise) < kMinRangeDb)
    throw InsufficientDecayError("estimate_rt: decay range above the noise floor is below 35 dB");

  // Integrate up to where the smoothed decay meets the noise floor (+5 dB).
  std::size_t stop = n;
  for (auto it = peak_it; it != smooth.end(); ++it) {
    if (*it <= noise * std::pow(10.0, 0.5)) {
      stop = static_cast<std::size_t>(it - smooth.begin());
      break;
    }
  }
  std::vector<double> edc(stop - onset);
  double acc = 0;
  for (std::size_t i = stop; i-- > onset;) {
    acc += sq[i] - noise;
    edc[i - onset] = acc;
  }
  const double ref = edc.front();
  if (!(ref > 0)) throw InsufficientDecayError("estimate_rt: no energy above the noise floor");

  std::size_t i5 = edc.size();
  std::size_t i25 = edc.size();
  for (std::size_t i = 0; i < edc.size(); ++i) {
    if (edc[i] <= 0) break;
    const double db = 10.0 * std::log10(edc[i] / ref);
    if (i5 == edc.size() && db <= -5.0) i5 = i;
    if (db <= -25.0) {
      i25 = i;
      break;
    }
  }
  if (i5 >= edc.size() || i25 >= edc.size() || i25 <= i5 + 1)
    throw InsufficientDecayError("estimate_rt: energy decay curve does not reach -25 dB");

  // Least-squares line through the EDC in dB between -5 and -25 dB.
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double cnt = static_cast<double>(i25 - i5 + 1);
  for (std::size_t i = i5; i <= i25; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double y = 10.0 * std::log10(edc[i] / ref);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double slope = (cnt * sty - st * sy) / (cnt * stt - st * st);
  if (!(slope < 0)) throw InsufficientDecayError("estimate_rt: decay slope is not negative");
  return -60.0 / slope;
}

}  // namespace rircoh
