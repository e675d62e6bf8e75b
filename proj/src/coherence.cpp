#include "rircoh/coherence.hpp"

#include "rircoh/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rircoh {

namespace {

struct CrossTerms {
  std::vector<double> cross_re;
  std::vector<double> cross_im;
  std::vector<double> px;
  std::vector<double> py;
};

// x * conj(y), spelled out term by term.
CrossTerms cross_terms(std::span<const cplx> x, std::span<const cplx> y) {
  const std::size_t n = x.size();
  CrossTerms t;
  t.cross_re.resize(n);
  t.cross_im.resize(n);
  t.px.resize(n);
  t.py.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i].real(), b = x[i].imag();
    const double c = y[i].real(), d = y[i].imag();
    t.cross_re[i] = a * c + b * d;
    t.cross_im[i] = b * c - a * d;
    t.px[i] = a * a + b * b;
    t.py[i] = c * c + d * d;
  }
  return t;
}

std::optional<double> coherence_point(double are, double aim, double px, double py, double floor) {
  const double denom = px * py;
  if (!(denom > 0.0) || denom < floor) return std::nullopt;
  const double g = (are * are + aim * aim) / denom;
  return std::clamp(g, 0.0, 1.0);
}

double peak(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, x);
  return m;
}

void require_same_axis(const std::vector<double>& a, const std::vector<double>& b,
                       const char* what) {
  if (a.size() != b.size())
    throw PairingError(std::string(what) + ": time axes differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-9 * std::max(1.0, std::abs(a[i])))
      throw PairingError(std::string(what) + ": time axes differ");
  }
}

}  // namespace

CoherenceCurve short_time_coherence(const BandSignal& x, const BandSignal& y,
                                    const AnalysisConfig& config) {
  config.validate();
  if (x.band() != y.band())
    throw PairingError("short_time_coherence: band mismatch (" + band_name(x.band()) + " vs " +
                       band_name(y.band()) + ")");
  if (x.sample_rate() != y.sample_rate())
    throw PairingError("short_time_coherence: sample rate mismatch");
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  const std::size_t n = std::min(nx, ny);
  if (std::max(nx, ny) - n > 0.01 * static_cast<double>(std::max(nx, ny))) {
    std::ostringstream os;
    os << "short_time_coherence: lengths " << nx << " and " << ny << " differ by more than 1 %";
    throw PairingError(os.str());
  }
  const std::size_t window = window_samples(config.avg_window_s, x.sample_rate());
  const auto terms = cross_terms(std::span(x.samples()).first(n), std::span(y.samples()).first(n));
  const auto are = moving_average(terms.cross_re, window);
  const auto aim = moving_average(terms.cross_im, window);
  const auto px = moving_average(terms.px, window);
  const auto py = moving_average(terms.py, window);

  const double eps2 = config.guard_epsilon * config.guard_epsilon;
  const double floor = eps2 * (peak(px) * peak(py));
  std::vector<std::optional<double>> gamma(n);
  std::vector<double> times(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = x.time_at(i);
    gamma[i] = coherence_point(are[i], aim[i], px[i], py[i], floor);
  }
  return CoherenceCurve(std::move(times), std::move(gamma), x.band(),
                        PairId{x.source_rir(), y.source_rir()});
}

CoherenceCurve expected_coherence(const EnergyEnvelope& env_x, const EnergyEnvelope& env_y,
                                  const BandLabel& band, const PairId& pair_id,
                                  const AnalysisConfig& config) {
  config.validate();
  require_same_axis(env_x.times(), env_y.times(), "expected_coherence");
  const double nx = env_x.noise_energy();
  const double ny = env_y.noise_energy();
  const double eps2 = config.guard_epsilon * config.guard_epsilon;
  const double floor = eps2 * (peak(env_x.total_power()) * peak(env_y.total_power()));
  const std::size_t n = env_x.size();
  std::vector<std::optional<double>> gamma(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sx = env_x.signal_energy()[i];
    const double sy = env_y.signal_energy()[i];
    const double denom = (sx + nx) * (sy + ny);
    if (!(denom > 0.0) || denom < floor) continue;
    gamma[i] = std::clamp((sx * sy) / denom, 0.0, 1.0);
  }
  return CoherenceCurve(env_x.times(), std::move(gamma), band, pair_id);
}

CoherenceCurve environment_coherence(const CoherenceCurve& measured, const CoherenceCurve& expected,
                                     const AnalysisConfig& config) {
  config.validate();
  require_same_axis(measured.times(), expected.times(), "environment_coherence");
  if (measured.band() != expected.band())
    throw PairingError("environment_coherence: band mismatch");
  const std::size_t n = measured.size();
  std::vector<std::optional<double>> gamma(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = measured.gamma()[i];
    const auto& e = expected.gamma()[i];
    if (!m || !e || *e < config.guard_epsilon) continue;
    gamma[i] = std::clamp(*m / *e, 0.0, 1.0);
  }
  return CoherenceCurve(measured.times(), std::move(gamma), measured.band(), measured.pair_id());
}

std::size_t tf_half_span(const AnalysisConfig& config, int sample_rate) {
  if (config.tf_half_span > 0) return config.tf_half_span;
  const double frames = config.avg_window_s * sample_rate / static_cast<double>(config.stft_hop);
  const double half = std::round((frames - 1.0) / 2.0);
  return half < 1.0 ? 1 : static_cast<std::size_t>(half);
}

TFCoherenceMap tf_coherence(const StftGrid& x, const StftGrid& y, const AnalysisConfig& config) {
  config.validate();
  if (x.window_len != y.window_len || x.hop != y.hop || x.sample_rate != y.sample_rate ||
      x.n_bins() != y.n_bins())
    throw PairingError("tf_coherence: STFT parameters differ");
  if (x.n_frames() != y.n_frames()) {
    std::ostringstream os;
    os << "tf_coherence: frame counts differ (" << x.n_frames() << " vs " << y.n_frames() << ")";
    throw PairingError(os.str());
  }
  const std::size_t frames = x.n_frames();
  const std::size_t bins = x.n_bins();
  const std::size_t span = 2 * tf_half_span(config, x.sample_rate) + 1;

  std::vector<double> are(frames * bins), aim(frames * bins), px(frames * bins), py(frames * bins);
  std::vector<cplx> xs(frames), ys(frames);
  for (std::size_t k = 0; k < bins; ++k) {
    for (std::size_t t = 0; t < frames; ++t) {
      xs[t] = x.at(t, k);
      ys[t] = y.at(t, k);
    }
    const auto terms = cross_terms(xs, ys);
    const auto a = moving_average(terms.cross_re, span);
    const auto b = moving_average(terms.cross_im, span);
    const auto p = moving_average(terms.px, span);
    const auto q = moving_average(terms.py, span);
    for (std::size_t t = 0; t < frames; ++t) {
      are[t * bins + k] = a[t];
      aim[t * bins + k] = b[t];
      px[t * bins + k] = p[t];
      py[t * bins + k] = q[t];
    }
  }
  const double eps2 = config.guard_epsilon * config.guard_epsilon;
  const double floor = eps2 * (peak(px) * peak(py));
  std::vector<std::optional<double>> gamma(frames * bins);
  for (std::size_t i = 0; i < gamma.size(); ++i)
    gamma[i] = coherence_point(are[i], aim[i], px[i], py[i], floor);
  return TFCoherenceMap(x.times, x.freqs, std::move(gamma));
}

std::vector<EnergyEnvelope> tf_envelopes(const StftGrid& grid, const AnalysisConfig& config) {
  config.validate();
  const std::size_t frames = grid.n_frames();
  const std::size_t span = 2 * tf_half_span(config, grid.sample_rate) + 1;
  const std::size_t tail = std::max<std::size_t>(1, static_cast<std::size_t>(kNoiseTailFraction * frames));
  std::vector<EnergyEnvelope> out;
  out.reserve(grid.n_bins());
  std::vector<double> power(frames);
  for (std::size_t k = 0; k < grid.n_bins(); ++k) {
    for (std::size_t t = 0; t < frames; ++t) power[t] = std::norm(grid.at(t, k));
    const double noise = median(std::vector<double>(power.end() - static_cast<std::ptrdiff_t>(tail), power.end()));
    auto total = moving_average(power, span);
    std::vector<double> signal(frames);
    for (std::size_t t = 0; t < frames; ++t) signal[t] = std::max(total[t] - noise, 0.0);
    out.emplace_back(grid.times, std::move(signal), std::move(total), noise);
  }
  return out;
}

CoherenceCurve median_coherence(std::span<const CoherenceCurve> curves) {
  if (curves.empty()) throw ValidationError("median_coherence: no curves");
  const auto& first = curves.front();
  for (const auto& c : curves) {
    require_same_axis(first.times(), c.times(), "median_coherence");
    if (c.band() != first.band()) throw PairingError("median_coherence: band mismatch");
  }
  const std::size_t n = first.size();
  const std::size_t count = curves.size();
  std::vector<std::optional<double>> gamma(n);
  std::vector<double> values;
  values.reserve(count);
  for (std::size_t i = 0; i < n; ++i) {
    values.clear();
    for (const auto& c : curves)
      if (const auto& g = c.gamma()[i]) values.push_back(*g);
    const std::size_t undefined = count - values.size();
    if (values.empty() || 2 * undefined > count) continue;
    gamma[i] = median(values);
  }
  return CoherenceCurve(first.times(), std::move(gamma), first.band(),
                        PairId{"median", std::to_string(count) + "-curves"});
}

std::optional<double> time_median(const CoherenceCurve& curve, std::size_t first, std::size_t last) {
  std::vector<double> values;
  for (std::size_t i = first; i <= last && i < curve.size(); ++i)
    if (const auto& g = curve.gamma()[i]) values.push_back(*g);
  if (values.empty()) return std::nullopt;
  return median(std::move(values));
}

std::vector<std::optional<double>> tf_frame_means(const TFCoherenceMap& map) {
  std::vector<std::optional<double>> out(map.n_times());
  for (std::size_t t = 0; t < map.n_times(); ++t) {
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < map.n_freqs(); ++k) {
      if (const auto g = map.at(t, k)) {
        sum += *g;
        ++count;
      }
    }
    if (count) out[t] = sum / static_cast<double>(count);
  }
  return out;
}

std::optional<std::size_t> tf_min_coherence_frame(const TFCoherenceMap& map, std::size_t first,
                                                  std::size_t last) {
  const auto means = tf_frame_means(map);
  std::optional<std::size_t> best;
  for (std::size_t t = first; t <= last && t < means.size(); ++t)
    if (means[t] && (!best || *means[t] < *means[*best])) best = t;
  return best;
}

}  // namespace rircoh
