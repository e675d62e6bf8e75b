#include "rircoh/sensitivity.hpp"

#include "rircoh/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rircoh {

namespace {

double snr_ratio(double signal, double noise) {
  if (noise > 0) return signal / noise;
  return std::numeric_limits<double>::infinity();
}

std::size_t to_band_index(std::size_t onset_sample, int rir_rate, double band_rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(onset_sample) * band_rate / rir_rate));
}

}  // namespace

std::size_t snr_truncation_index(const EnergyEnvelope& env_x, const EnergyEnvelope& env_y,
                                 double threshold_db, std::size_t onset) {
  if (!(threshold_db > 0)) throw ConfigError("snr_truncation_index: threshold must be positive");
  if (env_x.size() != env_y.size())
    throw PairingError("snr_truncation_index: envelopes differ in length");
  const std::size_t n = env_x.size();
  if (onset >= n) throw NoUsableRegionError("snr_truncation_index: onset beyond the envelope");
  if (env_x.noise_energy() == 0 && env_y.noise_energy() == 0) return n - 1;

  const double threshold = std::pow(10.0, threshold_db / 10.0);
  auto usable = [&](std::size_t i) {
    return std::min(snr_ratio(env_x.signal_energy()[i], env_x.noise_energy()),
                    snr_ratio(env_y.signal_energy()[i], env_y.noise_energy())) >= threshold;
  };
  if (!usable(onset)) {
    std::ostringstream os;
    os << "no usable region: SNR below " << threshold_db << " dB at the onset (t = "
       << env_x.times()[onset] << " s)";
    throw NoUsableRegionError(os.str());
  }
  std::size_t last = onset;
  while (last + 1 < n && usable(last + 1)) ++last;
  return last;
}

SensitivityRating sensitivity_rating(const CoherenceCurve& curve, const EnergyEnvelope& env_x,
                                     const EnergyEnvelope& env_y, std::size_t t_max,
                                     std::size_t onset) {
  const std::size_t n = curve.size();
  if (env_x.size() != n || env_y.size() != n)
    throw PairingError("sensitivity_rating: curve and envelopes differ in length");
  if (t_max >= n || onset > t_max)
    throw ValidationError("sensitivity_rating: summation range outside the curve");
  double num = 0;
  double den = 0;
  std::size_t used = 0;
  for (std::size_t i = onset; i <= t_max; ++i) {
    const auto& g = curve.gamma()[i];
    if (!g) continue;
    const double w = std::sqrt(env_x.total_power()[i] * env_y.total_power()[i]);
    num += w * (1.0 - *g);
    den += w;
    ++used;
  }
  if (used == 0 || !(den > 0))
    throw AnalysisError("sensitivity_rating: every point in the usable range is undefined");
  const double rating = std::clamp(num / den, 0.0, 1.0);
  return SensitivityRating(curve.band(), rating, onset, t_max, curve.times()[t_max], curve.pair_id());
}

void check_pair(const Rir& x, const Rir& y) {
  if (x.sample_rate() != y.sample_rate()) {
    std::ostringstream os;
    os << "pair '" << x.meta().id << "' / '" << y.meta().id << "': sample rates differ ("
       << x.sample_rate() << " vs " << y.sample_rate() << " Hz); resampling is not performed";
    throw PairingError(os.str());
  }
  const std::size_t longest = std::max(x.size(), y.size());
  const std::size_t shortest = std::min(x.size(), y.size());
  if (static_cast<double>(longest - shortest) > 0.01 * static_cast<double>(longest)) {
    std::ostringstream os;
    os << "pair '" << x.meta().id << "' / '" << y.meta().id << "': lengths " << x.size() << " and "
       << y.size() << " differ by more than 1 %";
    throw PairingError(os.str());
  }
}

std::size_t pair_onset(const Rir& x, const Rir& y) {
  return std::min(detect_onset(x), detect_onset(y));
}

BandAnalysis analyze_band(const Rir& x, const Rir& y, const BandLabel& band,
                          const AnalysisConfig& config, const PairOptions& options) {
  config.validate();
  check_pair(x, y);
  const auto bx = demodulate(x, band, config);
  const auto by = demodulate(y, band, config);
  const double nx = options.noise_energy_x ? *options.noise_energy_x
                                           : estimate_noise_floor(bx, options.noise_x);
  const double ny = options.noise_energy_y ? *options.noise_energy_y
                                           : estimate_noise_floor(by, options.noise_y);
  auto measured = short_time_coherence(bx, by, config);
  const std::size_t n = measured.size();

  // Envelopes on the (possibly truncated) common axis.
  auto trimmed = [&](const BandSignal& b) {
    if (b.size() == n) return b;
    return BandSignal(std::vector<cplx>(b.samples().begin(), b.samples().begin() + static_cast<std::ptrdiff_t>(n)),
                      b.sample_rate(), b.band(), b.source_rir());
  };
  auto env_x = energy_envelope(trimmed(bx), nx, config);
  auto env_y = energy_envelope(trimmed(by), ny, config);
  auto expected = expected_coherence(env_x, env_y, band, measured.pair_id(), config);
  auto environment = environment_coherence(measured, expected, config);
  const std::size_t onset =
      std::min(n - 1, to_band_index(pair_onset(x, y), x.sample_rate(), bx.sample_rate()));
  return BandAnalysis{band,
                      measured.pair_id(),
                      onset,
                      std::move(env_x),
                      std::move(env_y),
                      std::move(measured),
                      std::move(expected),
                      std::move(environment)};
}

SensitivityRating rate_band(const BandAnalysis& analysis, const AnalysisConfig& config) {
  const std::size_t t_max = snr_truncation_index(analysis.env_x, analysis.env_y,
                                                 config.snr_threshold_db, analysis.onset_index);
  return sensitivity_rating(analysis.measured, analysis.env_x, analysis.env_y, t_max,
                            analysis.onset_index);
}

std::string failure_status(const std::exception& e) {
  if (dynamic_cast<const NoUsableRegionError*>(&e)) return "no_usable_region";
  if (dynamic_cast<const InputTooShortError*>(&e)) return "input_too_short";
  if (dynamic_cast<const NoiseFloorError*>(&e)) return "noise_floor";
  if (dynamic_cast<const InsufficientDecayError*>(&e)) return "insufficient_decay";
  if (dynamic_cast<const ValidationError*>(&e)) return "invalid_band";
  return "analysis_error";
}

std::vector<BandOutcome> band_sweep(const Rir& x, const Rir& y, std::span<const BandLabel> bands,
                                    const AnalysisConfig& config, const PairOptions& options) {
  config.validate();
  check_pair(x, y);
  std::vector<BandOutcome> out;
  out.reserve(bands.size());
  for (const auto& band : bands) {
    BandOutcome item{band, std::nullopt, "ok", {}};
    try {
      item.rating = rate_band(analyze_band(x, y, band, config, options), config);
    } catch (const PairingError&) {
      throw;
    } catch (const AnalysisError& e) {
      item.status = failure_status(e);
      item.failure = e.what();
    } catch (const ValidationError& e) {
      item.status = failure_status(e);
      item.failure = e.what();
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::size_t onset_frame(const StftGrid& grid, std::size_t onset_sample) {
  const std::size_t half = grid.window_len / 2;
  if (onset_sample <= half || grid.n_frames() == 0) return 0;
  return std::min(grid.n_frames() - 1, (onset_sample - half) / grid.hop);
}

std::vector<BinOutcome> tf_sensitivity(const TFCoherenceMap& map,
                                       std::span<const EnergyEnvelope> env_x,
                                       std::span<const EnergyEnvelope> env_y,
                                       const AnalysisConfig& config, std::size_t onset) {
  config.validate();
  const std::size_t bins = map.n_freqs();
  const std::size_t frames = map.n_times();
  if (env_x.size() != bins || env_y.size() != bins)
    throw PairingError("tf_sensitivity: one envelope per frequency bin is required");
  std::vector<BinOutcome> out(bins);
  std::vector<std::optional<double>> column(frames);
  for (std::size_t k = 0; k < bins; ++k) {
    auto& item = out[k];
    item.freq_hz = map.freqs()[k];
    if (env_x[k].size() != frames || env_y[k].size() != frames)
      throw PairingError("tf_sensitivity: envelope length differs from the map");
    for (std::size_t t = 0; t < frames; ++t) column[t] = map.at(t, k);
    try {
      const CoherenceCurve curve(map.times(), column, std::nullopt, {});
      const auto t_max = snr_truncation_index(env_x[k], env_y[k], config.snr_threshold_db, onset);
      const auto rating = sensitivity_rating(curve, env_x[k], env_y[k], t_max, onset);
      item.gamma_rating = rating.gamma_rating();
      item.truncation_index = t_max;
      item.truncation_s = rating.truncation_s();
    } catch (const AnalysisError& e) {
      item.status = failure_status(e);
      item.failure = e.what();
    }
  }
  return out;
}

std::vector<BandMedian> median_sensitivity(std::span<const SensitivityRating> ratings) {
  if (ratings.empty()) throw ValidationError("median_sensitivity: no ratings");
  std::vector<BandLabel> order;
  std::vector<std::vector<double>> groups;
  for (const auto& r : ratings) {
    auto it = std::find(order.begin(), order.end(), r.band());
    if (it == order.end()) {
      order.push_back(r.band());
      groups.emplace_back();
      it = order.end() - 1;
    }
    groups[static_cast<std::size_t>(it - order.begin())].push_back(r.gamma_rating());
  }
  std::vector<BandMedian> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    out.push_back({order[i], median(groups[i]), groups[i].size()});
  return out;
}

}  // namespace rircoh
