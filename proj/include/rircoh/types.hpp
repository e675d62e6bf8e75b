#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rircoh {

// Opaque labels attached to a recording. None of them are interpreted by the
// analysis; they only travel into pair ids and report rows.
struct RirMeta {
  std::string id;
  std::string channel_id;
  std::string source_id;
  std::string receiver_id;
  std::string condition_id;

  bool operator==(const RirMeta&) const = default;
};

// A single-channel room impulse response (the observable sum of the room
// response and background noise).
class Rir {
public:
  // Throws ValidationError unless sample_rate > 0, samples is non-empty, all
  // samples are finite and at least one is non-zero.
  Rir(int sample_rate, std::vector<double> samples, RirMeta meta = {});

  int sample_rate() const { return sample_rate_; }
  const std::vector<double>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double duration() const { return static_cast<double>(samples_.size()) / sample_rate_; }
  const RirMeta& meta() const { return meta_; }

  // Same recording with different labels.
  Rir relabeled(RirMeta meta) const;

  bool operator==(const Rir&) const = default;

private:
  int sample_rate_;
  std::vector<double> samples_;
  RirMeta meta_;
};

// Constant-bandwidth analysis band.
class BandSpec {
public:
  // Throws ValidationError unless bandwidth > 0 and center - bandwidth/2 > 0.
  BandSpec(double center_hz, double bandwidth_hz);

  double center_hz() const { return center_hz_; }
  double bandwidth_hz() const { return bandwidth_hz_; }
  double low_hz() const { return center_hz_ - bandwidth_hz_ / 2; }
  double high_hz() const { return center_hz_ + bandwidth_hz_ / 2; }

  // Throws ValidationError when the upper edge reaches Nyquist.
  void check_against(int sample_rate) const;

  bool operator==(const BandSpec&) const = default;

private:
  double center_hz_;
  double bandwidth_hz_;
};

// std::nullopt marks the broadband (unfiltered analytic signal) analysis.
using BandLabel = std::optional<BandSpec>;

std::string band_name(const BandLabel& band);

// 1 kHz wide bands centred on 1, 2, ..., 19 kHz.
std::vector<BandSpec> default_bands();

struct AnalysisConfig {
  double avg_window_s = 0.010;    // short-time expectation window
  double snr_threshold_db = 30.0;
  std::size_t stft_window_len = 512;
  std::size_t stft_hop = 128;
  double guard_epsilon = 1e-12;   // relative to peak windowed energy
  // Half-span L (in frames) of the expectation used on STFT grids; 0 derives
  // it from avg_window_s and the hop.
  std::size_t tf_half_span = 0;

  // Throws ConfigError on a violated invariant.
  void validate() const;

  bool operator==(const AnalysisConfig&) const = default;
};

struct PairId {
  std::string first;
  std::string second;

  std::string str() const { return first + "__" + second; }
  PairId swapped() const { return {second, first}; }

  bool operator==(const PairId&) const = default;
};

// Short-time coherence (squared magnitude) over time. Undefined points are
// std::nullopt; they are never folded into 0 or 1.
class CoherenceCurve {
public:
  // Throws ValidationError unless times is strictly increasing, lengths match
  // and every defined gamma lies in [0, 1].
  CoherenceCurve(std::vector<double> times, std::vector<std::optional<double>> gamma,
                 BandLabel band, PairId pair_id);

  const std::vector<double>& times() const { return times_; }
  const std::vector<std::optional<double>>& gamma() const { return gamma_; }
  const BandLabel& band() const { return band_; }
  const PairId& pair_id() const { return pair_id_; }
  std::size_t size() const { return times_.size(); }

  bool operator==(const CoherenceCurve&) const = default;

private:
  std::vector<double> times_;
  std::vector<std::optional<double>> gamma_;
  BandLabel band_;
  PairId pair_id_;
};

// Per-time short-time energy of one band signal plus its scalar noise floor.
class EnergyEnvelope {
public:
  // signal_energy is E_s(t) (noise removed), total_power the short-time mean
  // of |x|^2 before noise removal. Throws ValidationError on negative or
  // non-finite entries or mismatched lengths.
  EnergyEnvelope(std::vector<double> times, std::vector<double> signal_energy,
                 std::vector<double> total_power, double noise_energy);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& signal_energy() const { return signal_energy_; }
  const std::vector<double>& total_power() const { return total_power_; }
  double noise_energy() const { return noise_energy_; }
  std::size_t size() const { return times_.size(); }

  bool operator==(const EnergyEnvelope&) const = default;

private:
  std::vector<double> times_;
  std::vector<double> signal_energy_;
  std::vector<double> total_power_;
  double noise_energy_;
};

class SensitivityRating {
public:
  // Indices are inclusive bounds of the summation on the analysis time axis.
  SensitivityRating(BandLabel band, double gamma_rating, std::size_t onset_index,
                    std::size_t truncation_index, double truncation_s, PairId pair_id);

  const BandLabel& band() const { return band_; }
  double gamma_rating() const { return gamma_rating_; }
  std::size_t onset_index() const { return onset_index_; }
  std::size_t truncation_index() const { return truncation_index_; }
  double truncation_s() const { return truncation_s_; }
  const PairId& pair_id() const { return pair_id_; }

  bool operator==(const SensitivityRating&) const = default;

private:
  BandLabel band_;
  double gamma_rating_;
  std::size_t onset_index_;
  std::size_t truncation_index_;
  double truncation_s_;
  PairId pair_id_;
};

// Time-frequency coherence, stored time-major: gamma[t * freqs.size() + f].
class TFCoherenceMap {
public:
  TFCoherenceMap(std::vector<double> times, std::vector<double> freqs,
                 std::vector<std::optional<double>> gamma);

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& freqs() const { return freqs_; }
  const std::vector<std::optional<double>>& gamma() const { return gamma_; }
  std::size_t n_times() const { return times_.size(); }
  std::size_t n_freqs() const { return freqs_.size(); }
  const std::optional<double>& at(std::size_t t, std::size_t f) const {
    return gamma_[t * freqs_.size() + f];
  }

  bool operator==(const TFCoherenceMap&) const = default;

private:
  std::vector<double> times_;
  std::vector<double> freqs_;
  std::vector<std::optional<double>> gamma_;
};

}  // namespace rircoh
