#pragma once

#include "rircoh/coherence.hpp"
#include "rircoh/dsp.hpp"
#include "rircoh/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rircoh {

// Last index t_max such that both members keep E_s/E_n >= 10^(threshold/10) on
// every index from `onset` through t_max. With no noise in either envelope the
// whole axis is usable. Throws NoUsableRegionError when the SNR is already
// below the threshold at the onset.
std::size_t snr_truncation_index(const EnergyEnvelope& env_x, const EnergyEnvelope& env_y,
                                 double threshold_db, std::size_t onset = 0);

// Sensitivity rating: the mean of (1 - gamma) over [onset, t_max], weighted by
// sqrt(P_x P_y) where P is the short-time total power (signal plus noise).
// Undefined gamma points drop out of both sums.
SensitivityRating sensitivity_rating(const CoherenceCurve& curve, const EnergyEnvelope& env_x,
                                     const EnergyEnvelope& env_y, std::size_t t_max,
                                     std::size_t onset = 0);

// Per-recording options that travel with a pair through the pipeline.
struct PairOptions {
  NoiseFloorOptions noise_x;
  NoiseFloorOptions noise_y;
  // Caller-supplied noise energies (band-signal units); override estimation.
  std::optional<double> noise_energy_x;
  std::optional<double> noise_energy_y;
};

// Everything computed for one pair in one band.
struct BandAnalysis {
  BandLabel band;
  PairId pair_id;
  std::size_t onset_index = 0;
  EnergyEnvelope env_x;
  EnergyEnvelope env_y;
  CoherenceCurve measured;
  CoherenceCurve expected;
  CoherenceCurve environment;
};

// Throws PairingError when rates differ or lengths differ by more than 1 %.
void check_pair(const Rir& x, const Rir& y);

// Onset shared by a pair (the earlier of the two), in samples.
std::size_t pair_onset(const Rir& x, const Rir& y);

// Demodulate both members, estimate envelopes, compute measured, expected and
// environment coherence on the band's time axis.
BandAnalysis analyze_band(const Rir& x, const Rir& y, const BandLabel& band,
                          const AnalysisConfig& config, const PairOptions& options = {});

// Truncate and rate an analysed band.
SensitivityRating rate_band(const BandAnalysis& analysis, const AnalysisConfig& config);

struct BandOutcome {
  BandLabel band;
  std::optional<SensitivityRating> rating;
  // "ok", or one of no_usable_region, input_too_short, noise_floor,
  // insufficient_decay, invalid_band, analysis_error.
  std::string status = "ok";
  std::string failure;  // message; empty when rating is set

  bool ok() const { return rating.has_value(); }
};

// Status code of a per-band failure, as listed in BandOutcome::status.
std::string failure_status(const std::exception& e);

// Rates every band in order. A band that cannot be rated (no usable region,
// band above Nyquist, ...) yields a failure entry instead of aborting; pair
// incompatibility throws PairingError.
std::vector<BandOutcome> band_sweep(const Rir& x, const Rir& y, std::span<const BandLabel> bands,
                                    const AnalysisConfig& config, const PairOptions& options = {});

struct BinOutcome {
  double freq_hz = 0;
  std::optional<double> gamma_rating;
  std::size_t truncation_index = 0;
  double truncation_s = 0;
  std::string status = "ok";
  std::string failure;
};

// Frame whose centre is at or just before the given sample.
std::size_t onset_frame(const StftGrid& grid, std::size_t onset_sample);

// Sensitivity per frequency bin of a coherence map, each bin truncated on its
// own envelopes.
std::vector<BinOutcome> tf_sensitivity(const TFCoherenceMap& map,
                                       std::span<const EnergyEnvelope> env_x,
                                       std::span<const EnergyEnvelope> env_y,
                                       const AnalysisConfig& config, std::size_t onset = 0);

struct BandMedian {
  BandLabel band;
  double median_rating = 0;
  std::size_t count = 0;
};

// Median rating per band, bands in order of first appearance.
std::vector<BandMedian> median_sensitivity(std::span<const SensitivityRating> ratings);

}  // namespace rircoh
