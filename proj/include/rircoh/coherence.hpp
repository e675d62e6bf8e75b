#pragma once

#include "rircoh/dsp.hpp"
#include "rircoh/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rircoh {

// Short-time coherence of two band signals:
//
//   gamma(t) = |<x y*>|^2 / (<|x|^2> <|y|^2>)
//
// where <.> is the centred moving average of config.avg_window_s (the same
// window for all three terms, which bounds gamma to [0, 1]). Points where
// <|x|^2><|y|^2> falls below guard_epsilon^2 times the product of the peak
// powers are undefined.
//
// The signals must share band and rate; lengths may differ by less than 1 %
// (both are cut to the shorter one). Throws PairingError otherwise.
CoherenceCurve short_time_coherence(const BandSignal& x, const BandSignal& y,
                                    const AnalysisConfig& config);

// Coherence expected from decay into stationary noise alone:
//
//   gamma_exp(t) = E_sx E_sy / ((E_sx + E_nx)(E_sy + E_ny))
//
// which is (E_s / (E_s + E_n))^2 when both envelopes are equal. Undefined where
// the denominator falls below the guard (relative to the peak total powers).
CoherenceCurve expected_coherence(const EnergyEnvelope& env_x, const EnergyEnvelope& env_y,
                                  const BandLabel& band = std::nullopt, const PairId& pair_id = {},
                                  const AnalysisConfig& config = {});

// Coherence left after removing the expected (noise) loss: measured/expected,
// clamped to [0, 1]. Undefined where either input is undefined or expected is
// below guard_epsilon.
//
// Symmetric in the pair. All environmental causes are lumped together.
CoherenceCurve environment_coherence(const CoherenceCurve& measured, const CoherenceCurve& expected,
                                     const AnalysisConfig& config = {});

// Number of frames L on each side of the centre frame used as the short-time
// expectation on STFT grids.
std::size_t tf_half_span(const AnalysisConfig& config, int sample_rate);

// Short-time coherence per STFT bin, averaging over 2L+1 adjacent frames.
TFCoherenceMap tf_coherence(const StftGrid& x, const StftGrid& y, const AnalysisConfig& config);

// Per-bin energy envelopes on the STFT frame axis: total power averaged over
// 2L+1 frames, noise floor from the median over the final 5 % of frames.
std::vector<EnergyEnvelope> tf_envelopes(const StftGrid& grid, const AnalysisConfig& config);

// Pointwise median across receivers. Undefined inputs are skipped; a point is
// undefined only if more than half of the inputs are undefined there.
CoherenceCurve median_coherence(std::span<const CoherenceCurve> curves);

// Median of the defined gamma values with index in [first, last]; nullopt if
// none are defined.
std::optional<double> time_median(const CoherenceCurve& curve, std::size_t first, std::size_t last);

// Mean over frequency of the defined cells in each frame.
std::vector<std::optional<double>> tf_frame_means(const TFCoherenceMap& map);

// Frame in [first, last] with the lowest frequency-mean coherence; nullopt if
// no frame in the range has a defined cell.
std::optional<std::size_t> tf_min_coherence_frame(const TFCoherenceMap& map, std::size_t first,
                                                  std::size_t last);

}  // namespace rircoh
