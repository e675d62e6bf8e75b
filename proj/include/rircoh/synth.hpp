#pragma once

#include "rircoh/dsp.hpp"
#include "rircoh/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rircoh::synth {

// Seeded generator: mt19937_64 with Box-Muller normal deviates.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  double uniform();   // [0, 1)
  double gaussian();  // N(0, 1)

private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// Independent sub-stream seed derived from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Declared ground truth of a generated pair.
struct Truth {
  std::string generator;
  std::map<std::string, double> parameters;
  std::optional<double> gamma_ir_target;
  std::optional<TimeSegment> occlusion;
  std::optional<double> change_time_s;
};

// x = h_x + n_x and y = h_y + n_y hold samplewise and exactly.
struct SyntheticPair {
  Rir x;
  Rir y;
  std::vector<double> h_x;
  std::vector<double> h_y;
  std::vector<double> n_x;
  std::vector<double> n_y;
  Truth truth;
};

// Amplitude decay exp(-t ln(10^3) / rt): the energy falls 60 dB in rt.
double decay_rate(double rt);

// Gaussian noise under an exponential energy decay of the given RT.
// Requires rt > 0 and duration >= rt.
Rir gen_decaying_rir(double rt, int sample_rate, double duration, std::uint64_t seed);

struct PairParams {
  double rt = 0.5;
  int sample_rate = 48000;
  double duration = 1.0;
  double snr_db = 60.0;  // initial RIR power over noise power
};

// h_y = a h_x + sqrt(1 - a^2) h' with h' independent under the same decay.
// Environment coherence target a^2.
SyntheticPair gen_mixing_pair(double a, const PairParams& params, std::uint64_t seed);

struct Occlusion {
  double start_s = 0.0;
  double length_s = 0.010;
  double attenuation_db = 30.0;
  // Late phase perturbation (rad, at Nyquist), scaled by the occlusion depth
  // 1 - 10^(-attenuation/20) and proportional to frequency.
  double late_phase_std = 1.2;
  // Time over which the late perturbation ramps in after the occlusion.
  double ramp_s = 0.020;
};

// y is x with the occlusion window replaced by an attenuated copy plus an
// independent field, and the later response phase-perturbed in the STFT domain
// with a spread growing with frequency.
SyntheticPair gen_occluded_pair(const PairParams& params, const Occlusion& occlusion,
                                std::uint64_t seed);

struct AbsorptionChange {
  double rt_y = 0.5;           // late decay of y (x uses PairParams::rt)
  double change_time_s = 0.020;
  // Share of the late field's energy that is re-drawn in y (1: independent).
  double changed_fraction = 1.0;
};

// Shared response up to change_time; after it y's field is (partly) re-drawn
// and decays with rt_y.
SyntheticPair gen_absorption_change_pair(const PairParams& params, const AbsorptionChange& change,
                                         std::uint64_t seed);

inline constexpr double kMaxDrift = 1e-3;

// y is x delayed progressively by drift * t (a slow time stretch), applied as
// a phase rotation -2 pi f drift t per STFT frame. Requires |drift| <= 1e-3.
SyntheticPair gen_jitter_pair(const PairParams& params, double drift, std::uint64_t seed);

// STFT parameters of the generators' own phase-domain processing.
inline constexpr std::size_t kSynthStftWindow = 512;
inline constexpr std::size_t kSynthStftHop = 128;

}  // namespace rircoh::synth
