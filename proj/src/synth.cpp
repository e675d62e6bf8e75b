#include "rircoh/synth.hpp"

#include "rircoh/errors.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

namespace rircoh::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::size_t sample_count(double duration, int sample_rate) {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

void check_params(const PairParams& p) {
  if (!(p.rt > 0)) throw ValidationError("synth: rt must be positive");
  if (p.sample_rate <= 0) throw ValidationError("synth: sample rate must be positive");
  if (!(p.duration > 0)) throw ValidationError("synth: duration must be positive");
  if (!std::isfinite(p.snr_db)) throw ValidationError("synth: snr must be finite");
}

std::vector<double> white(std::size_t n, std::uint64_t seed, double stddev) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& s : v) s = stddev * rng.gaussian();
  return v;
}

std::vector<double> decay_envelope(std::size_t n, int fs, double rt) {
  std::vector<double> env(n);
  const double k = decay_rate(rt);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::exp(-k * static_cast<double>(i) / fs);
  return env;
}

double noise_stddev(double snr_db) { return std::pow(10.0, -snr_db / 20.0); }

// Rotates STFT bins by phase(t_frame_centre, f) and resynthesises. The signal
// is zero-padded by a window on both sides so every sample is covered.
std::vector<double> rotate_phases(const std::vector<double>& signal, int fs,
                                  const std::function<double(double, double)>& phase) {
  const std::size_t pad = kSynthStftWindow;
  std::vector<double> padded(signal.size() + 2 * pad, 0.0);
  std::copy(signal.begin(), signal.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
  auto grid = stft(padded, fs, kSynthStftWindow, kSynthStftHop);
  const double offset = static_cast<double>(pad) / fs;
  for (std::size_t t = 0; t < grid.n_frames(); ++t) {
    const double tc = grid.times[t] - offset;
    for (std::size_t k = 0; k < grid.n_bins(); ++k) {
      const double ph = phase(tc, grid.freqs[k]);
      if (ph != 0.0) grid.at(t, k) *= std::polar(1.0, ph);
    }
  }
  const auto out = istft(grid, padded.size());
  return {out.begin() + static_cast<std::ptrdiff_t>(pad),
          out.begin() + static_cast<std::ptrdiff_t>(pad + signal.size())};
}

SyntheticPair assemble(std::vector<double> hx, std::vector<double> hy, const PairParams& p,
                       std::uint64_t seed, Truth truth, const std::string& tag) {
  const double sd = noise_stddev(p.snr_db);
  auto nx = white(hx.size(), derive_seed(seed, 100), sd);
  auto ny = white(hy.size(), derive_seed(seed, 101), sd);
  std::vector<double> x(hx.size()), y(hy.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = hx[i] + nx[i];
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = hy[i] + ny[i];
  const std::string base = tag + "-s" + std::to_string(seed);
  RirMeta mx{base + "-x", "0", "S", "R", tag};
  RirMeta my{base + "-y", "0", "S", "R", tag};
  truth.parameters["rt"] = p.rt;
  truth.parameters["sample_rate"] = p.sample_rate;
  truth.parameters["duration"] = p.duration;
  truth.parameters["snr_db"] = p.snr_db;
  truth.parameters["seed"] = static_cast<double>(seed);
  return SyntheticPair{Rir(p.sample_rate, std::move(x), mx),
                       Rir(p.sample_rate, std::move(y), my),
                       std::move(hx),
                       std::move(hy),
                       std::move(nx),
                       std::move(ny),
                       std::move(truth)};
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  return r * std::cos(kTwoPi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined key
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double decay_rate(double rt) { return 3.0 * std::numbers::ln10 / rt; }

Rir gen_decaying_rir(double rt, int sample_rate, double duration, std::uint64_t seed) {
  if (!(rt > 0)) throw ValidationError("gen_decaying_rir: rt must be positive");
  if (!(duration >= rt)) throw ValidationError("gen_decaying_rir: duration must be at least rt");
  if (sample_rate <= 0) throw ValidationError("gen_decaying_rir: sample rate must be positive");
  const std::size_t n = sample_count(duration, sample_rate);
  auto h = white(n, derive_seed(seed, 0), 1.0);
  const auto env = decay_envelope(n, sample_rate, rt);
  for (std::size_t i = 0; i < n; ++i) h[i] *= env[i];
  return Rir(sample_rate, std::move(h), RirMeta{"decay-s" + std::to_string(seed), "0", "S", "R", "decay"});
}

SyntheticPair gen_mixing_pair(double a, const PairParams& params, std::uint64_t seed) {
  check_params(params);
  if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("gen_mixing_pair: a must lie in [0, 1]");
  const std::size_t n = sample_count(params.duration, params.sample_rate);
  const auto env = decay_envelope(n, params.sample_rate, params.rt);
  auto hx = white(n, derive_seed(seed, 0), 1.0);
  auto other = white(n, derive_seed(seed, 1), 1.0);
  const double b = std::sqrt(1.0 - a * a);
  std::vector<double> hy(n);
  for (std::size_t i = 0; i < n; ++i) {
    hx[i] *= env[i];
    hy[i] = a * hx[i] + b * other[i] * env[i];
  }
  Truth truth{"mixing", {{"a", a}}, a * a, std::nullopt, std::nullopt};
  return assemble(std::move(hx), std::move(hy), params, seed, std::move(truth), "mixing");
}

SyntheticPair gen_occluded_pair(const PairParams& params, const Occlusion& occ, std::uint64_t seed) {
  check_params(params);
  const double end_s = occ.start_s + occ.length_s;
  if (!(occ.start_s >= 0) || !(occ.length_s > 0) || !(end_s <= params.duration))
    throw ValidationError("gen_occluded_pair: occlusion window must lie inside the RIR");
  if (!(occ.attenuation_db >= 0) || !(occ.late_phase_std >= 0) || !(occ.ramp_s >= 0))
    throw ValidationError("gen_occluded_pair: attenuation, phase spread and ramp must be >= 0");
  const int fs = params.sample_rate;
  const std::size_t n = sample_count(params.duration, fs);
  const auto env = decay_envelope(n, fs, params.rt);
  auto hx = white(n, derive_seed(seed, 0), 1.0);
  const auto other = white(n, derive_seed(seed, 1), 1.0);
  for (std::size_t i = 0; i < n; ++i) hx[i] *= env[i];

  const double gain = std::pow(10.0, -occ.attenuation_db / 20.0);
  const double replace = std::sqrt(std::max(0.0, 1.0 - gain * gain));
  std::vector<double> hy = hx;
  const auto first = static_cast<std::size_t>(std::llround(occ.start_s * fs));
  const auto last = std::min(n, static_cast<std::size_t>(std::llround(end_s * fs)));
  for (std::size_t i = first; i < last; ++i) hy[i] = gain * hx[i] + replace * other[i] * env[i];

  const double spread = occ.late_phase_std * (1.0 - gain);
  if (spread > 0) {
    Rng rng(derive_seed(seed, 2));
    const double nyquist = fs / 2.0;
    hy = rotate_phases(hy, fs, [&](double t, double f) {
      if (t < end_s) return 0.0;
      const double ramp = occ.ramp_s > 0 ? std::min(1.0, (t - end_s) / occ.ramp_s) : 1.0;
      return spread * ramp * (f / nyquist) * rng.gaussian();
    });
  }
  Truth truth{"occluded",
              {{"occlusion_start_s", occ.start_s},
               {"occlusion_length_s", occ.length_s},
               {"attenuation_db", occ.attenuation_db},
               {"late_phase_std", occ.late_phase_std},
               {"ramp_s", occ.ramp_s}},
              std::nullopt,
              TimeSegment{occ.start_s, end_s},
              std::nullopt};
  return assemble(std::move(hx), std::move(hy), params, seed, std::move(truth), "occluded");
}

SyntheticPair gen_absorption_change_pair(const PairParams& params, const AbsorptionChange& change,
                                         std::uint64_t seed) {
  check_params(params);
  if (!(change.rt_y > 0)) throw ValidationError("gen_absorption_change_pair: rt_y must be positive");
  if (!(change.change_time_s >= 0 && change.change_time_s <= params.duration))
    throw ValidationError("gen_absorption_change_pair: change time outside the RIR");
  if (!(change.changed_fraction >= 0 && change.changed_fraction <= 1))
    throw ValidationError("gen_absorption_change_pair: changed fraction must lie in [0, 1]");
  const int fs = params.sample_rate;
  const std::size_t n = sample_count(params.duration, fs);
  const auto shared = white(n, derive_seed(seed, 0), 1.0);
  const auto fresh = white(n, derive_seed(seed, 1), 1.0);
  const double kx = decay_rate(params.rt);
  const double ky = decay_rate(change.rt_y);
  const double tc = change.change_time_s;
  const double keep = std::sqrt(1.0 - change.changed_fraction);
  const double redraw = std::sqrt(change.changed_fraction);
  std::vector<double> hx(n), hy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double ex = std::exp(-kx * t);
    hx[i] = shared[i] * ex;
    if (t < tc) {
      hy[i] = hx[i];
    } else {
      const double ey = std::exp(-kx * tc - ky * (t - tc));
      hy[i] = (keep * shared[i] + redraw * fresh[i]) * ey;
    }
  }
  Truth truth{"absorption",
              {{"rt_y", change.rt_y},
               {"change_time_s", tc},
               {"changed_fraction", change.changed_fraction}},
              std::nullopt,
              std::nullopt,
              tc};
  return assemble(std::move(hx), std::move(hy), params, seed, std::move(truth), "absorption");
}

SyntheticPair gen_jitter_pair(const PairParams& params, double drift, std::uint64_t seed) {
  check_params(params);
  if (!(std::abs(drift) <= kMaxDrift)) {
    std::ostringstream os;
    os << "gen_jitter_pair: |drift| = " << std::abs(drift) << " exceeds " << kMaxDrift;
    throw ValidationError(os.str());
  }
  const int fs = params.sample_rate;
  const std::size_t n = sample_count(params.duration, fs);
  const auto env = decay_envelope(n, fs, params.rt);
  auto hx = white(n, derive_seed(seed, 0), 1.0);
  for (std::size_t i = 0; i < n; ++i) hx[i] *= env[i];
  std::vector<double> hy = hx;
  if (drift != 0.0)
    hy = rotate_phases(hx, fs, [&](double t, double f) { return -kTwoPi * f * drift * t; });
  Truth truth{"jitter", {{"drift", drift}}, std::nullopt, std::nullopt, std::nullopt};
  return assemble(std::move(hx), std::move(hy), params, seed, std::move(truth), "jitter");
}

}  // namespace rircoh::synth
