#include "rircoh/coherence.hpp"
#include "rircoh/errors.hpp"
#include "rircoh/sensitivity.hpp"
#include "rircoh/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace rircoh;
using namespace testsupport;

namespace {

const std::vector<BandLabel> kBroadband{std::nullopt};

double broadband_rating(const synth::SyntheticPair& p) {
  const auto out = band_sweep(p.x, p.y, kBroadband, AnalysisConfig{});
  REQUIRE(out[0].ok());
  return out[0].rating->gamma_rating();
}

std::vector<double> sweep_ratings(const synth::SyntheticPair& p) {
  std::vector<BandLabel> bands;
  for (const auto& b : default_bands()) bands.emplace_back(b);
  std::vector<double> out;
  for (const auto& o : band_sweep(p.x, p.y, bands, AnalysisConfig{})) {
    REQUIRE(o.ok());
    out.push_back(o.rating->gamma_rating());
  }
  return out;
}

std::vector<double> index_ramp(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
  return v;
}

// Median over [first, last) of the environment coherence of a broadband analysis.
double env_median(const BandAnalysis& a, double first_s, double last_s) {
  std::vector<double> v;
  for (std::size_t i = 0; i < a.environment.size(); ++i) {
    const double t = a.environment.times()[i];
    if (t >= first_s && t < last_s && a.environment.gamma()[i]) v.push_back(*a.environment.gamma()[i]);
  }
  REQUIRE_FALSE(v.empty());
  return plain_median(v);
}

double measured_median(const BandAnalysis& a, double first_s, double last_s) {
  std::vector<double> v;
  for (std::size_t i = 0; i < a.measured.size(); ++i) {
    const double t = a.measured.times()[i];
    if (t >= first_s && t < last_s && a.measured.gamma()[i]) v.push_back(*a.measured.gamma()[i]);
  }
  REQUIRE_FALSE(v.empty());
  return plain_median(v);
}

}  // namespace

TEST_CASE("generators are deterministic per seed") {
  const synth::PairParams params;
  CHECK(synth::gen_mixing_pair(0.5, params, 7).x == synth::gen_mixing_pair(0.5, params, 7).x);
  CHECK(synth::gen_mixing_pair(0.5, params, 7).y == synth::gen_mixing_pair(0.5, params, 7).y);
  CHECK_FALSE(synth::gen_mixing_pair(0.5, params, 7).x == synth::gen_mixing_pair(0.5, params, 8).x);
  CHECK(synth::gen_jitter_pair(params, 1e-4, 3).y == synth::gen_jitter_pair(params, 1e-4, 3).y);
  CHECK(synth::gen_occluded_pair(params, {}, 3).y == synth::gen_occluded_pair(params, {}, 3).y);
  CHECK(synth::gen_decaying_rir(0.5, 48000, 1.0, 4) == synth::gen_decaying_rir(0.5, 48000, 1.0, 4));

  synth::Rng a(11), b(11);
  for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());
  CHECK(synth::derive_seed(1, 0) != synth::derive_seed(1, 1));
  CHECK(synth::derive_seed(1, 0) != synth::derive_seed(2, 0));
}

TEST_CASE("Rng moments") {
  synth::Rng rng(99);
  double s = 0, s2 = 0, u = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s += g;
    s2 += g * g;
    const double v = rng.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    u += v;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(u / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("pairs are response plus noise, sample for sample") {
  const synth::PairParams params;
  for (const auto& p : {synth::gen_mixing_pair(0.4, params, 1), synth::gen_occluded_pair(params, {}, 1),
                        synth::gen_absorption_change_pair(params, {}, 1),
                        synth::gen_jitter_pair(params, 2e-4, 1)}) {
    REQUIRE(p.x.size() == 48000);
    REQUIRE(p.y.size() == 48000);
    for (std::size_t i = 0; i < p.x.size(); ++i) {
      REQUIRE(p.x.samples()[i] == p.h_x[i] + p.n_x[i]);
      REQUIRE(p.y.samples()[i] == p.h_y[i] + p.n_y[i]);
    }
    CHECK(p.x.meta().id != p.y.meta().id);
  }
}

TEST_CASE("decay follows the requested reverberation time") {
  for (const double rt : {0.3, 0.8}) {
    const auto r = synth::gen_decaying_rir(rt, 48000, 1.0, 2);
    CHECK(estimate_rt(r) == doctest::Approx(rt).epsilon(0.1));
    // Energy slope: 60 dB per rt, checked on 50 ms blocks 0.1 s apart.
    auto block_db = [&](double t0) {
      const auto i0 = static_cast<std::size_t>(t0 * 48000);
      double e = 0;
      for (std::size_t i = i0; i < i0 + 2400; ++i) e += r.samples()[i] * r.samples()[i];
      return 10 * std::log10(e);
    };
    const double slope = (block_db(0.0) - block_db(0.1)) / 0.1;
    CHECK(slope == doctest::Approx(60.0 / rt).epsilon(0.1));
  }
  CHECK(synth::decay_rate(1.0) == doctest::Approx(3.0 * std::log(10.0)));
  CHECK_THROWS_AS(synth::gen_decaying_rir(2.0, 48000, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(synth::gen_decaying_rir(0.0, 48000, 1.0, 1), ValidationError);
}

TEST_CASE("noise level matches the requested SNR") {
  for (const double snr : {40.0, 60.0}) {
    synth::PairParams params;
    params.snr_db = snr;
    const auto p = synth::gen_mixing_pair(1.0, params, 3);
    // Undo the decay so the response has unit variance throughout.
    const double k = synth::decay_rate(params.rt);
    double hp = 0, np = 0;
    for (std::size_t i = 0; i < p.h_x.size(); ++i) {
      const double u = p.h_x[i] * std::exp(k * static_cast<double>(i) / 48000.0);
      hp += u * u;
      np += p.n_x[i] * p.n_x[i];
    }
    CHECK(std::abs(10 * std::log10(hp / np) - snr) < 1.0);

    // The estimator reads the floor as a median (ln 2 of the mean for chi-square 2).
    const auto b = analytic_signal(p.x);
    const double floor = estimate_noise_floor(b) / std::log(2.0);
    const double expected = std::pow(10.0, -snr / 10.0);
    CHECK(std::abs(10 * std::log10(floor / expected)) < 1.0);
  }
}

TEST_CASE("mixing pair reaches its target") {
  const synth::PairParams params;
  const auto same = synth::gen_mixing_pair(1.0, params, 4);
  CHECK(same.h_x == same.h_y);
  CHECK(same.truth.gamma_ir_target == std::optional<double>(1.0));
  const auto a = analyze_band(same.x, same.y, std::nullopt, AnalysisConfig{});
  CHECK(env_median(a, 0.005, 0.2) > 0.99);

  const auto indep = synth::gen_mixing_pair(0.0, params, 4);
  const auto b = analyze_band(indep.x, indep.y, std::nullopt, AnalysisConfig{});
  CHECK(env_median(b, 0.005, 0.2) < 0.05);

  const auto half = synth::gen_mixing_pair(std::sqrt(0.5), params, 4);
  const auto c = analyze_band(half.x, half.y, std::nullopt, AnalysisConfig{});
  CHECK(env_median(c, 0.005, 0.2) == doctest::Approx(0.5).epsilon(0.1));

  CHECK_THROWS_AS(synth::gen_mixing_pair(1.1, params, 1), ValidationError);
  CHECK_THROWS_AS(synth::gen_mixing_pair(-0.1, params, 1), ValidationError);
  synth::PairParams bad;
  bad.sample_rate = 0;
  CHECK_THROWS_AS(synth::gen_mixing_pair(0.5, bad, 1), ValidationError);
  bad = {};
  bad.rt = 0;
  CHECK_THROWS_AS(synth::gen_mixing_pair(0.5, bad, 1), ValidationError);
}

TEST_CASE("mixing estimate converges with the record length") {
  // Spread of the time-median estimate across seeds shrinks as more of the
  // decay is analysed.
  auto spread = [](double duration) {
    synth::PairParams params;
    params.rt = duration / 2;
    params.duration = duration;
    std::vector<double> err;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
      const auto p = synth::gen_mixing_pair(std::sqrt(0.5), params, seed);
      const auto a = analyze_band(p.x, p.y, std::nullopt, AnalysisConfig{});
      const auto t_max = snr_truncation_index(a.env_x, a.env_y, 30, a.onset_index);
      const auto m = time_median(a.environment, a.onset_index, t_max);
      REQUIRE(m.has_value());
      err.push_back(std::abs(*m - 0.5));
    }
    return plain_median(err);
  };
  CHECK(spread(4.0) < spread(1.0));
}

TEST_CASE("jitter pair") {
  const synth::PairParams params;
  const auto still = synth::gen_jitter_pair(params, 0.0, 6);
  CHECK(still.h_x == still.h_y);
  CHECK(broadband_rating(still) < 0.01);

  // The drift decorrelates high bands more than low ones.
  const auto moving = synth::gen_jitter_pair(params, 1e-4, 6);
  const auto r = sweep_ratings(moving);
  CHECK(spearman(index_ramp(r.size()), r) >= 0.9);
  CHECK(r.back() > r.front());

  CHECK_THROWS_AS(synth::gen_jitter_pair(params, 2e-3, 1), ValidationError);
  CHECK_NOTHROW(synth::gen_jitter_pair(params, -1e-3, 1));
}

TEST_CASE("occluded pair") {
  const synth::PairParams params;
  synth::Occlusion occ;
  occ.start_s = 0.033;
  const auto p = synth::gen_occluded_pair(params, occ, 8);
  REQUIRE(p.truth.occlusion.has_value());
  CHECK(p.truth.occlusion->start_s == 0.033);
  CHECK(p.truth.occlusion->end_s == doctest::Approx(0.043));
  for (std::size_t i = 0; i < 33 * 48; ++i) REQUIRE(p.h_x[i] == doctest::Approx(p.h_y[i]).epsilon(1e-9).scale(1e-6));

  const auto a = analyze_band(p.x, p.y, std::nullopt, AnalysisConfig{});
  CHECK(measured_median(a, 0.036, 0.040) < 0.2);
  CHECK(measured_median(a, 0.005, 0.028) > 0.9);

  // The high bands lose more coherence than the low ones after the occlusion.
  const auto r = sweep_ratings(p);
  double low = 0, high = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    low += r[i];
    high += r[r.size() - 1 - i];
  }
  CHECK(high > low);

  synth::Occlusion none = occ;
  none.attenuation_db = 0;
  const auto q = synth::gen_occluded_pair(params, none, 8);
  CHECK(q.h_x == q.h_y);

  synth::Occlusion outside = occ;
  outside.start_s = 0.995;
  CHECK_THROWS_AS(synth::gen_occluded_pair(params, outside, 1), ValidationError);
  synth::Occlusion negative = occ;
  negative.attenuation_db = -1;
  CHECK_THROWS_AS(synth::gen_occluded_pair(params, negative, 1), ValidationError);
}

TEST_CASE("absorption change") {
  const synth::PairParams params;
  synth::AbsorptionChange change;
  change.rt_y = 0.35;
  const auto p = synth::gen_absorption_change_pair(params, change, 10);
  CHECK(p.truth.change_time_s == std::optional<double>(0.020));
  for (std::size_t i = 0; i < 960; ++i) REQUIRE(p.h_x[i] == p.h_y[i]);
  CHECK(broadband_rating(p) > 0.3);

  synth::AbsorptionChange never = change;
  never.change_time_s = params.duration;
  CHECK(broadband_rating(synth::gen_absorption_change_pair(params, never, 10)) < 0.01);

  double previous = -1;
  for (const double f : {0.0, 0.25, 0.5, 1.0}) {
    synth::AbsorptionChange c = change;
    c.changed_fraction = f;
    const double g = broadband_rating(synth::gen_absorption_change_pair(params, c, 10));
    CHECK(g > previous);
    previous = g;
  }

  synth::AbsorptionChange bad = change;
  bad.changed_fraction = 1.5;
  CHECK_THROWS_AS(synth::gen_absorption_change_pair(params, bad, 1), ValidationError);
  bad = change;
  bad.change_time_s = 2.0;
  CHECK_THROWS_AS(synth::gen_absorption_change_pair(params, bad, 1), ValidationError);
}
