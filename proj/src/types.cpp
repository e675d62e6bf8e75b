#include "rircoh/types.hpp"

#include "rircoh/errors.hpp"

#include <cmath>
#include <sstream>

namespace rircoh {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace

Rir::Rir(int sample_rate, std::vector<double> samples, RirMeta meta)
    : sample_rate_(sample_rate), samples_(std::move(samples)), meta_(std::move(meta)) {
  require(sample_rate_ > 0, "Rir: sample rate must be positive");
  require(!samples_.empty(), "Rir '" + meta_.id + "': no samples");
  bool any_nonzero = false;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      std::ostringstream os;
      os << "Rir '" << meta_.id << "': non-finite sample at index " << i;
      throw ValidationError(os.str());
    }
    any_nonzero = any_nonzero || samples_[i] != 0.0;
  }
  require(any_nonzero, "Rir '" + meta_.id + "': all samples are zero");
}

Rir Rir::relabeled(RirMeta meta) const {
  Rir out = *this;
  out.meta_ = std::move(meta);
  return out;
}

BandSpec::BandSpec(double center_hz, double bandwidth_hz)
    : center_hz_(center_hz), bandwidth_hz_(bandwidth_hz) {
  require(std::isfinite(center_hz) && std::isfinite(bandwidth_hz), "BandSpec: non-finite value");
  require(bandwidth_hz_ > 0, "BandSpec: bandwidth must be positive");
  require(low_hz() > 0, "BandSpec: lower band edge must be above 0 Hz");
}

void BandSpec::check_against(int sample_rate) const {
  if (!(high_hz() < sample_rate / 2.0)) {
    std::ostringstream os;
    os << "band " << center_hz_ << " Hz +/- " << bandwidth_hz_ / 2 << " Hz exceeds Nyquist ("
       << sample_rate / 2.0 << " Hz)";
    throw ValidationError(os.str());
  }
}

std::string band_name(const BandLabel& band) {
  if (!band) return "broadband";
  std::ostringstream os;
  os << band->center_hz();
  return os.str();
}

std::vector<BandSpec> default_bands() {
  std::vector<BandSpec> bands;
  for (int k = 1; k <= 19; ++k) bands.emplace_back(1000.0 * k, 1000.0);
  return bands;
}

void AnalysisConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("AnalysisConfig: " + m); };
  if (!(avg_window_s > 0) || !std::isfinite(avg_window_s)) fail("avg_window must be positive");
  if (!(snr_threshold_db > 0) || !std::isfinite(snr_threshold_db))
    fail("snr_threshold must be positive");
  if (stft_window_len == 0) fail("stft_window_len must be positive");
  if (stft_hop == 0 || stft_hop > stft_window_len) fail("need 0 < stft_hop <= stft_window_len");
  if (!(guard_epsilon > 0) || !std::isfinite(guard_epsilon)) fail("guard_epsilon must be positive");
}

CoherenceCurve::CoherenceCurve(std::vector<double> times, std::vector<std::optional<double>> gamma,
                               BandLabel band, PairId pair_id)
    : times_(std::move(times)),
      gamma_(std::move(gamma)),
      band_(std::move(band)),
      pair_id_(std::move(pair_id)) {
  require(times_.size() == gamma_.size(), "CoherenceCurve: times and gamma differ in length");
  require(strictly_increasing(times_), "CoherenceCurve: times must be strictly increasing");
  for (const auto& g : gamma_)
    require(!g || (*g >= 0.0 && *g <= 1.0), "CoherenceCurve: gamma outside [0, 1]");
}

EnergyEnvelope::EnergyEnvelope(std::vector<double> times, std::vector<double> signal_energy,
                               std::vector<double> total_power, double noise_energy)
    : times_(std::move(times)),
      signal_energy_(std::move(signal_energy)),
      total_power_(std::move(total_power)),
      noise_energy_(noise_energy) {
  require(times_.size() == signal_energy_.size() && times_.size() == total_power_.size(),
          "EnergyEnvelope: inconsistent lengths");
  require(std::isfinite(noise_energy_) && noise_energy_ >= 0, "EnergyEnvelope: bad noise energy");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    require(std::isfinite(signal_energy_[i]) && signal_energy_[i] >= 0,
            "EnergyEnvelope: negative or non-finite signal energy");
    require(std::isfinite(total_power_[i]) && total_power_[i] >= 0,
            "EnergyEnvelope: negative or non-finite total power");
  }
}

SensitivityRating::SensitivityRating(BandLabel band, double gamma_rating, std::size_t onset_index,
                                     std::size_t truncation_index, double truncation_s,
                                     PairId pair_id)
    : band_(std::move(band)),
      gamma_rating_(gamma_rating),
      onset_index_(onset_index),
      truncation_index_(truncation_index),
      truncation_s_(truncation_s),
      pair_id_(std::move(pair_id)) {
  require(gamma_rating_ >= 0.0 && gamma_rating_ <= 1.0, "SensitivityRating: rating outside [0, 1]");
  require(onset_index_ <= truncation_index_, "SensitivityRating: truncation precedes onset");
}

TFCoherenceMap::TFCoherenceMap(std::vector<double> times, std::vector<double> freqs,
                               std::vector<std::optional<double>> gamma)
    : times_(std::move(times)), freqs_(std::move(freqs)), gamma_(std::move(gamma)) {
  require(gamma_.size() == times_.size() * freqs_.size(),
          "TFCoherenceMap: grid does not match axes");
  for (const auto& g : gamma_)
    require(!g || (*g >= 0.0 && *g <= 1.0), "TFCoherenceMap: gamma outside [0, 1]");
}

}  // namespace rircoh
