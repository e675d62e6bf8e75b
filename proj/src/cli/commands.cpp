#include "rircoh/cli.hpp"

#include "cli/csv.hpp"
#include "rircoh/coherence.hpp"
#include "rircoh/errors.hpp"
#include "rircoh/manifest.hpp"
#include "rircoh/sensitivity.hpp"
#include "rircoh/synth.hpp"
#include "rircoh/wav.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace rircoh::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, r.ptr);
}

std::string format_gamma(const std::optional<double>& value) {
  return value ? format_number(*value) : "nan";
}

std::string file_token(std::string_view id) {
  std::string out(id);
  for (auto& c : out) {
    const bool keep = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                      c == '.' || c == '_' || c == '-';
    if (!keep) c = '_';
  }
  return out;
}

namespace {

double parse_number(std::string_view text, const std::string& what) {
  double v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError("bad " + what + " '" + std::string(text) + "'");
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<BandLabel> parse_bands(std::string_view spec) {
  const std::string all = trim(spec);
  if (all.empty()) throw ConfigError("empty band list");
  std::vector<BandLabel> bands;
  if (all == "default") {
    for (const auto& b : default_bands()) bands.emplace_back(b);
    return bands;
  }
  std::string_view rest(all);
  while (true) {
    const auto comma = rest.find(',');
    const std::string item = trim(rest.substr(0, comma));
    if (item == "broadband") {
      bands.emplace_back(std::nullopt);
    } else if (item == "default") {
      for (const auto& b : default_bands()) bands.emplace_back(b);
    } else {
      const auto colon = item.find(':');
      const double centre = parse_number(std::string_view(item).substr(0, colon), "band centre");
      const double width =
          colon == std::string::npos ? 1000.0 : parse_number(std::string_view(item).substr(colon + 1), "bandwidth");
      try {
        bands.emplace_back(BandSpec(centre, width));
      } catch (const ValidationError& e) {
        throw ConfigError(std::string("band '") + item + "': " + e.what());
      }
    }
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return bands;
}

namespace {

std::string band_file_suffix(const BandLabel& band) {
  if (!band) return "";
  std::string s = "_" + format_number(band->center_hz()) + "Hz";
  if (band->bandwidth_hz() != 1000.0) s += "_bw" + format_number(band->bandwidth_hz()) + "Hz";
  return s;
}

json band_json(const BandLabel& band) {
  if (!band) return "broadband";
  return json{{"center_hz", band->center_hz()}, {"bandwidth_hz", band->bandwidth_hz()}};
}

json number_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Runs fn(i) for i in [0, n) on up to `jobs` threads. fn must not throw.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

int exit_code_for(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const InputError&) {
    return kExitInput;
  } catch (const AnalysisError&) {
    return kExitAnalysis;
  } catch (...) {
    return kExitAnalysis;
  }
}

std::string message_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

// ---------------------------------------------------------------------------
// Options and effective configuration

struct CommonFlags {
  std::string manifest;
  std::string out_dir = ".";
  double window_ms = 0;
  double snr_threshold_db = 0;
  std::string bands;
  std::size_t stft_window = 0;
  std::size_t stft_hop = 0;
  std::uint64_t seed = 0;
  int jobs = 1;

  CLI::Option* window_opt = nullptr;
  CLI::Option* snr_opt = nullptr;
  CLI::Option* bands_opt = nullptr;
  CLI::Option* stft_window_opt = nullptr;
  CLI::Option* stft_hop_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App& app, CommonFlags& f, bool needs_manifest) {
  auto* m = app.add_option("--manifest", f.manifest, "Session manifest");
  if (needs_manifest) m->required();
  app.add_option("--out-dir", f.out_dir, "Output directory")->capture_default_str();
  f.window_opt = app.add_option("--window-ms", f.window_ms, "Short-time averaging window in ms (default 10)");
  f.snr_opt = app.add_option("--snr-threshold-db", f.snr_threshold_db, "SNR truncation threshold in dB (default 30)");
  f.bands_opt = app.add_option("--bands", f.bands,
                               "default | broadband | list of centre[:bandwidth] in Hz, comma-separated");
  f.stft_window_opt = app.add_option("--stft-window", f.stft_window, "STFT window length in samples (default 512)");
  f.stft_hop_opt = app.add_option("--stft-hop", f.stft_hop, "STFT hop in samples (default 128)");
  f.seed_opt = app.add_option("--seed", f.seed, "Base seed");
  app.add_option("--jobs", f.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

struct Setting {
  std::string value;
  std::string source;  // flag | manifest | default
};

struct Effective {
  AnalysisConfig config;
  std::vector<BandLabel> bands;
  std::map<std::string, Setting> echo;
};

const std::vector<std::string> kConfigKeys = {"window_ms", "snr_threshold_db", "stft_window",
                                              "stft_hop", "bands", "guard_epsilon"};

Effective resolve(const CommonFlags& f, const SessionManifest* manifest, const std::string& default_bands,
                  std::vector<std::string>& warnings) {
  const std::map<std::string, std::string> empty;
  const auto& mcfg = manifest ? manifest->config : empty;
  for (const auto& [k, v] : mcfg)
    if (std::find(kConfigKeys.begin(), kConfigKeys.end(), k) == kConfigKeys.end())
      warnings.push_back("manifest [config]: unknown key '" + k + "' ignored");

  Effective eff;
  auto pick = [&](const std::string& key, const CLI::Option* opt, const std::string& flag_value,
                  const std::string& fallback) {
    Setting s{fallback, "default"};
    if (auto it = mcfg.find(key); it != mcfg.end()) s = {it->second, "manifest"};
    if (opt && opt->count() > 0) s = {flag_value, "flag"};
    eff.echo[key] = s;
    return s.value;
  };
  auto count_of = [&](const std::string& text, const std::string& key) {
    const double v = parse_number(text, key);
    if (!(v >= 1) || v != std::floor(v)) throw ConfigError(key + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };

  const AnalysisConfig d;
  eff.config.avg_window_s =
      parse_number(pick("window_ms", f.window_opt, format_number(f.window_ms), format_number(d.avg_window_s * 1e3)),
                   "window_ms") / 1e3;
  eff.config.snr_threshold_db = parse_number(
      pick("snr_threshold_db", f.snr_opt, format_number(f.snr_threshold_db), format_number(d.snr_threshold_db)),
      "snr_threshold_db");
  eff.config.stft_window_len = count_of(
      pick("stft_window", f.stft_window_opt, std::to_string(f.stft_window), std::to_string(d.stft_window_len)),
      "stft_window");
  eff.config.stft_hop =
      count_of(pick("stft_hop", f.stft_hop_opt, std::to_string(f.stft_hop), std::to_string(d.stft_hop)), "stft_hop");
  eff.config.guard_epsilon =
      parse_number(pick("guard_epsilon", nullptr, "", format_number(d.guard_epsilon)), "guard_epsilon");
  eff.bands = parse_bands(pick("bands", f.bands_opt, f.bands, default_bands));
  eff.config.validate();
  return eff;
}

json config_json(const Effective& eff, const CommonFlags& f) {
  json cfg = json::object();
  for (const auto& key : kConfigKeys) {
    const auto& s = eff.echo.at(key);
    cfg[key] = {{"value", s.value}, {"source", s.source}};
  }
  cfg["jobs"] = {{"value", std::to_string(f.jobs)}, {"source", "flag"}};
  return cfg;
}

// ---------------------------------------------------------------------------
// Session: manifest, planned pairs, loaded recordings

struct Session {
  SessionManifest manifest;
  PairPlan plan;
  std::vector<std::optional<Rir>> rirs;  // by entry index, loaded for paired entries only
  std::vector<std::size_t> condition_rank;  // by pair index
};

Session open_session(const std::string& path) {
  Session s;
  s.manifest = load_manifest(path);
  s.plan = build_pairs(s.manifest);
  // Deterministic output order: by condition (first appearance), then pair.
  std::map<std::string, std::size_t> rank;
  for (const auto& e : s.manifest.entries) rank.emplace(e.condition_id, rank.size());
  std::stable_sort(s.plan.pairs.begin(), s.plan.pairs.end(),
                   [&](const PlannedPair& a, const PlannedPair& b) {
                     return rank.at(a.condition_id) < rank.at(b.condition_id);
                   });
  s.rirs.resize(s.manifest.entries.size());
  for (const auto& p : s.plan.pairs) {
    for (const auto idx : {p.reference, p.comparison}) {
      if (!s.rirs[idx]) s.rirs[idx] = load_entry(s.manifest, s.manifest.entries[idx]);
    }
  }
  return s;
}

struct PairContext {
  const Rir& x;
  const Rir& y;
  PairOptions options;
  std::string condition_id;
  std::string pair_id;
};

PairContext pair_context(const Session& s, const PlannedPair& p) {
  const auto& ex = s.manifest.entries[p.reference];
  const auto& ey = s.manifest.entries[p.comparison];
  PairOptions o;
  o.noise_x = noise_options(s.manifest, ex);
  o.noise_y = noise_options(s.manifest, ey);
  const Rir& x = *s.rirs[p.reference];
  const Rir& y = *s.rirs[p.comparison];
  return {x, y, o, p.condition_id, PairId{x.meta().id, y.meta().id}.str()};
}

json pair_json(const PairContext& c) {
  return json{{"pair_id", c.pair_id},
              {"condition_id", c.condition_id},
              {"reference", c.x.meta().id},
              {"comparison", c.y.meta().id}};
}

struct Report {
  json doc;
  std::vector<std::string> warnings;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  Report(const std::string& command, const Effective* eff, const CommonFlags& f) {
    doc["tool"] = "rircoh";
    doc["version"] = kVersion;
    doc["command"] = command;
    if (eff) doc["config"] = config_json(*eff, f);
    doc["pairs"] = json::array();
  }

  void save(const fs::path& dir) {
    doc["warnings"] = warnings;
    doc["timing"] = {{"wall_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    write_text_file(dir / "report.json", doc.dump(2) + "\n");
  }
};

fs::path prepare_out_dir(const std::string& dir) {
  const fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw IoError(dir + ": cannot create output directory");
  return p;
}

void emit_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

struct Prepared {
  Session session;
  Effective eff;
  std::vector<std::string> warnings;
  fs::path out_dir;
};

Prepared prepare(const CommonFlags& f, const std::string& default_bands) {
  Prepared p;
  p.session = open_session(f.manifest);
  p.warnings = p.session.manifest.warnings;
  p.warnings.insert(p.warnings.end(), p.session.plan.warnings.begin(), p.session.plan.warnings.end());
  p.eff = resolve(f, &p.session.manifest, default_bands, p.warnings);
  p.out_dir = prepare_out_dir(f.out_dir);
  if (p.session.plan.pairs.empty()) p.warnings.push_back("manifest yields no pairs");
  return p;
}

// ---------------------------------------------------------------------------
// coherence

struct CoherenceJob {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  json result;
  std::exception_ptr error;
};

int cmd_coherence(const CommonFlags& f, std::ostream& out, std::ostream& err) {
  auto p = prepare(f, "broadband");
  const auto& pairs = p.session.plan.pairs;
  std::vector<CoherenceJob> jobs(pairs.size());
  parallel_for(pairs.size(), f.jobs, [&](std::size_t i) {
    auto& job = jobs[i];
    try {
      const auto c = pair_context(p.session, pairs[i]);
      job.result = pair_json(c);
      job.result["bands"] = json::array();
      for (const auto& band : p.eff.bands) {
        const auto a = analyze_band(c.x, c.y, band, p.eff.config, c.options);
        CsvWriter csv({"time_s", "gamma", "gamma_expected", "gamma_ir", "defined_flag"});
        for (std::size_t t = 0; t < a.measured.size(); ++t) {
          const auto& g = a.measured.gamma()[t];
          csv.cell(a.measured.times()[t])
              .cell(format_gamma(g))
              .cell(format_gamma(a.expected.gamma()[t]))
              .cell(format_gamma(a.environment.gamma()[t]))
              .cell(g ? "1" : "0")
              .end_row();
        }
        const std::string name = "coherence_" + file_token(c.pair_id) + band_file_suffix(band) + ".csv";
        json br{{"band", band_json(band)}, {"file", name}, {"onset_s", a.measured.times()[a.onset_index]}};
        try {
          const auto r = rate_band(a, p.eff.config);
          br["gamma_rating"] = r.gamma_rating();
          br["truncation_s"] = r.truncation_s();
          br["status"] = "ok";
        } catch (const AnalysisError& e) {
          br["gamma_rating"] = nullptr;
          br["truncation_s"] = nullptr;
          br["status"] = failure_status(e);
          br["message"] = e.what();
        }
        job.result["bands"].push_back(std::move(br));
        job.files.emplace_back(name, csv.text());
      }
    } catch (...) {
      job.error = std::current_exception();
    }
  });

  Report report("coherence", &p.eff, f);
  report.warnings = p.warnings;
  int code = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& job = jobs[i];
    if (job.error) {
      const auto msg = message_of(job.error);
      err << "error: " << msg << "\n";
      report.doc["pairs"].push_back(json{{"condition_id", pairs[i].condition_id}, {"error", msg}});
      if (code == kExitOk) code = exit_code_for(job.error);
      continue;
    }
    for (const auto& [name, text] : job.files) write_text_file(p.out_dir / name, text);
    report.doc["pairs"].push_back(std::move(job.result));
  }
  report.save(p.out_dir);
  emit_warnings(report.warnings, err);
  out << "coherence: " << pairs.size() << " pair(s) -> " << p.out_dir.string() << "\n";
  return code;
}

// ---------------------------------------------------------------------------
// sensitivity and report

struct SweepJob {
  std::vector<BandOutcome> outcomes;
  std::exception_ptr error;
};

std::optional<double> rir_rt(const Rir& r) {
  try {
    return estimate_rt(r);
  } catch (const AnalysisError&) {
    return std::nullopt;
  }
}

int run_sweeps(const CommonFlags& f, const std::string& command, bool write_csv, std::ostream& out,
               std::ostream& err) {
  auto p = prepare(f, command == "report" ? "broadband,default" : "default");
  const auto& pairs = p.session.plan.pairs;
  std::vector<SweepJob> jobs(pairs.size());
  parallel_for(pairs.size(), f.jobs, [&](std::size_t i) {
    try {
      const auto c = pair_context(p.session, pairs[i]);
      jobs[i].outcomes = band_sweep(c.x, c.y, p.eff.bands, p.eff.config, c.options);
    } catch (...) {
      jobs[i].error = std::current_exception();
    }
  });

  Report report(command, &p.eff, f);
  report.warnings = p.warnings;
  CsvWriter rows({"condition_id", "pair_id", "band_center_hz", "gamma_rating", "truncation_s", "status"});
  std::size_t succeeded = 0;
  std::exception_ptr first_error;
  std::vector<std::string> conditions;
  std::map<std::string, std::vector<SensitivityRating>> by_condition;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& cond = pairs[i].condition_id;
    if (std::find(conditions.begin(), conditions.end(), cond) == conditions.end()) conditions.push_back(cond);
    if (jobs[i].error) {
      const auto msg = message_of(jobs[i].error);
      err << "error: " << msg << "\n";
      report.doc["pairs"].push_back(json{{"condition_id", cond}, {"error", msg}});
      if (!first_error) first_error = jobs[i].error;
      continue;
    }
    const auto c = pair_context(p.session, pairs[i]);
    json pj = pair_json(c);
    pj["bands"] = json::array();
    for (const auto& o : jobs[i].outcomes) {
      rows.cell(cond).cell(c.pair_id).cell(band_name(o.band));
      json bj{{"band", band_json(o.band)}};
      if (o.rating) {
        ++succeeded;
        by_condition[cond].push_back(*o.rating);
        rows.cell(o.rating->gamma_rating()).cell(o.rating->truncation_s()).cell("ok");
        bj["gamma_rating"] = o.rating->gamma_rating();
        bj["truncation_s"] = o.rating->truncation_s();
        bj["status"] = "ok";
      } else {
        rows.cell("nan").cell("nan").cell(o.status);
        bj["gamma_rating"] = nullptr;
        bj["truncation_s"] = nullptr;
        bj["status"] = o.status;
        bj["message"] = o.failure;
        report.warnings.push_back(c.pair_id + " band " + band_name(o.band) + ": " + o.failure);
      }
      rows.end_row();
      pj["bands"].push_back(std::move(bj));
    }
    report.doc["pairs"].push_back(std::move(pj));
  }

  // Per-condition medians, with the condition's absorption area and median RT.
  CsvWriter medians({"condition_id", "band_center_hz", "median_gamma_rating", "n_ratings", "absorption_area_m2",
                     "rt_s"});
  json cj = json::array();
  for (const auto& cond : conditions) {
    const auto area = condition_absorption_area(p.session.manifest, cond);
    std::vector<double> rts;
    std::vector<bool> seen(p.session.manifest.entries.size(), false);
    for (const auto& pp : pairs) {
      if (pp.condition_id != cond) continue;
      for (const auto idx : {pp.reference, pp.comparison}) {
        if (seen[idx]) continue;
        seen[idx] = true;
        if (const auto rt = rir_rt(*p.session.rirs[idx])) rts.push_back(*rt);
      }
    }
    const double rt = rts.empty() ? std::numeric_limits<double>::quiet_NaN() : median(rts);
    const double area_v = area ? *area : std::numeric_limits<double>::quiet_NaN();
    const auto it = by_condition.find(cond);
    std::vector<BandMedian> meds;
    if (it != by_condition.end()) meds = median_sensitivity(it->second);
    json entry{{"condition_id", cond}, {"absorption_area_m2", number_json(area_v)}, {"rt_s", number_json(rt)},
               {"bands", json::array()}};
    for (const auto& band : p.eff.bands) {
      const auto m = std::find_if(meds.begin(), meds.end(), [&](const BandMedian& b) { return b.band == band; });
      const double value = m == meds.end() ? std::numeric_limits<double>::quiet_NaN() : m->median_rating;
      const std::size_t n = m == meds.end() ? 0 : m->count;
      medians.cell(cond).cell(band_name(band)).cell(value).cell(format_number(static_cast<double>(n)))
          .cell(area_v).cell(rt).end_row();
      entry["bands"].push_back(json{{"band", band_json(band)}, {"median_gamma_rating", number_json(value)},
                                    {"n_ratings", n}});
    }
    cj.push_back(std::move(entry));
  }
  report.doc["conditions"] = std::move(cj);

  if (write_csv) {
    rows.save(p.out_dir / "sensitivity.csv");
    medians.save(p.out_dir / "sensitivity_medians.csv");
  }
  report.save(p.out_dir);
  emit_warnings(report.warnings, err);
  out << command << ": " << pairs.size() << " pair(s), " << succeeded << " band rating(s) -> "
      << p.out_dir.string() << "\n";
  if (first_error) return exit_code_for(first_error);
  if (!pairs.empty() && succeeded == 0) {
    err << "error: no band could be rated\n";
    return kExitAnalysis;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// tfmap

int cmd_tfmap(const CommonFlags& f, const std::string& pair_spec, std::ostream& out, std::ostream& err) {
  auto p = prepare(f, "broadband");
  const auto& m = p.session.manifest;
  PlannedPair chosen;
  if (!pair_spec.empty()) {
    const auto comma = pair_spec.find(',');
    if (comma == std::string::npos) throw ConfigError("--pair expects REFERENCE,COMPARISON");
    const auto& ref = m.entry(trim(std::string_view(pair_spec).substr(0, comma)));
    const auto& cmp = m.entry(trim(std::string_view(pair_spec).substr(comma + 1)));
    auto index = [&](const ManifestEntry& e) { return static_cast<std::size_t>(&e - m.entries.data()); };
    chosen = {ref.condition_id, index(ref), index(cmp)};
    for (const auto idx : {chosen.reference, chosen.comparison})
      if (!p.session.rirs[idx]) p.session.rirs[idx] = load_entry(m, m.entries[idx]);
  } else {
    if (p.session.plan.pairs.size() != 1) {
      std::ostringstream os;
      os << "tfmap needs exactly one pair; the manifest yields " << p.session.plan.pairs.size()
         << " (select one with --pair REFERENCE,COMPARISON)";
      throw ManifestError(os.str());
    }
    chosen = p.session.plan.pairs.front();
  }
  const auto c = pair_context(p.session, chosen);
  check_pair(c.x, c.y);
  const auto& cfg = p.eff.config;
  const auto gx = stft(c.x, cfg);
  const auto gy = stft(c.y, cfg);
  const std::size_t frames = std::min(gx.n_frames(), gy.n_frames());
  auto trim_grid = [&](StftGrid g) {
    g.frames.resize(frames * g.n_bins());
    g.times.resize(frames);
    return g;
  };
  const auto tx = trim_grid(gx);
  const auto ty = trim_grid(gy);
  const auto map = tf_coherence(tx, ty, cfg);
  const auto ex = tf_envelopes(tx, cfg);
  const auto ey = tf_envelopes(ty, cfg);
  const std::size_t onset = onset_frame(tx, pair_onset(c.x, c.y));
  const auto bins = tf_sensitivity(map, ex, ey, cfg, onset);

  CsvWriter grid({"time_s", "freq_hz", "gamma"});
  for (std::size_t t = 0; t < map.n_times(); ++t)
    for (std::size_t k = 0; k < map.n_freqs(); ++k)
      grid.cell(map.times()[t]).cell(map.freqs()[k]).cell(format_gamma(map.at(t, k))).end_row();
  CsvWriter gamma({"freq_hz", "gamma_rating", "truncation_s", "status"});
  std::size_t rated = 0;
  for (const auto& b : bins) {
    gamma.cell(b.freq_hz);
    if (b.gamma_rating) {
      ++rated;
      gamma.cell(*b.gamma_rating).cell(b.truncation_s).cell("ok");
    } else {
      gamma.cell("nan").cell("nan").cell(b.status);
    }
    gamma.end_row();
  }

  Report report("tfmap", &p.eff, f);
  report.warnings = p.warnings;
  json pj = pair_json(c);
  pj["frames"] = map.n_times();
  pj["bins"] = map.n_freqs();
  pj["onset_frame"] = onset;
  pj["rated_bins"] = rated;
  std::size_t last = map.n_times() ? map.n_times() - 1 : 0;
  try {
    const auto bb = analyze_band(c.x, c.y, std::nullopt, cfg, c.options);
    const auto r = rate_band(bb, cfg);
    pj["broadband_gamma_rating"] = r.gamma_rating();
    pj["broadband_truncation_s"] = r.truncation_s();
    while (last > onset && map.times()[last] > r.truncation_s()) --last;
  } catch (const AnalysisError& e) {
    report.warnings.push_back(std::string("broadband rating: ") + e.what());
  }
  if (const auto fmin = tf_min_coherence_frame(map, onset, last)) {
    pj["min_coherence_time_s"] = map.times()[*fmin];
  } else {
    pj["min_coherence_time_s"] = nullptr;
  }
  report.doc["pairs"].push_back(std::move(pj));

  grid.save(p.out_dir / "tfmap.csv");
  gamma.save(p.out_dir / "tf_sensitivity.csv");
  report.save(p.out_dir);
  emit_warnings(report.warnings, err);
  out << "tfmap: " << c.pair_id << ", " << map.n_times() << " frames x " << map.n_freqs() << " bins -> "
      << p.out_dir.string() << "\n";
  if (rated == 0) {
    err << "error: no frequency bin could be rated\n";
    return kExitAnalysis;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
  std::string generator;
  std::size_t count = 1;
  std::string condition;
  bool append = false;
  std::string format = "float64";
  synth::PairParams params;
  double a = 0.7;
  double drift = 1e-4;
  synth::AbsorptionChange absorption;
  synth::Occlusion occlusion;
};

const std::vector<std::string> kGenerators = {"mixing", "occlusion", "absorption", "jitter"};

WavFormat wav_format(const std::string& name) {
  if (name == "float64") return WavFormat::Float64;
  if (name == "float32") return WavFormat::Float32;
  if (name == "pcm32") return WavFormat::Pcm32;
  if (name == "pcm24") return WavFormat::Pcm24;
  return WavFormat::Pcm16;
}

synth::SyntheticPair generate(const SynthFlags& s, std::uint64_t seed) {
  if (s.generator == "mixing") return synth::gen_mixing_pair(s.a, s.params, seed);
  if (s.generator == "occlusion") return synth::gen_occluded_pair(s.params, s.occlusion, seed);
  if (s.generator == "absorption") return synth::gen_absorption_change_pair(s.params, s.absorption, seed);
  return synth::gen_jitter_pair(s.params, s.drift, seed);
}

json truth_json(const synth::Truth& t) {
  json params = json::object();
  for (const auto& [k, v] : t.parameters) params[k] = v;
  json j{{"generator", t.generator}, {"parameters", params}};
  j["gamma_ir_target"] = t.gamma_ir_target ? json(*t.gamma_ir_target) : json(nullptr);
  j["occlusion"] = t.occlusion ? json{{"start_s", t.occlusion->start_s}, {"end_s", t.occlusion->end_s}}
                               : json(nullptr);
  j["change_time_s"] = t.change_time_s ? json(*t.change_time_s) : json(nullptr);
  return j;
}

int cmd_synth(const SynthFlags& s, const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const auto dir = prepare_out_dir(f.out_dir);
  const auto manifest_path = dir / "manifest.txt";
  const auto truth_path = dir / "truth.json";
  SessionManifest m;
  json truth{{"tool", "rircoh"}, {"version", kVersion}, {"pairs", json::array()}};
  if (s.append && fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    std::ostringstream text;
    text << in.rdbuf();
    m = parse_manifest(text.str(), dir, manifest_path.string());
    if (fs::exists(truth_path)) {
      std::ifstream tin(truth_path);
      try {
        truth = json::parse(tin);
      } catch (const json::exception& e) {
        throw IoError(truth_path.string() + ": " + e.what());
      }
    }
  }
  const std::string condition = s.condition.empty() ? s.generator : s.condition;
  std::vector<std::pair<fs::path, synth::SyntheticPair>> written;
  for (std::size_t k = 0; k < s.count; ++k) {
    const std::uint64_t seed = f.seed + k;
    auto pair = generate(s, seed);
    const std::string base = condition + "-s" + std::to_string(seed);
    const std::string receiver = "s" + std::to_string(seed);
    json tj = truth_json(pair.truth);
    tj["condition_id"] = condition;
    tj["seed"] = seed;
    for (const auto& [rir, suffix, index] :
         {std::tuple{&pair.x, "-x", 0L}, std::tuple{&pair.y, "-y", 1L}}) {
      const std::string id = base + suffix;
      if (std::any_of(m.entries.begin(), m.entries.end(), [&](const auto& e) { return e.id == id; }))
        throw ManifestError("synth: entry '" + id + "' already exists in " + manifest_path.string());
      const fs::path file = dir / (file_token(id) + ".wav");
      write_wav(file, {rir->samples()}, rir->sample_rate(), wav_format(s.format));
      ManifestEntry e;
      e.id = id;
      e.file = file;
      e.source_id = "S";
      e.receiver_id = receiver;
      e.condition_id = condition;
      e.index = index;
      m.entries.push_back(std::move(e));
    }
    tj["reference"] = base + "-x";
    tj["comparison"] = base + "-y";
    tj["pair_id"] = PairId{base + "-x", base + "-y"}.str();
    truth["pairs"].push_back(std::move(tj));
  }
  write_text_file(manifest_path, format_manifest(m, dir));
  write_text_file(truth_path, truth.dump(2) + "\n");
  emit_warnings(m.warnings, err);
  out << "synth: " << s.count << " " << s.generator << " pair(s) -> " << dir.string() << "\n";
  return kExitOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coherence-based comparison of repeated room impulse responses", "rircoh"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonFlags coh_f, sens_f, tf_f, syn_f, rep_f;
  auto* coh = app.add_subcommand("coherence", "Measured, expected and environment coherence curves per pair");
  add_common(*coh, coh_f, true);
  auto* sens = app.add_subcommand("sensitivity", "Sensitivity ratings per pair and band, plus condition medians");
  add_common(*sens, sens_f, true);
  auto* tf = app.add_subcommand("tfmap", "Time-frequency coherence map and per-bin sensitivity for one pair");
  add_common(*tf, tf_f, true);
  std::string pair_spec;
  tf->add_option("--pair", pair_spec, "REFERENCE,COMPARISON entry ids");
  auto* rep = app.add_subcommand("report", "Broadband and per-band ratings for every pair, as report.json");
  add_common(*rep, rep_f, true);

  SynthFlags sy;
  auto* syn = app.add_subcommand("synth", "Write synthetic pairs with known ground truth");
  syn->add_option("generator", sy.generator, "Generator")->required()->check(CLI::IsMember(kGenerators));
  add_common(*syn, syn_f, false);
  syn->add_option("--count", sy.count, "Number of pairs (seeds seed, seed+1, ...)")->capture_default_str()
      ->check(CLI::PositiveNumber);
  syn->add_option("--condition", sy.condition, "Condition id (default: generator name)");
  syn->add_flag("--append", sy.append, "Append to an existing manifest in the output directory");
  syn->add_option("--format", sy.format, "WAV sample format")->capture_default_str()
      ->check(CLI::IsMember({"float64", "float32", "pcm32", "pcm24", "pcm16"}));
  syn->add_option("--rt", sy.params.rt, "Reverberation time in s")->capture_default_str();
  syn->add_option("--fs", sy.params.sample_rate, "Sample rate in Hz")->capture_default_str();
  syn->add_option("--duration", sy.params.duration, "Duration in s")->capture_default_str();
  syn->add_option("--snr", sy.params.snr_db, "Initial RIR power over noise power, dB")->capture_default_str();
  syn->add_option("--a", sy.a, "mixing: shared-field amplitude")->capture_default_str();
  syn->add_option("--drift", sy.drift, "jitter: fractional time stretch")->capture_default_str();
  syn->add_option("--change-time", sy.absorption.change_time_s, "absorption: change time in s")
      ->capture_default_str();
  syn->add_option("--rt-y", sy.absorption.rt_y, "absorption: late RT of y in s")->capture_default_str();
  syn->add_option("--changed-fraction", sy.absorption.changed_fraction, "absorption: re-drawn energy share")
      ->capture_default_str();
  syn->add_option("--occlusion-start", sy.occlusion.start_s, "occlusion: window start in s")
      ->capture_default_str();
  syn->add_option("--occlusion-length", sy.occlusion.length_s, "occlusion: window length in s")
      ->capture_default_str();
  syn->add_option("--attenuation-db", sy.occlusion.attenuation_db, "occlusion: attenuation in dB")
      ->capture_default_str();
  syn->add_option("--late-phase-std", sy.occlusion.late_phase_std, "occlusion: late phase spread at Nyquist, rad")
      ->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  if (*coh) return cmd_coherence(coh_f, out, err);
  if (*sens) return run_sweeps(sens_f, "sensitivity", true, out, err);
  if (*rep) return run_sweeps(rep_f, "report", false, out, err);
  if (*tf) return cmd_tfmap(tf_f, pair_spec, out, err);
  return cmd_synth(sy, syn_f, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const AnalysisError& e) {
    err << "error: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitAnalysis;
  }
}

}  // namespace rircoh::cli
