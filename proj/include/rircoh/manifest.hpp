#pragma once

#include "rircoh/dsp.hpp"
#include "rircoh/types.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rircoh {

// Session manifest, schema 1. Grammar (see README.md):
//
//   rircoh-manifest = 1
//   pairing = reference-vs-rest | consecutive | explicit
//   [config]      key = value lines
//   [entries]     table: id, file, channel, source, receiver, condition, index
//   [pairs]       table: reference, comparison        (explicit mode)
//   [absorption]  table: condition, surface, alpha, area_m2
//   [noise]       table: id, start_s, end_s, truncated
//
// Tables start with a comma-separated header row. '#' starts a comment.

inline constexpr int kManifestSchema = 1;

enum class PairingMode { ReferenceVsRest, Consecutive, Explicit };

std::string to_string(PairingMode mode);

struct ManifestEntry {
  std::string id;
  std::filesystem::path file;  // resolved against the manifest directory
  int channel = 0;
  std::string source_id;
  std::string receiver_id;
  std::string condition_id;
  long index = 0;
  std::size_t line = 0;
};

struct AbsorptionEntry {
  std::string condition_id;
  std::string surface;
  double alpha = 0;    // absorption coefficient, [0, 1]
  double area_m2 = 0;  // > 0
};

struct NoiseOverride {
  std::optional<TimeSegment> segment;
  bool truncated = false;
};

struct SessionManifest {
  int schema = kManifestSchema;
  PairingMode pairing = PairingMode::ReferenceVsRest;
  std::vector<ManifestEntry> entries;
  std::vector<std::pair<std::string, std::string>> explicit_pairs;  // entry ids
  std::vector<AbsorptionEntry> absorption;
  std::map<std::string, NoiseOverride> noise;  // by entry id
  std::map<std::string, std::string> config;
  std::vector<std::string> warnings;  // unknown keys, columns, sections
  std::filesystem::path base_dir;

  const ManifestEntry& entry(const std::string& id) const;
};

// Parses manifest text; `source` names it in error messages. Relative file
// paths resolve against base_dir. Throws ManifestError with line context.
SessionManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               const std::string& source = "manifest");

// Reads, parses and checks that every referenced file exists.
SessionManifest load_manifest(const std::filesystem::path& path);

// Serialises a manifest; files are written relative to `dir` when possible.
std::string format_manifest(const SessionManifest& manifest, const std::filesystem::path& dir);

struct PlannedPair {
  std::string condition_id;
  std::size_t reference = 0;   // index into manifest.entries
  std::size_t comparison = 0;
};

struct PairPlan {
  std::vector<PlannedPair> pairs;
  std::vector<std::string> warnings;
};

// Pairs per the manifest's mode, grouped by (condition, receiver) in order of
// first appearance. reference-vs-rest: lowest index against every other;
// consecutive: (k, k+1); explicit: as listed. A group with a single
// measurement yields a warning rather than an error.
PairPlan build_pairs(const SessionManifest& manifest);

Rir load_entry(const SessionManifest& manifest, const ManifestEntry& entry);

// Noise-floor options for an entry (from the [noise] section).
NoiseFloorOptions noise_options(const SessionManifest& manifest, const ManifestEntry& entry);

// A = sum alpha_i S_i.
double equivalent_absorption_area(std::span<const AbsorptionEntry> entries);

// Area for one condition, nullopt if the manifest lists no surfaces for it.
std::optional<double> condition_absorption_area(const SessionManifest& manifest,
                                                const std::string& condition_id);

}  // namespace rircoh
