#include "rircoh/manifest.hpp"

#include "rircoh/errors.hpp"
#include "rircoh/wav.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace rircoh {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

class Context {
public:
  Context(std::string source) : source_(std::move(source)) {}
  void at(std::size_t line) { line_ = line; }
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << source_ << ":" << line_ << ": " << what;
    throw ManifestError(os.str());
  }
  std::string where() const { return source_ + ":" + std::to_string(line_); }

private:
  std::string source_;
  std::size_t line_ = 0;
};

long parse_long(const std::string& s, const Context& ctx, const char* what) {
  long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    ctx.fail(std::string("bad ") + what + " '" + s + "'");
  return v;
}

double parse_double(const std::string& s, const Context& ctx, const char* what) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    ctx.fail(std::string("bad ") + what + " '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s, const Context& ctx) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s.empty() || s == "0" || s == "false" || s == "no") return false;
  ctx.fail("bad boolean '" + s + "'");
}

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Table {
  std::vector<std::string> header;
  std::size_t header_line = 0;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

const std::set<std::string> kKnownSections = {"config", "entries", "pairs", "absorption", "noise"};
const std::map<std::string, std::set<std::string>> kKnownColumns = {
    {"entries", {"id", "file", "channel", "source", "receiver", "condition", "index"}},
    {"pairs", {"reference", "comparison"}},
    {"absorption", {"condition", "surface", "alpha", "area_m2"}},
    {"noise", {"id", "start_s", "end_s", "truncated"}},
};

}  // namespace

std::string to_string(PairingMode mode) {
  switch (mode) {
    case PairingMode::ReferenceVsRest: return "reference-vs-rest";
    case PairingMode::Consecutive: return "consecutive";
    case PairingMode::Explicit: return "explicit";
  }
  return "reference-vs-rest";
}

const ManifestEntry& SessionManifest::entry(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return e;
  throw ManifestError("manifest has no entry with id '" + id + "'");
}

SessionManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               const std::string& source) {
  SessionManifest m;
  m.base_dir = base_dir;
  Context ctx(source);
  std::map<std::string, Table> tables;
  std::string section;
  std::optional<int> schema;
  bool have_pairing = false;

  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    ctx.at(line_no);
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!kKnownSections.count(section)) m.warnings.push_back(ctx.where() + ": unknown section [" + section + "] ignored");
      continue;
    }
    if (section.empty() || section == "config") {
      const auto eq = line.find('=');
      if (eq == std::string::npos) ctx.fail("expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section == "config") {
        m.config[key] = value;
      } else if (key == "rircoh-manifest") {
        schema = static_cast<int>(parse_long(value, ctx, "schema version"));
      } else if (key == "pairing") {
        have_pairing = true;
        if (value == "reference-vs-rest") m.pairing = PairingMode::ReferenceVsRest;
        else if (value == "consecutive") m.pairing = PairingMode::Consecutive;
        else if (value == "explicit") m.pairing = PairingMode::Explicit;
        else ctx.fail("unknown pairing mode '" + value + "'");
      } else {
        m.warnings.push_back(ctx.where() + ": unknown key '" + key + "' ignored");
      }
      continue;
    }
    if (!kKnownSections.count(section)) continue;
    auto& table = tables[section];
    auto cells = split_row(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      table.header_line = line_no;
      for (const auto& h : table.header)
        if (!kKnownColumns.at(section).count(h))
          m.warnings.push_back(ctx.where() + ": unknown column '" + h + "' in [" + section + "] ignored");
    } else {
      if (cells.size() != table.header.size()) {
        std::ostringstream os;
        os << "row has " << cells.size() << " cells, header has " << table.header.size();
        ctx.fail(os.str());
      }
      table.rows.emplace_back(line_no, std::move(cells));
    }
  }
  ctx.at(0);
  if (!schema) ctx.fail("missing 'rircoh-manifest = <version>' schema field");
  if (*schema != kManifestSchema)
    ctx.fail("unsupported manifest schema " + std::to_string(*schema) + " (supported: 1)");
  if (!have_pairing) m.warnings.push_back(source + ": no pairing mode given, using reference-vs-rest");

  auto require_column = [&](const Table& t, const std::string& sec, const std::string& name) {
    const auto c = t.column(name);
    if (!c) {
      ctx.at(t.header_line);
      ctx.fail("[" + sec + "] is missing required column '" + name + "'");
    }
    return *c;
  };

  if (auto it = tables.find("entries"); it != tables.end()) {
    const auto& t = it->second;
    const auto c_file = require_column(t, "entries", "file");
    const auto c_cond = require_column(t, "entries", "condition");
    const auto c_index = require_column(t, "entries", "index");
    const auto c_id = t.column("id");
    const auto c_chan = t.column("channel");
    const auto c_src = t.column("source");
    const auto c_rcv = t.column("receiver");
    std::set<std::string> ids;
    std::set<std::tuple<std::string, std::string, long>> slots;
    for (const auto& [line, cells] : t.rows) {
      ctx.at(line);
      ManifestEntry e;
      e.line = line;
      const std::filesystem::path file = cells[c_file];
      if (file.empty()) ctx.fail("empty file path");
      e.file = file.is_absolute() ? file : base_dir / file;
      e.channel = c_chan ? static_cast<int>(parse_long(cells[*c_chan], ctx, "channel")) : 0;
      if (e.channel < 0) ctx.fail("channel must be non-negative");
      e.source_id = c_src ? cells[*c_src] : "";
      e.receiver_id = c_rcv ? cells[*c_rcv] : "";
      e.condition_id = cells[c_cond];
      e.index = parse_long(cells[c_index], ctx, "measurement index");
      e.id = c_id && !cells[*c_id].empty() ? cells[*c_id]
                                           : file.stem().string() + (e.channel ? "#" + std::to_string(e.channel) : "");
      if (!ids.insert(e.id).second) ctx.fail("duplicate entry id '" + e.id + "'");
      if (!slots.insert({e.condition_id, e.receiver_id, e.index}).second)
        ctx.fail("measurement index " + std::to_string(e.index) + " repeated within condition '" +
                 e.condition_id + "', receiver '" + e.receiver_id + "'");
      m.entries.push_back(std::move(e));
    }
  }

  auto require_entry = [&](const std::string& id) {
    if (std::none_of(m.entries.begin(), m.entries.end(), [&](const auto& e) { return e.id == id; }))
      ctx.fail("unknown entry id '" + id + "'");
  };

  if (auto it = tables.find("pairs"); it != tables.end()) {
    const auto& t = it->second;
    const auto c_ref = require_column(t, "pairs", "reference");
    const auto c_cmp = require_column(t, "pairs", "comparison");
    for (const auto& [line, cells] : t.rows) {
      ctx.at(line);
      require_entry(cells[c_ref]);
      require_entry(cells[c_cmp]);
      m.explicit_pairs.emplace_back(cells[c_ref], cells[c_cmp]);
    }
  }
  if (m.pairing == PairingMode::Explicit && m.explicit_pairs.empty())
    m.warnings.push_back(source + ": explicit pairing but no [pairs] rows");

  if (auto it = tables.find("absorption"); it != tables.end()) {
    const auto& t = it->second;
    const auto c_cond = require_column(t, "absorption", "condition");
    const auto c_alpha = require_column(t, "absorption", "alpha");
    const auto c_area = require_column(t, "absorption", "area_m2");
    const auto c_surf = t.column("surface");
    for (const auto& [line, cells] : t.rows) {
      ctx.at(line);
      AbsorptionEntry a;
      a.condition_id = cells[c_cond];
      a.surface = c_surf ? cells[*c_surf] : "";
      a.alpha = parse_double(cells[c_alpha], ctx, "alpha");
      a.area_m2 = parse_double(cells[c_area], ctx, "area");
      if (!(a.alpha >= 0 && a.alpha <= 1)) ctx.fail("absorption coefficient must lie in [0, 1]");
      if (!(a.area_m2 > 0)) ctx.fail("surface area must be positive");
      m.absorption.push_back(std::move(a));
    }
  }

  if (auto it = tables.find("noise"); it != tables.end()) {
    const auto& t = it->second;
    const auto c_id = require_column(t, "noise", "id");
    const auto c_start = t.column("start_s");
    const auto c_end = t.column("end_s");
    const auto c_trunc = t.column("truncated");
    for (const auto& [line, cells] : t.rows) {
      ctx.at(line);
      require_entry(cells[c_id]);
      NoiseOverride o;
      const bool has_start = c_start && !cells[*c_start].empty();
      const bool has_end = c_end && !cells[*c_end].empty();
      if (has_start != has_end) ctx.fail("noise segment needs both start_s and end_s");
      if (has_start) {
        TimeSegment seg{parse_double(cells[*c_start], ctx, "start_s"), parse_double(cells[*c_end], ctx, "end_s")};
        if (!(seg.start_s >= 0 && seg.end_s > seg.start_s)) ctx.fail("noise segment must satisfy 0 <= start < end");
        o.segment = seg;
      }
      o.truncated = c_trunc ? parse_bool(cells[*c_trunc], ctx) : false;
      m.noise[cells[c_id]] = o;
    }
  }
  return m;
}

SessionManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open manifest");
  std::ostringstream text;
  text << in.rdbuf();
  auto m = parse_manifest(text.str(), path.parent_path(), path.string());
  for (const auto& e : m.entries) {
    if (!std::filesystem::exists(e.file)) {
      std::ostringstream os;
      os << path.string() << ":" << e.line << ": file not found: " << e.file.string();
      throw IoError(os.str());
    }
  }
  return m;
}

std::string format_manifest(const SessionManifest& m, const std::filesystem::path& dir) {
  std::ostringstream os;
  os << "rircoh-manifest = " << m.schema << "\n";
  os << "pairing = " << to_string(m.pairing) << "\n";
  if (!m.config.empty()) {
    os << "\n[config]\n";
    for (const auto& [k, v] : m.config) os << k << " = " << v << "\n";
  }
  os << "\n[entries]\nid, file, channel, source, receiver, condition, index\n";
  for (const auto& e : m.entries) {
    auto rel = e.file.lexically_relative(dir);
    if (rel.empty() || rel.native().starts_with("..")) rel = e.file;
    os << e.id << ", " << rel.generic_string() << ", " << e.channel << ", " << e.source_id << ", "
       << e.receiver_id << ", " << e.condition_id << ", " << e.index << "\n";
  }
  if (!m.explicit_pairs.empty()) {
    os << "\n[pairs]\nreference, comparison\n";
    for (const auto& [a, b] : m.explicit_pairs) os << a << ", " << b << "\n";
  }
  if (!m.absorption.empty()) {
    os << "\n[absorption]\ncondition, surface, alpha, area_m2\n";
    for (const auto& a : m.absorption)
      os << a.condition_id << ", " << a.surface << ", " << shortest(a.alpha) << ", " << shortest(a.area_m2) << "\n";
  }
  if (!m.noise.empty()) {
    os << "\n[noise]\nid, start_s, end_s, truncated\n";
    for (const auto& [id, o] : m.noise) {
      os << id << ", ";
      if (o.segment) os << shortest(o.segment->start_s) << ", " << shortest(o.segment->end_s);
      else os << ", ";
      os << ", " << (o.truncated ? 1 : 0) << "\n";
    }
  }
  return os.str();
}

PairPlan build_pairs(const SessionManifest& m) {
  PairPlan plan;
  if (m.pairing == PairingMode::Explicit) {
    auto index_of = [&](const std::string& id) {
      for (std::size_t i = 0; i < m.entries.size(); ++i)
        if (m.entries[i].id == id) return i;
      throw ManifestError("explicit pair references unknown entry '" + id + "'");
    };
    for (const auto& [a, b] : m.explicit_pairs) {
      const auto ra = index_of(a);
      plan.pairs.push_back({m.entries[ra].condition_id, ra, index_of(b)});
    }
    return plan;
  }

  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto key = std::make_pair(m.entries[i].condition_id, m.entries[i].receiver_id);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(i);
  }
  for (const auto& key : order) {
    auto members = groups[key];
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return m.entries[a].index < m.entries[b].index; });
    if (members.size() < 2) {
      plan.warnings.push_back("condition '" + key.first + "', receiver '" + key.second +
                              "' has a single measurement; no pairs formed");
      continue;
    }
    for (std::size_t k = 1; k < members.size(); ++k) {
      const std::size_t ref = m.pairing == PairingMode::Consecutive ? members[k - 1] : members[0];
      plan.pairs.push_back({key.first, ref, members[k]});
    }
  }
  return plan;
}

Rir load_entry(const SessionManifest& m, const ManifestEntry& e) {
  (void)m;
  return load_wav(e.file, e.channel,
                  RirMeta{e.id, std::to_string(e.channel), e.source_id, e.receiver_id, e.condition_id});
}

NoiseFloorOptions noise_options(const SessionManifest& m, const ManifestEntry& e) {
  NoiseFloorOptions o;
  if (auto it = m.noise.find(e.id); it != m.noise.end()) {
    o.segment = it->second.segment;
    o.noise_truncated = it->second.truncated;
  }
  return o;
}

double equivalent_absorption_area(std::span<const AbsorptionEntry> entries) {
  double area = 0;
  for (const auto& a : entries) {
    if (!(a.alpha >= 0 && a.alpha <= 1)) throw ValidationError("absorption coefficient outside [0, 1]");
    if (!(a.area_m2 > 0)) throw ValidationError("surface area must be positive");
    area += a.alpha * a.area_m2;
  }
  return area;
}

std::optional<double> condition_absorption_area(const SessionManifest& m, const std::string& condition_id) {
  std::vector<AbsorptionEntry> subset;
  for (const auto& a : m.absorption)
    if (a.condition_id == condition_id) subset.push_back(a);
  if (subset.empty()) return std::nullopt;
  return equivalent_absorption_area(subset);
}

}  // namespace rircoh
