/**
 * Copyright 2026 The burstnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/rng.hpp"

namespace burstnet {

enum class Split { kTrain, kVal, kTest };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  return std::nullopt;
}

struct BurstRecord {
  std::string burst_id;
  std::string site_id;
  std::string raw_label;
  std::array<std::string, 3> frame_paths;  // relative to the manifest directory
  std::optional<int> binary_label;
  std::optional<Split> split;

  bool operator==(const BurstRecord&) const = default;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<BurstRecord> records;
  std::size_t dropped_short = 0;
  std::size_t dropped_unclassifiable = 0;

  std::filesystem::path frame_path(const BurstRecord& r, int k) const { return directory / r.frame_paths[k]; }
};

namespace detail {

inline std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Split one CSV line; double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quote", line_no);
  fields.push_back(trim(cur));
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace detail

inline constexpr std::string_view kManifestHeader = "burst_id,site_id,label,frame1,frame2,frame3";

/// Parse a burst manifest. Rows with fewer than three frames and rows
/// labelled unclassifiable are dropped and counted.
inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  Manifest m;
  m.directory = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  bool has_split = false;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line, line_no);
    if (!header_seen) {
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i) joined += (i ? "," : "") + fields[i];
      if (joined == kManifestHeader) {
        has_split = false;
      } else if (joined == std::string(kManifestHeader) + ",split") {
        has_split = true;
      } else {
        throw ParseError("expected header '" + std::string(kManifestHeader) + "[,split]'", line_no);
      }
      header_seen = true;
      continue;
    }
    const std::size_t max_fields = has_split ? 7 : 6;
    if (fields.size() < 3) throw ParseError("row needs at least burst_id, site_id and label", line_no);
    if (fields.size() > max_fields) throw ParseError("too many fields", line_no);
    if (fields[0].empty()) throw ParseError("empty burst_id", line_no);
    std::optional<Split> split;
    if (has_split && fields.size() == 7 && !fields[6].empty()) {
      split = parse_split(fields[6]);
      if (!split) throw ParseError("unknown split '" + fields[6] + "'", line_no);
    }
    std::vector<std::string> frames;
    for (std::size_t i = 3; i < std::min<std::size_t>(fields.size(), 6); ++i)
      if (!fields[i].empty()) frames.push_back(fields[i]);
    if (frames.size() < 3) {
      ++m.dropped_short;
      continue;
    }
    if (detail::to_lower(fields[2]) == "unclassifiable") {
      ++m.dropped_unclassifiable;
      continue;
    }
    BurstRecord r;
    r.burst_id = fields[0];
    r.site_id = fields[1];
    r.raw_label = fields[2];
    r.frame_paths = {frames[0], frames[1], frames[2]};
    r.split = split;
    m.records.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError("missing header", 1);
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  const bool any_split = std::any_of(m.records.begin(), m.records.end(), [](const auto& r) { return r.split.has_value(); });
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << kManifestHeader << (any_split ? ",split" : "") << "\n";
  for (const auto& r : m.records) {
    out << detail::csv_field(r.burst_id) << ',' << detail::csv_field(r.site_id) << ',' << detail::csv_field(r.raw_label);
    for (int k = 0; k < 3; ++k) {
      auto p = std::filesystem::path(r.frame_paths[k]);
      if (p.is_relative()) p = m.directory / p;
      p = std::filesystem::weakly_canonical(p);
      const auto rel = std::filesystem::proximate(p, std::filesystem::weakly_canonical(dir));
      out << ',' << detail::csv_field(rel.generic_string());
    }
    if (any_split) out << ',' << (r.split ? split_name(*r.split) : "");
    out << "\n";
  }
}

using SpeciesMap = std::map<std::string, int>;

/// Lines of `raw_label,binary_label`; '#' starts a comment.
inline SpeciesMap load_species_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open species map " + path.string());
  SpeciesMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line, line_no);
    if (f.size() != 2 || (f[1] != "0" && f[1] != "1")) throw ParseError("expected raw_label,0|1", line_no);
    map[detail::to_lower(f[0])] = f[1] == "1" ? 1 : 0;
  }
  return map;
}

inline std::vector<BurstRecord> binarize(std::vector<BurstRecord> records, const SpeciesMap& species) {
  std::set<std::string> unknown;
  for (auto& r : records) {
    const auto it = species.find(detail::to_lower(r.raw_label));
    if (it == species.end()) {
      unknown.insert(r.raw_label);
      continue;
    }
    r.binary_label = it->second;
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw MappingError("labels missing from species map: " + list);
  }
  return records;
}

enum class SplitMode { kUniform, kSiteBased };

struct SplitSpec {
  SplitMode mode = SplitMode::kUniform;
  double train = 0.7, val = 0.15, test = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train > 0 && val > 0 && test > 0)) throw ConfigError("split fractions must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  }
};

namespace detail {
// Val/test sizes are floor(n * fraction); the slack absorbs fractions
// such as 36/182 that are not exact in binary.
inline std::size_t split_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}
}  // namespace detail

inline std::vector<BurstRecord> split(std::vector<BurstRecord> records, const SplitSpec& spec) {
  spec.validate();
  if (spec.mode == SplitMode::kUniform) {
    const std::size_t n = records.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng = make_rng(spec.seed, {0x5u});
    shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = detail::split_count(n, spec.val), n_test = detail::split_count(n, spec.test);
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i)
      records[order[i]].split = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    return records;
  }
  std::set<std::string> site_set;
  for (const auto& r : records) site_set.insert(r.site_id);
  std::vector<std::string> sites(site_set.begin(), site_set.end());
  if (sites.size() < 3) throw ConfigError("site-based split needs at least 3 distinct sites, found " + std::to_string(sites.size()));
  Rng rng = make_rng(spec.seed, {0x51u});
  shuffle(sites.begin(), sites.end(), rng);
  const std::size_t n = sites.size();
  const std::size_t n_val = detail::split_count(n, spec.val), n_test = detail::split_count(n, spec.test);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n)
    throw ConfigError("site-based split leaves a split without sites (" + std::to_string(n) + " sites)");
  std::map<std::string, Split> assignment;
  for (std::size_t i = 0; i < n; ++i)
    assignment[sites[i]] = i < n - n_val - n_test ? Split::kTrain : (i < n - n_test ? Split::kVal : Split::kTest);
  for (auto& r : records) r.split = assignment.at(r.site_id);
  return records;
}

/// Train: the minority class is oversampled with replacement. Val/test: the
/// majority class is randomly thinned. Class counts end up equal per split.
inline std::vector<BurstRecord> balance(const std::vector<BurstRecord>& records, std::uint64_t seed) {
  std::map<Split, std::array<std::vector<std::size_t>, 2>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.split) throw ContractError("balance needs split assignments (" + r.burst_id + ")");
    if (!r.binary_label) throw ContractError("balance needs binary labels (" + r.burst_id + ")");
    groups[*r.split][*r.binary_label].push_back(i);
  }
  std::vector<char> keep(records.size(), 1);
  std::vector<std::size_t> duplicates;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    auto& g = groups[s];
    if (g[0].empty() || g[1].empty())
      throw BalanceError(std::string(split_name(s)) + " split has " + std::to_string(g[1].size()) + " animal and " +
                         std::to_string(g[0].size()) + " empty bursts");
    Rng rng = make_rng(seed, {0xBA1u, static_cast<std::uint64_t>(s)});
    const int minority = g[0].size() < g[1].size() ? 0 : 1;
    const auto& small = g[minority];
    auto& large = g[1 - minority];
    if (s == Split::kTrain) {
      for (std::size_t k = small.size(); k < large.size(); ++k) duplicates.push_back(small[uniform_index(rng, small.size())]);
    } else {
      shuffle(large.begin(), large.end(), rng);
      for (std::size_t k = small.size(); k < large.size(); ++k) keep[large[k]] = 0;
    }
  }
  std::vector<BurstRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  for (std::size_t i : duplicates) out.push_back(records[i]);
  return out;
}

inline std::vector<const BurstRecord*> records_in(const std::vector<BurstRecord>& records, Split s) {
  std::vector<const BurstRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

}  // namespace burstnet
