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
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "burstnet/error.hpp"
#include "json.hpp"

namespace burstnet {

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted
/// half, via midranks. The pair count is accumulated in half-units so the
/// result is exact.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("scores and labels differ in length");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("non-finite score");
    if (labels[i] == 1)
      ++pos;
    else if (labels[i] == 0)
      ++neg;
    else
      throw ContractError("labels must be 0 or 1");
  }
  if (pos == 0 || neg == 0) throw UndefinedMetricError("ROC AUC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the sum of positive midranks; a run of ranks [lo, hi] has midrank (lo + hi) / 2.
  std::int64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::int64_t run_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) run_pos += labels[order[j++]];
    twice_rank_sum += run_pos * static_cast<std::int64_t>(i + 1 + j);
    i = j;
  }
  const std::int64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * pos * neg);
}

inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  return roc_auc(std::span<const double>(scores), std::span<const int>(labels));
}

struct Prediction {
  std::string burst_id;
  double probability = 0.0;
  int label = 0;
};

struct EvalReport {
  std::string variant;
  std::string split;
  double roc_auc = 0.0;
  std::int64_t n_pos = 0, n_neg = 0;
  std::vector<Prediction> predictions;
};

/// Scores a split. `expected_ids` lists the bursts the predictions must cover.
inline EvalReport evaluate(const std::vector<Prediction>& predictions, const std::vector<std::string>& expected_ids,
                           std::string variant, std::string split) {
  std::set<std::string> have;
  for (const auto& p : predictions) have.insert(p.burst_id);
  std::vector<std::string> missing;
  for (const auto& id : expected_ids)
    if (!have.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string msg = "predictions missing for " + std::to_string(missing.size()) + " bursts:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw CoverageError(msg);
  }
  EvalReport r;
  r.variant = std::move(variant);
  r.split = std::move(split);
  r.predictions = predictions;
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& p : predictions) {
    s.push_back(p.probability);
    l.push_back(p.label);
    (p.label == 1 ? r.n_pos : r.n_neg) += 1;
  }
  r.roc_auc = roc_auc(s, l);
  return r;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["variant"] = r.variant;
  j["split"] = r.split;
  j["roc_auc"] = r.roc_auc;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  auto& rows = j["predictions"] = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions)
    rows.push_back({{"burst_id", p.burst_id}, {"probability", p.probability}, {"label", p.label}});
  return j;
}

inline EvalReport report_from_json(const nlohmann::ordered_json& j) {
  EvalReport r;
  r.variant = j.at("variant").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.roc_auc = j.at("roc_auc").get<double>();
  r.n_pos = j.at("n_pos").get<std::int64_t>();
  r.n_neg = j.at("n_neg").get<std::int64_t>();
  for (const auto& p : j.at("predictions"))
    r.predictions.push_back({p.at("burst_id").get<std::string>(), p.at("probability").get<double>(),
                             p.at("label").get<int>()});
  return r;
}

/// One row per (variant, scenario) pair, scenarios as columns.
struct ComparisonTable {
  std::vector<std::string> scenarios;
  std::map<std::string, std::map<std::string, double>> auc;  // variant -> scenario -> AUC
  std::vector<std::string> variant_order;

  void add(const std::string& variant, const std::string& scenario, double value) {
    if (std::find(scenarios.begin(), scenarios.end(), scenario) == scenarios.end()) scenarios.push_back(scenario);
    if (!auc.count(variant)) variant_order.push_back(variant);
    auc[variant][scenario] = value;
  }

  std::string to_text() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-20s", "Model");
    os << buf;
    for (const auto& s : scenarios) {
      std::snprintf(buf, sizeof buf, " %12s", s.c_str());
      os << buf;
    }
    os << '\n';
    for (const auto& v : variant_order) {
      std::snprintf(buf, sizeof buf, "%-20s", v.c_str());
      os << buf;
      for (const auto& s : scenarios) {
        const auto it = auc.at(v).find(s);
        if (it == auc.at(v).end())
          std::snprintf(buf, sizeof buf, " %12s", "-");
        else
          std::snprintf(buf, sizeof buf, " %12.4f", it->second);
        os << buf;
      }
      os << '\n';
    }
    return os.str();
  }
};

inline std::string report_to_text(const EvalReport& r) {
  ComparisonTable t;
  t.add(r.variant, r.split, r.roc_auc);
  std::ostringstream os;
  os << t.to_text() << "positives " << r.n_pos << ", negatives " << r.n_neg << '\n';
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_report(const std::filesystem::path& dir, const EvalReport& r) {
  write_text_file(dir / "report.json", report_to_json(r).dump(2) + "\n");
  write_text_file(dir / "report.txt", report_to_text(r));
}

}  // namespace burstnet
