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
#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "burstnet/error.hpp"
#include "burstnet/pipeline/config.hpp"
#include "burstnet/pipeline/runner.hpp"

namespace {

namespace bp = burstnet::pipeline;

struct Options {
  std::string config_path;
  std::string variant;
  std::optional<long long> seed;
  int jobs = 1;
  std::string out;
  std::vector<std::string> sets;
  std::string checkpoint;
};

bp::Config resolve(const Options& o, bool experiment) {
  bp::Config c = o.config_path.empty() ? bp::Config() : bp::Config::from_file(o.config_path);
  for (const auto& s : o.sets) c.set_override(s);
  if (!o.out.empty()) c.set("out", o.out);
  if (o.seed) {
    if (*o.seed < 0) throw burstnet::ConfigError("--seed must be non-negative");
    c.set("seed", *o.seed);
    if (experiment) c.set("seeds", bp::Json::array({*o.seed}));
  }
  if (o.jobs < 1) throw burstnet::ConfigError("--jobs must be at least 1");
  return c;
}

burstnet::ModelVariant need_variant(const Options& o) {
  if (o.variant.empty()) throw burstnet::ConfigError("--variant is required");
  return burstnet::parse_variant(o.variant);
}

}  // namespace

int main(int argc, char** argv) {
  auto log = spdlog::stderr_color_mt("burstnet");
  log->set_pattern("[%H:%M:%S] %v");
  const bp::Reporter report = [&](const std::string& msg) { log->info(msg); };

  CLI::App app{"Camera-trap burst classification with motion features"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--jobs", o.jobs, "Worker threads for data generation and features");
    sub->add_option("--out", o.out, "Output root directory");
    sub->add_option("--set", o.sets, "Override a config key (key=value)")->take_all();
  };
  auto* synth = app.add_subcommand("synth", "Generate the synthetic camera-trap data set");
  auto* features = app.add_subcommand("features", "Compute optical-flow and MOG2 features for every burst");
  auto* split = app.add_subcommand("split", "Split and balance the data set");
  auto* train = app.add_subcommand("train", "Train one model variant");
  auto* eval = app.add_subcommand("eval", "Evaluate a trained variant on the test split");
  auto* experiment = app.add_subcommand("experiment", "Run every scenario, seed and variant end to end");
  for (auto* s : {synth, features, split, train, eval, experiment}) common(s);
  for (auto* s : {train, eval}) s->add_option("--variant", o.variant, "Model variant");
  eval->add_option("--checkpoint", o.checkpoint, "Checkpoint path stem (default: the variant's model directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(burstnet::ErrorKind::kConfig);
  }

  try {
    if (synth->parsed()) {
      const auto c = resolve(o, false);
      report("manifest " + bp::cmd_synth(c, o.jobs, report).string());
    } else if (features->parsed()) {
      const auto c = resolve(o, false);
      const auto stats = bp::cmd_features(c, o.jobs, report);
      report("features: " + std::to_string(stats.computed) + " computed, " + std::to_string(stats.reused) +
             " reused in " + c.cache_dir().string());
    } else if (split->parsed()) {
      const auto c = resolve(o, false);
      report("split manifest " + bp::cmd_split(c, report).string());
    } else if (train->parsed()) {
      const auto c = resolve(o, false);
      report("checkpoint " + bp::cmd_train(c, need_variant(o), report).string());
    } else if (eval->parsed()) {
      const auto c = resolve(o, false);
      std::optional<std::filesystem::path> ckpt;
      if (!o.checkpoint.empty()) ckpt = o.checkpoint;
      const auto r = bp::cmd_eval(c, need_variant(o), ckpt, report);
      std::fputs(burstnet::report_to_text(r).c_str(), stdout);
    } else if (experiment->parsed()) {
      const auto c = resolve(o, true);
      const auto r = bp::cmd_experiment(c, o.jobs, report);
      std::fputs(r.table.to_text().c_str(), stdout);
    }
  } catch (const burstnet::Error& e) {
    log->error(e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    log->error(e.what());
    return static_cast<int>(burstnet::ErrorKind::kData);
  } catch (const std::exception& e) {
    log->error(std::string("unexpected failure: ") + e.what());
    return 1;
  }
  return 0;
}
