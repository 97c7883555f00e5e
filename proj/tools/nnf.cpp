/*
 * Copyright 2026 The nnframe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end for the noise-management pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include "nnf/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitStage = 4;

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out.push_back(c == '.' || c == '_' ? '-' : c);
  return out;
}

struct Options {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
  std::string log_level = "info";
};

nnf::PipelineConfig build_config(const Options& o) {
  nnf::PipelineConfig cfg;
  if (!o.config_file.empty()) nnf::apply_config_file(cfg, o.config_file);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw nnf::ConfigError(fmt::format("--set expects key=value, got '{}'", s));
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : o.flags) cfg.set(key, value);
  if (o.seed) cfg.set_all_seeds(*o.seed);
  cfg.validate();
  return cfg;
}

void print_pairs(const nlohmann::json& report) {
  for (const auto& p : report.at("pairs"))
    fmt::print("{:<24} {:6.2f}% positive\n", p.at("pair").get<std::string>(),
               p.at("percent_positive").get<double>());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural-noise management for rating data"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "override every seed");
  app.add_option("--set", o.sets, "key=value override, repeatable");
  app.add_option("--log-level", o.log_level, "debug, info, warning, error or off");
  for (const auto& k : nnf::config_keys()) {
    app.add_option_function<std::string>(
           flag_name(k.key), [&o, key = k.key](const std::string& v) { o.flags[key] = v; },
           k.help)
        ->group("Pipeline settings");
  }

  auto* ingest = app.add_subcommand("ingest", "load, filter and split the dataset");
  auto* detect = app.add_subcommand("detect", "run the four-detector board on the detect fold");
  auto* ensemble = app.add_subcommand("ensemble", "label the uncertain ratings");
  auto* signature = app.add_subcommand("signature", "run the opt-out signature");
  auto* evaluate = app.add_subcommand("evaluate", "retrain and compare before and after removal");
  auto* run = app.add_subcommand("run", "every stage in order");

  auto* baseline = app.add_subcommand("baseline", "removal driven by a single detector");
  std::vector<std::string> detectors;
  baseline->add_option("--detector", detectors, "NF1, NF2, NF3, NF4 or all")->required();

  auto* inject = app.add_subcommand("inject-noise", "perturb a ratings file with known noise");
  std::string in_path, out_path, mask_path, kind = "UniformReplace";
  double rate = 0.1, step = 0.5;
  inject->add_option("--input", in_path, "ratings CSV")->required()->check(CLI::ExistingFile);
  inject->add_option("--output", out_path, "noisy ratings CSV")->required();
  inject->add_option("--mask", mask_path, "ground-truth mask CSV")->required();
  inject->add_option("--rate", rate, "fraction of ratings, or of users for OptOutBurst");
  inject->add_option("--kind", kind, "UniformReplace, Flip or OptOutBurst");
  inject->add_option("--step", step, "rating grid step");

  auto* report = app.add_subcommand("report", "summarize the reports of a run");
  std::string run_dir;
  report->add_option("--run-dir", run_dir, "run directory; default from the config");

  auto* synth = app.add_subcommand("synth", "write a planted-model dataset");
  nnf::PlantedSpec ps;
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "directory for ratings.csv and movies.csv")->required();
  synth->add_option("--users", ps.users);
  synth->add_option("--items", ps.items);
  synth->add_option("--min-per-user", ps.min_per_user);
  synth->add_option("--max-per-user", ps.max_per_user);
  synth->add_option("--factors", ps.factors);
  synth->add_option("--genre-count", ps.genres);
  synth->add_option("--noise-sd", ps.noise_sd);
  synth->add_option("--skew", ps.popularity_skew);
  synth->add_option("--max-days", ps.max_days);

  auto* show = app.add_subcommand("show-config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const std::map<std::string, nnf::LogLevel> levels{{"debug", nnf::LogLevel::kDebug},
                                                      {"info", nnf::LogLevel::kInfo},
                                                      {"warning", nnf::LogLevel::kWarning},
                                                      {"error", nnf::LogLevel::kError},
                                                      {"off", nnf::LogLevel::kOff}};
    const auto lv = levels.find(o.log_level);
    if (lv == levels.end()) throw nnf::ConfigError(fmt::format("unknown log level '{}'", o.log_level));
    nnf::set_log_level(lv->second);

    if (*synth) {
      if (o.seed) ps.seed = *o.seed;
      const auto data = nnf::generate_planted(ps);
      std::filesystem::create_directories(synth_dir);
      nnf::write_ratings_csv(data.table, std::filesystem::path(synth_dir) / "ratings.csv");
      if (data.genres) nnf::write_genres_csv(*data.genres, std::filesystem::path(synth_dir) / "movies.csv");
      fmt::print("{} ratings from {} users written to {}\n", data.table.size(),
                 data.table.users().size(), synth_dir);
      return 0;
    }
    const nnf::PipelineConfig cfg = build_config(o);
    if (*inject) {
      const auto table = nnf::load_ratings(in_path, cfg.scale).table;
      const auto noisy = nnf::inject_noise(table, rate, nnf::parse_noise_kind(kind),
                                           o.seed.value_or(nnf::kDefaultSeed), step);
      nnf::write_ratings_csv(noisy.table, out_path);
      nnf::write_mask_csv(noisy.mask, mask_path);
      fmt::print("{} ratings perturbed ({}), mask written to {}\n", noisy.mask.size(), kind, mask_path);
      return 0;
    }
    if (*show) {
      fmt::print("# config hash {}\n{}", cfg.hash(), cfg.canonical());
      return 0;
    }
    if (*report) {
      fmt::print("{}", nnf::summarize_run(run_dir.empty() ? cfg.run_dir() : std::filesystem::path(run_dir)));
      return 0;
    }
    const auto dir = cfg.run_dir();
    if (*ingest) nnf::stage_ingest(cfg);
    if (*detect) nnf::stage_detect(cfg);
    if (*ensemble) nnf::stage_ensemble(cfg);
    if (*signature) nnf::stage_signature(cfg);
    if (*evaluate) print_pairs(nnf::stage_evaluate(cfg));
    if (*run) print_pairs(nnf::run_framework(cfg));
    if (*baseline) {
      std::vector<nnf::Detector> ds;
      for (const auto& d : detectors) {
        if (d == "all" || d == "ALL") {
          for (std::size_t k = 0; k < nnf::kDetectorCount; ++k)
            ds.push_back(static_cast<nnf::Detector>(k));
        } else {
          ds.push_back(nnf::parse_detector(d));
        }
      }
      for (auto d : ds) {
        fmt::print("[{}]\n", nnf::to_string(d));
        print_pairs(nnf::run_baseline(cfg, d));
      }
    }
    fmt::print("artifacts in {}\n", dir.string());
    return 0;
  } catch (const nnf::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const nnf::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const nnf::StageError& e) {
    fmt::print(stderr, "stage failure: {}\n", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    fmt::print(stderr, "stage failure: {}\n", e.what());
    return kExitStage;
  }
}
