// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "epiforge/checkpoint.hpp"
#include "epiforge/config.hpp"
#include "epiforge/log.hpp"
#include "epiforge/plot.hpp"
#include "epiforge/protocol.hpp"
#include "epiforge/serialization.hpp"
#include "epiforge/synthetic.hpp"

namespace epiforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<int, int> parse_week_range(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto dash = text.find('-');
    if (dash == std::string::npos) {
      const int w = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {w, w};
    }
    const std::string a = text.substr(0, dash);
    const std::string b = text.substr(dash + 1);
    const int lo = std::stoi(a, &used);
    if (used != a.size()) throw std::invalid_argument(text);
    const int hi = std::stoi(b, &used);
    if (used != b.size()) throw std::invalid_argument(text);
    if (lo < 1 || hi < lo) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError("bad week range '" + text + "' (expected N or A-B)");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

namespace {

struct Common {
  std::string config;
  std::string regions;
  std::string weeks;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool model_flag) {
  cmd->add_option("--config", c.config, "JSON configuration file")->required();
  cmd->add_option("--region", c.regions, "Comma-separated region ids");
  cmd->add_option("--weeks", c.weeks, "Prediction weeks, N or A-B");
  if (model_flag) cmd->add_option("--model", c.model, "Model name(s), comma-separated");
  cmd->add_option("--seed", c.seed, "Seed override");
  cmd->add_option("--jobs", c.jobs, "Parallel workers");
  cmd->add_option("--out", c.out, "Output directory");
}

cfg::Config resolve(const Common& c) {
  cfg::Config config = cfg::load_config(c.config);
  if (c.seed) config.train.seed = *c.seed;
  if (c.jobs) {
    if (*c.jobs < 1) throw ConfigError("--jobs must be at least 1");
    config.eval.jobs = *c.jobs;
  }
  if (!c.out.empty()) config.out_dir = c.out;
  if (!c.weeks.empty()) std::tie(config.eval.first_week, config.eval.last_week) = parse_week_range(c.weeks);
  if (!c.model.empty()) config.eval.models = split_list(c.model);
  return config;
}

std::string path_in(const cfg::Config& config, const std::string& rel) { return (fs::path(config.out_dir) / rel).string(); }

int cmd_calibrate(const Common& c, std::ostream& out) {
  const cfg::Config config = resolve(c);
  const auto regions = cfg::load_regions(config, split_list(c.regions));
  for (const auto& ds : regions) {
    const double ratio = config.data.regions.count(ds.region) ? config.region(ds.region).outpatient_ratio : 0.0;
    std::vector<int> weeks;
    if (c.weeks.empty()) {
      weeks.push_back(ds.days() / 7);
    } else {
      for (int w = config.eval.first_week; w <= config.eval.last_week; ++w) weeks.push_back(w);
    }
    for (int w : weeks) {
      if (7 * w > ds.days()) throw ConfigError("week " + std::to_string(w) + " is past the end of " + ds.region);
      const calib::CalibrationResult r = eval::calibrate_prefix(ds, w, config.data.model, ratio,
                                                                config.model.calibration_restarts,
                                                                config.model.calibration_proximal);
      const std::string file =
          path_in(config, "calibration/" + ds.region + "_w" + std::to_string(w) + ".json");
      io::write_file(file, io::to_json(r).dump(2) + "\n");
      out << file << " fit_loss=" << r.fit_loss << '\n';
    }
  }
  return 0;
}

int cmd_train(const Common& c, std::ostream& out) {
  const cfg::Config config = resolve(c);
  const std::string model_name = c.model.empty() ? "EINN" : c.model;
  const bool is_einn = model_name == "EINN" || model_name == "einn" || model_name == "EINN-NoGradMatching";
  std::optional<base::BaselineKind> kind;
  if (!is_einn) {
    kind = base::baseline_from_string(model_name);
    if (*kind != base::BaselineKind::RnnOnly && *kind != base::BaselineKind::Generation &&
        *kind != base::BaselineKind::Regularization) {
      throw ConfigError("model '" + model_name + "' has no training step; use the forecast command");
    }
  }
  const auto regions = cfg::load_regions(config, split_list(c.regions));
  const int week = config.eval.last_week;
  for (const auto& ds : regions) {
    if (7 * week > ds.days()) throw ConfigError("week " + std::to_string(week) + " is past the end of " + ds.region);
    const double ratio = config.data.regions.count(ds.region) ? config.region(ds.region).outpatient_ratio : 0.0;
    const data::RegionDataset train = ds.head(7 * week);
    const data::ScaledSeries scaled = data::standard_scale(train.features, train.days());
    const calib::CalibrationResult cal = eval::calibrate_prefix(ds, week, config.data.model, ratio,
                                                                config.model.calibration_restarts,
                                                                config.model.calibration_proximal);
    einn::ProblemOptions opt;
    opt.horizon_weeks = config.eval.horizon;
    opt.collocate_horizon = config.model.collocate_horizon;
    opt.outpatient_ratio = ratio;
    const einn::Problem problem =
        einn::make_problem(config.data.model, config.data.mode, train, scaled.values, cal, opt);
    const std::string stem = ds.region + "_w" + std::to_string(week);
    const std::string log_path = path_in(config, "logs/" + stem + "_" + model_name + ".jsonl");
    fs::create_directories(fs::path(log_path).parent_path());
    std::ofstream log_file(log_path);
    if (!log_file) throw Error("cannot write '" + log_path + "'");
    if (is_einn) {
      einn::Einn model(problem, config.model.einn, config.train.seed);
      train::TrainPlan plan = config.train;
      plan.gradient_matching = model_name != "EINN-NoGradMatching";
      const train::TrainReport report = train::train_einn(model, problem, config.losses, plan, &log_file);
      const std::string ckpt = path_in(config, "checkpoints/" + stem + "_" + model_name + ".json");
      io::save_checkpoint(ckpt, io::make_checkpoint(model, problem, scaled.scaler));
      out << ckpt << " epochs=" << report.history.size() << " final_loss=" << report.history.back().total
          << " embedding_gap=" << report.embedding_gap << '\n';
    } else {
      const bool params = *kind == base::BaselineKind::Regularization;
      base::BaseRnn model(problem, config.model.rnn, config.train.seed, params);
      const ad::Matrix target =
          *kind == base::BaselineKind::Generation ? base::generation_target(problem) : problem.target;
      const auto history =
          base::train_rnn(model, problem, target, config.model.rnn, params ? config.model.rnn.ode_weight : 0.0);
      for (std::size_t i = 0; i < history.size(); ++i) {
        log_file << json{{"epoch", i}, {"total", history[i]}}.dump() << '\n';
      }
      out << log_path << " epochs=" << history.size() << " final_loss=" << history.back() << '\n';
    }
  }
  return 0;
}

int cmd_forecast(const Common& c, std::ostream& out) {
  const cfg::Config config = resolve(c);
  const auto regions = cfg::load_regions(config, split_list(c.regions));
  std::vector<std::unique_ptr<eval::Forecaster>> owned;
  std::vector<const eval::Forecaster*> models;
  for (const std::string& name : config.eval.models) {
    owned.push_back(eval::make_forecaster(name, config));
    models.push_back(owned.back().get());
  }
  const eval::ProtocolResult result = eval::rolling_protocol(models, regions, eval::protocol_options(config));
  std::ostringstream text;
  io::write_records(text, result.records);
  const std::string file = path_in(config, "forecasts.jsonl");
  io::write_file(file, text.str());
  out << file << " records=" << result.records.size() << " dropped=" << result.dropped.size() << '\n';
  return 0;
}

void write_scores(const cfg::Config& config, const std::vector<eval::ForecastRecord>& records, const std::string& dir,
                  std::ostream& out) {
  eval::MetricOptions opt;
  opt.plus_one_guard = config.data.mode == data::TargetMode::Covid;
  const eval::ScoreTable table = eval::aggregate_scores(records, opt);
  std::ostringstream csv;
  io::write_scores_csv(csv, table);
  io::write_file((fs::path(dir) / "scores.csv").string(), csv.str());
  io::write_file((fs::path(dir) / "scores.json").string(), io::to_json(table).dump(2) + "\n");
  std::set<std::string> regions;
  for (const auto& r : records) regions.insert(r.region);
  for (const std::string& region : regions) {
    io::write_file((fs::path(dir) / "plots" / (region + ".svg")).string(), io::forecast_svg(region, records));
  }
  out << csv.str();
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& files, std::ostream& out) {
  const cfg::Config config = resolve(c);
  std::vector<eval::ForecastRecord> records;
  const std::vector<std::string> inputs = files.empty() ? std::vector<std::string>{path_in(config, "forecasts.jsonl")}
                                                        : files;
  for (const std::string& f : inputs) {
    auto more = io::read_records_file(f);
    records.insert(records.end(), more.begin(), more.end());
  }
  write_scores(config, records, config.out_dir, out);
  return 0;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& settings, std::ostream& out) {
  std::ifstream in(c.config);
  if (!in) throw ConfigError("config: cannot open '" + c.config + "'");
  json base_doc;
  try {
    in >> base_doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::vector<std::pair<std::string, std::vector<json>>> axes;
  for (const std::string& s : settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=v1,v2,...");
    std::vector<json> values;
    for (const std::string& v : split_list(s.substr(eq + 1))) {
      try {
        values.push_back(json::parse(v));
      } catch (const json::exception&) {
        values.push_back(v);
      }
    }
    if (values.empty()) throw ConfigError("--set " + s.substr(0, eq) + " has no values");
    axes.emplace_back(s.substr(0, eq), values);
  }
  // Validate every grid point before running any of them.
  std::vector<json> grid{base_doc};
  for (const auto& [key, values] : axes) {
    std::vector<json> next;
    for (const json& doc : grid) {
      for (const json& v : values) {
        json d = doc;
        cfg::set_path(d, key, v);
        next.push_back(d);
      }
    }
    grid = std::move(next);
  }
  const cfg::Config base_config = resolve(c);
  std::ostringstream summary;
  summary << "run,settings,model,nd_short,nd_long,pc\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cfg::Config config = cfg::parse_config(grid[i]);
    config.train.seed = base_config.train.seed;
    config.eval = base_config.eval;
    config.out_dir = (fs::path(base_config.out_dir) / ("run_" + std::to_string(i))).string();
    const auto regions = cfg::load_regions(config, split_list(c.regions));
    std::vector<std::unique_ptr<eval::Forecaster>> owned;
    std::vector<const eval::Forecaster*> models;
    for (const std::string& name : config.eval.models) {
      owned.push_back(eval::make_forecaster(name, config));
      models.push_back(owned.back().get());
    }
    const auto result = eval::rolling_protocol(models, regions, eval::protocol_options(config));
    std::ostringstream text;
    io::write_records(text, result.records);
    io::write_file(path_in(config, "forecasts.jsonl"), text.str());
    std::ostringstream scores;
    write_scores(config, result.records, config.out_dir, scores);
    std::string desc;
    for (const auto& [key, values] : axes) {
      const json* node = &grid[i];
      std::stringstream ks(key);
      std::string part;
      while (std::getline(ks, part, '.')) node = &node->at(part);
      desc += (desc.empty() ? "" : ";") + key + "=" + node->dump();
    }
    eval::MetricOptions opt;
    opt.plus_one_guard = config.data.mode == data::TargetMode::Covid;
    const eval::ScoreTable table = eval::aggregate_scores(result.records, opt);
    for (const auto& row : table.rows) {
      if (!row.region.empty()) continue;
      summary << i << ",\"" << desc << "\"," << row.model << ',' << eval::format_metric(row.nd_short) << ','
              << eval::format_metric(row.nd_long) << ',' << eval::format_metric(row.pc) << '\n';
    }
  }
  io::write_file((fs::path(base_config.out_dir) / "sweep.csv").string(), summary.str());
  out << summary.str();
  return 0;
}

int cmd_synth(std::uint64_t seed, const std::string& path, std::ostream& out) {
  const data::SyntheticWorld world = data::make_synthetic_world(data::two_regime_world(seed));
  std::ostringstream csv;
  data::write_csv(csv, {world.dataset});
  io::write_file(path, csv.str());
  out << path << " region=" << world.dataset.region << " population=" << world.dataset.population
      << " days=" << world.dataset.days() << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  log::configure_from_env();
  CLI::App app{"epiforge: epidemiologically-informed forecasting"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> files;
  std::vector<std::string> settings;
  std::uint64_t synth_seed = 0;
  std::string synth_out;

  CLI::App* calibrate = app.add_subcommand("calibrate", "Fit the compartmental model per region");
  add_common(calibrate, common, false);
  CLI::App* train_cmd = app.add_subcommand("train", "Train one model per region and write checkpoints and logs");
  add_common(train_cmd, common, true);
  CLI::App* forecast = app.add_subcommand("forecast", "Run the rolling protocol and write forecast records");
  add_common(forecast, common, true);
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score forecast records and plot them");
  add_common(evaluate, common, false);
  evaluate->add_option("files", files, "Forecast JSON-lines files (default: <out>/forecasts.jsonl)");
  CLI::App* sweep = app.add_subcommand("sweep", "Rerun forecast and evaluate over a grid of config values");
  add_common(sweep, common, true);
  sweep->add_option("--set", settings, "key=v1,v2 (dotted config key)")->required();
  CLI::App* synth = app.add_subcommand("synth", "Write the two-regime synthetic world as CSV");
  synth->add_option("--seed", synth_seed, "Noise seed");
  synth->add_option("--out", synth_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (calibrate->parsed()) return cmd_calibrate(common, out);
    if (train_cmd->parsed()) return cmd_train(common, out);
    if (forecast->parsed()) return cmd_forecast(common, out);
    if (evaluate->parsed()) return cmd_evaluate(common, files, out);
    if (sweep->parsed()) return cmd_sweep(common, settings, out);
    if (synth->parsed()) return cmd_synth(synth_seed, synth_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace epiforge::cli
