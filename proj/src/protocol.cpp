// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/protocol.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "epiforge/baselines.hpp"
#include "epiforge/log.hpp"

namespace epiforge::eval {

namespace {

einn::Problem problem_for(const ForecastContext& ctx, const cfg::Config& config) {
  if (!ctx.calibration) throw ContractError("forecaster: this model needs a calibration");
  einn::ProblemOptions opt;
  opt.horizon_weeks = ctx.horizon;
  opt.collocate_horizon = config.model.collocate_horizon;
  opt.outpatient_ratio = ctx.outpatient_ratio;
  return einn::make_problem(config.data.model, config.data.mode, ctx.train, ctx.scaled_features, *ctx.calibration,
                            opt);
}

class EinnForecaster : public Forecaster {
 public:
  EinnForecaster(const cfg::Config& config, bool gradient_matching)
      : config_(config), gradient_matching_(gradient_matching) {}

  std::string name() const override { return gradient_matching_ ? "EINN" : "EINN-NoGradMatching"; }

  einn::WeeklyForecast forecast(const ForecastContext& ctx) const override {
    const einn::Problem problem = problem_for(ctx, config_);
    einn::Einn model(problem, config_.model.einn, ctx.seed);
    train::TrainPlan plan = config_.train;
    plan.seed = ctx.seed;
    plan.gradient_matching = gradient_matching_;
    train::train_einn(model, problem, config_.losses, plan);
    return model.forecast(problem, ctx.horizon);
  }

 private:
  cfg::Config config_;
  bool gradient_matching_;
};

class BaselineForecaster : public Forecaster {
 public:
  BaselineForecaster(const cfg::Config& config, base::BaselineKind kind) : config_(config), kind_(kind) {}

  std::string name() const override { return base::to_string(kind_); }

  bool needs_calibration() const override {
    switch (kind_) {
      case base::BaselineKind::Persistence:
      case base::BaselineKind::AR:
      case base::BaselineKind::LassoFeatures:
        return false;
      default:
        return true;
    }
  }

  einn::WeeklyForecast forecast(const ForecastContext& ctx) const override {
    using base::BaselineKind;
    const data::TargetMode mode = config_.data.mode;
    const int K = ctx.horizon;
    einn::WeeklyForecast out;
    out.beyond_range.assign(static_cast<std::size_t>(K), false);
    const Eigen::VectorXd weekly = data::weekly_target(ctx.train.target, mode);
    switch (kind_) {
      case BaselineKind::Persistence:
        out.values = base::persistence_forecast(ctx.train.target, mode, K);
        return out;
      case BaselineKind::AR:
        out.values = base::forecast_ar(base::fit_ar(weekly, config_.model.ar_lags), weekly, K);
        return out;
      case BaselineKind::LassoFeatures:
        out.values = base::lasso_forecast(weekly, weekly_feature_means(ctx.scaled_features),
                                          config_.model.lasso_lags, config_.model.lasso_lambda, K);
        return out;
      case BaselineKind::MechanisticOnly:
        out.values = base::mechanistic_forecast(*ctx.calibration, ctx.train.population, ctx.outpatient_ratio, mode,
                                                ctx.train.days(), K);
        return out;
      case BaselineKind::RnnOnly:
      case BaselineKind::Generation:
      case BaselineKind::Regularization: {
        const einn::Problem problem = problem_for(ctx, config_);
        const bool params = kind_ == BaselineKind::Regularization;
        base::BaseRnn model(problem, config_.model.rnn, ctx.seed, params);
        const ad::Matrix target = kind_ == BaselineKind::Generation ? base::generation_target(problem) : problem.target;
        base::train_rnn(model, problem, target, config_.model.rnn, params ? config_.model.rnn.ode_weight : 0.0);
        return base::forecast_rnn(model, problem, K);
      }
      case BaselineKind::Ensembling: {
        const einn::Problem problem = problem_for(ctx, config_);
        base::BaseRnn model(problem, config_.model.rnn, ctx.seed, false);
        base::train_rnn(model, problem, problem.target, config_.model.rnn, 0.0);
        const std::vector<double> rnn = base::forecast_rnn(model, problem, K).values;
        const std::vector<double> mech = base::mechanistic_forecast(*ctx.calibration, ctx.train.population,
                                                                    ctx.outpatient_ratio, mode, ctx.train.days(), K);
        // In-sample pairs over the last (up to) eight complete training weeks;
        // the recurrent fit starts at week 1.
        const std::vector<double> rnn_fit = base::rnn_weekly_fit(model, problem);
        const std::vector<double> mech_fit = base::mechanistic_weekly_fit(
            *ctx.calibration, ctx.train.population, ctx.outpatient_ratio, mode, ctx.train.days());
        const int W = static_cast<int>(weekly.size());
        const int n = std::min(8, W - 1);
        if (n < 1) throw DimensionError("Ensembling: need at least two training weeks");
        ad::Matrix inputs(n, 2);
        Eigen::VectorXd targets(n);
        for (int i = 0; i < n; ++i) {
          const int w = W - n + i;
          inputs(i, 0) = rnn_fit[static_cast<std::size_t>(w - 1)];
          inputs(i, 1) = mech_fit[static_cast<std::size_t>(w)];
          targets(i) = weekly(w);
        }
        out.values = base::ensemble_forecast(rnn, mech, inputs, targets, ctx.seed);
        return out;
      }
    }
    throw ConfigError("unhandled baseline");
  }

 private:
  cfg::Config config_;
  base::BaselineKind kind_;
};

}  // namespace

std::unique_ptr<Forecaster> make_forecaster(const std::string& name, const cfg::Config& config) {
  if (name == "EINN" || name == "einn") return std::make_unique<EinnForecaster>(config, true);
  if (name == "EINN-NoGradMatching" || name == "einn-nogradmatching") {
    return std::make_unique<EinnForecaster>(config, false);
  }
  return std::make_unique<BaselineForecaster>(config, base::baseline_from_string(name));
}

calib::CalibrationResult CalibrationCache::get(const std::string& region, int week,
                                               const std::function<calib::CalibrationResult()>& compute) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find({region, week});
    if (it != entries_.end()) return it->second;
  }
  calib::CalibrationResult r = compute();
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.emplace(std::make_pair(region, week), std::move(r)).first->second;
}

void CalibrationCache::put(const std::string& region, int week, calib::CalibrationResult result) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[{region, week}] = std::move(result);
}

std::map<std::pair<std::string, int>, calib::CalibrationResult> CalibrationCache::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}

ProtocolOptions protocol_options(const cfg::Config& config) {
  ProtocolOptions o;
  for (int w = config.eval.first_week; w <= config.eval.last_week; ++w) o.weeks.push_back(w);
  o.horizon = config.eval.horizon;
  o.jobs = config.eval.jobs;
  o.kind = config.data.model;
  o.mode = config.data.mode;
  for (const auto& [name, r] : config.data.regions) o.outpatient_ratio[name] = r.outpatient_ratio;
  o.seed = config.train.seed;
  o.calibration_restarts = config.model.calibration_restarts;
  o.calibration_proximal = config.model.calibration_proximal;
  return o;
}

calib::CalibrationResult calibrate_prefix(const data::RegionDataset& region, int week, ode::ModelKind kind,
                                          double outpatient_ratio, int restarts, double proximal) {
  const data::RegionDataset train = region.head(7 * week);
  calib::CalibrationProblem p = calib::CalibrationProblem::make(kind, train.population, train.target, outpatient_ratio);
  p.restarts = restarts;
  p.proximal_weight = proximal;
  return calib::calibrate_ode(p);
}

std::optional<double> weekly_truth(const data::RegionDataset& region, data::TargetMode mode, int week, int k) {
  const Eigen::VectorXd weekly = data::weekly_target(region.target, mode);
  const int index = week + k - 1;
  if (index < 0 || index >= weekly.size()) return std::nullopt;
  return weekly(index);
}

Matrix weekly_feature_means(const Matrix& daily) {
  const Eigen::Index W = daily.rows() / 7;
  Matrix out(W, daily.cols());
  for (Eigen::Index w = 0; w < W; ++w) out.row(w) = daily.middleRows(7 * w, 7).colwise().mean();
  return out;
}

namespace {

struct Cell {
  std::size_t region = 0;
  int week = 0;
};

struct CellOutput {
  std::vector<ForecastRecord> records;
  std::vector<std::string> dropped;
};

CellOutput run_cell(const std::vector<const Forecaster*>& models, const data::RegionDataset& full, std::size_t index,
                    int week, const ProtocolOptions& options, CalibrationCache& cache) {
  CellOutput out;
  const int days = 7 * week;
  if (days > full.days()) {
    out.dropped.push_back(full.region + " week " + std::to_string(week) + ": no data through the prediction week");
    return out;
  }
  const data::RegionDataset train = full.head(days);
  const data::ScaledSeries scaled = data::standard_scale(train.features, train.days());
  auto or_it = options.outpatient_ratio.find(full.region);
  const double ratio = or_it == options.outpatient_ratio.end() ? 0.0 : or_it->second;

  if (options.observer) {
    CellView view;
    view.region = full.region;
    view.week = week;
    view.cutoff = full.start + days - 1;
    view.last_training_day = train.last_day();
    view.feature_rows = static_cast<int>(scaled.values.rows());
    view.scaler = scaled.scaler;
    options.observer(view);
  }

  std::optional<calib::CalibrationResult> calibration;
  for (const Forecaster* model : models) {
    if (model->needs_calibration() && !calibration) {
      calibration = cache.get(full.region, week, [&] {
        return calibrate_prefix(full, week, options.kind, ratio, options.calibration_restarts,
                                options.calibration_proximal);
      });
    }
    ForecastContext ctx{train, scaled.values, scaled.scaler, calibration ? &*calibration : nullptr, ratio,
                        week,  options.horizon,
                        options.seed + 1000003ULL * index + static_cast<std::uint64_t>(week)};
    log::info("protocol: {} week {} model {}", full.region, week, model->name());
    const einn::WeeklyForecast f = model->forecast(ctx);
    if (static_cast<int>(f.values.size()) != options.horizon) {
      throw DimensionError("protocol: model " + model->name() + " returned the wrong number of horizons");
    }
    for (int k = 1; k <= options.horizon; ++k) {
      const std::optional<double> truth = weekly_truth(full, options.mode, week, k);
      if (!truth) {
        const std::string reason = full.region + " week " + std::to_string(week) + " horizon " + std::to_string(k) +
                                   " model " + model->name() + ": truth not available";
        log::warn("protocol: dropped {}", reason);
        out.dropped.push_back(reason);
        continue;
      }
      ForecastRecord r;
      r.region = full.region;
      r.model = model->name();
      r.week = week;
      r.horizon = k;
      r.predicted = f.values[static_cast<std::size_t>(k - 1)];
      r.truth = *truth;
      r.beyond_range = k - 1 < static_cast<int>(f.beyond_range.size()) && f.beyond_range[static_cast<std::size_t>(k - 1)];
      out.records.push_back(r);
    }
  }
  return out;
}

}  // namespace

ProtocolResult rolling_protocol(const std::vector<const Forecaster*>& models,
                                const std::vector<data::RegionDataset>& regions, const ProtocolOptions& options) {
  if (options.horizon < 1) throw ConfigError("protocol: horizon must be at least 1");
  if (options.jobs < 1) throw ConfigError("protocol: jobs must be at least 1");
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (int w : options.weeks) cells.push_back({r, w});
  }
  CalibrationCache local;
  CalibrationCache& cache = options.cache ? *options.cache : local;
  std::vector<CellOutput> outputs(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        outputs[i] = run_cell(models, regions[cells[i].region], cells[i].region, cells[i].week, options, cache);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(options.jobs, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ProtocolResult result;
  for (CellOutput& o : outputs) {
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    result.dropped.insert(result.dropped.end(), o.dropped.begin(), o.dropped.end());
  }
  return result;
}

}  // namespace epiforge::eval
