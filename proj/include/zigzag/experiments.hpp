#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "zigzag/analysis.hpp"
#include "zigzag/core.hpp"
#include "zigzag/io.hpp"
#include "zigzag/models.hpp"
#include "zigzag/parallel.hpp"
#include "zigzag/samplers.hpp"
#include "zigzag/stats.hpp"

// Experiment drivers behind the command-line runner. Each returns a JSON
// document whose layout is stable and deterministic for a given config
// (insertion-ordered keys, fixed iteration order); wall-clock fields are
// collected separately so reruns produce byte-identical metrics.

namespace zigzag::experiments {

using json = nlohmann::ordered_json;

struct CsvRow {
  std::string experiment, method, metric;
  long long n = 0;
  long long seed = 0;
  double value = 0;
};

inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<CsvRow>& rows) {
  std::ostringstream out;
  out << "experiment,method,n,seed,metric,value\n";
  for (const auto& r : rows)
    out << r.experiment << ',' << r.method << ',' << r.n << ',' << r.seed << ',' << r.metric
        << ',' << format_double(r.value) << "\n";
  atomic_write(path, out.str());
}

// Ascending epoch grid ending exactly at max_epochs, roughly `per_decade`
// points per decade, never dipping below 2 epochs.
inline std::vector<double> epoch_checkpoints(double max_epochs, int per_decade) {
  const double decades = std::min(3.0, std::log10(max_epochs / 2.0));
  const int steps = std::max(per_decade, static_cast<int>(per_decade * decades));
  std::vector<double> out;
  out.reserve(steps + 1);
  for (int j = steps; j >= 0; --j)
    out.push_back(max_epochs * std::pow(10.0, -static_cast<double>(j) / per_decade));
  return out;
}

inline Vector to_vector(const std::vector<double>& xs) {
  Vector v(static_cast<Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) v[static_cast<Index>(i)] = xs[i];
  return v;
}

inline PhaseState up_state(const Vector& pos) { return {pos, Vector::Ones(pos.size())}; }

// ---------------------------------------------------------------------------
// gaussian-mse: mean-of-a-Gaussian posterior, MSE of moment estimates versus
// epochs for ZZ, ZZ-CV, ZZ-soCV and SGLD. All trajectories start at the
// posterior mode; estimates use the full trajectory.
// ---------------------------------------------------------------------------

struct GaussianMseConfig {
  long long n = 100;
  double xi0 = 1.0, sigma = 1.0, rho = 1.0;
  std::vector<std::string> methods = {"zz", "zz-cv", "zz-socv", "sgld"};
  int replicates = 50;
  double max_epochs = 10000;
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1000;
  int points_per_decade = 8;
  double sgld_step = -1;      // default 0.5 / posterior precision
  long long sgld_batch = -1;  // default min(10, n)
  long long cv_cache_threshold = 100000000;
};

namespace detail {

struct MomentSeries {
  std::vector<double> m1, m2;  // per checkpoint; NaN when unreachable
  double final1 = 0, final2 = 0;
};

inline MomentSeries zz_family_series(const RunReport& report,
                                     std::size_t n_checkpoints) {
  MomentSeries out;
  const auto& skel = report.skeleton;
  out.m1 = moment_prefix(skel, 0, 1, report.epoch_mark_times);
  out.m2 = moment_prefix(skel, 0, 2, report.epoch_mark_times);
  out.m1.resize(n_checkpoints, std::numeric_limits<double>::quiet_NaN());
  out.m2.resize(n_checkpoints, std::numeric_limits<double>::quiet_NaN());
  out.final1 = integrate_moment(skel, 0, 1);
  out.final2 = integrate_moment(skel, 0, 2);
  return out;
}

inline MomentSeries chain_series(const Matrix& chain, const std::vector<long long>& cut_iters,
                                 Index coord) {
  MomentSeries out;
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  double s1 = 0, s2 = 0;
  long long k = 0;
  for (const long long cut : cut_iters) {
    if (cut < 1 || cut > chain.rows()) {
      out.m1.push_back(nan);
      out.m2.push_back(nan);
      continue;
    }
    for (; k < cut; ++k) {
      const double x = chain(static_cast<Index>(k), coord);
      s1 += x;
      s2 += x * x;
    }
    out.m1.push_back(s1 / static_cast<double>(cut));
    out.m2.push_back(s2 / static_cast<double>(cut));
  }
  for (Index r = static_cast<Index>(k); r < chain.rows(); ++r) {
    const double x = chain(r, coord);
    s1 += x;
    s2 += x * x;
  }
  out.final1 = s1 / static_cast<double>(chain.rows());
  out.final2 = s2 / static_cast<double>(chain.rows());
  return out;
}

}  // namespace detail

struct GaussianMseResult {
  json metrics;
  std::vector<CsvRow> rows;
  Skeleton example_skeleton;  // first replicate of the first ZZ-family method
};

inline GaussianMseResult run_gaussian_mse(const GaussianMseConfig& cfg, int workers = 1) {
  const auto model = synth_gaussian(cfg.n, cfg.xi0, cfg.sigma, cfg.data_seed, cfg.rho);
  const double truth1 = model.posterior_mean();
  const double truth2 =
      model.posterior_variance() + model.posterior_mean() * model.posterior_mean();
  const Vector mode = to_vector({model.posterior_mean()});

  const auto checkpoints = epoch_checkpoints(cfg.max_epochs, cfg.points_per_decade);
  const double sgld_step = cfg.sgld_step > 0 ? cfg.sgld_step : 0.5 / model.precision();
  const long long sgld_batch =
      cfg.sgld_batch > 0 ? cfg.sgld_batch : std::min<long long>(10, cfg.n);

  const auto ref = find_reference(model, mode, 1e-10, 100);
  // sub-optimal reference: exact mode of the posterior formed by the first
  // n/10 observations only
  const Vector sub = model.data().head(std::max<Index>(1, model.data().size() / 10));
  const GaussianMeanModel sub_model(sub, cfg.sigma, cfg.rho);
  const auto so_ref = make_reference(model, to_vector({sub_model.posterior_mean()}));

  CvOptions cv_opt;
  cv_opt.cache_threshold = cfg.cv_cache_threshold;

  GaussianMseResult result;
  result.metrics["experiment"] = "gaussian-mse";
  result.metrics["n"] = cfg.n;
  result.metrics["xi0"] = cfg.xi0;
  result.metrics["sigma"] = cfg.sigma;
  result.metrics["rho"] = cfg.rho;
  result.metrics["replicates"] = cfg.replicates;
  result.metrics["max_epochs"] = cfg.max_epochs;
  result.metrics["seed"] = cfg.seed;
  result.metrics["data_seed"] = cfg.data_seed;
  result.metrics["sgld_step"] = sgld_step;
  result.metrics["sgld_batch"] = sgld_batch;
  result.metrics["truth_m1"] = truth1;
  result.metrics["truth_m2"] = truth2;
  result.metrics["checkpoint_epochs"] = checkpoints;

  json methods_json = json::object();
  for (const auto& method : cfg.methods) {
    std::vector<detail::MomentSeries> series(cfg.replicates);
    std::vector<std::function<void()>> tasks;
    for (int r = 0; r < cfg.replicates; ++r) {
      tasks.push_back([&, r, method] {
        const auto seed = cfg.seed + static_cast<std::uint64_t>(r);
        RunOptions opt;
        opt.record = RunOptions::Record::Switches;
        opt.epoch_marks = checkpoints;
        opt.stream = static_cast<std::uint64_t>(r);
        if (method == "zz") {
          Vector slopes(1);
          slopes[0] = model.precision();
          const auto factory = affine_bound_factory(
              [&model](const PhaseState& s) { return model.full_grad(s.position); }, slopes);
          const auto report = simulate_zz(model, factory, up_state(mode),
                                          StopRule::max_epochs(cfg.max_epochs), {}, seed, opt);
          series[r] = detail::zz_family_series(report, checkpoints.size());
          if (r == 0 && result.example_skeleton.empty())
            result.example_skeleton = report.skeleton;
        } else if (method == "zz-cv" || method == "zz-socv") {
          const auto& used_ref = method == "zz-cv" ? ref : so_ref;
          const auto report =
              simulate_zz_cv(model, used_ref, up_state(mode),
                             StopRule::max_epochs(cfg.max_epochs), seed, opt, cv_opt);
          series[r] = detail::zz_family_series(report, checkpoints.size());
          if (r == 0 && result.example_skeleton.empty())
            result.example_skeleton = report.skeleton;
        } else if (method == "sgld") {
          std::vector<long long> cuts;
          for (const double e : checkpoints)
            cuts.push_back(static_cast<long long>(
                std::llround(e * static_cast<double>(cfg.n) / static_cast<double>(sgld_batch))));
          const auto iters = cuts.back();
          const auto run = sgld(model, sgld_step, sgld_batch, iters, mode, seed);
          series[r] = detail::chain_series(run.chain, cuts, 0);
        } else {
          throw ConfigError("gaussian-mse does not support method " + method);
        }
      });
    }
    run_parallel(tasks, workers);

    json mj;
    std::vector<double> mse1(checkpoints.size(), 0), mse2(checkpoints.size(), 0);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      for (const auto& s : series) {
        mse1[c] += (s.m1[c] - truth1) * (s.m1[c] - truth1) / cfg.replicates;
        mse2[c] += (s.m2[c] - truth2) * (s.m2[c] - truth2) / cfg.replicates;
      }
    }
    std::vector<double> finals1, finals2;
    for (const auto& s : series) {
      finals1.push_back(s.final1);
      finals2.push_back(s.final2);
    }
    mj["mse_m1"] = mse1;
    mj["mse_m2"] = mse2;
    mj["final_m1_mean"] = mean_of(finals1);
    mj["final_m1_stderr"] = stderr_of_mean(finals1);
    mj["final_m2_mean"] = mean_of(finals2);
    mj["final_m2_stderr"] = stderr_of_mean(finals2);
    // decay of the MSE over the last decade of epochs
    const std::size_t last = checkpoints.size() - 1;
    const std::size_t decade = last - static_cast<std::size_t>(cfg.points_per_decade);
    mj["mse_m2_last_decade_ratio"] = mse2[decade] / mse2[last];
    methods_json[method] = mj;

    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      result.rows.push_back({"gaussian-mse", method,
                             "mse_m1[e=" + format_double(checkpoints[c]) + "]", cfg.n,
                             static_cast<long long>(cfg.seed), mse1[c]});
      result.rows.push_back({"gaussian-mse", method,
                             "mse_m2[e=" + format_double(checkpoints[c]) + "]", cfg.n,
                             static_cast<long long>(cfg.seed), mse2[c]});
    }
  }
  result.metrics["methods"] = methods_json;
  return result;
}

// ---------------------------------------------------------------------------
// logistic-scaling: ESS per epoch versus n for the Zig-Zag variants and
// MALA on d-dimensional logistic regression. Data regenerated per seed;
// all trajectories start at the true parameter.
// ---------------------------------------------------------------------------

struct LogisticScalingConfig {
  std::vector<long long> ns = {256, 512, 1024, 2048, 4096, 8192, 16384};
  Index d = 2;
  int seeds = 10;
  double epochs = 1000;
  std::vector<std::string> methods = {"zz-hessian", "zz-ss", "zz-cv", "mala"};
  std::vector<double> xi_true = {1.0, 2.0};
  std::uint64_t seed = 1;
  long long ess_samples = 1000000;
  double burn_in = 0.1;
  double mala_step = -1;  // default 1/sqrt(trace Q)
};

struct LogisticScalingResult {
  json metrics;
  std::vector<CsvRow> rows;
  std::map<std::string, double> slopes;
};

inline LogisticScalingResult run_logistic_scaling(const LogisticScalingConfig& cfg,
                                                  int workers = 1) {
  if (static_cast<Index>(cfg.xi_true.size()) != cfg.d)
    throw ConfigError("logistic-scaling: xi_true must have d entries");
  const Vector xi_true = to_vector(cfg.xi_true);

  struct Cell {
    double ess = 0, esspe = 0, epochs = 0;
    long long proposals = 0;
  };
  const std::size_t n_cells = cfg.methods.size() * cfg.ns.size() * cfg.seeds;
  std::vector<Cell> cells(n_cells);

  std::vector<std::function<void()>> tasks;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t ni = 0; ni < cfg.ns.size(); ++ni) {
      for (int s = 0; s < cfg.seeds; ++s) {
        const std::size_t slot = (mi * cfg.ns.size() + ni) * cfg.seeds + s;
        tasks.push_back([&, mi, ni, s, slot] {
          const auto& method = cfg.methods[mi];
          const long long n = cfg.ns[ni];
          const auto data_seed =
              splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(n)) ^
                         splitmix64(static_cast<std::uint64_t>(s) + 17));
          const auto model = synth_logistic(n, cfg.d, xi_true, data_seed);
          const auto run_seed = cfg.seed + static_cast<std::uint64_t>(s);
          RunOptions opt;
          opt.record = RunOptions::Record::Switches;
          opt.stream = static_cast<std::uint64_t>(slot);

          Cell cell;
          if (method == "mala") {
            const double step0 =
                cfg.mala_step > 0 ? cfg.mala_step
                                  : 1.0 / std::sqrt(model.hessian_dominator()->trace());
            const auto iters = static_cast<long long>(cfg.epochs);
            const auto run = mala(model, step0, iters, xi_true, run_seed);
            std::vector<double> chain(static_cast<std::size_t>(run.chain.rows()));
            for (Index k = 0; k < run.chain.rows(); ++k)
              chain[static_cast<std::size_t>(k)] = run.chain(k, 0);
            const auto e = ess(chain);
            cell.ess = e.defined ? e.ess : 0.0;
            cell.epochs = run.epochs;
          } else {
            RunReport report;
            if (method == "zz-hessian") {
              report = simulate_zz_hessian(model, up_state(xi_true),
                                           StopRule::max_epochs(cfg.epochs), run_seed, opt);
            } else if (method == "zz-ss") {
              report = simulate_zz_ss(model, up_state(xi_true),
                                      StopRule::max_epochs(cfg.epochs), run_seed, opt);
            } else if (method == "zz-cv") {
              const auto ref = find_reference(model, xi_true, 1e-8, 100);
              report = simulate_zz_cv(model, ref, up_state(xi_true),
                                      StopRule::max_epochs(cfg.epochs), run_seed, opt);
            } else {
              throw ConfigError("logistic-scaling does not support method " + method);
            }
            const auto samples =
                sample_coordinate(report.skeleton, 0, cfg.ess_samples, cfg.burn_in);
            const auto e = ess(samples);
            cell.ess = e.defined ? e.ess : 0.0;
            cell.epochs = report.epochs;
            cell.proposals = report.proposals;
          }
          cell.esspe = cell.ess / cell.epochs;
          cells[slot] = cell;
        });
      }
    }
  }
  run_parallel(tasks, workers);

  LogisticScalingResult result;
  result.metrics["experiment"] = "logistic-scaling";
  result.metrics["d"] = cfg.d;
  result.metrics["epochs"] = cfg.epochs;
  result.metrics["seeds"] = cfg.seeds;
  result.metrics["seed"] = cfg.seed;
  result.metrics["ns"] = cfg.ns;

  json methods_json = json::object();
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const auto& method = cfg.methods[mi];
    json per_n = json::array();
    std::vector<double> log_n, log_esspe;
    for (std::size_t ni = 0; ni < cfg.ns.size(); ++ni) {
      double mean_esspe = 0;
      json seeds_json = json::array();
      for (int s = 0; s < cfg.seeds; ++s) {
        const auto& cell = cells[(mi * cfg.ns.size() + ni) * cfg.seeds + s];
        mean_esspe += cell.esspe / cfg.seeds;
        seeds_json.push_back(cell.esspe);
        result.rows.push_back({"logistic-scaling", method, "esspe", cfg.ns[ni], s,
                               cell.esspe});
        result.rows.push_back({"logistic-scaling", method, "ess", cfg.ns[ni], s, cell.ess});
      }
      json entry;
      entry["n"] = cfg.ns[ni];
      entry["esspe_mean"] = mean_esspe;
      entry["esspe_by_seed"] = seeds_json;
      per_n.push_back(entry);
      log_n.push_back(std::log(static_cast<double>(cfg.ns[ni])));
      log_esspe.push_back(std::log(mean_esspe));
    }
    const auto fit = ols_fit(log_n, log_esspe);
    json mj;
    mj["per_n"] = per_n;
    mj["esspe_slope"] = fit.slope;
    methods_json[method] = mj;
    result.slopes[method] = fit.slope;
    result.rows.push_back({"logistic-scaling", method, "esspe_slope", 0,
                           static_cast<long long>(cfg.seed), fit.slope});
  }
  result.metrics["methods"] = methods_json;
  return result;
}

// ---------------------------------------------------------------------------
// nonidentifiable: logistic model with success probability
// sigmoid((xi_1 + xi_2^2) x); ZZ and ZZ-CV run with horizon-constant
// envelope bounds and are compared against SGLD at a stable step and at
// 100x that step.
// ---------------------------------------------------------------------------

struct NonidentConfig {
  long long n = 1000;
  std::vector<double> xi_true = {-1.0, 0.0};
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 4242;
  double zz_epochs = 20000;
  double cv_epochs = 200;
  double burn_in = 0.1;
  double sgld_step = 1e-4;  // stable scale for n = 1000
  double sgld_step_multiplier = 100;
  long long sgld_batch = 10;
  double sgld_epochs = 400;
};

struct NonidentResult {
  json metrics;
  std::vector<CsvRow> rows;
  Skeleton zz_skeleton;
};

inline NonidentResult run_nonident(const NonidentConfig& cfg, int workers = 1) {
  (void)workers;
  const auto model = synth_nonident(cfg.n, to_vector(cfg.xi_true), cfg.data_seed);
  const Vector init = to_vector(cfg.xi_true);

  NonidentResult result;
  result.metrics["experiment"] = "nonidentifiable";
  result.metrics["n"] = cfg.n;
  result.metrics["xi_true"] = cfg.xi_true;
  result.metrics["seed"] = cfg.seed;
  result.metrics["data_seed"] = cfg.data_seed;
  result.metrics["sgld_step"] = cfg.sgld_step;
  result.metrics["sgld_step_multiplier"] = cfg.sgld_step_multiplier;

  const auto ridge_mean = [&](const Skeleton& skel) {
    // time average of xi_1 + xi_2^2
    return integrate_moment(skel, 0, 1, cfg.burn_in) +
           integrate_moment(skel, 1, 2, cfg.burn_in);
  };

  json methods_json = json::object();
  RunOptions opt;
  opt.record = RunOptions::Record::Switches;
  {
    const auto report = simulate_zz(model, horizon_bound_factory(model), up_state(init),
                                    StopRule::max_epochs(cfg.zz_epochs), {}, cfg.seed, opt);
    json mj;
    mj["mean_ridge"] = ridge_mean(report.skeleton);
    mj["epochs"] = report.epochs;
    mj["proposals"] = report.proposals;
    mj["bound_refreshes"] = report.bound_refreshes;
    methods_json["zz"] = mj;
    result.rows.push_back({"nonidentifiable", "zz", "mean_ridge", cfg.n,
                           static_cast<long long>(cfg.seed), mj["mean_ridge"].get<double>()});
    result.zz_skeleton = report.skeleton;
  }
  {
    const auto ref = find_reference(model, init, 1e-6, 500);
    const auto report = simulate_zz_cv(model, ref, up_state(init),
                                       StopRule::max_epochs(cfg.cv_epochs), cfg.seed, opt);
    json mj;
    mj["mean_ridge"] = ridge_mean(report.skeleton);
    mj["epochs"] = report.epochs;
    mj["proposals"] = report.proposals;
    mj["bound_refreshes"] = report.bound_refreshes;
    mj["reference_converged"] = ref.converged;
    methods_json["zz-cv"] = mj;
    result.rows.push_back({"nonidentifiable", "zz-cv", "mean_ridge", cfg.n,
                           static_cast<long long>(cfg.seed), mj["mean_ridge"].get<double>()});
  }
  const auto sgld_run = [&](double step, const char* name) {
    const auto iters = static_cast<long long>(cfg.sgld_epochs * static_cast<double>(cfg.n) /
                                              static_cast<double>(cfg.sgld_batch));
    const auto run = sgld(model, step, cfg.sgld_batch, iters, init, cfg.seed);
    double mean_ridge = std::numeric_limits<double>::quiet_NaN();
    if (run.chain.rows() > 0) {
      const auto skip = static_cast<Index>(cfg.burn_in * static_cast<double>(run.chain.rows()));
      double acc = 0;
      for (Index k = skip; k < run.chain.rows(); ++k)
        acc += run.chain(k, 0) + run.chain(k, 1) * run.chain(k, 1);
      mean_ridge = acc / static_cast<double>(run.chain.rows() - skip);
    }
    json mj;
    mj["step"] = step;
    mj["diverged"] = run.diverged;
    mj["mean_ridge"] = mean_ridge;
    methods_json[name] = mj;
    result.rows.push_back({"nonidentifiable", name, "mean_ridge", cfg.n,
                           static_cast<long long>(cfg.seed), mean_ridge});
  };
  sgld_run(cfg.sgld_step, "sgld");
  sgld_run(cfg.sgld_step * cfg.sgld_step_multiplier, "sgld_x100");

  result.metrics["methods"] = methods_json;
  return result;
}

// ---------------------------------------------------------------------------
// custom: one model, one method, one run; writes skeleton.csv, samples.csv
// and metrics.json.
// ---------------------------------------------------------------------------

struct ModelBundle {
  std::unique_ptr<TargetModel> model;
  BoundsFactory zz_factory;  // bounds for plain Algorithm-1 runs
  json info;
};

inline ModelBundle build_model(const ParamMap& params) {
  const auto name = params.get("model", "gaussian-mean");
  const auto n = params.get_int("n", 100);
  const auto data_seed = static_cast<std::uint64_t>(params.get_int("data_seed", 1000));
  ModelBundle bundle;
  bundle.info["model"] = name;

  if (name == "gaussian-mean") {
    const double xi0 = params.get_double("xi0", 1.0);
    const double sigma = params.get_double("sigma", 1.0);
    const double rho = params.get_double("rho", 1.0);
    std::unique_ptr<GaussianMeanModel> m;
    if (params.has("dataset")) {
      const Matrix data = read_numeric_csv(params.get("dataset"));
      m = std::make_unique<GaussianMeanModel>(data.col(0), sigma, rho);
    } else {
      m = std::make_unique<GaussianMeanModel>(synth_gaussian(n, xi0, sigma, data_seed, rho));
    }
    const auto* raw = m.get();
    Vector slopes(1);
    slopes[0] = raw->precision();
    bundle.zz_factory = affine_bound_factory(
        [raw](const PhaseState& s) { return raw->full_grad(s.position); }, slopes);
    bundle.info["posterior_mean"] = raw->posterior_mean();
    bundle.info["posterior_variance"] = raw->posterior_variance();
    bundle.model = std::move(m);
  } else if (name == "product-gaussian") {
    const auto d = static_cast<Index>(params.get_int("d", 1));
    Vector sigmas = Vector::Ones(d);
    if (params.has("sigmas")) {
      const auto list = params.get_list("sigmas");
      sigmas.resize(static_cast<Index>(list.size()));
      for (std::size_t i = 0; i < list.size(); ++i)
        sigmas[static_cast<Index>(i)] = std::stod(list[i]);
    }
    auto m = std::make_unique<ProductGaussianModel>(sigmas);
    const auto* raw = m.get();
    Vector slopes(raw->dim());
    for (Index i = 0; i < raw->dim(); ++i) slopes[i] = raw->inv_var(i);
    bundle.zz_factory = affine_bound_factory(
        [raw](const PhaseState& s) { return raw->full_grad(s.position); }, slopes);
    bundle.model = std::move(m);
  } else if (name == "cauchy") {
    auto m = std::make_unique<CauchyModel>();
    bundle.zz_factory = constant_bound_factory(*m);
    bundle.model = std::move(m);
  } else if (name == "logistic") {
    const auto d = static_cast<Index>(params.get_int("d", 2));
    std::unique_ptr<LogisticModel> m;
    if (params.has("dataset")) {
      const Matrix data = read_numeric_csv(params.get("dataset"));
      const Index cols = data.cols() - 1;
      Eigen::VectorXi labels(data.rows());
      for (Index j = 0; j < data.rows(); ++j)
        labels[j] = data(j, cols) > 0.5 ? 1 : 0;
      m = std::make_unique<LogisticModel>(data.leftCols(cols), labels);
    } else {
      Vector xi_true = Vector::Ones(d);
      if (params.has("xi_true")) {
        const auto list = params.get_list("xi_true");
        for (std::size_t i = 0; i < list.size() && i < static_cast<std::size_t>(d); ++i)
          xi_true[static_cast<Index>(i)] = std::stod(list[i]);
      }
      m = std::make_unique<LogisticModel>(synth_logistic(n, d, xi_true, data_seed));
    }
    bundle.zz_factory = constant_bound_factory(*m);  // paper's global-bound variant
    bundle.model = std::move(m);
  } else if (name == "nonident") {
    Vector xi_true = to_vector({-1.0, 0.0});
    if (params.has("xi_true")) {
      const auto list = params.get_list("xi_true");
      for (std::size_t i = 0; i < list.size() && i < 2; ++i)
        xi_true[static_cast<Index>(i)] = std::stod(list[i]);
    }
    std::unique_ptr<NonIdentifiableLogisticModel> m;
    if (params.has("dataset")) {
      const Matrix data = read_numeric_csv(params.get("dataset"));
      Eigen::VectorXi labels(data.rows());
      for (Index j = 0; j < data.rows(); ++j) labels[j] = data(j, 1) > 0.5 ? 1 : 0;
      m = std::make_unique<NonIdentifiableLogisticModel>(data.col(0), labels);
    } else {
      m = std::make_unique<NonIdentifiableLogisticModel>(synth_nonident(n, xi_true, data_seed));
    }
    bundle.zz_factory = horizon_bound_factory(*m);
    bundle.model = std::move(m);
  } else {
    throw ConfigError("unknown model: " + name);
  }
  bundle.info["n"] = bundle.model->n_data();
  bundle.info["d"] = bundle.model->dim();
  return bundle;
}

inline StopRule parse_stop(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("stop must be kind:value, got " + text);
  const auto kind = text.substr(0, colon);
  const double value = std::stod(text.substr(colon + 1));
  if (kind == "time") return StopRule::max_time(value);
  if (kind == "proposals") return StopRule::max_proposals(static_cast<long long>(value));
  if (kind == "epochs") return StopRule::max_epochs(value);
  throw ConfigError("unknown stop rule: " + kind);
}

struct CustomResult {
  json metrics;
  std::vector<CsvRow> rows;
};

inline CustomResult run_custom(const ParamMap& params, const std::filesystem::path& out_dir) {
  auto bundle = build_model(params);
  const auto& model = *bundle.model;
  const auto method = params.get("method", "zz");
  const auto seed = static_cast<std::uint64_t>(params.get_int("seed", 1));
  const auto stop = parse_stop(params.get("stop", "epochs:1000"));
  const auto samples_m = params.get_int("samples", 10000);
  const double burn_in = params.get_double("burn_in", 0.1);
  const double gamma_const = params.get_double("gamma", 0.0);
  const bool write_skeleton = params.get_bool("write_skeleton", true);

  Vector init = Vector::Zero(model.dim());
  if (params.has("init")) {
    const auto list = params.get_list("init");
    if (static_cast<Index>(list.size()) != model.dim())
      throw ConfigError("init must have one entry per dimension");
    for (std::size_t i = 0; i < list.size(); ++i)
      init[static_cast<Index>(i)] = std::stod(list[i]);
  }

  CustomResult result;
  json& metrics = result.metrics;
  metrics["experiment"] = "custom";
  metrics["method"] = method;
  for (auto it = bundle.info.begin(); it != bundle.info.end(); ++it)
    metrics[it.key()] = it.value();
  metrics["seed"] = seed;
  metrics["stop"] = params.get("stop", "epochs:1000");

  const auto gamma = gamma_const > 0
                         ? RefreshRates::constants(Vector::Constant(model.dim(), gamma_const))
                         : RefreshRates::zero();

  const auto emit_trajectory = [&](const RunReport& report) {
    metrics["proposals"] = report.proposals;
    metrics["accepted_switches"] = report.accepted_switches;
    metrics["bound_refreshes"] = report.bound_refreshes;
    metrics["per_datum_evals"] = report.per_datum_evals;
    metrics["epochs"] = report.epochs;

    std::vector<MetricRecord> records;
    for (Index i = 0; i < model.dim(); ++i) {
      const auto series = sample_coordinate(report.skeleton, i, samples_m, burn_in);
      const auto e1 = ess(series);
      MetricRecord mean_rec{"mean[" + std::to_string(i) + "]",
                            integrate_moment(report.skeleton, i, 1, burn_in),
                            e1.defined ? std::sqrt(variance_of(series) / e1.ess) : 0.0,
                            report.epochs, seed};
      std::vector<double> squared(series.size());
      for (std::size_t k = 0; k < series.size(); ++k) squared[k] = series[k] * series[k];
      const auto e2 = ess(squared);
      MetricRecord second_rec{"second_moment[" + std::to_string(i) + "]",
                              integrate_moment(report.skeleton, i, 2, burn_in),
                              e2.defined ? std::sqrt(variance_of(squared) / e2.ess) : 0.0,
                              report.epochs, seed};
      records.push_back(mean_rec);
      records.push_back(second_rec);
      result.rows.push_back({"custom", method, mean_rec.name, model.n_data(),
                             static_cast<long long>(seed), mean_rec.value});
    }
    json records_json = json::array();
    for (const auto& rec : records) {
      json rj;
      rj["name"] = rec.name;
      rj["value"] = rec.value;
      rj["std_error"] = rec.std_error;
      rj["epochs"] = rec.epochs;
      rj["seed"] = rec.seed;
      records_json.push_back(rj);
    }
    metrics["records"] = records_json;

    const auto series0 = sample_coordinate(report.skeleton, 0, samples_m, burn_in);
    const auto e = ess(series0);
    metrics["ess_coord0"] = e.defined ? e.ess : 0.0;
    metrics["esspe_coord0"] = e.defined ? e.ess / report.epochs : 0.0;
    if (write_skeleton) write_skeleton_csv(out_dir / "skeleton.csv", report.skeleton);
    write_samples_csv(out_dir / "samples.csv",
                      sample_trajectory(report.skeleton, samples_m, burn_in));
    metrics["wall_time"] = report.wall_time;
  };

  if (method == "zz") {
    emit_trajectory(simulate_zz(model, bundle.zz_factory, up_state(init), stop, gamma, seed));
  } else if (method == "zz-hessian") {
    emit_trajectory(simulate_zz_hessian(model, up_state(init), stop, seed));
  } else if (method == "zz-ss") {
    emit_trajectory(simulate_zz_ss(model, up_state(init), stop, seed));
  } else if (method == "zz-cv" || method == "zz-socv") {
    ReferencePoint ref;
    if (method == "zz-cv") {
      ref = find_reference(model, init, params.get_double("ref_tol", 1e-8),
                           static_cast<int>(params.get_int("ref_iters", 200)));
    } else {
      const auto* gm = dynamic_cast<const GaussianMeanModel*>(&model);
      if (!gm) throw ConfigError("zz-socv is defined for the gaussian-mean model");
      const Vector sub = gm->data().head(std::max<Index>(1, gm->data().size() / 10));
      const GaussianMeanModel sub_model(sub, gm->sigma(), gm->rho());
      ref = make_reference(model, to_vector({sub_model.posterior_mean()}));
    }
    metrics["reference"] = std::vector<double>(ref.xi_star.data(),
                                               ref.xi_star.data() + ref.xi_star.size());
    metrics["reference_converged"] = ref.converged;
    const PhaseState start = params.has("init") ? up_state(init) : cv_default_init(ref);
    emit_trajectory(simulate_zz_cv(model, ref, start, stop, seed));
  } else if (method == "mala") {
    if (stop.kind != StopRule::Kind::MaxEpochs)
      throw ConfigError("mala supports the epochs stop rule only");
    const auto iters = static_cast<long long>(stop.limit);
    const double step0 = params.get_double("mala_step", 0.5);
    const auto run = mala(model, step0, iters, init, seed);
    metrics["accept_rate"] = run.accept_rate;
    metrics["step_final"] = run.step_final;
    metrics["per_datum_evals"] = run.per_datum_evals;
    metrics["epochs"] = run.epochs;
    json moments = json::array();
    for (Index i = 0; i < model.dim(); ++i) {
      json mi;
      mi["coord"] = i;
      mi["mean"] = run.chain.col(i).mean();
      mi["second_moment"] = run.chain.col(i).array().square().mean();
      moments.push_back(mi);
    }
    metrics["moments"] = moments;
    metrics["wall_time"] = 0.0;
  } else if (method == "sgld") {
    if (stop.kind != StopRule::Kind::MaxEpochs)
      throw ConfigError("sgld supports the epochs stop rule only");
    const auto batch =
        std::max<long long>(1, params.get_int("sgld_batch", model.n_data() / 10));
    const double step = params.get_double("sgld_step", 0.1 / static_cast<double>(model.n_data()));
    const auto iters = static_cast<long long>(stop.limit * static_cast<double>(model.n_data()) /
                                              static_cast<double>(batch));
    const auto run = sgld(model, step, batch, iters, init, seed);
    metrics["diverged"] = run.diverged;
    metrics["per_datum_evals"] = run.per_datum_evals;
    metrics["epochs"] = run.epochs;
    json moments = json::array();
    for (Index i = 0; i < model.dim(); ++i) {
      json mi;
      mi["coord"] = i;
      mi["mean"] = run.chain.rows() > 0 ? run.chain.col(i).mean() : 0.0;
      mi["second_moment"] =
          run.chain.rows() > 0 ? run.chain.col(i).array().square().mean() : 0.0;
      moments.push_back(mi);
    }
    metrics["moments"] = moments;
    metrics["wall_time"] = 0.0;
  } else {
    throw ConfigError("unknown method: " + method);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dispatcher: builds the experiment config from flat parameters, runs it and
// writes metrics.json / metrics.csv (plus per-run files) into out_dir.
// ---------------------------------------------------------------------------

inline json run(const ParamMap& params, const std::filesystem::path& out_dir,
                int workers = 1) {
  std::filesystem::create_directories(out_dir);
  const auto experiment = params.get("experiment", "custom");
  json metrics;
  std::vector<CsvRow> rows;
  double wall = 0;
  const auto t0 = std::chrono::steady_clock::now();

  if (experiment == "gaussian-mse") {
    GaussianMseConfig cfg;
    cfg.n = params.get_int("n", cfg.n);
    cfg.xi0 = params.get_double("xi0", cfg.xi0);
    cfg.sigma = params.get_double("sigma", cfg.sigma);
    cfg.rho = params.get_double("rho", cfg.rho);
    if (params.has("method")) cfg.methods = {params.get("method")};
    if (params.has("methods")) cfg.methods = params.get_list("methods");
    cfg.replicates = static_cast<int>(params.get_int("replicates", cfg.replicates));
    cfg.max_epochs = params.get_double("max_epochs", cfg.max_epochs);
    cfg.seed = static_cast<std::uint64_t>(params.get_int("seed", 1));
    cfg.data_seed = static_cast<std::uint64_t>(params.get_int("data_seed", 1000));
    cfg.sgld_step = params.get_double("sgld_step", cfg.sgld_step);
    cfg.sgld_batch = params.get_int("sgld_batch", cfg.sgld_batch);
    auto result = run_gaussian_mse(cfg, workers);
    metrics = std::move(result.metrics);
    rows = std::move(result.rows);
    if (!result.example_skeleton.empty() && params.get_bool("write_skeleton", true)) {
      write_skeleton_csv(out_dir / "skeleton.csv", result.example_skeleton);
      write_samples_csv(out_dir / "samples.csv",
                        sample_trajectory(result.example_skeleton, 10000, 0.1));
    }
  } else if (experiment == "logistic-scaling") {
    LogisticScalingConfig cfg;
    if (params.has("n_list")) {
      cfg.ns.clear();
      for (const auto n : params.get_int_list("n_list")) cfg.ns.push_back(n);
    }
    cfg.d = static_cast<Index>(params.get_int("d", cfg.d));
    cfg.seeds = static_cast<int>(params.get_int("seeds", cfg.seeds));
    cfg.epochs = params.get_double("epochs", cfg.epochs);
    if (params.has("methods")) cfg.methods = params.get_list("methods");
    if (params.has("xi_true")) {
      cfg.xi_true.clear();
      for (const auto& s : params.get_list("xi_true")) cfg.xi_true.push_back(std::stod(s));
    } else if (cfg.d != 2) {
      cfg.xi_true.assign(static_cast<std::size_t>(cfg.d), 1.0);
    }
    cfg.seed = static_cast<std::uint64_t>(params.get_int("seed", 1));
    cfg.ess_samples = params.get_int("ess_samples", cfg.ess_samples);
    cfg.mala_step = params.get_double("mala_step", cfg.mala_step);
    auto result = run_logistic_scaling(cfg, workers);
    metrics = std::move(result.metrics);
    rows = std::move(result.rows);
  } else if (experiment == "nonidentifiable") {
    NonidentConfig cfg;
    cfg.n = params.get_int("n", cfg.n);
    cfg.seed = static_cast<std::uint64_t>(params.get_int("seed", 1));
    cfg.data_seed = static_cast<std::uint64_t>(params.get_int("data_seed", 4242));
    cfg.zz_epochs = params.get_double("zz_epochs", cfg.zz_epochs);
    cfg.cv_epochs = params.get_double("cv_epochs", cfg.cv_epochs);
    cfg.sgld_step = params.get_double("sgld_step", cfg.sgld_step);
    cfg.sgld_batch = params.get_int("sgld_batch", cfg.sgld_batch);
    cfg.sgld_epochs = params.get_double("sgld_epochs", cfg.sgld_epochs);
    auto result = run_nonident(cfg, workers);
    metrics = std::move(result.metrics);
    rows = std::move(result.rows);
    if (params.get_bool("write_skeleton", false) && !result.zz_skeleton.empty())
      write_skeleton_csv(out_dir / "skeleton.csv", result.zz_skeleton);
  } else if (experiment == "custom") {
    auto result = run_custom(params, out_dir);
    metrics = std::move(result.metrics);
    rows = std::move(result.rows);
  } else {
    throw ConfigError("unknown experiment: " + experiment);
  }

  wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json config_echo = json::object();
  for (const auto& [key, value] : params.values()) config_echo[key] = value;
  metrics["config"] = config_echo;
  json with_time = metrics;
  with_time["wall_time"] = wall;
  atomic_write(out_dir / "metrics.json", with_time.dump(2) + "\n");
  write_metrics_csv(out_dir / "metrics.csv", rows);
  return with_time;
}

}  // namespace zigzag::experiments
