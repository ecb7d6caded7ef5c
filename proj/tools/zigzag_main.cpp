// Command-line experiment runner: builds models, runs samplers and
// baselines, writes skeletons, samples and metrics.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "zigzag/experiments.hpp"
#include "zigzag/io.hpp"
#include "zigzag/models.hpp"
#include "zigzag/zigzag.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_override, int workers) {
  zigzag::ParamMap params;
  if (!config_path.empty()) params = zigzag::ParamMap::from_file(config_path);
  for (const auto& kv : overrides) params.apply_override(kv);
  std::filesystem::path out = out_override.empty() ? params.get("out", "out") : out_override;
  try {
    zigzag::experiments::run(params, out, workers);
    std::printf("wrote %s\n", (out / "metrics.json").string().c_str());
    return 0;
  } catch (const zigzag::BoundViolation& e) {
    std::fprintf(stderr, "bound violation: %s\n", e.what());
    std::fprintf(stderr, "  state:");
    for (zigzag::Index i = 0; i < e.state().position.size(); ++i)
      std::fprintf(stderr, " xi_%lld=%.17g theta_%lld=%.0f", static_cast<long long>(i + 1),
                   e.state().position[i], static_cast<long long>(i + 1),
                   e.state().velocity[i]);
    std::fprintf(stderr, "\n");
    return 2;
  }
}

int cmd_validate(const std::string& skeleton_path) {
  const auto skel = zigzag::read_skeleton_csv(skeleton_path);
  const auto check = zigzag::validate_skeleton(skel);
  if (check.ok) {
    std::printf("ok: %zu points, %lld dims, total time %.17g\n", skel.size(),
                static_cast<long long>(skel.dim()), skel.total_time());
    return 0;
  }
  std::fprintf(stderr, "invalid skeleton: %s\n", check.message.c_str());
  return 1;
}

int cmd_synth(const std::string& model, long long n, std::uint64_t seed,
              const std::string& out, long long d, double xi0, double sigma, double rho,
              const std::vector<double>& xi_true) {
  namespace zz = zigzag;
  if (model == "gaussian-mean") {
    const auto m = zz::synth_gaussian(n, xi0, sigma, seed, rho);
    zz::write_dataset_csv(out, m.data());
  } else if (model == "logistic") {
    zz::Vector truth = zz::Vector::Ones(d);
    for (std::size_t i = 0; i < xi_true.size() && i < static_cast<std::size_t>(d); ++i)
      truth[static_cast<zz::Index>(i)] = xi_true[i];
    const auto m = zz::synth_logistic(n, static_cast<zz::Index>(d), truth, seed);
    const auto labels = m.labels();
    zz::write_dataset_csv(out, m.covariates(), &labels);
  } else if (model == "nonident") {
    zz::Vector truth(2);
    truth << -1.0, 0.0;
    for (std::size_t i = 0; i < xi_true.size() && i < 2; ++i)
      truth[static_cast<zz::Index>(i)] = xi_true[i];
    const auto m = zz::synth_nonident(n, truth, seed);
    const auto labels = m.labels();
    zz::write_dataset_csv(out, m.covariates(), &labels);
  } else {
    std::fprintf(stderr, "unknown model for synth: %s\n", model.c_str());
    return 1;
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zigzag: exact piecewise-deterministic sampling experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string config_path, out_override;
  std::vector<std::string> overrides;
  int workers = 1;
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--set", overrides, "override config entries (key=value)");
  run->add_option("--workers", workers, "worker threads for independent cells");
  run->add_option("--out", out_override, "output directory (overrides config 'out')");

  auto* validate = app.add_subcommand("validate", "validate a skeleton CSV");
  std::string skeleton_path;
  validate->add_option("--skeleton", skeleton_path, "skeleton.csv to check")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset CSV");
  std::string model = "gaussian-mean", synth_out = "dataset.csv";
  long long n = 100, d = 2;
  std::uint64_t seed = 1;
  double xi0 = 1.0, sigma = 1.0, rho = 1.0;
  std::vector<double> xi_true;
  synth->add_option("--model", model, "gaussian-mean | logistic | nonident");
  synth->add_option("--n", n, "number of observations");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", synth_out, "output CSV path");
  synth->add_option("--d", d, "dimension (logistic)");
  synth->add_option("--xi0", xi0, "true mean (gaussian-mean)");
  synth->add_option("--sigma", sigma, "likelihood sd (gaussian-mean)");
  synth->add_option("--rho", rho, "prior precision root (gaussian-mean)");
  synth->add_option("--xi-true", xi_true, "true parameter (logistic / nonident)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, overrides, out_override, workers);
    if (validate->parsed()) return cmd_validate(skeleton_path);
    if (synth->parsed()) return cmd_synth(model, n, seed, synth_out, d, xi0, sigma, rho, xi_true);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
