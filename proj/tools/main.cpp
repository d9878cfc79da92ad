#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "app/app.hpp"

namespace {

void add_shared(CLI::App& app, mombayes::app::RunConfig& cfg, std::vector<std::string>& model_args,
                std::string& sampler, CLI::Option*& rho_opt) {
  app.add_option("--model", cfg.model, "gaussian-location | laplace-location | poisson-rate | linear-regression");
  app.add_option("--prior", cfg.prior, "uniform | gaussian");
  app.add_option("--model-arg", model_args, "key=value (sigma, scale, prior-mean, prior-sd, lower, upper, theta-prime, theta, n, ...)");
  rho_opt = app.add_option("--rho", cfg.rho, "absolute | huber | smoothed-huber");
  app.add_option("--k", cfg.k, "number of blocks");
  app.add_option("--partition", cfg.partition, "contiguous | shuffled");
  app.add_option("--delta-c", cfg.delta_c, "scale constant c (default: calibrated)");
  app.add_option("--delta-exponent", cfg.delta_exponent, "Delta_n = c n^exponent");
  app.add_option("--seed", cfg.seed);
  app.add_option("--sampler", sampler, "rwm | hmc");
  app.add_option("--chains", cfg.sampler.chains);
  app.add_option("--draws", cfg.sampler.draws);
  app.add_option("--warmup", cfg.sampler.warmup);
  app.add_option("--target-accept", cfg.sampler.target_accept);
  app.add_option("--leapfrog-steps", cfg.sampler.leapfrog_steps);
  app.add_option("--threads", cfg.sampler.threads);
  app.add_option("--restarts", cfg.restarts);
  app.add_option("--outliers", cfg.outliers, "number of observations to replace");
  app.add_option("--outlier-value", cfg.outlier_value, "outlier location");
  app.add_option("--outlier-sd", cfg.outlier_sd, "outlier spread (0: point mass)");
  app.add_option("--data", cfg.data, "input CSV");
  app.add_option("--response", cfg.response, "response column (default: first)");
  app.add_option("--features", cfg.features, "feature columns")->delimiter(',');
  app.add_flag("!--no-standardize", cfg.standardize, "keep regression columns on their raw scale");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--alpha", cfg.alpha, "credible level 1 - alpha");
  app.add_option("--replications", cfg.replications);
}

}  // namespace

int main(int argc, char** argv) {
  mombayes::app::RunConfig cfg;
  std::vector<std::string> model_args;
  std::string sampler = "rwm";
  CLI::Option* rho_opt = nullptr;

  CLI::App app{"Median-of-means robust posterior inference"};
  app.set_config("--config", "", "key = value file; flags win on conflict");
  app.require_subcommand(1);
  app.fallthrough();
  add_shared(app, cfg, model_args, sampler, rho_opt);

  auto* fit = app.add_subcommand("fit", "MAP, sampling, summary and histograms");
  auto* smp = app.add_subcommand("sample", "sampling and draws only");
  auto* sim = app.add_subcommand("simulate", "write a simulated data.csv");
  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  exp->add_option("name", cfg.experiment, "example1 | example2 | wine | deviation | normality")
      ->required()
      ->check(CLI::IsMember({"example1", "example2", "wine", "deviation", "normality"}));

  try {
    app.parse(argc, argv);
    for (const auto& kv : model_args) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--model-arg", "expected key=value, got '" + kv + "'");
      try {
        cfg.model_args[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw CLI::ValidationError("--model-arg", "non-numeric value in '" + kv + "'");
      }
    }
    if (fit->parsed()) cfg.command = "fit";
    if (smp->parsed()) cfg.command = "sample";
    if (sim->parsed()) cfg.command = "simulate";
    if (exp->parsed()) cfg.command = "experiment";
    if ((cfg.command == "fit" || cfg.command == "sample") && cfg.data.empty())
      throw CLI::RequiredError("--data");
    if (cfg.command == "experiment" && cfg.experiment == "wine" && cfg.data.empty())
      throw CLI::RequiredError("--data");
    cfg.rho_given = rho_opt->count() > 0;
    cfg.sampler.algorithm = mombayes::parse_sampler(sampler);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const mombayes::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  }
  return mombayes::app::run(cfg);
}
