#include "nplse/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Least squares estimation of nonlinear dynamics from a single trajectory"};
  app.require_subcommand(1);

  nplse::RunOptions o;
  std::string config, out, preset, input;
  std::uint64_t seed = 0;
  int threads = 0, T = 0;

  const std::vector<std::pair<std::string, std::string>> subcommands{
      {"simulate", "write a trajectory CSV"},
      {"fit", "fit the least squares estimator and write the model artifact"},
      {"eval", "counterfactual error of a stored model"},
      {"bounds", "evaluate the bound formulas for the config"},
      {"rate-sweep", "T-grid x replicates experiment with fitted log-log slope"},
      {"verify", "run the inequality property suites"},
      {"reproduce-d2", "kernel ridge experiment on random RKHS systems"},
  };
  for (const auto& [name, help] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "YAML config document")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--preset", preset, "reduced | full | lipschitz | glm");
    sub->add_option("--input", input, "trajectory CSV (fit) or model artifact (eval)");
    sub->add_option("-T,--horizon", T, "trajectory length for simulate/fit/eval")->check(CLI::PositiveNumber);
  }

  CLI11_PARSE(app, argc, argv);
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) o.config_path = config;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--threads")) o.threads = threads;
  if (sub->count("--out")) o.out_dir = out;
  if (sub->count("--preset")) o.preset = preset;
  if (sub->count("--input")) o.input = input;
  if (sub->count("--horizon")) o.T = T;
  return nplse::run(sub->get_name(), o, std::cout, std::cerr);
}
