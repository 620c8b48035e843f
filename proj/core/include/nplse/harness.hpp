#pragma once

#include "nplse/bounds.hpp"
#include "nplse/config.hpp"
#include "nplse/empirics.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace nplse {

/// Command-line level overrides applied on top of the config document.
struct RunOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> preset;
  /// fit: trajectory CSV (simulated from the config when absent);
  /// eval: model artifact (required).
  std::optional<std::string> input;
  std::optional<int> T;
};

/// Named configurations: reduced | full (kernel experiment), lipschitz, glm.
ExperimentConfig preset_config(const std::string& name);

/// Preset (if any), then the config document, then flag overrides.
ExperimentConfig effective_config(const RunOptions& options);

/// The serialized config split into lines, for CSV '#' headers, without the
/// thread count.
std::vector<std::string> provenance_lines(const ExperimentConfig& config, const std::string& subcommand);

/// Lipschitz constant shared by every member of the class, when known.
double class_lipschitz(const HypothesisClass& cls);

/// Contraction constant of the truth: the config override, else the truth's
/// own constant, else a pairwise estimate.
double truth_contraction(const ExperimentConfig& config, const SystemSpec& spec);

/// Rate-theorem value for the class's entropy model; NaN when no closed form applies.
double theorem_rate(const EntropyModel& entropy, double sigma_w, double T, int d_y, double sigma_T_sq,
                    const BoundConstants& constants);

/// T-grid x systems x replicates experiment: fit, counterfactual error, bounds.
ExperimentReport rate_sweep(const ExperimentConfig& config, const std::string& suite);

void write_trajectory(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& comments);
Trajectory read_trajectory(std::istream& is);

std::vector<BoundRow> bound_rows(const ExperimentConfig& config);

struct VerifyRow {
  std::string suite;
  std::string config;
  double statistic = 0.0;
  double bound = 0.0;
  double se = 0.0;
  bool pass = false;
  /// Rows that illustrate a corrected constant; they do not affect the exit code.
  bool informational = false;
};

struct VerifySizes {
  int basic_instances = 1000;
  int basic_T = 64;
  int mgf_configs = 50;
  int mgf_reps = 10000;
  int mgf_T = 32;
  int offset_reps = 5000;
  int offset_T = 64;
  int decoupling_reps = 200;
  int decoupling_fresh = 200;
  int sigma_configs = 10;
  int sigma_reps = 200;
};

std::vector<VerifyRow> verify_basic_inequality(const VerifySizes& sizes, std::uint64_t seed, int threads);
std::vector<VerifyRow> verify_mgf(const VerifySizes& sizes, std::uint64_t seed, int threads);
std::vector<VerifyRow> verify_offset_supremum(const VerifySizes& sizes, std::uint64_t seed, int threads);
/// Decoupling rows followed by the master-bound dominance rows for the same configs.
std::vector<VerifyRow> verify_decoupling(const VerifySizes& sizes, std::uint64_t seed, int threads);
std::vector<VerifyRow> verify_contraction_proxy(const VerifySizes& sizes, std::uint64_t seed, int threads);

std::vector<VerifyRow> verify_all(const VerifySizes& sizes, std::uint64_t seed, int threads);
void write_verify_table(std::ostream& os, const std::vector<VerifyRow>& rows, const std::vector<std::string>& comments);

/// Runs one subcommand; returns the process exit code. Progress and the
/// one-line failure reason go to `err`, artifact paths to `out`.
int run(const std::string& subcommand, const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace nplse
