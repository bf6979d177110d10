#pragma once

// Experiment orchestration behind the `droplab` command-line tool.
//
// Every command is driven by one resolved ExperimentConfig. The config is
// written to <out>/config.json before anything else; feeding that file back
// reproduces every output file byte for byte. Output directory and worker
// count are not part of the config: results never depend on them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "droplab/graph.hpp"
#include "droplab/models.hpp"

namespace droplab {

inline constexpr std::string_view kCommands[] = {"gen",        "train",    "sweep",   "robustness", "rewire",
                                                 "oversmooth", "variance", "entropy", "regcheck",   "diversity"};
bool is_command(std::string_view s);

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 0;

  // training commands
  std::string data;
  std::string model = "gcn";
  std::vector<std::string> drops;
  double rate = 0.5;
  std::vector<double> rates;   // sweep grid, regcheck rates
  bool nodewise = false;
  std::string placement = "message";
  std::size_t epochs = 200;
  double lr = 0.005;
  double weight_decay = 5e-4;
  std::size_t hidden = 16;
  std::size_t layers = 2;
  double alpha = 0.1;
  std::size_t k_steps = 10;
  std::size_t seeds = 20;
  std::vector<double> ratios;        // robustness / rewire
  std::vector<std::size_t> depths;   // oversmooth
  std::size_t near_max = 3;
  std::size_t far_min = 8;
  double avg_center = 0.75;  // NaN (null in JSON): mean nodewise bound
  double avg_spread = 0.15;

  // gen
  std::string kind = "sbm";
  std::size_t n = 300;
  std::size_t blocks = 3;
  double p_in = 0.03;
  double p_out = 0.005;
  std::size_t dim = 32;
  double noise = 1.0;
  std::size_t degree = 4;

  // theory commands
  std::size_t trials = 100000;
  std::vector<double> p;
  std::vector<double> senders;
  std::vector<double> deliveries;
  double msg_dim = 16.0;
  double weight = 0.5;
  std::string var_source = "mc";

  /// Defaults of one command (throws on an unknown command).
  static ExperimentConfig defaults(std::string_view command);
  /// Parses an echo; unknown keys are rejected.
  static ExperimentConfig from_json(const std::string& text);
  /// Canonical echo: the command's relevant keys plus the generator name.
  std::string to_json() const;
  /// Throws std::invalid_argument on out-of-range or inconsistent values.
  void validate() const;

  TrainConfig train_config(DropKind drop, double drop_rate, std::uint64_t run_seed) const;
};

/// Root seed of the i-th trial of a training study. Shared by every cell so
/// methods are compared on identical initializations and mask roots.
std::uint64_t trial_seed(std::uint64_t root, std::size_t trial);

/// Per-seed outcome of one training run.
struct TrialResult {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double test_macro_f1 = 0.0;
  double madgap = std::numeric_limits<double>::quiet_NaN();
  double mean_rate = 0.0;  // mean drop rate actually applied
};

/// One cell of a study grid with its per-seed results in seed order.
struct StudyCell {
  std::string method;
  std::string arm;     // diversity: "NW" or "AVG"
  double rate = 0.0;
  double ratio = 0.0;
  std::size_t depth = 0;
  std::vector<TrialResult> trials;

  double mean_test_acc() const;
  double std_test_acc() const;
  double mean_madgap() const;
  double std_madgap() const;
};

// Study runners. `jobs` bounds the worker threads; results are identical for
// every value of `jobs`.
std::vector<StudyCell> run_train_study(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs,
                                       std::vector<RunReport>* reports = nullptr);
std::vector<StudyCell> run_sweep(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs);
std::vector<StudyCell> run_perturbation(const Graph& g, const ExperimentConfig& cfg, bool rewire_edges,
                                        std::size_t jobs);
std::vector<StudyCell> run_oversmooth(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs);
std::vector<StudyCell> run_diversity(const Graph& g, const ExperimentConfig& cfg, std::size_t jobs,
                                     std::ostream* warnings = nullptr);

/// Runs a command end to end, writing config.json and its outputs into
/// `out`. Progress and timing go to `log` only.
void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::size_t jobs,
                    std::ostream& log);

/// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace droplab
