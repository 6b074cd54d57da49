#pragma once

// Command dispatch behind the gmr3 executable. Every command writes its
// artifacts to the output directory; each CSV gets a `<name>.meta.json`
// sidecar recording the tool version, seed, generator and config digest.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmr3/mm_solver.hpp"

namespace gmr3 {

struct RunConfig {
  std::string command;  ///< fit, predict, select, cv, bootstrap, simulate, compare
  std::string data;
  std::string schema;
  std::string model;  ///< predict input
  int rank = 2;
  std::vector<int> ranks{1, 2, 3, 4, 5};
  int folds = 10;
  int repeats = 10;
  int replicates = 1000;
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-6;
  int max_iterations = 1000;
  std::string output_dir = ".";
  bool neutral_impute_unseen = false;
  bool count_sigma2 = true;
  StepOrder step_order = StepOrder::Standard;
  int threads = 0;  ///< 0 keeps the default
  // simulate
  int reps = 250;
  Index sim_n = 500;
  std::vector<std::string> scenarios{"mixed-numeric-binary", "ordinal-predictors", "r1", "r2"};

  nlohmann::json to_json() const;
  /// Digest of every setting that affects numeric output.
  std::string digest() const;
};

/// "1..5", "1,2,4" or "3".
std::vector<int> parse_rank_list(const std::string& text);

StepOrder parse_step_order(const std::string& text);

/// Runs a command. Returns 0 on success, 2 for configuration, schema or data
/// errors, 3 for convergence failures (artifacts still written and flagged)
/// and 1 otherwise. Failures also write `error.json` and print the same
/// record to `err`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace gmr3
