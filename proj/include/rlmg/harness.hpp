#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlmg/algo_generative.hpp"
#include "rlmg/algo_online.hpp"
#include "rlmg/game.hpp"

namespace rlmg {

// Bad flags, config files or parameter values: exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical validation (dual check, eval reproduction) failed: exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal representation.
std::string format_double(double x);

// FNV-1a 64 over the raw bytes, hex encoded; identifies game files in the
// manifest.
std::string content_hash_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

// --- experiment orchestration ---------------------------------------------

struct ExperimentConfig {
  std::string mode;  // "gen" | "online"
  std::string game_path;      // file, or empty when generator is set
  nlohmann::json generator;   // make-game spec, optional

  int n_samples = 0;     // N (gen: required; online: 0 means T)
  int iterations = 0;    // K (gen: required; online: 0 means T)
  int rounds = 0;        // T (online)
  double delta = 0.1;
  double ridge = 0.0;    // 0 = per-mode default
  double bonus_scale = 1.0;
  std::string bonus_variant = "proof";  // "proof" | "printed"
  double design_tolerance = 0.05;
  int initial_state = 0;
  std::vector<double> sigma_override;  // empty = keep game sigmas

  std::vector<std::uint64_t> seeds;

  // Sweep axes, crossed; each axis assigns one or more keys per value tuple
  // (compound axes move keys together, e.g. N+K).
  struct SweepAxis {
    std::vector<std::string> keys;
    std::vector<std::vector<double>> values;  // [cell][key]
  };
  std::vector<SweepAxis> sweep;

  std::string out_dir;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct ExperimentOutcome {
  int n_runs = 0;
  std::vector<std::string> files;
};

// Runs the sweep-by-seed grid, writing results.csv, summary.csv,
// manifest.json and per-run artifacts under out_dir. Parallel across runs,
// capped by ROBUSTLMG_THREADS; outputs are independent of scheduling.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

// Median / quartiles with linear interpolation.
struct Quantiles {
  double median = 0.0, q25 = 0.0, q75 = 0.0;
};
Quantiles summarize(std::vector<double> values);

// --- single-shot helpers behind CLI subcommands ---------------------------

// Builds a game from a make-game generator spec:
//   {"kind": "tabular"|"linear", "n_agents", "horizon", "n_states",
//    "n_actions": int|[..], "feature_dim": int|[..] (linear only),
//    "sigma": x|[..], "seed"}
GameInstance make_game(const nlohmann::json& spec);

GameInstance load_game(const std::string& path);

// Gap (or regret series) of a stored mixture file against a game. Accepts a
// single mixture object or {"rounds": [...]}.
nlohmann::json eval_mixture_file(const GameInstance& game, const nlohmann::json& mixture_json,
                                 int initial_state /* -1 = max over states */);

// LP-vs-dual property sweep on random instances; returns the number of
// failures and logs a summary line.
int dual_check(int trials, int max_states, std::uint64_t seed, std::ostream& log);

int thread_cap(int n_runs);

}  // namespace rlmg
