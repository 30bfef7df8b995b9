// robustlmg: simulator CLI for robust linear Markov games under TV
// uncertainty. Subcommands: make-game, design, gen, online, eval, dual-check.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rlmg/design.hpp"
#include "rlmg/harness.hpp"
#include "rlmg/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

// CLI flags override config-file values, which override defaults.
struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string game_path;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sweeps;
  int n_samples = -1;
  int iterations = -1;
  int rounds = -1;
  double delta = -1.0;
  double ridge = -1.0;
  double bonus_scale = -1.0;
  std::string bonus_variant;
  double sigma = -1.0;
  int initial_state = -1;
};

void add_common(CLI::App* cmd, CommonFlags* f) {
  cmd->add_option("--config", f->config_path, "experiment config JSON");
  cmd->add_option("--out", f->out_dir, "output directory");
  cmd->add_option("--game", f->game_path, "game instance JSON");
  cmd->add_option("--seed", f->seeds, "seed(s); repeatable");
  cmd->add_option("--sweep", f->sweeps, "KEY=v1,v2,... (compound: N+K=250+25,...)");
  cmd->add_option("--N", f->n_samples, "samples per iteration");
  cmd->add_option("--K", f->iterations, "FTRL iterations per step");
  cmd->add_option("--T", f->rounds, "online rounds");
  cmd->add_option("--delta", f->delta, "failure probability");
  cmd->add_option("--lambda", f->ridge, "ridge parameter (>= 1)");
  cmd->add_option("--bonus-scale", f->bonus_scale, "bonus multiplier");
  cmd->add_option("--bonus-variant", f->bonus_variant, "proof | printed");
  cmd->add_option("--sigma", f->sigma, "uncertainty radius override (all agents)");
  cmd->add_option("--s1", f->initial_state, "initial state (online)");
}

rlmg::ExperimentConfig::SweepAxis parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw rlmg::ConfigError("sweep must look like KEY=v1,v2,...");
  rlmg::ExperimentConfig::SweepAxis axis;
  std::stringstream keys(text.substr(0, eq));
  std::string part;
  while (std::getline(keys, part, '+')) axis.keys.push_back(part);
  std::stringstream cells(text.substr(eq + 1));
  while (std::getline(cells, part, ',')) {
    std::vector<double> tuple;
    std::stringstream vals(part);
    std::string v;
    while (std::getline(vals, v, '+')) tuple.push_back(std::stod(v));
    if (tuple.size() != axis.keys.size())
      throw rlmg::ConfigError("sweep tuple arity mismatch in '" + text + "'");
    axis.values.push_back(std::move(tuple));
  }
  if (axis.values.empty()) throw rlmg::ConfigError("empty sweep '" + text + "'");
  return axis;
}

rlmg::ExperimentConfig merge_config(const std::string& mode, const CommonFlags& f) {
  rlmg::ExperimentConfig cfg;
  if (!f.config_path.empty())
    cfg = rlmg::ExperimentConfig::from_json(
        nlohmann::json::parse(rlmg::read_file(f.config_path)));
  cfg.mode = mode;
  if (!f.game_path.empty()) cfg.game_path = f.game_path;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (!f.seeds.empty()) cfg.seeds = f.seeds;
  if (f.n_samples >= 0) cfg.n_samples = f.n_samples;
  if (f.iterations >= 0) cfg.iterations = f.iterations;
  if (f.rounds >= 0) cfg.rounds = f.rounds;
  if (f.delta >= 0.0) cfg.delta = f.delta;
  if (f.ridge >= 0.0) cfg.ridge = f.ridge;
  if (f.bonus_scale >= 0.0) cfg.bonus_scale = f.bonus_scale;
  if (!f.bonus_variant.empty()) cfg.bonus_variant = f.bonus_variant;
  if (f.sigma >= 0.0) cfg.sigma_override = {f.sigma};
  if (f.initial_state >= 0) cfg.initial_state = f.initial_state;
  for (const std::string& s : f.sweeps) cfg.sweep.push_back(parse_sweep(s));
  if (cfg.seeds.empty()) cfg.seeds = {0};
  return cfg;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"robust linear Markov game simulator"};
  app.set_version_flag("--version", rlmg::kVersion);
  app.require_subcommand(1);

  // make-game
  auto* make = app.add_subcommand("make-game", "generate a synthetic game instance");
  std::string mg_kind = "tabular", mg_out;
  int mg_agents = 2, mg_horizon = 2, mg_states = 3, mg_actions = 2, mg_feature_dim = 0;
  double mg_sigma = 0.2;
  std::uint64_t mg_seed = 0;
  make->add_option("--kind", mg_kind, "tabular | linear");
  make->add_option("--agents", mg_agents);
  make->add_option("--horizon", mg_horizon);
  make->add_option("--states", mg_states);
  make->add_option("--actions", mg_actions, "actions per agent");
  make->add_option("--feature-dim", mg_feature_dim, "feature dimension (linear kind)");
  make->add_option("--sigma", mg_sigma);
  make->add_option("--seed", mg_seed);
  make->add_option("--out", mg_out, "output game JSON")->required();

  // design
  auto* design = app.add_subcommand("design", "optimal sampling design for one agent");
  std::string ds_game, ds_out;
  int ds_agent = 0;
  double ds_tol = 0.05;
  design->add_option("--game", ds_game)->required();
  design->add_option("--agent", ds_agent);
  design->add_option("--tolerance", ds_tol);
  design->add_option("--out", ds_out, "output JSON (stdout if omitted)");

  // gen / online
  CommonFlags gen_flags, online_flags;
  auto* gen = app.add_subcommand("gen", "run the generative-model algorithm");
  add_common(gen, &gen_flags);
  auto* online = app.add_subcommand("online", "run the online interactive algorithm");
  add_common(online, &online_flags);

  // eval
  auto* eval = app.add_subcommand("eval", "oracle evaluation of a stored mixture");
  std::string ev_game, ev_mixture, ev_out;
  int ev_s1 = -1;
  eval->add_option("--game", ev_game)->required();
  eval->add_option("--mixture", ev_mixture, "mixture or rounds JSON")->required();
  eval->add_option("--s1", ev_s1,
                   "fixed initial state (mixture default: max over states; rounds default: 0)");
  eval->add_option("--out", ev_out, "output JSON (stdout if omitted)");

  // dual-check
  auto* dual = app.add_subcommand("dual-check", "LP-vs-dual property sweep");
  int dc_trials = 1000, dc_states = 8;
  std::uint64_t dc_seed = 0;
  dual->add_option("--trials", dc_trials);
  dual->add_option("--max-states", dc_states);
  dual->add_option("--seed", dc_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;  // --help/--version exit 0
  }

  if (make->parsed()) {
    nlohmann::json spec = {{"kind", mg_kind},       {"n_agents", mg_agents},
                           {"horizon", mg_horizon}, {"n_states", mg_states},
                           {"n_actions", mg_actions}, {"sigma", mg_sigma},
                           {"seed", mg_seed}};
    if (mg_kind == "linear")
      spec["feature_dim"] = mg_feature_dim > 0 ? mg_feature_dim : mg_states + mg_actions - 1;
    const rlmg::GameInstance game = rlmg::make_game(spec);
    rlmg::write_file(mg_out, game.to_json().dump());
    std::cout << "wrote " << mg_out << "\n";
    return kExitOk;
  }

  if (design->parsed()) {
    const rlmg::GameInstance game = rlmg::load_game(ds_game);
    const rlmg::DesignResult result = rlmg::design_for_agent(game, ds_agent, ds_tol);
    nlohmann::json j;
    j["agent"] = ds_agent;
    j["support"] = nlohmann::json::array();
    for (const auto& pt : result.points) j["support"].push_back({pt.state, pt.action});
    j["rho"] = result.rho;
    j["max_leverage"] = result.max_leverage;
    if (ds_out.empty())
      std::cout << j.dump(2) << "\n";
    else
      rlmg::write_file(ds_out, j.dump(2));
    return kExitOk;
  }

  if (gen->parsed() || online->parsed()) {
    const rlmg::ExperimentConfig cfg =
        merge_config(gen->parsed() ? "gen" : "online", gen->parsed() ? gen_flags : online_flags);
    const rlmg::ExperimentOutcome outcome = rlmg::run_experiment(cfg);
    std::cout << outcome.n_runs << " runs -> " << cfg.out_dir << "\n";
    return kExitOk;
  }

  if (eval->parsed()) {
    const rlmg::GameInstance game = rlmg::load_game(ev_game);
    const nlohmann::json mixture = nlohmann::json::parse(rlmg::read_file(ev_mixture));
    const nlohmann::json result = rlmg::eval_mixture_file(game, mixture, ev_s1);
    if (ev_out.empty())
      std::cout << result.dump(2) << "\n";
    else
      rlmg::write_file(ev_out, result.dump(2));
    return kExitOk;
  }

  if (dual->parsed()) {
    const int failures = rlmg::dual_check(dc_trials, dc_states, dc_seed, std::cout);
    return failures == 0 ? kExitOk : kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const rlmg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const rlmg::NumericalError& e) {
    std::cerr << "numerical validation failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::logic_error& e) {
    std::cerr << "numerical validation failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
