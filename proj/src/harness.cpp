#include "rlmg/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rlmg/robust_ops.hpp"
#include "rlmg/tv_reference.hpp"
#include "rlmg/version.hpp"

namespace rlmg {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string content_hash_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << contents;
}

int thread_cap(int n_runs) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (cap < 1) cap = 1;
  if (const char* env = std::getenv("ROBUSTLMG_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) cap = requested;
  }
  return std::min(cap, std::max(n_runs, 1));
}

Quantiles summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  return {at(0.5), at(0.25), at(0.75)};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.mode = j.value("mode", "");
    if (j.contains("game")) {
      const auto& g = j.at("game");
      if (g.is_string()) {
        c.game_path = g.get<std::string>();
      } else {
        if (g.contains("path")) c.game_path = g.at("path").get<std::string>();
        if (g.contains("generator")) c.generator = g.at("generator");
      }
    }
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    c.n_samples = params.value("N", 0);
    c.iterations = params.value("K", 0);
    c.rounds = params.value("T", 0);
    c.delta = params.value("delta", 0.1);
    c.ridge = params.value("lambda", 0.0);
    c.bonus_scale = params.value("bonus_scale", 1.0);
    c.bonus_variant = params.value("bonus_variant", "proof");
    c.design_tolerance = params.value("design_tolerance", 0.05);
    c.initial_state = params.value("s1", 0);
    if (params.contains("sigma")) {
      if (params.at("sigma").is_array())
        c.sigma_override = params.at("sigma").get<std::vector<double>>();
      else
        c.sigma_override = {params.at("sigma").get<double>()};
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("sweep")) {
      for (const auto& [key, vals] : j.at("sweep").items()) {
        SweepAxis axis;
        std::stringstream keys(key);
        std::string part;
        while (std::getline(keys, part, '+')) axis.keys.push_back(part);
        for (const auto& v : vals) {
          if (v.is_array())
            axis.values.push_back(v.get<std::vector<double>>());
          else
            axis.values.push_back({v.get<double>()});
        }
        c.sweep.push_back(std::move(axis));
      }
    }
    c.out_dir = j.value("out", "");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  nlohmann::json game;
  if (!game_path.empty()) game["path"] = game_path;
  if (!generator.is_null()) game["generator"] = generator;
  j["game"] = game;
  nlohmann::json params;
  params["N"] = n_samples;
  params["K"] = iterations;
  params["T"] = rounds;
  params["delta"] = delta;
  params["lambda"] = ridge;
  params["bonus_scale"] = bonus_scale;
  params["bonus_variant"] = bonus_variant;
  params["design_tolerance"] = design_tolerance;
  params["s1"] = initial_state;
  if (!sigma_override.empty()) params["sigma"] = sigma_override;
  j["params"] = params;
  j["seeds"] = seeds;
  nlohmann::json sw = nlohmann::json::object();
  for (const auto& axis : sweep) {
    std::string key;
    for (std::size_t i = 0; i < axis.keys.size(); ++i)
      key += (i ? "+" : "") + axis.keys[i];
    sw[key] = axis.values;
  }
  j["sweep"] = sw;
  j["out"] = out_dir;
  return j;
}

void ExperimentConfig::validate() const {
  if (mode != "gen" && mode != "online")
    throw ConfigError("experiment mode must be 'gen' or 'online'");
  if (game_path.empty() && generator.is_null())
    throw ConfigError("a game path or generator spec is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (out_dir.empty()) throw ConfigError("an output directory is required");
  if (mode == "gen" && (n_samples < 1 || iterations < 1))
    throw ConfigError("gen mode requires N >= 1 and K >= 1");
  if (mode == "online" && rounds < 1) throw ConfigError("online mode requires T >= 1");
  if (bonus_variant != "proof" && bonus_variant != "printed")
    throw ConfigError("bonus_variant must be 'proof' or 'printed'");
}

GameInstance make_game(const nlohmann::json& spec) {
  try {
    const std::string kind = spec.value("kind", "tabular");
    GameDims dims;
    dims.n_agents = spec.at("n_agents").get<int>();
    dims.horizon = spec.at("horizon").get<int>();
    dims.n_states = spec.at("n_states").get<int>();
    const auto& na = spec.at("n_actions");
    if (na.is_array())
      dims.n_actions = na.get<std::vector<int>>();
    else
      dims.n_actions.assign(dims.n_agents, na.get<int>());
    std::vector<double> sigma;
    const auto& sg = spec.at("sigma");
    if (sg.is_array())
      sigma = sg.get<std::vector<double>>();
    else
      sigma.assign(dims.n_agents, sg.get<double>());
    const std::uint64_t seed = spec.value("seed", 0ULL);

    if (kind == "tabular") {
      dims.feature_dim.resize(dims.n_agents);
      for (int i = 0; i < dims.n_agents; ++i)
        dims.feature_dim[i] = dims.n_states * dims.n_actions[i];
      return build_random_tabular(dims, std::move(sigma), seed);
    }
    if (kind == "linear") {
      const auto& fd = spec.at("feature_dim");
      if (fd.is_array())
        dims.feature_dim = fd.get<std::vector<int>>();
      else
        dims.feature_dim.assign(dims.n_agents, fd.get<int>());
      return build_random_linear(dims, std::move(sigma), seed);
    }
    throw ConfigError("make_game: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("make_game spec error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("make_game: ") + e.what());
  }
}

GameInstance load_game(const std::string& path) {
  try {
    return GameInstance::from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("game file parse error: " + std::string(e.what()));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("game file invalid: " + std::string(e.what()));
  }
}

namespace {

struct Cell {
  int index = 0;
  std::vector<std::pair<std::string, double>> assignments;
};

std::vector<Cell> expand_sweep(const std::vector<ExperimentConfig::SweepAxis>& sweep) {
  std::vector<Cell> cells = {Cell{}};
  for (const auto& axis : sweep) {
    std::vector<Cell> next;
    for (const Cell& base : cells)
      for (const auto& tuple : axis.values) {
        if (tuple.size() != axis.keys.size())
          throw ConfigError("sweep tuple arity does not match its keys");
        Cell c = base;
        for (std::size_t k = 0; k < axis.keys.size(); ++k)
          c.assignments.emplace_back(axis.keys[k], tuple[k]);
        next.push_back(std::move(c));
      }
    cells = std::move(next);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].index = static_cast<int>(i);
  return cells;
}

void apply_assignment(ExperimentConfig& cfg, const std::string& key, double value) {
  if (key == "N")
    cfg.n_samples = static_cast<int>(std::lround(value));
  else if (key == "K")
    cfg.iterations = static_cast<int>(std::lround(value));
  else if (key == "T")
    cfg.rounds = static_cast<int>(std::lround(value));
  else if (key == "delta")
    cfg.delta = value;
  else if (key == "lambda")
    cfg.ridge = value;
  else if (key == "bonus_scale")
    cfg.bonus_scale = value;
  else if (key == "sigma")
    cfg.sigma_override.assign(1, value);
  else
    throw ConfigError("unknown sweep key '" + key + "'");
}

GameInstance resolve_game(const ExperimentConfig& cfg, std::string* hash_out) {
  if (!cfg.game_path.empty()) {
    const std::string bytes = read_file(cfg.game_path);
    *hash_out = content_hash_hex(bytes);
    try {
      return GameInstance::from_json(nlohmann::json::parse(bytes));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("game file parse error: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("game file invalid: " + std::string(e.what()));
    }
  }
  *hash_out = content_hash_hex(cfg.generator.dump());
  return make_game(cfg.generator);
}

std::vector<double> resolved_sigma(const GameInstance& game,
                                   const std::vector<double>& override_values) {
  if (override_values.empty()) return game.sigmas();
  if (override_values.size() == 1)
    return std::vector<double>(game.dims().n_agents, override_values.front());
  if (static_cast<int>(override_values.size()) != game.dims().n_agents)
    throw ConfigError("sigma override must be scalar or one value per agent");
  return override_values;
}

template <typename Fn>
void parallel_runs(int n_runs, Fn&& fn) {
  const int workers = thread_cap(n_runs);
  if (workers <= 1) {
    for (int r = 0; r < n_runs; ++r) fn(r);
    return;
  }
  std::atomic<int> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int r = cursor.fetch_add(1);
        if (r >= n_runs) return;
        try {
          fn(r);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string cell_params_csv(const Cell& cell) {
  std::string out;
  for (const auto& [key, value] : cell.assignments) out += "," + format_double(value);
  return out;
}

std::string cell_params_header(const std::vector<Cell>& cells) {
  std::string out;
  if (!cells.empty())
    for (const auto& [key, value] : cells.front().assignments) out += "," + key;
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& base_config) {
  base_config.validate();
  std::string game_hash;
  const GameInstance loaded = resolve_game(base_config, &game_hash);
  const GameInstance game = loaded.with_sigma(resolved_sigma(loaded, base_config.sigma_override));
  const int n_agents = game.dims().n_agents;

  std::filesystem::create_directories(base_config.out_dir);
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(base_config.out_dir) / name).string();
  };

  const std::vector<Cell> cells = expand_sweep(base_config.sweep);
  const int n_runs = static_cast<int>(cells.size() * base_config.seeds.size());

  struct RunOutput {
    std::string results_row;
    std::vector<std::string> round_rows;
    double metric = 0.0;
    int cell = 0;
  };
  std::vector<RunOutput> outputs(n_runs);

  parallel_runs(n_runs, [&](int run) {
    const Cell& cell = cells[run / base_config.seeds.size()];
    const std::uint64_t seed = base_config.seeds[run % base_config.seeds.size()];
    ExperimentConfig cfg = base_config;
    for (const auto& [key, value] : cell.assignments) apply_assignment(cfg, key, value);
    // Cell assignments may rewrite sigma; resolve against the loaded game.
    const GameInstance run_game = loaded.with_sigma(resolved_sigma(loaded, cfg.sigma_override));
    RunOutput& out = outputs[run];
    out.cell = cell.index;
    const std::string tag =
        "c" + std::to_string(cell.index) + "_s" + std::to_string(seed);

    if (base_config.mode == "gen") {
      GenerativeConfig gc;
      gc.samples_per_iteration = cfg.n_samples;
      gc.iterations = cfg.iterations;
      gc.delta = cfg.delta;
      gc.ridge = cfg.ridge > 0.0 ? cfg.ridge : 1.0;
      gc.seed = seed;
      gc.bonus_scale = cfg.bonus_scale;
      gc.design_tolerance = cfg.design_tolerance;
      const GenerativeResult result = run_generative(run_game, gc);
      const CceGap gap = cce_gap(run_game, result.mixture);
      out.metric = gap.max_gap;

      std::string row = std::to_string(cell.index) + "," + std::to_string(seed) + "," +
                        std::to_string(gc.samples_per_iteration) + "," +
                        std::to_string(gc.iterations) + "," + format_double(gc.delta) + "," +
                        format_double(gc.ridge) + "," + format_double(gc.bonus_scale) + "," +
                        std::to_string(result.diagnostics.total_queries) + "," +
                        format_double(gap.max_gap);
      for (int i = 0; i < n_agents; ++i) row += "," + format_double(gap.per_agent[i]);
      out.results_row = row + cell_params_csv(cell);

      write_file(out_path("mixture_" + tag + ".json"), result.mixture.to_json().dump());
      std::string diag = "# schema=1\nh,k,i,s,v_hat,beta,q_min,q_max\n";
      for (const auto& r : result.diagnostics.rows)
        diag += std::to_string(r.h) + "," + std::to_string(r.k) + "," + std::to_string(r.agent) +
                "," + std::to_string(r.state) + "," + format_double(r.v_hat) + "," +
                format_double(r.beta) + "," + format_double(r.q_min) + "," +
                format_double(r.q_max) + "\n";
      write_file(out_path("diag_" + tag + ".csv"), diag);
    } else {
      OnlineConfig oc;
      oc.rounds = cfg.rounds;
      oc.samples = cfg.n_samples;
      oc.iterations = cfg.iterations;
      oc.delta = cfg.delta;
      oc.ridge = cfg.ridge;
      oc.initial_state = cfg.initial_state;
      oc.seed = seed;
      oc.bonus_scale = cfg.bonus_scale;
      oc.bonus_variant = cfg.bonus_variant == "printed" ? BonusVariant::kPrinted
                                                        : BonusVariant::kProofConsistent;
      const OnlineResult result = run_online(run_game, oc);
      const RegretSeries series =
          regret_eval(run_game, result.round_mixtures, oc.initial_state);
      const CceGap hat_gap = mixture_of_rounds_gap(series);
      const double regret_total = series.regret.back();
      out.metric = regret_total / oc.rounds;

      std::string row = std::to_string(cell.index) + "," + std::to_string(seed) + "," +
                        std::to_string(oc.rounds) + "," +
                        std::to_string(oc.effective_samples()) + "," +
                        std::to_string(oc.effective_iterations()) + "," +
                        format_double(cfg.delta) + "," + format_double(result.ridge_used) + "," +
                        format_double(cfg.bonus_scale) + "," + cfg.bonus_variant + "," +
                        std::to_string(oc.initial_state) + "," + format_double(regret_total) +
                        "," + format_double(regret_total / oc.rounds) + "," +
                        format_double(hat_gap.max_gap);
      out.results_row = row + cell_params_csv(cell);

      for (int t = 0; t < oc.rounds; ++t) {
        const auto& diag = result.rounds[t];
        for (int i = 0; i < n_agents; ++i)
          out.round_rows.push_back(
              std::to_string(cell.index) + "," + std::to_string(seed) + "," +
              std::to_string(t) + "," + std::to_string(i) + "," +
              format_double(series.star[t][i]) + "," + format_double(series.own[t][i]) + "," +
              format_double(diag.v_bar[i].slices[0][oc.initial_state]) + "," +
              format_double(diag.v_under[i].slices[0][oc.initial_state]) + "," +
              format_double(series.regret[t]));
      }
      nlohmann::json rounds_json;
      rounds_json["rounds"] = nlohmann::json::array();
      for (const auto& m : result.round_mixtures) rounds_json["rounds"].push_back(m.to_json());
      write_file(out_path("rounds_" + tag + ".json"), rounds_json.dump());
    }
  });

  ExperimentOutcome outcome;
  outcome.n_runs = n_runs;

  std::string results = "# schema=1\n";
  if (base_config.mode == "gen")
    results += "cell,seed,N,K,delta,lambda,bonus_scale,queries,gap_max";
  else
    results +=
        "cell,seed,T,N,K,delta,lambda,bonus_scale,bonus_variant,s1,regret,regret_avg,mixture_gap";
  if (base_config.mode == "gen")
    for (int i = 0; i < n_agents; ++i) results += ",gap_agent_" + std::to_string(i);
  results += cell_params_header(cells) + "\n";
  for (const RunOutput& o : outputs) results += o.results_row + "\n";
  write_file(out_path("results.csv"), results);
  outcome.files.push_back(out_path("results.csv"));

  if (base_config.mode == "online") {
    std::string rounds = "# schema=1\ncell,seed,t,i,v_star,v_pi,v_bar,v_under,regret_cum\n";
    for (const RunOutput& o : outputs)
      for (const std::string& r : o.round_rows) rounds += r + "\n";
    write_file(out_path("rounds.csv"), rounds);
    outcome.files.push_back(out_path("rounds.csv"));
  }

  std::string summary = "# schema=1\ncell" + cell_params_header(cells) +
                        ",runs,metric,median,q25,q75\n";
  const std::string metric_name = base_config.mode == "gen" ? "gap_max" : "regret_avg";
  for (const Cell& cell : cells) {
    std::vector<double> metrics;
    for (const RunOutput& o : outputs)
      if (o.cell == cell.index) metrics.push_back(o.metric);
    const Quantiles q = summarize(metrics);
    summary += std::to_string(cell.index) + cell_params_csv(cell) + "," +
               std::to_string(metrics.size()) + "," + metric_name + "," +
               format_double(q.median) + "," + format_double(q.q25) + "," +
               format_double(q.q75) + "\n";
  }
  write_file(out_path("summary.csv"), summary);
  outcome.files.push_back(out_path("summary.csv"));

  nlohmann::json manifest;
  manifest["version"] = kVersion;
  manifest["game_hash"] = game_hash;
  manifest["config"] = base_config.to_json();
  write_file(out_path("manifest.json"), manifest.dump(2));
  outcome.files.push_back(out_path("manifest.json"));
  return outcome;
}

nlohmann::json eval_mixture_file(const GameInstance& game, const nlohmann::json& mixture_json,
                                 int initial_state) {
  nlohmann::json out;
  if (mixture_json.contains("rounds")) {
    std::vector<PolicyMixture> rounds;
    for (const auto& m : mixture_json.at("rounds")) rounds.push_back(PolicyMixture::from_json(m));
    const int s1 = initial_state >= 0 ? initial_state : 0;
    const RegretSeries series = regret_eval(game, rounds, s1);
    const CceGap gap = mixture_of_rounds_gap(series);
    out["mode"] = "rounds";
    out["s1"] = s1;
    out["regret"] = series.regret;
    out["mixture_gap"] = gap.max_gap;
    out["mixture_gap_per_agent"] = gap.per_agent;
    return out;
  }
  const PolicyMixture mixture = PolicyMixture::from_json(mixture_json);
  const CceGap gap =
      initial_state >= 0 ? cce_gap_at(game, mixture, initial_state) : cce_gap(game, mixture);
  out["mode"] = "mixture";
  out["gap_max"] = gap.max_gap;
  out["gap_per_agent"] = gap.per_agent;
  return out;
}

int dual_check(int trials, int max_states, std::uint64_t seed, std::ostream& log) {
  if (trials < 1 || max_states < 1) throw ConfigError("dual_check: bad trial parameters");
  Rng rng = Rng(seed).substream({0xd0a1u});
  int failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 1 + rng.next_index(max_states);
    std::vector<double> p(n), v(n);
    double total = 0.0;
    for (double& x : p) {
      x = -std::log(1.0 - rng.next_double());
      total += x;
    }
    for (double& x : p) x /= total;
    const double h_range = 1.0 + rng.next_index(8);
    for (double& x : v) x = h_range * rng.next_double();
    const double sigma = rng.next_double();

    const double dual = tv_dual_inf(p, v, sigma);
    const TvBallSolution ref = tv_ball_minimum(p, v, sigma);
    worst = std::max(worst, std::abs(dual - ref.value));
    if (std::abs(dual - ref.value) > 1e-8) ++failures;

    const std::vector<double> kernel = tv_worst_case_kernel(p, v, sigma);
    double achieved = 0.0, tv = 0.0, mass = 0.0;
    for (int s = 0; s < n; ++s) {
      achieved += kernel[s] * v[s];
      tv += std::abs(kernel[s] - p[s]);
      mass += kernel[s];
    }
    if (std::abs(achieved - ref.value) > 1e-9 || tv / 2.0 > sigma + 1e-12 ||
        std::abs(mass - 1.0) > 1e-12)
      ++failures;
  }
  log << "dual-check: " << trials << " trials, worst dual gap " << format_double(worst)
      << ", failures " << failures << "\n";
  return failures;
}

}  // namespace rlmg
