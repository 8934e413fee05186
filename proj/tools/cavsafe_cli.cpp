#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "cavsafe/harness/checkpoint.hpp"
#include "cavsafe/harness/config.hpp"
#include "cavsafe/harness/episode.hpp"
#include "cavsafe/harness/evaluate.hpp"
#include "cavsafe/harness/scenario.hpp"
#include "cavsafe/marl/trainer.hpp"
#include "cavsafe/qp.hpp"

using namespace cavsafe;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

json qp_result_json(const qp::QpProblem& p, const qp::QpResult& r) {
  json cons = json::array();
  for (const auto& c : p.constraints) cons.push_back({c.a[0], c.a[1], c.b});
  json j = {{"u0", {p.u0[0], p.u0[1]}},
            {"constraints", cons},
            {"bounds", {{p.bounds[0].lo, p.bounds[0].hi}, {p.bounds[1].lo, p.bounds[1].hi}}}};
  if (const auto* f = std::get_if<qp::Feasible>(&r)) {
    j["feasible"] = true;
    j["u"] = {f->u[0], f->u[1]};
    j["objective"] = f->objective;
    j["active"] = f->active_ids;
    j["max_violation"] = qp::max_violation(p, f->u);
  } else {
    j["feasible"] = false;
  }
  return j;
}

qp::QpProblem qp_from_json(const json& j) {
  qp::QpProblem p;
  p.u0 = {j.at("u0").at(0).get<double>(), j.at("u0").at(1).get<double>()};
  int id = 0;
  for (const auto& c : j.value("constraints", json::array())) {
    qp::LinearConstraint lc;
    lc.a = {c.at(0).get<double>(), c.at(1).get<double>()};
    lc.b = c.at(2).get<double>();
    lc.id = id++;
    p.constraints.push_back(lc);
  }
  if (j.contains("bounds"))
    for (int k = 0; k < 2; ++k)
      p.bounds[k] = {j.at("bounds").at(k).at(0).get<double>(), j.at("bounds").at(k).at(1).get<double>()};
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shielded multi-agent driving: training, evaluation and replay"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train agents and write a checkpoint");
  std::string scenario = "highway", algo = "srmappo", shield_mode = "robust", config_path, ckpt_out, metrics_out;
  std::uint64_t seed = 0;
  int episodes = -1;
  bool quick = false;
  train->add_option("--scenario", scenario, "highway, intersection, or a scenario JSON file");
  train->add_option("--algo", algo, "srmappo or mappo")->check(CLI::IsMember({"srmappo", "mappo"}));
  train->add_option("--shield", shield_mode, "robust, plain or off")->check(CLI::IsMember({"robust", "plain", "off"}));
  train->add_option("--seed", seed, "random seed");
  train->add_option("--config", config_path, "JSON configuration file");
  train->add_option("--episodes", episodes, "override the number of training episodes");
  train->add_flag("--quick", quick, "short protocol (config quick_train_episodes)");
  train->add_option("--checkpoint", ckpt_out, "output checkpoint path");
  train->add_option("--metrics", metrics_out, "metrics output (JSON lines); default stdout");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate checkpoints under test perturbations");
  std::vector<std::string> ckpts;
  std::string ptb = "none", table_csv, scatter_csv, report_out, log_dir;
  int eval_episodes = -1;
  std::uint64_t eval_seed = 0;
  bool eval_quick = false;
  eval->add_option("--checkpoint", ckpts, "checkpoint file(s)")->required();
  eval->add_option("--ptb", ptb, "comma-separated list of none, rand, time, veh");
  eval->add_option("--episodes", eval_episodes, "episodes per cell (default from config)");
  eval->add_flag("--quick", eval_quick, "short protocol (config quick_test_episodes)");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--table-csv", table_csv, "write the summary table as CSV");
  eval->add_option("--scatter", scatter_csv, "write per-episode returns as CSV");
  eval->add_option("--report", report_out, "write reports as JSON lines; default stdout");
  eval->add_option("--log-dir", log_dir, "write every episode log into this directory");

  // replay
  auto* rep = app.add_subcommand("replay", "re-integrate an episode log and check it");
  std::string log_path;
  double tolerance = 1e-9;
  rep->add_option("--log", log_path, "episode log (JSON lines)")->required();
  rep->add_option("--tolerance", tolerance, "maximum allowed state deviation");

  // run one episode and write its log
  auto* run = app.add_subcommand("run", "run one episode with a checkpoint or a fixed action and log it");
  std::string run_ckpt, run_scenario = "highway", run_mode = "test", run_shield = "robust", run_ptb = "none",
              run_log, run_config;
  int run_action = 0;
  std::uint64_t run_seed = 0;
  run->add_option("--checkpoint", run_ckpt, "checkpoint driving the agents");
  run->add_option("--action", run_action, "fixed action index when no checkpoint is given");
  run->add_option("--scenario", run_scenario, "scenario when no checkpoint is given");
  run->add_option("--config", run_config, "JSON configuration file");
  run->add_option("--mode", run_mode)->check(CLI::IsMember({"train", "test"}));
  run->add_option("--shield", run_shield)->check(CLI::IsMember({"robust", "plain", "off"}));
  run->add_option("--ptb", run_ptb)->check(CLI::IsMember({"none", "rand", "time", "veh"}));
  run->add_option("--seed", run_seed);
  run->add_option("--log", run_log, "output log path (JSON lines)")->required();

  // qp debug
  auto* qpc = app.add_subcommand("qp", "solve a 2-D CBF-QP and dump the result");
  std::string qp_file;
  int qp_random = 0;
  std::uint64_t qp_seed = 0;
  qpc->add_option("--problem", qp_file, "JSON problem {u0, constraints: [[a0, a1, b]], bounds}");
  qpc->add_option("--random", qp_random, "solve this many random problems instead");
  qpc->add_option("--seed", qp_seed);

  // config
  auto* cfgc = app.add_subcommand("config", "print the effective configuration");
  std::string cfg_in;
  cfgc->add_option("--config", cfg_in, "JSON configuration file to overlay on the defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      marl::TrainSetup setup;
      setup.scenario = harness::scenario_by_name(scenario);
      setup.config = config_path.empty() ? harness::default_config() : harness::load_config(config_path);
      setup.algo = marl::algorithm_from_string(algo);
      setup.shield = shield::mode_from_string(shield_mode);
      setup.seed = seed;
      setup.episodes = episodes >= 0 ? episodes
                                     : (quick ? setup.config.quick_train_episodes : setup.config.train_episodes);
      std::ofstream metrics_file;
      if (!metrics_out.empty()) {
        metrics_file.open(metrics_out, std::ios::binary);
        if (!metrics_file) throw std::runtime_error("cannot write " + metrics_out);
      }
      std::ostream& metrics = metrics_out.empty() ? std::cout : metrics_file;
      const marl::TrainResult result =
          marl::train(setup, [&](const marl::EpisodeMetrics& m) { metrics << m.to_json().dump() << '\n'; });
      if (ckpt_out.empty())
        ckpt_out = setup.scenario.name + "-" + algo + "-" + shield_mode + "-" + std::to_string(seed) + ".ckpt.json";
      harness::Checkpoint ckpt{setup.scenario, setup.config, setup.algo, setup.shield, setup.seed, result.params};
      harness::save_checkpoint(ckpt, result.arch, ckpt_out);
      std::cerr << "checkpoint written to " << ckpt_out << '\n';
      return 0;
    }

    if (*eval) {
      std::vector<harness::EvalReport> reports;
      std::ofstream report_file;
      if (!report_out.empty()) report_file.open(report_out, std::ios::binary);
      std::ostream& rep_stream = report_out.empty() ? std::cout : report_file;
      for (const auto& path : ckpts) {
        const harness::Checkpoint ckpt = harness::load_checkpoint(path);
        const int n = eval_episodes >= 0
                          ? eval_episodes
                          : (eval_quick ? ckpt.config.quick_test_episodes : ckpt.config.test_episodes);
        for (const auto& name : split(ptb, ',')) {
          const auto kind = perturb::kind_from_string(name);
          int episode_index = 0;
          std::function<void(const harness::EpisodeLog&)> sink;
          if (!log_dir.empty())
            sink = [&](const harness::EpisodeLog& log) {
              std::ofstream out(log_dir + "/" + ckpt.scenario.name + "-" + name + "-" +
                                    std::to_string(episode_index++) + ".jsonl",
                                std::ios::binary);
              harness::write_log(log, out);
            };
          harness::EvalReport r = harness::evaluate_checkpoint(ckpt, kind, n, eval_seed, sink);
          rep_stream << r.to_json().dump() << '\n';
          reports.push_back(std::move(r));
        }
      }
      std::cerr << harness::format_table_text(reports);
      if (!table_csv.empty()) write_text(table_csv, harness::format_table_csv(reports));
      if (!scatter_csv.empty()) write_text(scatter_csv, harness::format_scatter_csv(reports));
      return 0;
    }

    if (*rep) {
      std::ifstream in(log_path);
      if (!in) throw std::runtime_error("cannot open " + log_path);
      const harness::EpisodeLog log = harness::read_log(in);
      const harness::ReplayReport r = harness::replay(log);
      std::cout << json{{"steps", r.steps}, {"max_state_error", r.max_state_error},
                        {"ok", r.max_state_error <= tolerance}}
                       .dump()
                << '\n';
      return r.max_state_error <= tolerance ? 0 : 2;
    }

    if (*run) {
      harness::EpisodeLog log;
      std::mt19937_64 rng(run_seed);
      const std::uint64_t episode_seed = rng(), schedule_seed = rng(), policy_seed = rng();
      const auto mode = run_mode == "train" ? harness::ScenarioMode::Train : harness::ScenarioMode::Test;
      if (!run_ckpt.empty()) {
        const harness::Checkpoint ckpt = harness::load_checkpoint(run_ckpt);
        const marl::Architecture arch = marl::architecture_for(ckpt.scenario, ckpt.config);
        harness::EpisodeSettings settings = marl::episode_settings(ckpt.config, ckpt.shield);
        std::mt19937_64 srng(schedule_seed);
        settings.schedule = harness::make_schedule(perturb::kind_from_string(run_ptb), ckpt.config.perturbation,
                                                   ckpt.scenario, srng);
        marl::MarlPolicy policy(arch, ckpt.agents, marl::MarlPolicy::Mode::Greedy, 0.0, 1.0,
                                ckpt.config.comm_range, policy_seed);
        log = harness::run_episode(ckpt.scenario, mode, policy, settings, episode_seed);
      } else {
        const harness::ScenarioSpec spec = harness::scenario_by_name(run_scenario);
        const harness::HarnessConfig cfg =
            run_config.empty() ? harness::default_config() : harness::load_config(run_config);
        harness::EpisodeSettings settings = marl::episode_settings(cfg, shield::mode_from_string(run_shield));
        std::mt19937_64 srng(schedule_seed);
        settings.schedule =
            harness::make_schedule(perturb::kind_from_string(run_ptb), cfg.perturbation, spec, srng);
        harness::FixedActionPolicy policy(run_action);
        log = harness::run_episode(spec, mode, policy, settings, episode_seed);
      }
      std::ofstream out(run_log, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + run_log);
      harness::write_log(log, out);
      std::cerr << "mean_return " << log.summary.mean_return << " collisions " << log.summary.collisions
                << " emergency_stops " << log.summary.emergency_stops << '\n';
      return 0;
    }

    if (*qpc) {
      if (!qp_file.empty()) {
        std::ifstream in(qp_file);
        if (!in) throw std::runtime_error("cannot open " + qp_file);
        const qp::QpProblem p = qp_from_json(json::parse(in));
        std::cout << qp_result_json(p, qp::solve(p)).dump(2) << '\n';
        return 0;
      }
      std::mt19937_64 rng(qp_seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int i = 0; i < qp_random; ++i) {
        qp::QpProblem p;
        p.u0 = {u(rng), u(rng)};
        const int m = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < m; ++k) p.constraints.push_back({{u(rng), u(rng)}, u(rng) * 0.5, k});
        p.bounds[0] = {-1.0, 1.0};
        p.bounds[1] = {-1.0, 1.0};
        std::cout << qp_result_json(p, qp::solve(p)).dump() << '\n';
      }
      return 0;
    }

    if (*cfgc) {
      const harness::HarnessConfig cfg = cfg_in.empty() ? harness::default_config() : harness::load_config(cfg_in);
      std::cout << harness::to_json(cfg).dump(2) << '\n';
      return 0;
    }
  } catch (const harness::ChecksumMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
