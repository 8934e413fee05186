#include "cavsafe/harness/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "cavsafe/marl/trainer.hpp"

namespace cavsafe::harness {

namespace {

using nlohmann::json;

json layout_json(const marl::Architecture& arch) {
  return {{"agents", arch.agent_count},
          {"actions", arch.action_count},
          {"feature_size", arch.layout.size()},
          {"central_size", arch.central_size()},
          {"actor", arch.actor.sizes()},
          {"critic", arch.critic.sizes()},
          {"worst_q", arch.worst_q.sizes()}};
}

}  // namespace

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json checkpoint_json(const Checkpoint& ckpt, const marl::Architecture& arch) {
  json agents = json::array();
  for (const auto& p : ckpt.agents)
    agents.push_back({{"theta", p.theta},
                      {"phi", p.phi},
                      {"omega", p.omega},
                      {"lambda_w", p.lambda_w},
                      {"kappa_wst", p.kappa_wst},
                      {"kappa_reg", p.kappa_reg}});
  json j = {{"format", "cavsafe-checkpoint"},
            {"version", kCheckpointVersion},
            {"layout", layout_json(arch)},
            {"agents", agents},
            {"scenario", to_json(ckpt.scenario)},
            {"config", to_json(ckpt.config)},
            {"algo", marl::to_string(ckpt.algo)},
            {"shield", shield::to_string(ckpt.shield)},
            {"seed", ckpt.seed}};
  j["checksum"] = fnv1a64_hex(j.dump());
  return j;
}

void save_checkpoint(const Checkpoint& ckpt, const marl::Architecture& arch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_json(ckpt, arch).dump() << '\n';
}

Checkpoint checkpoint_from_json(const json& j_in) {
  json j = j_in;
  if (!j.contains("checksum")) throw ChecksumMismatch("checkpoint has no checksum");
  const std::string stored = j.at("checksum").get<std::string>();
  j.erase("checksum");
  if (fnv1a64_hex(j.dump()) != stored) throw ChecksumMismatch("checkpoint checksum mismatch");
  if (j.value("format", "") != "cavsafe-checkpoint") throw std::runtime_error("not a checkpoint file");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + j.at("version").dump());

  Checkpoint c;
  c.scenario = scenario_from_json(j.at("scenario"));
  c.config = config_from_json(j.at("config"));
  c.algo = marl::algorithm_from_string(j.at("algo").get<std::string>());
  c.shield = shield::mode_from_string(j.at("shield").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& a : j.at("agents")) {
    marl::ParameterSet p;
    p.theta = a.at("theta").get<std::vector<double>>();
    p.phi = a.at("phi").get<std::vector<double>>();
    p.omega = a.at("omega").get<std::vector<double>>();
    p.lambda_w = a.at("lambda_w").get<double>();
    p.kappa_wst = a.at("kappa_wst").get<double>();
    p.kappa_reg = a.at("kappa_reg").get<double>();
    c.agents.push_back(std::move(p));
  }
  const marl::Architecture arch = marl::architecture_for(c.scenario, c.config);
  if (layout_json(arch) != j.at("layout")) throw std::runtime_error("checkpoint layout does not match its config");
  for (const auto& p : c.agents)
    if (p.theta.size() != arch.actor.parameter_count() || p.phi.size() != arch.critic.parameter_count() ||
        p.omega.size() != arch.worst_q.parameter_count())
      throw std::runtime_error("checkpoint parameter arrays do not match the layout");
  if (static_cast<int>(c.agents.size()) != arch.agent_count)
    throw std::runtime_error("checkpoint agent count does not match the scenario");
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ChecksumMismatch(std::string("checkpoint is not readable: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace cavsafe::harness
