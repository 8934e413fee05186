#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsafe/harness/config.hpp"
#include "cavsafe/harness/scenario.hpp"
#include "cavsafe/marl/agent.hpp"
#include "cavsafe/shield.hpp"

namespace cavsafe::harness {

class ChecksumMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

/// Everything needed to rebuild the trained policies and evaluate them.
///
/// File layout (JSON object, keys sorted):
///   format   "cavsafe-checkpoint"
///   version  integer
///   layout   {agents, actions, feature_size, central_size, actor, critic, worst_q}
///            where each network entry lists its layer widths
///   agents   per agent {theta, phi, omega: flat arrays in network order,
///            lambda_w, kappa_wst, kappa_reg}
///   scenario, config, algo, shield, seed
///   checksum FNV-1a 64 (hex) of the compact dump of every other key
struct Checkpoint {
  ScenarioSpec scenario;
  HarnessConfig config;
  marl::Algorithm algo = marl::Algorithm::SrMappo;
  shield::ShieldMode shield = shield::ShieldMode::Robust;
  std::uint64_t seed = 0;
  std::vector<marl::ParameterSet> agents;
};

std::string fnv1a64_hex(const std::string& bytes);

nlohmann::json checkpoint_json(const Checkpoint& ckpt, const marl::Architecture& arch);
void save_checkpoint(const Checkpoint& ckpt, const marl::Architecture& arch, const std::string& path);
/// Throws ChecksumMismatch when the stored checksum disagrees with the content,
/// std::runtime_error for unsupported versions or layouts.
Checkpoint load_checkpoint(const std::string& path);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

}  // namespace cavsafe::harness
