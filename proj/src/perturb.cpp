#include "cavsafe/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cavsafe::perturb {

namespace {

constexpr double kRandHalfWidth = 2.0;
constexpr double kBaseMin = 9.0;
constexpr double kBaseMax = 11.0;
constexpr double kBandHalfWidth = 0.5;

std::mt19937_64 keyed_stream(std::uint64_t seed, int a, int b, int c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  return std::mt19937_64(seq);
}

}  // namespace

std::string to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::None: return "none";
    case PerturbationKind::Rand: return "rand";
    case PerturbationKind::OverTime: return "time";
    case PerturbationKind::TargetVehicles: return "veh";
  }
  return "none";
}

PerturbationKind kind_from_string(const std::string& name) {
  if (name == "none") return PerturbationKind::None;
  if (name == "rand") return PerturbationKind::Rand;
  if (name == "time") return PerturbationKind::OverTime;
  if (name == "veh") return PerturbationKind::TargetVehicles;
  throw std::invalid_argument("unknown perturbation kind: " + name);
}

double ErrorPair::norm() const { return std::hypot(e_l, e_v); }

ErrorPair sample_rand(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kRandHalfWidth, kRandHalfWidth);
  const double e_l = u(rng);
  return {e_l, e_l / 2.0};
}

double sample_base_error(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> magnitude(kBaseMin, kBaseMax);
  std::bernoulli_distribution coin(0.5);
  const double m = magnitude(rng);
  return coin(rng) ? m : -m;
}

PerturbationSchedule PerturbationSchedule::none() { return {}; }

PerturbationSchedule PerturbationSchedule::random(std::uint64_t stream_seed,
                                                  double epsilon_bound) {
  PerturbationSchedule s;
  s.kind_ = PerturbationKind::Rand;
  s.stream_seed_ = stream_seed;
  s.epsilon_bound_ = epsilon_bound;
  return s;
}

PerturbationSchedule PerturbationSchedule::over_time(std::uint64_t stream_seed, double base_error,
                                                     StepWindow window, double epsilon_bound) {
  PerturbationSchedule s;
  s.kind_ = PerturbationKind::OverTime;
  s.stream_seed_ = stream_seed;
  s.base_error_ = base_error;
  s.window_ = window;
  s.epsilon_bound_ = epsilon_bound;
  return s;
}

PerturbationSchedule PerturbationSchedule::target_vehicles(std::vector<int> targets,
                                                           std::vector<double> target_errors,
                                                           double base_error,
                                                           double epsilon_bound) {
  if (targets.empty()) throw std::invalid_argument("target set must be non-empty");
  if (targets.size() != target_errors.size())
    throw std::invalid_argument("one persistent error per target is required");
  PerturbationSchedule s;
  s.kind_ = PerturbationKind::TargetVehicles;
  s.targets_ = std::move(targets);
  s.target_errors_ = std::move(target_errors);
  s.base_error_ = base_error;
  s.epsilon_bound_ = epsilon_bound;
  return s;
}

ErrorPair PerturbationSchedule::error(int step, int observer, int target) const {
  if (observer == target) return {};
  switch (kind_) {
    case PerturbationKind::None:
      return {};
    case PerturbationKind::Rand: {
      auto rng = keyed_stream(stream_seed_, step, observer, target);
      return sample_rand(rng);
    }
    case PerturbationKind::OverTime: {
      if (!window_.contains(step)) return {};
      // Shared by every observer of `target` at this step.
      auto rng = keyed_stream(stream_seed_, step, -1, target);
      std::uniform_real_distribution<double> band(base_error_ - kBandHalfWidth,
                                                  base_error_ + kBandHalfWidth);
      const double e = band(rng);
      return {e, e / 2.0};
    }
    case PerturbationKind::TargetVehicles: {
      const auto it = std::find(targets_.begin(), targets_.end(), target);
      if (it == targets_.end()) return {};
      const double e = target_errors_[static_cast<std::size_t>(it - targets_.begin())];
      return {e, e / 2.0};
    }
  }
  return {};
}

bool PerturbationSchedule::violates_bound(const ErrorPair& e) const {
  return std::isfinite(epsilon_bound_) && e.norm() > epsilon_bound_;
}

PerturbationSchedule make_ptb_over_time(std::mt19937_64& rng, StepWindow window,
                                        double epsilon_bound) {
  const double base = sample_base_error(rng);
  const std::uint64_t stream = rng();
  return PerturbationSchedule::over_time(stream, base, window, epsilon_bound);
}

PerturbationSchedule make_ptb_target_vehicles(std::mt19937_64& rng, std::vector<int> targets,
                                              double epsilon_bound) {
  const double base = sample_base_error(rng);
  std::uniform_real_distribution<double> band(base - kBandHalfWidth, base + kBandHalfWidth);
  std::vector<double> errors;
  errors.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) errors.push_back(band(rng));
  return PerturbationSchedule::target_vehicles(std::move(targets), std::move(errors), base,
                                               epsilon_bound);
}

}  // namespace cavsafe::perturb
