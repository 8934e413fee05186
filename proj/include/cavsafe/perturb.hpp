#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cavsafe::perturb {

enum class PerturbationKind { None, Rand, OverTime, TargetVehicles };

std::string to_string(PerturbationKind kind);
PerturbationKind kind_from_string(const std::string& name);  // none|rand|time|veh

/// Observation error along the observed vehicle's travel axis:
/// e_l shifts l_x (meters), e_v shifts v_x (m/s).
struct ErrorPair {
  double e_l = 0.0;
  double e_v = 0.0;

  double norm() const;
  bool is_zero() const { return e_l == 0.0 && e_v == 0.0; }
};

/// Half-open step interval [begin, end).
struct StepWindow {
  int begin = 0;
  int end = 0;

  bool contains(int step) const { return step >= begin && step < end; }
};

/// One draw of the random test-time error: e_l ~ U(-2, 2), e_v = e_l / 2.
ErrorPair sample_rand(std::mt19937_64& rng);

/// |e^0| ~ U(9, 11) with an independent fair-coin sign.
double sample_base_error(std::mt19937_64& rng);

/// Immutable description of which observations are corrupted and by how much.
/// Errors are a pure function of (step, observer, target) so the stream does
/// not depend on the order in which observations are assembled.
class PerturbationSchedule {
 public:
  PerturbationSchedule() = default;

  static PerturbationSchedule none();
  static PerturbationSchedule random(std::uint64_t stream_seed, double epsilon_bound);
  static PerturbationSchedule over_time(std::uint64_t stream_seed, double base_error,
                                        StepWindow window, double epsilon_bound);
  static PerturbationSchedule target_vehicles(std::vector<int> targets,
                                              std::vector<double> target_errors,
                                              double base_error, double epsilon_bound);

  /// Error applied to `observer`'s view of `target` at `step`. Self-observation
  /// (observer == target) is never perturbed.
  ErrorPair error(int step, int observer, int target) const;

  /// True when the pair exceeds the declared 2-norm bound.
  bool violates_bound(const ErrorPair& e) const;

  PerturbationKind kind() const { return kind_; }
  double epsilon_bound() const { return epsilon_bound_; }
  double base_error() const { return base_error_; }
  const StepWindow& window() const { return window_; }
  const std::vector<int>& targets() const { return targets_; }
  const std::vector<double>& target_errors() const { return target_errors_; }

 private:
  PerturbationKind kind_ = PerturbationKind::None;
  std::uint64_t stream_seed_ = 0;
  double epsilon_bound_ = 0.0;
  double base_error_ = 0.0;
  StepWindow window_{};
  std::vector<int> targets_;
  std::vector<double> target_errors_;
};

PerturbationSchedule make_ptb_over_time(std::mt19937_64& rng, StepWindow window,
                                        double epsilon_bound);
PerturbationSchedule make_ptb_target_vehicles(std::mt19937_64& rng, std::vector<int> targets,
                                              double epsilon_bound);

}  // namespace cavsafe::perturb
