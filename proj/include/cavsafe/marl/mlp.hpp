#pragma once

#include <Eigen/Core>
#include <random>
#include <span>
#include <vector>

namespace cavsafe::marl {

/// Fully connected network, tanh hidden layers, linear output. Parameters live in
/// a caller-owned flat vector (per layer: W row-major by output then b), so the
/// same architecture serves every agent and checkpoints stay flat arrays.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t parameter_count() const { return offsets_.back(); }

  /// Uniform Glorot initialization; `zero_output` zeroes the last layer.
  std::vector<double> initial_parameters(std::mt19937_64& rng, bool zero_output = false) const;

  /// Activations of every layer for a batch (one sample per column).
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;  // [0] = input, back() = output
  };

  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd& x,
                          Tape& tape) const;

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(std::span<const double> params, const Tape& tape, const Eigen::MatrixXd& d_out,
                std::span<double> grad) const;

 private:
  using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_{0};  // start of each layer's block, plus total
};

/// First-order adaptive-moment optimizer over a flat parameter vector (descends).
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::vector<double>& params, std::span<const double> grad);
  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

 private:
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace cavsafe::marl
