#include "cavsafe/marl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace cavsafe::marl {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("network needs input and output sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    offsets_.push_back(offsets_.back() + out * in + out);
  }
}

std::vector<double> Mlp::initial_parameters(std::mt19937_64& rng, bool zero_output) const {
  std::vector<double> p(parameter_count(), 0.0);
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    if (zero_output && l + 1 == layers) break;
    const int in = sizes_[l], out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in * out); ++i) p[offsets_[l] + i] = u(rng);
  }
  return p;
}

Eigen::MatrixXd Mlp::forward(std::span<const double> params, const Eigen::MatrixXd& x) const {
  Tape tape;
  return forward(params, x, tape);
}

Eigen::MatrixXd Mlp::forward(std::span<const double> params, const Eigen::MatrixXd& x,
                             Tape& tape) const {
  if (params.size() != parameter_count()) throw std::invalid_argument("parameter size mismatch");
  if (x.rows() != input_size()) throw std::invalid_argument("input size mismatch");
  const std::size_t layers = sizes_.size() - 1;
  tape.activations.clear();
  tape.activations.reserve(layers + 1);
  tape.activations.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const ConstMatrixMap w(params.data() + offsets_[l], out, in);
    const Eigen::Map<const Eigen::VectorXd> b(params.data() + offsets_[l] + out * in, out);
    Eigen::MatrixXd z = w * tape.activations.back();
    z.colwise() += b;
    if (l + 1 < layers) z = z.array().tanh().matrix();
    tape.activations.push_back(std::move(z));
  }
  return tape.activations.back();
}

void Mlp::backward(std::span<const double> params, const Tape& tape, const Eigen::MatrixXd& d_out,
                   std::span<double> grad) const {
  if (grad.size() != parameter_count()) throw std::invalid_argument("gradient size mismatch");
  const std::size_t layers = sizes_.size() - 1;
  Eigen::MatrixXd delta = d_out;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const Eigen::MatrixXd& a_in = tape.activations[l];
    MatrixMap gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + out * in, out);
    gw.noalias() += delta * a_in.transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    const ConstMatrixMap w(params.data() + offsets_[l], out, in);
    Eigen::MatrixXd back = w.transpose() * delta;
    delta = back.array() * (1.0 - a_in.array().square());
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::vector<double>& params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace cavsafe::marl
