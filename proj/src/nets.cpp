#include "dpsynth/nets.hpp"

#include <cmath>

namespace dpsynth {

namespace {

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
      z = z.cwiseMax(0.0);
      return;
    case Activation::leaky_relu:
      z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      return;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      return;
  }
}

// Derivative expressed through the activated output.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& out, Activation act) {
  switch (act) {
    case Activation::identity:
      return Eigen::MatrixXd::Ones(out.rows(), out.cols());
    case Activation::relu:
      return out.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::leaky_relu:
      return out.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    case Activation::tanh:
      return (1.0 - out.array().square()).matrix();
  }
  return {};
}

}  // namespace

double DenseNet::Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

void DenseNet::Gradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

void DenseNet::Gradients::add(const Gradients& other, double factor) {
  for (size_t l = 0; l < weights.size(); ++l) {
    weights[l] += factor * other.weights[l];
    biases[l] += factor * other.biases[l];
  }
}

DenseNet::DenseNet(const std::vector<size_t>& layer_sizes,
                   const std::vector<Activation>& activations, Rng& rng)
    : activations_(activations) {
  if (layer_sizes.size() < 2) throw InputError("network needs at least one layer");
  if (activations.size() != layer_sizes.size() - 1) {
    throw InputError("need one activation per layer transition");
  }
  input_width_ = layer_sizes.front();
  for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const size_t in = layer_sizes[l];
    const size_t out = layer_sizes[l + 1];
    const double r = std::sqrt(6.0 / static_cast<double>(in + out));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = (2.0 * rng.next_double() - 1.0) * r;
    }
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x) const {
  if (static_cast<size_t>(x.cols()) != input_width_) {
    throw InputError("input width does not match the first layer");
  }
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = a * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    apply_activation(z, activations_[l]);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x, Cache& cache) const {
  if (static_cast<size_t>(x.cols()) != input_width_) {
    throw InputError("input width does not match the first layer");
  }
  cache.inputs.clear();
  cache.outputs.clear();
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < weights_.size(); ++l) {
    cache.inputs.push_back(a);
    Eigen::MatrixXd z = a * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    apply_activation(z, activations_[l]);
    cache.outputs.push_back(z);
    a = std::move(z);
  }
  return a;
}

std::vector<Eigen::MatrixXd> DenseNet::compute_deltas(const Cache& cache,
                                                      const Eigen::MatrixXd& d_output) const {
  if (cache.outputs.size() != weights_.size()) {
    throw InputError("backward needs the cache of a matching forward pass");
  }
  std::vector<Eigen::MatrixXd> deltas(weights_.size());
  Eigen::MatrixXd upstream = d_output;
  for (size_t l = weights_.size(); l-- > 0;) {
    deltas[l] = upstream.cwiseProduct(activation_grad(cache.outputs[l], activations_[l]));
    if (l > 0) upstream = deltas[l] * weights_[l];
  }
  return deltas;
}

DenseNet::Gradients DenseNet::backward(const Cache& cache, const Eigen::MatrixXd& d_output,
                                       Eigen::MatrixXd* d_input) const {
  const auto deltas = compute_deltas(cache, d_output);
  Gradients g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  for (size_t l = 0; l < weights_.size(); ++l) {
    g.weights[l].noalias() = deltas[l].transpose() * cache.inputs[l];
    g.biases[l] = deltas[l].colwise().sum();
  }
  if (d_input) *d_input = deltas[0] * weights_[0];
  return g;
}

std::vector<DenseNet::Gradients> DenseNet::per_example_backward(
    const Cache& cache, const Eigen::MatrixXd& d_output) const {
  const auto deltas = compute_deltas(cache, d_output);
  const size_t batch = d_output.rows();
  std::vector<Gradients> out(batch);
  for (size_t i = 0; i < batch; ++i) {
    Gradients& g = out[i];
    g.weights.resize(weights_.size());
    g.biases.resize(weights_.size());
    for (size_t l = 0; l < weights_.size(); ++l) {
      g.weights[l].noalias() =
          deltas[l].row(i).transpose() * cache.inputs[l].row(i);
      g.biases[l] = deltas[l].row(i).transpose();
    }
  }
  return out;
}

DenseNet::Gradients DenseNet::clipped_sum_backward(const Cache& cache,
                                                   const Eigen::MatrixXd& d_output,
                                                   double clip_norm,
                                                   double* max_clipped_norm) const {
  if (!(clip_norm > 0.0)) throw InputError("clip norm must be positive");
  auto deltas = compute_deltas(cache, d_output);
  const Eigen::Index batch = d_output.rows();

  // ||outer(u, v)||_F^2 = ||u||^2 ||v||^2, so each example's full gradient
  // norm is available without materializing anything.
  Eigen::VectorXd norms_sq = Eigen::VectorXd::Zero(batch);
  for (size_t l = 0; l < weights_.size(); ++l) {
    const Eigen::VectorXd delta_sq = deltas[l].rowwise().squaredNorm();
    const Eigen::VectorXd input_sq = cache.inputs[l].rowwise().squaredNorm();
    norms_sq += delta_sq.cwiseProduct(input_sq) + delta_sq;
  }

  double max_seen = 0.0;
  Eigen::VectorXd scales(batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double norm = std::sqrt(norms_sq[i]);
    const double s = norm > clip_norm ? clip_norm / norm : 1.0;
    scales[i] = s;
    max_seen = std::max(max_seen, s * norm);
  }
  if (max_clipped_norm) *max_clipped_norm = std::max(*max_clipped_norm, max_seen);

  Gradients g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  for (size_t l = 0; l < weights_.size(); ++l) {
    deltas[l].array().colwise() *= scales.array();
    g.weights[l].noalias() = deltas[l].transpose() * cache.inputs[l];
    g.biases[l] = deltas[l].colwise().sum();
  }
  return g;
}

DenseNet::Gradients DenseNet::zero_gradients() const {
  Gradients g;
  for (size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return g;
}

void DenseNet::apply_sgd(const Gradients& grads, double learning_rate) {
  for (size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= learning_rate * grads.weights[l];
    biases_[l] -= learning_rate * grads.biases[l];
  }
}

void DenseNet::clamp_weights(double bound) {
  for (auto& w : weights_) w = w.cwiseMax(-bound).cwiseMin(bound);
  for (auto& b : biases_) b = b.cwiseMax(-bound).cwiseMin(bound);
}

void per_example_clip(std::vector<DenseNet::Gradients>& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw InputError("clip norm must be positive");
  for (auto& g : grads) {
    const double norm = std::sqrt(g.squared_norm());
    if (norm > clip_norm) g.scale(clip_norm / norm);
  }
}

}  // namespace dpsynth
