#ifndef DPSYNTH_NETS_HPP
#define DPSYNTH_NETS_HPP

#include <Eigen/Dense>
#include <vector>

#include "dpsynth/privacy.hpp"
#include "dpsynth/rng.hpp"

namespace dpsynth {

enum class Activation { identity, relu, leaky_relu, tanh };

constexpr double kLeakySlope = 0.2;

// Fully connected network with explicit reverse-mode gradients. Batches are
// row-major: one example per row.
class DenseNet {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;   // per layer, the incoming activation
    std::vector<Eigen::MatrixXd> outputs;  // per layer, the activated output
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    double squared_norm() const;
    void scale(double s);
    void add(const Gradients& other, double factor = 1.0);
  };

  // layer_sizes = {in, h1, ..., out}; one activation per layer transition.
  DenseNet(const std::vector<size_t>& layer_sizes,
           const std::vector<Activation>& activations, Rng& rng);

  size_t input_width() const { return input_width_; }
  size_t output_width() const { return weights_.back().rows(); }
  size_t layer_count() const { return weights_.size(); }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

  // Gradients of sum_i loss_i given d loss / d output, summed over the batch.
  // Requires the cache from the matching forward call. When d_input is given,
  // also produces the gradient w.r.t. the input rows.
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& d_output,
                     Eigen::MatrixXd* d_input = nullptr) const;

  // Materialized per-example gradients (row i of the batch).
  std::vector<Gradients> per_example_backward(const Cache& cache,
                                              const Eigen::MatrixXd& d_output) const;

  // Sum of per-example gradients after clipping each example's full gradient
  // to L2 norm clip_norm. Exploits the rank-1 structure of per-example
  // gradients, so nothing is materialized. When max_clipped_norm is given it
  // receives the largest post-clip per-example norm seen.
  Gradients clipped_sum_backward(const Cache& cache, const Eigen::MatrixXd& d_output,
                                 double clip_norm,
                                 double* max_clipped_norm = nullptr) const;

  Gradients zero_gradients() const;
  void apply_sgd(const Gradients& grads, double learning_rate);
  void clamp_weights(double bound);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  // d_output -> per-layer deltas (pre-activation gradients), last to first.
  std::vector<Eigen::MatrixXd> compute_deltas(const Cache& cache,
                                              const Eigen::MatrixXd& d_output) const;

  size_t input_width_;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
  std::vector<Activation> activations_;
};

// Scales each example's full gradient by min(1, clip_norm / ||g||_2).
void per_example_clip(std::vector<DenseNet::Gradients>& grads, double clip_norm);

}  // namespace dpsynth

#endif  // DPSYNTH_NETS_HPP
