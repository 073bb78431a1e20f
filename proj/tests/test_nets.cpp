#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dpsynth/nets.hpp"

using namespace dpsynth;

namespace {

// Scalar loss: sum of the network output weighted by a fixed projection.
double projected_loss(const DenseNet& net, const Eigen::MatrixXd& x,
                      const Eigen::MatrixXd& proj) {
  return net.forward(x).cwiseProduct(proj).sum();
}

// Piecewise-linear activations make finite differences invalid when a
// pre-activation sits within the step size of the kink; such configurations
// are re-rolled rather than checked.
bool near_kink(const DenseNet& net, const Eigen::MatrixXd& x,
               const std::vector<Activation>& acts, double margin) {
  Eigen::MatrixXd a = x;
  for (size_t l = 0; l < acts.size(); ++l) {
    Eigen::MatrixXd z = a * net.weights()[l].transpose();
    z.rowwise() += net.biases()[l].transpose();
    const bool piecewise = acts[l] == Activation::relu || acts[l] == Activation::leaky_relu;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (piecewise && std::abs(z.data()[i]) < margin) return true;
      if (piecewise && z.data()[i] < 0.0) z.data()[i] *= acts[l] == Activation::relu ? 0.0 : kLeakySlope;
      if (acts[l] == Activation::tanh) z.data()[i] = std::tanh(z.data()[i]);
    }
    a = std::move(z);
  }
  return false;
}

// Central finite differences (h = 1e-4) against every analytic parameter
// gradient; fails if any entry is off by more than 1e-4 relative.
void check_gradients(DenseNet& net, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& proj) {
  DenseNet::Cache cache;
  net.forward(x, cache);
  const auto grads = net.backward(cache, proj);

  const double h = 1e-4;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    auto check_param = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = projected_loss(net, x, proj);
      p = saved - h;
      const double down = projected_loss(net, x, proj);
      p = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(1.0, std::abs(analytic)));
    };
    auto& w = net.weights()[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      check_param(w.data()[i], grads.weights[l].data()[i]);
    }
    auto& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      check_param(b.data()[i], grads.biases[l](i));
    }
  }
}

}  // namespace

TEST_CASE("forward identity and zero nets") {
  Rng rng(1);
  DenseNet net({2, 2}, {Activation::identity}, rng);
  net.weights()[0] = Eigen::MatrixXd::Identity(2, 2);
  net.biases()[0].setZero();
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, -3, 4, 0.5, -0.5;
  CHECK((net.forward(x) - x).norm() == 0.0);

  net.weights()[0].setZero();
  CHECK(net.forward(x).norm() == 0.0);
}

TEST_CASE("forward matches a hand-computed two-layer example") {
  Rng rng(2);
  DenseNet net({2, 2, 1}, {Activation::relu, Activation::identity}, rng);
  net.weights()[0] << 1.0, -1.0, 0.5, 2.0;
  net.biases()[0] << 0.0, -1.0;
  net.weights()[1] << 2.0, -3.0;
  net.biases()[1] << 0.25;

  Eigen::MatrixXd x(1, 2);
  x << 1.0, 0.5;
  // h = relu([1 - 0.5, 0.5 + 1 - 1]) = [0.5, 0.5]; out = 2*0.5 - 3*0.5 + 0.25.
  CHECK(net.forward(x)(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));

  Eigen::MatrixXd x2(1, 2);
  x2 << -2.0, 0.1;
  // h = relu([-2.1, -1.8]) = [0, 0]; out = 0.25.
  CHECK(net.forward(x2)(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("input width mismatch and missing cache are errors") {
  Rng rng(3);
  DenseNet net({3, 2}, {Activation::tanh}, rng);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(1, 2)), InputError);
  DenseNet::Cache empty;
  CHECK_THROWS_AS(net.backward(empty, Eigen::MatrixXd::Zero(1, 2)), InputError);
}

TEST_CASE("gradients match finite differences on a three-layer net") {
  Rng rng(5);
  DenseNet net({3, 4, 4, 2},
               {Activation::leaky_relu, Activation::tanh, Activation::identity}, rng);
  Eigen::MatrixXd x(5, 3);
  do {
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  } while (near_kink(net, x, {Activation::leaky_relu, Activation::tanh, Activation::identity},
                     2e-3));
  Eigen::MatrixXd proj(5, 2);
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.next_gaussian();
  check_gradients(net, x, proj);
}

TEST_CASE("gradients match finite differences across random configurations") {
  Rng rng(7);
  const std::vector<Activation> acts{Activation::identity, Activation::relu,
                                     Activation::leaky_relu, Activation::tanh};
  int checked = 0;
  while (checked < 8) {
    const size_t depth = 1 + rng.next_index(3);
    std::vector<size_t> sizes{1 + rng.next_index(4)};
    std::vector<Activation> layer_acts;
    for (size_t l = 0; l < depth; ++l) {
      sizes.push_back(1 + rng.next_index(5));
      layer_acts.push_back(acts[rng.next_index(acts.size())]);
    }
    DenseNet net(sizes, layer_acts, rng);
    const size_t batch = 1 + rng.next_index(4);
    Eigen::MatrixXd x(batch, sizes.front());
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
    if (near_kink(net, x, layer_acts, 2e-3)) continue;
    Eigen::MatrixXd proj(batch, sizes.back());
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.next_gaussian();
    check_gradients(net, x, proj);
    ++checked;
  }
}

TEST_CASE("zero upstream gradient and linearity") {
  Rng rng(11);
  DenseNet net({2, 3, 1}, {Activation::tanh, Activation::identity}, rng);
  Eigen::MatrixXd x(4, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  DenseNet::Cache cache;
  net.forward(x, cache);

  const auto zero = net.backward(cache, Eigen::MatrixXd::Zero(4, 1));
  CHECK(zero.squared_norm() == 0.0);

  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 1);
  auto g1 = net.backward(cache, ones);
  const auto g2 = net.backward(cache, 2.0 * ones);
  g1.scale(2.0);
  for (size_t l = 0; l < net.layer_count(); ++l) {
    CHECK((g1.weights[l] - g2.weights[l]).norm() < 1e-12);
    CHECK((g1.biases[l] - g2.biases[l]).norm() < 1e-12);
  }
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(13);
  DenseNet net({3, 5, 2}, {Activation::leaky_relu, Activation::tanh}, rng);
  Eigen::MatrixXd x(2, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Eigen::MatrixXd proj(2, 2);
  for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.next_gaussian();

  DenseNet::Cache cache;
  net.forward(x, cache);
  Eigen::MatrixXd d_input;
  net.backward(cache, proj, &d_input);

  const double h = 1e-4;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = projected_loss(net, x, proj);
    x.data()[i] = saved - h;
    const double down = projected_loss(net, x, proj);
    x.data()[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::abs(fd - d_input.data()[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("per-example clipping scales norms to the bound") {
  Rng rng(17);
  DenseNet net({2, 2}, {Activation::identity}, rng);
  auto g = net.zero_gradients();
  g.weights[0] << 6.0, 0.0, 0.0, 8.0;  // norm 10
  std::vector<DenseNet::Gradients> batch{g};
  per_example_clip(batch, 1.0);
  CHECK(std::sqrt(batch[0].squared_norm()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(batch[0].weights[0](0, 0) == doctest::Approx(0.6));

  // Small gradients pass through unchanged.
  auto small = net.zero_gradients();
  small.weights[0] << 0.3, 0.0, 0.0, 0.4;  // norm 0.5
  std::vector<DenseNet::Gradients> batch2{small};
  per_example_clip(batch2, 1.0);
  CHECK(batch2[0].weights[0](0, 0) == doctest::Approx(0.3));
}

TEST_CASE("post-clip norms never exceed the bound") {
  Rng rng(19);
  DenseNet net({3, 4, 1}, {Activation::relu, Activation::identity}, rng);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd x(10, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 3.0 * rng.next_gaussian();
    DenseNet::Cache cache;
    net.forward(x, cache);
    Eigen::MatrixXd d(10, 1);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.next_gaussian();
    auto per_example = net.per_example_backward(cache, d);
    per_example_clip(per_example, 0.7);
    for (const auto& g : per_example) {
      CHECK(std::sqrt(g.squared_norm()) <= 0.7 * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("fused clipped sum equals materialized clip-then-sum") {
  Rng rng(23);
  DenseNet net({4, 6, 3}, {Activation::leaky_relu, Activation::tanh}, rng);
  Eigen::MatrixXd x(8, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.next_gaussian();
  Eigen::MatrixXd d(8, 3);
  for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.next_gaussian();

  DenseNet::Cache cache;
  net.forward(x, cache);

  double max_norm = 0.0;
  const auto fused = net.clipped_sum_backward(cache, d, 0.5, &max_norm);
  CHECK(max_norm <= 0.5 * (1.0 + 1e-12));

  auto per_example = net.per_example_backward(cache, d);
  per_example_clip(per_example, 0.5);
  auto summed = per_example[0];
  for (size_t i = 1; i < per_example.size(); ++i) summed.add(per_example[i]);

  for (size_t l = 0; l < net.layer_count(); ++l) {
    CHECK((fused.weights[l] - summed.weights[l]).norm() < 1e-10);
    CHECK((fused.biases[l] - summed.biases[l]).norm() < 1e-10);
  }
}

TEST_CASE("weight clamping bounds every parameter") {
  Rng rng(29);
  DenseNet net({3, 8, 1}, {Activation::leaky_relu, Activation::identity}, rng);
  net.weights()[0] *= 100.0;
  net.clamp_weights(0.01);
  for (const auto& w : net.weights()) {
    CHECK(w.maxCoeff() <= 0.01);
    CHECK(w.minCoeff() >= -0.01);
  }
}
