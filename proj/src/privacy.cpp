#include "dpsynth/privacy.hpp"

#include <algorithm>
#include <cmath>

namespace dpsynth {

namespace {

// Slack for cumulative floating-point sums against the budget total.
constexpr double kBudgetSlack = 1e-9;

void check_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("input values must be finite");
  }
}

void check_mechanism_budget(double epsilon) {
  if (std::isinf(epsilon)) return;
  if (!(epsilon > 0.0)) throw BudgetError("mechanism epsilon must be positive");
}

}  // namespace

void BudgetLedger::spend(const std::string& label, double epsilon, double delta) {
  if (epsilon < 0.0 || delta < 0.0) throw InputError("spend amounts must be nonnegative");
  const double new_eps = epsilon_spent_ + epsilon;
  const double new_delta = delta_spent_ + delta;
  if (new_eps > total_.epsilon * (1.0 + kBudgetSlack) + kBudgetSlack) {
    throw BudgetError("privacy budget exhausted (epsilon) at: " + label);
  }
  if (new_delta > total_.delta * (1.0 + kBudgetSlack) + 1e-18) {
    throw BudgetError("privacy budget exhausted (delta) at: " + label);
  }
  entries_.push_back(Entry{label, epsilon, delta});
  epsilon_spent_ = new_eps;
  delta_spent_ = new_delta;
}

bool BudgetLedger::within_budget() const {
  return epsilon_spent_ <= total_.epsilon * (1.0 + kBudgetSlack) + kBudgetSlack &&
         delta_spent_ <= total_.delta * (1.0 + kBudgetSlack) + 1e-18;
}

std::vector<double> laplace_mechanism(const std::vector<double>& values,
                                      double l1_sensitivity, double epsilon,
                                      Rng& rng) {
  check_finite(values);
  check_mechanism_budget(epsilon);
  if (!(l1_sensitivity > 0.0)) throw InputError("sensitivity must be positive");
  if (std::isinf(epsilon)) return values;
  const double scale = l1_sensitivity / epsilon;
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] + rng.next_laplace(scale);
  }
  return out;
}

double gaussian_sigma(double l2_sensitivity, double epsilon, double delta) {
  if (!(l2_sensitivity > 0.0)) throw InputError("sensitivity must be positive");
  if (!(epsilon > 0.0)) throw BudgetError("epsilon must be positive");
  if (!(delta > 0.0) || delta >= 1.0) {
    throw InputError("Gaussian mechanism needs delta in (0, 1); use Laplace for pure DP");
  }
  return l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

std::vector<double> gaussian_mechanism(const std::vector<double>& values,
                                       double l2_sensitivity, double epsilon,
                                       double delta, Rng& rng) {
  check_finite(values);
  check_mechanism_budget(epsilon);
  if (std::isinf(epsilon)) return values;
  const double sigma = gaussian_sigma(l2_sensitivity, epsilon, delta);
  std::vector<double> out(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] + sigma * rng.next_gaussian();
  }
  return out;
}

size_t exponential_mechanism(const std::vector<double>& scores,
                             double sensitivity, double epsilon, Rng& rng) {
  if (scores.empty()) throw InputError("exponential mechanism needs candidates");
  check_finite(scores);
  check_mechanism_budget(epsilon);
  if (!(sensitivity > 0.0)) throw InputError("sensitivity must be positive");

  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  if (std::isinf(epsilon)) return best;

  // Weights normalized against the max score for numeric stability.
  std::vector<double> weights(scores.size());
  double total = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    weights[i] = std::exp(epsilon * (scores[i] - scores[best]) / (2.0 * sensitivity));
    total += weights[i];
  }
  double u = rng.next_double() * total;
  for (size_t i = 0; i < scores.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return scores.size() - 1;
}

const std::vector<double>& rdp_order_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g{1.25, 1.5};
    for (int a = 2; a <= 64; ++a) g.push_back(static_cast<double>(a));
    return g;
  }();
  return grid;
}

namespace {

double log_sum_exp(const std::vector<double>& terms) {
  const double m = *std::max_element(terms.begin(), terms.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// RDP of one subsampled-Gaussian step at integer order alpha (binomial
// expansion bound). Fractional orders in (1, 2) are bounded by the order-2
// value; RDP is non-decreasing in the order so this stays valid.
double rdp_sampled_gaussian(double alpha, double q, double sigma) {
  if (q <= 0.0) return 0.0;
  if (q >= 1.0) return alpha / (2.0 * sigma * sigma);
  const int ai = static_cast<int>(std::ceil(alpha));
  const int a = std::max(2, ai);
  std::vector<double> terms;
  terms.reserve(a + 1);
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int k = 0; k <= a; ++k) {
    terms.push_back(log_binomial(a, k) + (a - k) * log_1mq + k * log_q +
                    k * (k - 1.0) / (2.0 * sigma * sigma));
  }
  return log_sum_exp(terms) / (a - 1.0);
}

constexpr double kSigmaSearchMin = 1e-3;
constexpr double kSigmaSearchMax = 1e6;

}  // namespace

double sgd_accountant_epsilon(double noise_multiplier, double sampling_rate,
                              size_t steps, double delta) {
  if (!(noise_multiplier > 0.0)) throw InputError("noise multiplier must be positive");
  if (!(sampling_rate > 0.0) || sampling_rate > 1.0) {
    throw InputError("sampling rate must be in (0, 1]");
  }
  if (!(delta > 0.0) || delta >= 1.0) throw InputError("delta must be in (0, 1)");
  if (steps == 0) return 0.0;

  double best = std::numeric_limits<double>::infinity();
  for (double alpha : rdp_order_grid()) {
    const double rdp = rdp_sampled_gaussian(alpha, sampling_rate, noise_multiplier);
    const double eps = static_cast<double>(steps) * rdp + std::log(1.0 / delta) / (alpha - 1.0);
    best = std::min(best, eps);
  }
  return best;
}

double calibrate_noise_multiplier(const PrivacySpec& target,
                                  double sampling_rate, size_t steps) {
  if (target.noise_free()) throw InputError("calibration needs a finite epsilon target");
  if (steps == 0) return kSigmaSearchMin;

  auto fits = [&](double sigma) {
    return sgd_accountant_epsilon(sigma, sampling_rate, steps, target.delta) <=
           target.epsilon;
  };
  if (fits(kSigmaSearchMin)) return kSigmaSearchMin;

  double lo = kSigmaSearchMin;
  double hi = kSigmaSearchMin;
  while (!fits(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > kSigmaSearchMax) {
      throw CalibrationError("no noise multiplier <= 1e6 reaches the epsilon target");
    }
  }
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    if (fits(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double pate_accountant_epsilon(size_t query_count, double per_query_epsilon,
                               double delta) {
  if (!(per_query_epsilon > 0.0)) throw InputError("per-query epsilon must be positive");
  if (!(delta > 0.0) || delta >= 1.0) throw InputError("delta must be in (0, 1)");
  if (query_count == 0) return 0.0;
  const double t = static_cast<double>(query_count);
  return per_query_epsilon * std::sqrt(2.0 * t * std::log(1.0 / delta)) +
         t * per_query_epsilon * (std::exp(per_query_epsilon) - 1.0);
}

}  // namespace dpsynth
