#ifndef DPSYNTH_PRIVACY_HPP
#define DPSYNTH_PRIVACY_HPP

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpsynth/rng.hpp"

namespace dpsynth {

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kInfiniteEpsilon = std::numeric_limits<double>::infinity();

// Target (epsilon, delta) guarantee. epsilon == infinity means the noise
// bypass mode: every mechanism becomes the identity map.
struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 0.0;

  PrivacySpec() = default;
  PrivacySpec(double eps, double del) : epsilon(eps), delta(del) {
    if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
    if (!(delta >= 0.0) || delta >= 1.0) throw InputError("delta must be in [0, 1)");
  }

  static PrivacySpec infinite() { return PrivacySpec(kInfiniteEpsilon, 0.0); }
  bool noise_free() const { return std::isinf(epsilon); }
};

// Append-only record of budget expenditure during one fit run. Single-writer:
// one ledger per fit, never shared across concurrent fits.
class BudgetLedger {
 public:
  struct Entry {
    std::string label;
    double epsilon_spent = 0.0;
    double delta_spent = 0.0;
  };

  explicit BudgetLedger(PrivacySpec total) : total_(total) {}

  // Appends an entry; throws BudgetError naming `label` if the cumulative
  // spend would exceed the total.
  void spend(const std::string& label, double epsilon, double delta);

  double epsilon_spent() const { return epsilon_spent_; }
  double delta_spent() const { return delta_spent_; }
  const PrivacySpec& total() const { return total_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool within_budget() const;

 private:
  PrivacySpec total_;
  std::vector<Entry> entries_;
  double epsilon_spent_ = 0.0;
  double delta_spent_ = 0.0;
};

// L1/L2 sensitivity pair of a query; l2 <= l1 always.
struct SensitivityBound {
  double l1 = 0.0;
  double l2 = 0.0;

  SensitivityBound(double l1_bound, double l2_bound) : l1(l1_bound), l2(l2_bound) {
    if (l1 < 0.0 || l2 < 0.0) throw InputError("sensitivities must be nonnegative");
    if (l2 > l1) throw InputError("l2 sensitivity cannot exceed l1");
  }
};

// values + Laplace(0, sensitivity/epsilon) i.i.d.; identity at epsilon = inf.
std::vector<double> laplace_mechanism(const std::vector<double>& values,
                                      double l1_sensitivity, double epsilon,
                                      Rng& rng);

// Classical Gaussian mechanism calibration:
// sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon.
double gaussian_sigma(double l2_sensitivity, double epsilon, double delta);

std::vector<double> gaussian_mechanism(const std::vector<double>& values,
                                       double l2_sensitivity, double epsilon,
                                       double delta, Rng& rng);

// Selects index i with probability proportional to
// exp(epsilon * scores[i] / (2 * sensitivity)). At epsilon = inf returns the
// argmax, ties resolved to the lowest index.
size_t exponential_mechanism(const std::vector<double>& scores,
                             double sensitivity, double epsilon, Rng& rng);

// Orders used for Renyi-DP accumulation: integers 2..64 plus {1.25, 1.5}.
const std::vector<double>& rdp_order_grid();

// Epsilon consumed by `steps` subsampled-Gaussian steps at sampling rate q and
// noise multiplier sigma, via RDP accumulation over rdp_order_grid() and
// conversion epsilon = min_a [steps * RDP(a) + ln(1/delta)/(a - 1)].
double sgd_accountant_epsilon(double noise_multiplier, double sampling_rate,
                              size_t steps, double delta);

// Smallest noise multiplier (to within 1e-3) whose accountant epsilon stays
// under target.epsilon; throws CalibrationError if no sigma <= 1e6 suffices.
double calibrate_noise_multiplier(const PrivacySpec& target,
                                  double sampling_rate, size_t steps);

// Strong-composition bound for `query_count` mechanisms of per-query budget
// epsilon0: epsilon0*sqrt(2*T*ln(1/delta)) + T*epsilon0*(e^epsilon0 - 1).
double pate_accountant_epsilon(size_t query_count, double per_query_epsilon,
                               double delta);

}  // namespace dpsynth

#endif  // DPSYNTH_PRIVACY_HPP
