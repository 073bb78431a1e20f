#include <string>

#include "dpsynth/synth.hpp"

namespace dpsynth {

size_t sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) return rng.next_index(weights.size());
  double u = rng.next_double() * total;
  for (size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return i;
  }
  return weights.size() - 1;
}

IndependentModel::IndependentModel(Schema schema, std::vector<MarginalTable> noisy_counts,
                                   BudgetLedger ledger)
    : schema_(std::move(schema)),
      noisy_counts_(std::move(noisy_counts)),
      ledger_(std::move(ledger)) {
  distributions_.reserve(noisy_counts_.size());
  for (const auto& m : noisy_counts_) distributions_.push_back(to_distribution(m));
}

Table IndependentModel::sample(size_t n_prime, uint64_t seed) const {
  if (n_prime == 0) throw InputError("sample size must be positive");
  Rng rng(seed);
  const size_t d = schema_.width();
  std::vector<double> values(n_prime * d);
  for (size_t r = 0; r < n_prime; ++r) {
    for (size_t c = 0; c < d; ++c) {
      values[r * d + c] =
          static_cast<double>(sample_categorical(distributions_[c].counts(), rng));
    }
  }
  return Table(schema_, std::move(values));
}

std::unique_ptr<IndependentModel> independent_fit(const Table& train,
                                                  const PrivacySpec& spec,
                                                  uint64_t seed) {
  if (!train.schema().all_categorical()) {
    throw InputError("independent_fit needs a discretized table");
  }
  const size_t d = train.cols();
  const double per_column = spec.epsilon / static_cast<double>(d);

  Rng rng(seed);
  BudgetLedger ledger(spec);
  std::vector<MarginalTable> noisy;
  noisy.reserve(d);
  for (size_t c = 0; c < d; ++c) {
    MarginalTable counts = marginal(train, {c});
    counts.counts() = laplace_mechanism(counts.counts(), 1.0, per_column, rng);
    ledger.spend("marginal:" + train.schema()[c].name, per_column, 0.0);
    noisy.push_back(std::move(counts));
  }
  return std::make_unique<IndependentModel>(train.schema(), std::move(noisy),
                                            std::move(ledger));
}

}  // namespace dpsynth
