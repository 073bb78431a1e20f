#ifndef DPSYNTH_SYNTH_HPP
#define DPSYNTH_SYNTH_HPP

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "dpsynth/privacy.hpp"
#include "dpsynth/rng.hpp"
#include "dpsynth/table.hpp"

namespace dpsynth {

// Uniform contract for trained generators. Fitting touches the private data
// only through the privacy mechanisms (except at epsilon = inf); fitted models
// hold no reference to the training table, so sampling is pure
// post-processing.
class FittedSynthesizer {
 public:
  virtual ~FittedSynthesizer() = default;
  virtual Table sample(size_t n_prime, uint64_t seed) const = 0;
  virtual const BudgetLedger& ledger() const = 0;
  virtual const Schema& schema() const = 0;
};

// Inverse-CDF draw from an unnormalized nonnegative weight vector.
size_t sample_categorical(std::span<const double> weights, Rng& rng);

// ---------------------------------------------------------------------------
// Independent: per-column noisy 1-way marginals via the Laplace mechanism,
// budget epsilon/d each.

class IndependentModel final : public FittedSynthesizer {
 public:
  IndependentModel(Schema schema, std::vector<MarginalTable> noisy_counts,
                   BudgetLedger ledger);

  Table sample(size_t n_prime, uint64_t seed) const override;
  const BudgetLedger& ledger() const override { return ledger_; }
  const Schema& schema() const override { return schema_; }

  const std::vector<MarginalTable>& noisy_counts() const { return noisy_counts_; }
  const std::vector<MarginalTable>& distributions() const { return distributions_; }

 private:
  Schema schema_;
  std::vector<MarginalTable> noisy_counts_;
  std::vector<MarginalTable> distributions_;
  BudgetLedger ledger_;
};

std::unique_ptr<IndependentModel> independent_fit(const Table& train,
                                                  const PrivacySpec& spec,
                                                  uint64_t seed);

// ---------------------------------------------------------------------------
// PrivBayes: exponential-mechanism structure search over (child, parent-set)
// candidates scored by mutual information, then Laplace-noised conditional
// contingency tables. Both halves spend epsilon/(2d) per attribute.

struct BayesNetwork {
  std::vector<size_t> order;                 // attribute placement order
  std::vector<std::vector<size_t>> parents;  // per attribute, earlier attrs only
};

size_t privbayes_default_degree(size_t d);

class PrivBayesModel final : public FittedSynthesizer {
 public:
  PrivBayesModel(Schema schema, BayesNetwork network,
                 std::vector<MarginalTable> conditionals, BudgetLedger ledger);

  Table sample(size_t n_prime, uint64_t seed) const override;
  const BudgetLedger& ledger() const override { return ledger_; }
  const Schema& schema() const override { return schema_; }

  const BayesNetwork& network() const { return network_; }
  // Per attribute: tensor over (parents..., attr), normalized per parent
  // configuration; all-zero configurations fall back to uniform at sampling.
  const std::vector<MarginalTable>& conditionals() const { return conditionals_; }

 private:
  Schema schema_;
  BayesNetwork network_;
  std::vector<MarginalTable> conditionals_;
  BudgetLedger ledger_;
};

std::unique_ptr<PrivBayesModel> privbayes_fit(const Table& train,
                                              const PrivacySpec& spec,
                                              size_t degree, uint64_t seed);

// The sensitivity bound for the mutual-information score at n rows.
double privbayes_mi_sensitivity(size_t n);

// ---------------------------------------------------------------------------
// MST: noisy 1-way measurements, exponential-mechanism maximum spanning tree
// over independence-gap edge weights (1/3 of the budget), Gaussian-measured
// tree marginals (2/3), and iterative proportional fitting until the pairwise
// distributions are mutually consistent.

using Edge = std::pair<size_t, size_t>;

// Kruskal-style growth: each of the d-1 additions runs the exponential
// mechanism over the normalized L1 gap between the true 2-way marginal and
// the independence estimate from the measured 1-ways, restricted to edges
// joining distinct components. Spends selection_epsilon/(d-1) per addition.
std::vector<Edge> mst_select(const Table& train, double selection_epsilon,
                             const std::vector<MarginalTable>& measured_oneways,
                             Rng& rng, BudgetLedger& ledger);

class MstModel final : public FittedSynthesizer {
 public:
  MstModel(Schema schema, std::vector<std::vector<double>> node_beliefs,
           std::vector<Edge> edges, std::vector<MarginalTable> fitted_pairwise,
           BudgetLedger ledger);

  Table sample(size_t n_prime, uint64_t seed) const override;
  const BudgetLedger& ledger() const override { return ledger_; }
  const Schema& schema() const override { return schema_; }

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<MarginalTable>& fitted_pairwise() const { return fitted_; }
  const std::vector<std::vector<double>>& node_beliefs() const { return beliefs_; }

 private:
  Schema schema_;
  std::vector<std::vector<double>> beliefs_;
  std::vector<Edge> edges_;
  std::vector<MarginalTable> fitted_;
  BudgetLedger ledger_;
  // Traversal plan rooted at attribute 0: (child, parent, edge index).
  struct Step {
    size_t child;
    size_t parent;
    size_t edge;
    bool child_is_second;  // child is the second axis of the edge tensor
  };
  std::vector<Step> plan_;
};

std::unique_ptr<MstModel> mst_fit(const Table& train, const PrivacySpec& spec,
                                  uint64_t seed);

}  // namespace dpsynth

#endif  // DPSYNTH_SYNTH_HPP
