#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "dpsynth/synth.hpp"

namespace dpsynth {

namespace {

// Full subset enumeration of parent candidates is capped at this many placed
// nodes; beyond it, parent sets are built by greedy forward selection.
constexpr size_t kEnumerationCap = 20;

// Joint-entropy engine over the coded training table. One scratch tensor is
// reused across queries with a touched-cell reset, and entropies of repeated
// attribute sets are cached.
class EntropyEngine {
 public:
  explicit EntropyEngine(const Table& train) : n_(train.rows()), d_(train.cols()) {
    codes_.resize(d_);
    dims_.resize(d_);
    for (size_t c = 0; c < d_; ++c) {
      dims_[c] = train.schema()[c].cardinality;
      codes_[c].resize(n_);
      for (size_t r = 0; r < n_; ++r) {
        codes_[c][r] = static_cast<uint32_t>(train.at(r, c));
      }
    }
  }

  size_t rows() const { return n_; }

  // Entropy in bits of the joint distribution over `attrs` (sorted key).
  double joint_entropy(const std::vector<size_t>& attrs, bool cache = true) {
    if (attrs.empty()) return 0.0;
    if (cache) {
      const auto it = cache_.find(attrs);
      if (it != cache_.end()) return it->second;
    }
    size_t cells = 1;
    for (size_t a : attrs) cells *= dims_[a];
    if (counts_.size() < cells) counts_.resize(cells, 0.0);

    touched_.clear();
    for (size_t r = 0; r < n_; ++r) {
      size_t idx = 0;
      for (size_t a : attrs) idx = idx * dims_[a] + codes_[a][r];
      if (counts_[idx] == 0.0) touched_.push_back(static_cast<uint32_t>(idx));
      counts_[idx] += 1.0;
    }
    double h = 0.0;
    const double n = static_cast<double>(n_);
    for (uint32_t idx : touched_) {
      const double p = counts_[idx] / n;
      h -= p * std::log2(p);
      counts_[idx] = 0.0;
    }
    if (cache) cache_[attrs] = h;
    return h;
  }

  double mutual_information(size_t child, const std::vector<size_t>& parents) {
    if (parents.empty()) return 0.0;
    std::vector<size_t> joint = parents;
    joint.push_back(child);
    std::sort(joint.begin(), joint.end());
    const bool small = parents.size() < 3;
    return joint_entropy({child}) + joint_entropy(parents, small) -
           joint_entropy(joint, small);
  }

 private:
  size_t n_, d_;
  std::vector<std::vector<uint32_t>> codes_;
  std::vector<size_t> dims_;
  std::vector<double> counts_;
  std::vector<uint32_t> touched_;
  std::map<std::vector<size_t>, double> cache_;
};

struct Candidate {
  size_t child;
  std::vector<size_t> parents;  // sorted
  double score;
};

// Sorted subsets of `placed` of size <= max_size that contain `required`.
void enumerate_parent_sets(const std::vector<size_t>& placed, size_t required,
                           size_t max_size, std::vector<std::vector<size_t>>& out) {
  std::vector<size_t> others;
  for (size_t p : placed) {
    if (p != required) others.push_back(p);
  }
  std::vector<size_t> current{required};
  out.push_back(current);
  if (max_size == 1) return;

  // Iterative subset enumeration over `others` up to max_size - 1 extras.
  std::vector<size_t> stack;
  auto emit = [&](const std::vector<size_t>& extras) {
    std::vector<size_t> set = extras;
    set.push_back(required);
    std::sort(set.begin(), set.end());
    out.push_back(std::move(set));
  };
  std::vector<size_t> extras;
  // Depth-first over combinations.
  std::vector<size_t> idx_stack{0};
  while (!idx_stack.empty()) {
    size_t& i = idx_stack.back();
    if (i >= others.size()) {
      idx_stack.pop_back();
      if (!extras.empty()) extras.pop_back();
      if (!idx_stack.empty()) ++idx_stack.back();
      continue;
    }
    extras.push_back(others[i]);
    emit(extras);
    if (extras.size() + 1 < max_size) {
      idx_stack.push_back(i + 1);
    } else {
      extras.pop_back();
      ++i;
    }
  }
}

MarginalTable measure_conditional(const Table& train, size_t attr,
                                  const std::vector<size_t>& parents,
                                  double epsilon, Rng& rng) {
  std::vector<size_t> attrs = parents;
  attrs.push_back(attr);
  MarginalTable counts = marginal(train, attrs);
  counts.counts() = laplace_mechanism(counts.counts(), 1.0, epsilon, rng);

  // Normalize per parent configuration; all-zero configurations stay zero and
  // fall back to uniform when sampled.
  const size_t child_dim = counts.dims().back();
  const size_t configs = counts.size() / child_dim;
  for (size_t g = 0; g < configs; ++g) {
    double total = 0.0;
    for (size_t k = 0; k < child_dim; ++k) {
      double& cell = counts[g * child_dim + k];
      cell = std::max(0.0, cell);
      total += cell;
    }
    if (total > 0.0) {
      for (size_t k = 0; k < child_dim; ++k) counts[g * child_dim + k] /= total;
    }
  }
  return counts;
}

}  // namespace

size_t privbayes_default_degree(size_t d) { return d > 100 ? 2 : 3; }

double privbayes_mi_sensitivity(size_t n) {
  const double nn = static_cast<double>(n);
  return std::log2(nn) / nn + (nn - 1.0) / nn * std::log2(nn / (nn - 1.0));
}

PrivBayesModel::PrivBayesModel(Schema schema, BayesNetwork network,
                               std::vector<MarginalTable> conditionals,
                               BudgetLedger ledger)
    : schema_(std::move(schema)),
      network_(std::move(network)),
      conditionals_(std::move(conditionals)),
      ledger_(std::move(ledger)) {}

Table PrivBayesModel::sample(size_t n_prime, uint64_t seed) const {
  if (n_prime == 0) throw InputError("sample size must be positive");
  Rng rng(seed);
  const size_t d = schema_.width();
  std::vector<double> values(n_prime * d);
  for (size_t r = 0; r < n_prime; ++r) {
    for (size_t attr : network_.order) {
      const auto& parents = network_.parents[attr];
      const MarginalTable& cond = conditionals_[attr];
      const size_t child_dim = cond.dims().back();
      size_t cfg = 0;
      for (size_t i = 0; i < parents.size(); ++i) {
        cfg = cfg * cond.dims()[i] + static_cast<size_t>(values[r * d + parents[i]]);
      }
      const std::span<const double> slice(cond.counts().data() + cfg * child_dim, child_dim);
      values[r * d + attr] = static_cast<double>(sample_categorical(slice, rng));
    }
  }
  return Table(schema_, std::move(values));
}

std::unique_ptr<PrivBayesModel> privbayes_fit(const Table& train,
                                              const PrivacySpec& spec,
                                              size_t degree, uint64_t seed) {
  if (!train.schema().all_categorical()) {
    throw InputError("privbayes_fit needs a discretized table");
  }
  if (degree < 1) throw InputError("network degree must be >= 1");
  const size_t d = train.cols();
  Rng rng(seed);
  BudgetLedger ledger(spec);

  BayesNetwork net;
  net.parents.resize(d);

  if (d == 1) {
    // Degenerate single column: no structure to learn; behaves as Independent.
    net.order = {0};
    std::vector<MarginalTable> conds;
    conds.push_back(measure_conditional(train, 0, {}, spec.epsilon, rng));
    ledger.spend("measure:" + train.schema()[0].name, spec.epsilon, 0.0);
    return std::make_unique<PrivBayesModel>(train.schema(), std::move(net),
                                            std::move(conds), std::move(ledger));
  }

  const double half_share = spec.epsilon / (2.0 * static_cast<double>(d));
  const double mi_sensitivity = privbayes_mi_sensitivity(train.rows());
  EntropyEngine engine(train);

  // Root choice is seeded and data independent; its nominal share is still
  // recorded so the selection half totals epsilon/2.
  const size_t root = rng.next_index(d);
  net.order.push_back(root);
  ledger.spend("structure:root:" + train.schema()[root].name, half_share, 0.0);

  std::vector<bool> placed(d, false);
  placed[root] = true;
  std::vector<size_t> placed_list{root};

  std::vector<Candidate> pool;
  for (size_t c = 0; c < d; ++c) {
    if (c != root) pool.push_back({c, {}, 0.0});
  }
  auto extend_pool = [&](size_t new_parent) {
    std::vector<std::vector<size_t>> sets;
    enumerate_parent_sets(placed_list, new_parent, degree, sets);
    for (size_t c = 0; c < d; ++c) {
      if (placed[c]) continue;
      for (const auto& p : sets) {
        pool.push_back({c, p, engine.mutual_information(c, p)});
      }
    }
  };
  extend_pool(root);

  while (net.order.size() < d) {
    std::vector<const Candidate*> live;
    std::vector<Candidate> greedy;
    if (placed_list.size() <= kEnumerationCap) {
      for (const auto& cand : pool) {
        if (!placed[cand.child]) live.push_back(&cand);
      }
    } else {
      // Greedy forward selection of parents for each remaining child.
      for (size_t c = 0; c < d; ++c) {
        if (placed[c]) continue;
        std::vector<size_t> parents;
        double score = 0.0;
        for (size_t step = 0; step < degree; ++step) {
          double best_gain = -1.0;
          size_t best_node = d;
          for (size_t p : placed_list) {
            if (std::find(parents.begin(), parents.end(), p) != parents.end()) continue;
            std::vector<size_t> trial = parents;
            trial.push_back(p);
            std::sort(trial.begin(), trial.end());
            const double s = engine.mutual_information(c, trial);
            if (s - score > best_gain) {
              best_gain = s - score;
              best_node = p;
            }
          }
          if (best_node == d) break;
          parents.push_back(best_node);
          std::sort(parents.begin(), parents.end());
          score += best_gain;
        }
        greedy.push_back({c, parents, engine.mutual_information(c, parents)});
      }
      for (const auto& cand : greedy) live.push_back(&cand);
    }

    std::vector<double> scores(live.size());
    for (size_t i = 0; i < live.size(); ++i) scores[i] = live[i]->score;
    const size_t pick = exponential_mechanism(scores, mi_sensitivity, half_share, rng);

    const Candidate& chosen = *live[pick];
    net.order.push_back(chosen.child);
    net.parents[chosen.child] = chosen.parents;
    ledger.spend("structure:" + train.schema()[chosen.child].name, half_share, 0.0);
    placed[chosen.child] = true;
    placed_list.push_back(chosen.child);
    if (net.order.size() < d && placed_list.size() <= kEnumerationCap) {
      extend_pool(chosen.child);
    }
  }

  std::vector<MarginalTable> conds;
  conds.reserve(d);
  for (size_t c = 0; c < d; ++c) {
    conds.push_back(measure_conditional(train, c, net.parents[c], half_share, rng));
    ledger.spend("measure:" + train.schema()[c].name, half_share, 0.0);
  }
  return std::make_unique<PrivBayesModel>(train.schema(), std::move(net),
                                          std::move(conds), std::move(ledger));
}

}  // namespace dpsynth
