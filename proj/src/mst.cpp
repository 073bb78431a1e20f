#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "dpsynth/synth.hpp"

namespace dpsynth {

namespace {

constexpr int kIpfMaxRounds = 500;
constexpr double kIpfTolerance = 1e-7;
// Tiny product-form mass mixed into measured edges so IPF scaling never
// starves a row the node targets require.
constexpr double kIpfSmoothing = 1e-9;

std::string edge_label(const Schema& schema, Edge e) {
  return schema[e.first].name + "-" + schema[e.second].name;
}

// Kruskal union-find.
struct DisjointSets {
  std::vector<size_t> parent;
  explicit DisjointSets(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  size_t find(size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool join(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Fits `edge_dist` by iterative proportional scaling until its projections
// match the node targets; returns rounds used or -1 on non-convergence.
int ipf_calibrate(MarginalTable& edge_dist, const std::vector<double>& row_target,
                  const std::vector<double>& col_target) {
  const size_t di = row_target.size();
  const size_t dj = col_target.size();
  auto& q = edge_dist.counts();

  for (size_t a = 0; a < di; ++a) {
    for (size_t b = 0; b < dj; ++b) {
      q[a * dj + b] = (1.0 - kIpfSmoothing) * q[a * dj + b] +
                      kIpfSmoothing * row_target[a] * col_target[b];
    }
  }

  for (int round = 0; round < kIpfMaxRounds; ++round) {
    for (size_t a = 0; a < di; ++a) {
      double s = 0.0;
      for (size_t b = 0; b < dj; ++b) s += q[a * dj + b];
      const double f = s > 0.0 ? row_target[a] / s : 0.0;
      for (size_t b = 0; b < dj; ++b) q[a * dj + b] *= f;
    }
    for (size_t b = 0; b < dj; ++b) {
      double s = 0.0;
      for (size_t a = 0; a < di; ++a) s += q[a * dj + b];
      const double f = s > 0.0 ? col_target[b] / s : 0.0;
      for (size_t a = 0; a < di; ++a) q[a * dj + b] *= f;
    }
    double disc = 0.0;
    for (size_t a = 0; a < di; ++a) {
      double s = 0.0;
      for (size_t b = 0; b < dj; ++b) s += q[a * dj + b];
      disc += std::abs(s - row_target[a]);
    }
    for (size_t b = 0; b < dj; ++b) {
      double s = 0.0;
      for (size_t a = 0; a < di; ++a) s += q[a * dj + b];
      disc += std::abs(s - col_target[b]);
    }
    if (disc < kIpfTolerance) return round + 1;
  }
  return -1;
}

}  // namespace

std::vector<Edge> mst_select(const Table& train, double selection_epsilon,
                             const std::vector<MarginalTable>& measured_oneways,
                             Rng& rng, BudgetLedger& ledger) {
  const size_t d = train.cols();
  if (d < 2) throw InputError("mst_select needs at least two attributes");
  if (measured_oneways.size() != d) throw InputError("need one measured marginal per attribute");
  const double n = static_cast<double>(train.rows());

  std::vector<MarginalTable> oneway_dists;
  oneway_dists.reserve(d);
  for (const auto& m : measured_oneways) oneway_dists.push_back(to_distribution(m));

  // Edge weight: L1 gap between the true 2-way marginal and the independence
  // estimate from the measured 1-ways, normalized by n.
  std::vector<Edge> pairs;
  std::vector<double> weights;
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = i + 1; j < d; ++j) {
      MarginalTable two = marginal(train, {i, j});
      const auto& pi = oneway_dists[i].counts();
      const auto& pj = oneway_dists[j].counts();
      const size_t dj = two.dims()[1];
      double gap = 0.0;
      for (size_t a = 0; a < pi.size(); ++a) {
        for (size_t b = 0; b < pj.size(); ++b) {
          gap += std::abs(two[a * dj + b] - n * pi[a] * pj[b]);
        }
      }
      pairs.push_back({i, j});
      weights.push_back(gap / n);
    }
  }

  const double per_edge = selection_epsilon / static_cast<double>(d - 1);
  DisjointSets components(d);
  std::vector<Edge> tree;
  for (size_t round = 0; round + 1 < d; ++round) {
    std::vector<size_t> open;
    std::vector<double> scores;
    for (size_t k = 0; k < pairs.size(); ++k) {
      if (components.find(pairs[k].first) != components.find(pairs[k].second)) {
        open.push_back(k);
        scores.push_back(weights[k]);
      }
    }
    const size_t pick = open[exponential_mechanism(scores, 1.0, per_edge, rng)];
    components.join(pairs[pick].first, pairs[pick].second);
    tree.push_back(pairs[pick]);
    ledger.spend("select:" + edge_label(train.schema(), pairs[pick]), per_edge, 0.0);
  }
  return tree;
}

MstModel::MstModel(Schema schema, std::vector<std::vector<double>> node_beliefs,
                   std::vector<Edge> edges, std::vector<MarginalTable> fitted_pairwise,
                   BudgetLedger ledger)
    : schema_(std::move(schema)),
      beliefs_(std::move(node_beliefs)),
      edges_(std::move(edges)),
      fitted_(std::move(fitted_pairwise)),
      ledger_(std::move(ledger)) {
  // Root the tree at attribute 0 and record a sampling order.
  const size_t d = schema_.width();
  std::vector<std::vector<std::pair<size_t, size_t>>> adjacent(d);  // (neighbor, edge)
  for (size_t e = 0; e < edges_.size(); ++e) {
    adjacent[edges_[e].first].push_back({edges_[e].second, e});
    adjacent[edges_[e].second].push_back({edges_[e].first, e});
  }
  std::vector<bool> seen(d, false);
  std::queue<size_t> frontier;
  frontier.push(0);
  seen[0] = true;
  while (!frontier.empty()) {
    const size_t node = frontier.front();
    frontier.pop();
    for (const auto& [next, e] : adjacent[node]) {
      if (seen[next]) continue;
      seen[next] = true;
      plan_.push_back({next, node, e, edges_[e].second == next});
      frontier.push(next);
    }
  }
  if (plan_.size() + 1 != d) throw InputError("edges do not form a spanning tree");
}

Table MstModel::sample(size_t n_prime, uint64_t seed) const {
  if (n_prime == 0) throw InputError("sample size must be positive");
  Rng rng(seed);
  const size_t d = schema_.width();
  std::vector<double> values(n_prime * d);
  std::vector<double> slice;
  for (size_t r = 0; r < n_prime; ++r) {
    values[r * d] = static_cast<double>(sample_categorical(beliefs_[0], rng));
    for (const auto& step : plan_) {
      const MarginalTable& q = fitted_[step.edge];
      const size_t child_dim = q.dims()[step.child_is_second ? 1 : 0];
      const size_t parent_dim = q.dims()[step.child_is_second ? 0 : 1];
      const size_t pv = static_cast<size_t>(values[r * d + step.parent]);
      slice.assign(child_dim, 0.0);
      if (step.child_is_second) {
        for (size_t k = 0; k < child_dim; ++k) slice[k] = q[pv * child_dim + k];
      } else {
        for (size_t k = 0; k < child_dim; ++k) slice[k] = q[k * parent_dim + pv];
      }
      values[r * d + step.child] = static_cast<double>(sample_categorical(slice, rng));
    }
  }
  return Table(schema_, std::move(values));
}

std::unique_ptr<MstModel> mst_fit(const Table& train, const PrivacySpec& spec,
                                  uint64_t seed) {
  if (!train.schema().all_categorical()) {
    throw InputError("mst_fit needs a discretized table");
  }
  const size_t d = train.cols();
  if (d < 2) throw InputError("mst_fit needs at least two attributes");
  if (!spec.noise_free() && !(spec.delta > 0.0)) {
    throw InputError("mst_fit needs delta > 0 for finite epsilon");
  }

  Rng rng(seed);
  BudgetLedger ledger(spec);
  const double eps_select = spec.epsilon / 3.0;
  const double eps_measure = 2.0 * spec.epsilon / 3.0;
  const size_t marginal_count = 2 * d - 1;
  const double eps_per = eps_measure / static_cast<double>(marginal_count);
  const double delta_per = spec.delta / static_cast<double>(marginal_count);

  std::vector<MarginalTable> oneways;
  oneways.reserve(d);
  for (size_t c = 0; c < d; ++c) {
    MarginalTable counts = marginal(train, {c});
    counts.counts() = gaussian_mechanism(counts.counts(), 1.0, eps_per,
                                         spec.noise_free() ? 1e-5 : delta_per, rng);
    ledger.spend("measure1:" + train.schema()[c].name, eps_per,
                 spec.noise_free() ? 0.0 : delta_per);
    oneways.push_back(std::move(counts));
  }

  const std::vector<Edge> edges = mst_select(train, eps_select, oneways, rng, ledger);

  std::vector<MarginalTable> twoways;
  twoways.reserve(edges.size());
  for (const Edge& e : edges) {
    MarginalTable counts = marginal(train, {e.first, e.second});
    counts.counts() = gaussian_mechanism(counts.counts(), 1.0, eps_per,
                                         spec.noise_free() ? 1e-5 : delta_per, rng);
    ledger.spend("measure2:" + edge_label(train.schema(), e), eps_per,
                 spec.noise_free() ? 0.0 : delta_per);
    twoways.push_back(std::move(counts));
  }

  // Clamp and normalize, then calibrate every edge distribution to the node
  // beliefs; afterwards all edges sharing an attribute agree on it.
  std::vector<std::vector<double>> beliefs;
  beliefs.reserve(d);
  for (const auto& m : oneways) beliefs.push_back(to_distribution(m).counts());

  std::vector<MarginalTable> fitted;
  fitted.reserve(edges.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    MarginalTable q = to_distribution(twoways[e]);
    const int rounds = ipf_calibrate(q, beliefs[edges[e].first], beliefs[edges[e].second]);
    if (rounds < 0) {
      throw std::runtime_error("IPF did not converge on edge " +
                               edge_label(train.schema(), edges[e]));
    }
    fitted.push_back(std::move(q));
  }

  return std::make_unique<MstModel>(train.schema(), std::move(beliefs), edges,
                                    std::move(fitted), std::move(ledger));
}

}  // namespace dpsynth
