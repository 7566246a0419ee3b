// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_EVAL_BRADLEY_TERRY_HPP
#define AFFORD_EVAL_BRADLEY_TERRY_HPP

#include "afford/cloud/cloud_io.hpp"
#include "afford/core/csv.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace afford::eval {

/// Pairwise judgments over named items; comparisons index into `items`.
struct JudgmentSet {
  std::vector<std::string> items;
  std::vector<std::pair<std::size_t, std::size_t>> comparisons;  // (winner, loser)

  std::size_t add_item(const std::string& id) {
    const auto it = std::find(items.begin(), items.end(), id);
    if (it != items.end()) return static_cast<std::size_t>(it - items.begin());
    items.push_back(id);
    return items.size() - 1;
  }

  void validate() const {
    for (const auto& [w, l] : comparisons) {
      require(w < items.size() && l < items.size(), "judgments: comparison references an unknown item");
      require(w != l, "judgments: an item cannot beat itself");
    }
  }
};

struct Ranking {
  std::vector<std::string> items;
  std::vector<double> strengths;  // positive, sum to 1
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool regularized = false;       // pseudo-counts were added
  std::size_t components = 1;     // connected components of the comparison graph
  std::vector<double> likelihood_trace;  // per accepted iteration
};

namespace bt_detail {

// Labels of the connected components of an undirected adjacency list.
inline std::vector<std::size_t> components(const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<std::size_t> label(adj.size(), adj.size());
  std::size_t next = 0;
  for (std::size_t s = 0; s < adj.size(); ++s) {
    if (label[s] != adj.size()) continue;
    std::vector<std::size_t> stack = {s};
    label[s] = next;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : adj[u])
        if (label[v] == adj.size()) {
          label[v] = next;
          stack.push_back(v);
        }
    }
    ++next;
  }
  return label;
}

// True when every item in `nodes` can reach every other along winner->loser edges.
inline bool strongly_connected(const std::vector<std::size_t>& nodes, const std::vector<std::vector<double>>& wins) {
  if (nodes.size() < 2) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(wins.size(), 0);
    std::vector<std::size_t> stack = {nodes.front()};
    seen[nodes.front()] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto v : nodes) {
        const double w = forward ? wins[u][v] : wins[v][u];
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == nodes.size();
  };
  return reach(true) && reach(false);
}

inline double log_likelihood(const std::vector<std::vector<double>>& wins, const std::vector<double>& pi) {
  double ll = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i)
    for (std::size_t j = 0; j < pi.size(); ++j)
      if (wins[i][j] > 0.0) ll += wins[i][j] * std::log(pi[i] / (pi[i] + pi[j]));
  return ll;
}

}  // namespace bt_detail

/// Maximum-likelihood Bradley-Terry strengths by minorization-maximization.
/// A component whose win graph is not strongly connected has no finite MLE;
/// each compared pair in it then receives half a win in both directions and
/// the fit is flagged. Disconnected components are fitted separately and
/// each is scaled to its share of the items. `initial` seeds the iteration
/// (uniform when absent).
inline Ranking fit_bradley_terry(const JudgmentSet& j, double tol = 1e-10, std::size_t max_iter = 100000,
                                 const std::vector<double>& initial = {}) {
  j.validate();
  require(tol > 0.0 && max_iter > 0, "fit_bradley_terry: tol and max_iter must be positive");
  const std::size_t n = j.items.size();
  require(n > 0, "fit_bradley_terry: no items");
  std::vector<std::vector<double>> wins(n, std::vector<double>(n, 0.0));
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [w, l] : j.comparisons) {
    if (wins[w][l] == 0.0 && wins[l][w] == 0.0) {
      adj[w].push_back(l);
      adj[l].push_back(w);
    }
    wins[w][l] += 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (adj[i].empty()) fail(ErrorKind::data, "fit_bradley_terry: item '" + j.items[i] + "' has no comparisons");

  Ranking r;
  r.items = j.items;
  const auto label = bt_detail::components(adj);
  r.components = *std::max_element(label.begin(), label.end()) + 1;
  if (r.components > 1)
    log::info("fit_bradley_terry: comparison graph has " + std::to_string(r.components) +
              " components; fitting each separately");

  std::vector<std::vector<std::size_t>> members(r.components);
  for (std::size_t i = 0; i < n; ++i) members[label[i]].push_back(i);
  for (const auto& nodes : members) {
    if (bt_detail::strongly_connected(nodes, wins)) continue;
    r.regularized = true;
    for (auto a : nodes)
      for (auto b : adj[a]) wins[a][b] += 0.5;
  }
  if (r.regularized)
    log::warn("fit_bradley_terry: some item never loses or never wins against its component; "
              "added a pseudo-count of 0.5 per direction to every compared pair");

  std::vector<double> total_wins(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) total_wins[i] = std::accumulate(wins[i].begin(), wins[i].end(), 0.0);
  require(initial.empty() || initial.size() == n, "fit_bradley_terry: initial strengths have the wrong length");
  for (double x : initial) require(x > 0.0 && std::isfinite(x), "fit_bradley_terry: initial strengths must be positive");
  std::vector<double> pi = initial.empty() ? std::vector<double>(n, 1.0) : initial, next(n);
  auto normalise = [&](std::vector<double>& v) {
    for (const auto& nodes : members) {
      double s = 0.0;
      for (auto i : nodes) s += v[i];
      const double share = static_cast<double>(nodes.size()) / static_cast<double>(n);
      for (auto i : nodes) v[i] *= share / s;
    }
  };

  normalise(pi);
  r.likelihood_trace.push_back(bt_detail::log_likelihood(wins, pi));
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (auto k : adj[i]) denom += (wins[i][k] + wins[k][i]) / (pi[i] + pi[k]);
      next[i] = total_wins[i] / denom;
    }
    normalise(next);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - pi[i]) / pi[i]);
    pi.swap(next);
    r.likelihood_trace.push_back(bt_detail::log_likelihood(wins, pi));
    if (change < tol) {
      r.converged = true;
      break;
    }
  }
  if (!r.converged) {
    r.iterations = max_iter;
    log::warn("fit_bradley_terry: no convergence within " + std::to_string(max_iter) + " iterations");
  }
  r.strengths = pi;
  r.log_likelihood = r.likelihood_trace.back();
  return r;
}

/// Kendall rank correlation (tau-a) between two score vectors.
inline double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "kendall_tau: need two equal-length vectors of size >= 2");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = i + 1; k < a.size(); ++k) {
      const double x = (a[i] - a[k]) * (b[i] - b[k]);
      s += x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
    }
  return s / (0.5 * static_cast<double>(a.size() * (a.size() - 1)));
}

/// Reads `option_a,option_b,winner` rows after any leading `#` lines. The
/// winner must name one of the two options.
inline JudgmentSet read_judgments_csv(const std::filesystem::path& path) {
  const std::string data = io_detail::read_file(path);
  io_detail::LineCursor cur(data);
  std::string_view line;
  bool more = cur.next(line);
  while (more && line.starts_with('#')) more = cur.next(line);
  if (!more || line != "option_a,option_b,winner")
    throw ParseError("judgments: expected header 'option_a,option_b,winner'", cur.line(), cur.line_start());
  JudgmentSet j;
  while (cur.next(line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line, cur.line());
    if (f.size() != 3) cur.error("judgments: expected 3 fields");
    if (f[0] == f[1]) cur.error("judgments: an option is compared with itself");
    if (f[2] != f[0] && f[2] != f[1]) cur.error("judgments: winner '" + f[2] + "' is neither option");
    const auto a = j.add_item(f[0]);
    const auto b = j.add_item(f[1]);
    j.comparisons.emplace_back(f[2] == f[0] ? a : b, f[2] == f[0] ? b : a);
  }
  return j;
}

inline void write_ranking_csv(const Ranking& r, std::ostream& os) {
  os << "item,strength,rank\n";
  std::vector<std::size_t> order(r.items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.strengths[a] > r.strengths[b]; });
  for (std::size_t k = 0; k < order.size(); ++k) {
    std::string s;
    io_detail::append_double(s, r.strengths[order[k]]);
    os << csv::escape(r.items[order[k]]) << ',' << s << ',' << (k + 1) << '\n';
  }
}

}  // namespace afford::eval

#endif  // AFFORD_EVAL_BRADLEY_TERRY_HPP
