#pragma once

// One-to-one extraction by maximum-weight bipartite matching.
//
// Each connected component of the correspondence graph is solved as a
// min-cost flow: every source node sends one unit either through one of its
// edges (cost 1 - w) or through an "unmatched" arc (cost 1), so minimizing
// cost maximizes total weight. Successive shortest paths with Dijkstra and
// node potentials keep the graph sparse.
//
// Among optimal matchings the one whose sorted key list is lexicographically
// smallest is returned. Edges are visited in key order and greedily kept if
// some optimal matching still contains them; only edges with zero reduced
// cost under the optimal potentials can qualify, so re-solves are limited to
// tied edges.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "kgmatch/alignment.hpp"

namespace kgmatch {

namespace detail {

inline constexpr double kWeightTolerance = 1e-9;

struct WeightedEdge {
  int left;
  int right;
  double weight;
};

struct MatchingSolution {
  double weight = 0.0;
  std::vector<int> chosen;        // indices into the edge list
  std::vector<double> potential;  // node potentials (left, right, sink)
};

/// Maximum-weight matching on `num_left` x `num_right` with the given edges.
/// Edges flagged in `disabled` are ignored.
inline MatchingSolution solve_matching(int num_left, int num_right, const std::vector<WeightedEdge>& edges,
                                       const std::vector<char>& disabled) {
  // nodes: 0 = source, 1..L = left, L+1..L+R = right, L+R+1 = sink
  const int source = 0;
  const int sink = num_left + num_right + 1;
  const int n = sink + 1;
  struct Arc {
    int to;
    int cap;
    double cost;
    int edge;  // index into `edges`, -1 for structural arcs
  };
  std::vector<Arc> arcs;
  std::vector<std::vector<int>> adj(n);
  auto add_arc = [&](int from, int to, double cost, int edge) {
    adj[from].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({to, 1, cost, edge});
    adj[to].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({from, 0, -cost, edge});
  };
  for (int u = 0; u < num_left; ++u) {
    add_arc(source, 1 + u, 0.0, -1);
    add_arc(1 + u, sink, 1.0, -1);
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (disabled[i]) continue;
    const auto& e = edges[i];
    add_arc(1 + e.left, 1 + num_left + e.right, 1.0 - e.weight, static_cast<int>(i));
  }
  for (int v = 0; v < num_right; ++v) add_arc(1 + num_left + v, sink, 0.0, -1);

  std::vector<double> potential(n, 0.0);
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n);
  std::vector<int> via(n);
  for (int unit = 0; unit < num_left; ++unit) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(via.begin(), via.end(), -1);
    dist[source] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[u]) continue;
      for (int a : adj[u]) {
        const Arc& arc = arcs[a];
        if (arc.cap <= 0) continue;
        double reduced = arc.cost + potential[u] - potential[arc.to];
        if (reduced < 0) reduced = 0;  // rounding noise
        double nd = d + reduced;
        if (nd < dist[arc.to]) {
          dist[arc.to] = nd;
          via[arc.to] = a;
          queue.emplace(nd, arc.to);
        }
      }
    }
    if (dist[sink] == inf) break;
    for (int v = 0; v < n; ++v)
      if (dist[v] < inf) potential[v] += dist[v];
    for (int v = sink; v != source;) {
      int a = via[v];
      arcs[a].cap -= 1;
      arcs[a ^ 1].cap += 1;
      v = arcs[a ^ 1].to;
    }
  }

  // Dual-feasible potentials for every node: shortest distances in the final
  // residual graph from a virtual root linked to all nodes at cost 0. The
  // optimal residual graph has no negative cycle.
  std::vector<double> dual(n, 0.0);
  {
    std::vector<char> queued(n, 1);
    std::queue<int> work;
    for (int v = 0; v < n; ++v) work.push(v);
    while (!work.empty()) {
      int u = work.front();
      work.pop();
      queued[u] = 0;
      for (int a : adj[u]) {
        const Arc& arc = arcs[a];
        if (arc.cap <= 0) continue;
        double nd = dual[u] + arc.cost;
        if (nd < dual[arc.to] - 1e-12) {
          dual[arc.to] = nd;
          if (!queued[arc.to]) {
            queued[arc.to] = 1;
            work.push(arc.to);
          }
        }
      }
    }
  }

  MatchingSolution sol;
  sol.potential = std::move(dual);
  for (std::size_t a = 0; a < arcs.size(); a += 2) {
    const Arc& arc = arcs[a];
    if (arc.edge >= 0 && arc.cap == 0) {
      sol.chosen.push_back(arc.edge);
      sol.weight += edges[arc.edge].weight;
    }
  }
  std::sort(sol.chosen.begin(), sol.chosen.end());
  return sol;
}

}  // namespace detail

/// The one-to-one subset of `a` with maximum total confidence. Ties between
/// optimal subsets resolve to the lexicographically smallest key set.
inline Alignment max_weight_bipartite_extract(const Alignment& a) {
  using detail::WeightedEdge;
  if (a.empty()) return {};

  // Alignment iteration is key ordered, so edge index order is key order.
  std::vector<const Alignment::Map::value_type*> entries;
  std::map<Iri, int> left_ids, right_ids;
  for (const auto& kv : a) {
    entries.push_back(&kv);
    left_ids.try_emplace(kv.first.source, 0);
    right_ids.try_emplace(kv.first.target, 0);
  }
  int next = 0;
  for (auto& [_, id] : left_ids) id = next++;
  const int num_left = next;
  next = 0;
  for (auto& [_, id] : right_ids) id = next++;
  const int num_right = next;

  // connected components via union-find over left and right nodes
  std::vector<int> parent(num_left + num_right);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  std::vector<WeightedEdge> all_edges;
  all_edges.reserve(entries.size());
  for (const auto* kv : entries) {
    int l = left_ids[kv->first.source];
    int r = right_ids[kv->first.target];
    all_edges.push_back({l, r, kv->second.confidence});
    parent[find(l)] = find(num_left + r);
  }
  std::map<int, std::vector<int>> components;  // root -> edge indices (ascending = key order)
  for (std::size_t i = 0; i < all_edges.size(); ++i) components[find(all_edges[i].left)].push_back(static_cast<int>(i));

  Alignment out;
  for (const auto& [_, edge_ids] : components) {
    // local renumbering
    std::map<int, int> lmap, rmap;
    for (int i : edge_ids) {
      lmap.try_emplace(all_edges[i].left, 0);
      rmap.try_emplace(all_edges[i].right, 0);
    }
    int li = 0, ri = 0;
    for (auto& [__, id] : lmap) id = li++;
    for (auto& [__, id] : rmap) id = ri++;
    std::vector<WeightedEdge> edges;
    for (int i : edge_ids) edges.push_back({lmap[all_edges[i].left], rmap[all_edges[i].right], all_edges[i].weight});

    std::vector<char> disabled(edges.size(), 0);
    auto best = detail::solve_matching(li, ri, edges, disabled);
    const double optimum = best.weight;
    const auto& pot = best.potential;
    auto reduced_cost = [&](const WeightedEdge& e) { return (1.0 - e.weight) + pot[1 + e.left] - pot[1 + li + e.right]; };

    std::vector<char> in_current(edges.size(), 0);
    for (int c : best.chosen) in_current[c] = 1;
    std::vector<char> forced(edges.size(), 0), rejected(edges.size(), 0);
    std::vector<char> left_used(li, 0), right_used(ri, 0);

    for (std::size_t i = 0; i < edges.size(); ++i) {
      const auto& e = edges[i];
      if (left_used[e.left] || right_used[e.right]) {
        rejected[i] = 1;
        continue;
      }
      bool keep = false;
      if (in_current[i]) {
        keep = true;
      } else if (reduced_cost(e) <= detail::kWeightTolerance) {
        // re-solve with forced edges fixed, rejected edges removed, e forced
        std::vector<char> off = rejected;
        double fixed_weight = e.weight;
        std::vector<char> l_block = left_used, r_block = right_used;
        l_block[e.left] = 1;
        r_block[e.right] = 1;
        for (std::size_t j = 0; j < edges.size(); ++j) {
          if (forced[j]) fixed_weight += edges[j].weight;
          if (j == i || forced[j] || l_block[edges[j].left] || r_block[edges[j].right]) off[j] = 1;
        }
        auto trial = detail::solve_matching(li, ri, edges, off);
        if (std::abs(trial.weight + fixed_weight - optimum) <= detail::kWeightTolerance * (1.0 + optimum)) {
          keep = true;
          std::fill(in_current.begin(), in_current.end(), 0);
          for (int c : trial.chosen) in_current[c] = 1;
          for (std::size_t j = 0; j < edges.size(); ++j)
            if (forced[j]) in_current[j] = 1;
          in_current[i] = 1;
        }
      }
      if (keep) {
        forced[i] = 1;
        left_used[e.left] = 1;
        right_used[e.right] = 1;
      } else {
        rejected[i] = 1;
      }
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!forced[i]) continue;
      const auto* kv = entries[edge_ids[i]];
      out.add(Correspondence{kv->first.source, kv->first.target, kv->first.relation, kv->second.confidence},
              kv->second.provenance);
    }
  }
  return out;
}

}  // namespace kgmatch
