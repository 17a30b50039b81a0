// Copyright 2026 The projann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "projann/common.hpp"
#include "projann/vector_store.hpp"

namespace projann {

struct Candidate {
  uint32_t id = 0;
  float score = 0.0f;  // larger is better
};

/// (score, id) lexicographic order: higher score first, lower id on ties.
inline bool ranks_before(const Candidate& x, const Candidate& y) {
  return x.score > y.score || (x.score == y.score && x.id < y.id);
}

struct SearchParams {
  size_t window = 50;
  size_t candidates_out = 50;

  void validate() const;
};

struct GraphBuildConfig {
  uint32_t max_degree = 128;
  uint32_t build_window = 200;
  float prune_alpha = 1.2f;
  std::optional<uint32_t> entry_point;  // medoid when empty
  uint64_t seed = 0x5eed;
  size_t threads = 1;
  size_t medoid_sample = 10000;

  void validate() const;
};

/// Directed graph with bounded out-degree over vector ids [0, n).
class GraphIndex {
 public:
  GraphIndex() = default;
  GraphIndex(std::vector<std::vector<uint32_t>> adjacency, uint32_t entry,
             uint32_t max_degree);

  size_t size() const { return adjacency_.size(); }
  bool empty() const { return adjacency_.empty(); }
  uint32_t entry() const { return entry_; }
  uint32_t max_degree() const { return max_degree_; }
  std::span<const uint32_t> neighbors(uint32_t id) const {
    return adjacency_[id];
  }
  const std::vector<std::vector<uint32_t>>& adjacency() const {
    return adjacency_;
  }

  /// No self loops, ids in range, out-degree <= max_degree.
  void validate() const;

  /// Nodes reachable from the entry point.
  size_t reachable_count() const;

  bool operator==(const GraphIndex&) const = default;

 private:
  std::vector<std::vector<uint32_t>> adjacency_;
  uint32_t entry_ = 0;
  uint32_t max_degree_ = 0;
};

/// Epoch-stamped visited set, reusable across queries.
class SearchScratch {
 public:
  void reset(size_t n) {
    if (stamps_.size() != n) {
      stamps_.assign(n, 0);
      epoch_ = 0;
    }
    if (++epoch_ == 0) {
      std::fill(stamps_.begin(), stamps_.end(), 0);
      epoch_ = 1;
    }
  }
  // True the first time `id` is seen since the last reset.
  bool visit(uint32_t id) {
    if (stamps_[id] == epoch_) return false;
    stamps_[id] = epoch_;
    return true;
  }

 private:
  std::vector<uint32_t> stamps_;
  uint32_t epoch_ = 0;
};

namespace detail {

/// Best-first search with a bounded pool. Returns the final pool ordered
/// best first. Expanded nodes are appended to `expanded` when given.
template <class NeighborsFn, class ScoreFn>
std::vector<Candidate> beam_search(size_t n, uint32_t entry,
                                   NeighborsFn&& neighbors, ScoreFn&& score,
                                   size_t window, SearchScratch& scratch,
                                   std::vector<Candidate>* expanded = nullptr) {
  struct Slot {
    Candidate c;
    bool expanded;
  };
  std::vector<Slot> pool;
  if (n == 0 || window == 0) return {};
  pool.reserve(window + 1);
  scratch.reset(n);
  scratch.visit(entry);
  pool.push_back({{entry, score(entry)}, false});

  size_t cursor = 0;  // no unexpanded slot before this index
  while (true) {
    while (cursor < pool.size() && pool[cursor].expanded) ++cursor;
    if (cursor == pool.size()) break;
    pool[cursor].expanded = true;
    const Candidate current = pool[cursor].c;
    if (expanded) expanded->push_back(current);

    size_t lowest_insert = pool.size();
    for (uint32_t nb : neighbors(current.id)) {
      if (!scratch.visit(nb)) continue;
      const Candidate cand{nb, score(nb)};
      if (pool.size() == window && !ranks_before(cand, pool.back().c)) continue;
      auto pos = std::upper_bound(
          pool.begin(), pool.end(), cand,
          [](const Candidate& x, const Slot& s) { return ranks_before(x, s.c); });
      lowest_insert = std::min(lowest_insert, static_cast<size_t>(pos - pool.begin()));
      pool.insert(pos, Slot{cand, false});
      if (pool.size() > window) pool.pop_back();
    }
    cursor = std::min(cursor, lowest_insert);
  }

  std::vector<Candidate> out;
  out.reserve(pool.size());
  for (const Slot& s : pool) out.push_back(s.c);
  return out;
}

}  // namespace detail

/// Greedy best-first traversal from the entry point. `score(id)` returns a
/// similarity (larger is better) and is called at most once per node.
/// Returns the best params.candidates_out nodes, best first.
template <class ScoreFn>
std::vector<Candidate> greedy_search(const GraphIndex& index, ScoreFn&& score,
                                     const SearchParams& params,
                                     SearchScratch* scratch = nullptr) {
  params.validate();
  SearchScratch local;
  SearchScratch& s = scratch ? *scratch : local;
  auto out = detail::beam_search(
      index.size(), index.entry(),
      [&](uint32_t id) { return index.neighbors(id); }, score, params.window, s);
  if (out.size() > params.candidates_out) out.resize(params.candidates_out);
  return out;
}

/// Occlusion pruning. Candidates are visited best first; c is kept unless
/// some already-kept c' has alpha * sim(c', c) >= sim(node, c), where
/// candidate scores hold sim(node, c). With similarities defined as negated
/// distances this is the usual alpha * d(c', c) <= d(node, c) rule. At most
/// max_degree ids are returned, in visiting order.
template <class PairSim>
std::vector<uint32_t> robust_prune(uint32_t node, std::vector<Candidate> candidates,
                                   float alpha, size_t max_degree,
                                   PairSim&& pair_similarity) {
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) { return x.id < y.id; });
  candidates.erase(std::unique(candidates.begin(), candidates.end(),
                               [](const Candidate& x, const Candidate& y) {
                                 return x.id == y.id;
                               }),
                   candidates.end());
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  std::vector<uint32_t> kept;
  for (const Candidate& c : candidates) {
    if (kept.size() >= max_degree) break;
    if (c.id == node) continue;
    bool occluded = false;
    for (uint32_t k : kept) {
      if (alpha * pair_similarity(k, c.id) >= c.score) {
        occluded = true;
        break;
      }
    }
    if (!occluded) kept.push_back(c.id);
  }
  return kept;
}

/// Index of the sample vector closest (Euclidean) to the sample centroid.
uint32_t find_medoid(const VectorStore& store, size_t sample);

/// Two passes over a seeded permutation of the nodes (alpha = 1, then
/// config.prune_alpha): search with the node as query, prune the visited
/// set, add reverse edges and re-prune any list that overflows.
/// Deterministic when config.threads == 1.
GraphIndex build_graph(const VectorStore& store, Metric metric,
                       const GraphBuildConfig& config);

}  // namespace projann
