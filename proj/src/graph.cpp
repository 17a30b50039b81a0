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

#include "projann/graph.hpp"

#include <mutex>
#include <queue>
#include <random>
#include <string>
#include <thread>

#include "projann/projection.hpp"

namespace projann {

void SearchParams::validate() const {
  if (window < 1) throw ValidationError("search window must be >= 1");
  if (candidates_out < 1) throw ValidationError("candidates_out must be >= 1");
  if (candidates_out > window) {
    throw ValidationError("candidates_out (" + std::to_string(candidates_out) +
                          ") exceeds the search window (" +
                          std::to_string(window) + ")");
  }
}

void GraphBuildConfig::validate() const {
  if (max_degree < 2) throw ValidationError("max degree R must be >= 2");
  if (build_window < max_degree) {
    throw ValidationError("build window L must be >= R");
  }
  if (!(prune_alpha > 0.0f)) throw ValidationError("prune alpha must be > 0");
  if (threads < 1) throw ValidationError("threads must be >= 1");
}

GraphIndex::GraphIndex(std::vector<std::vector<uint32_t>> adjacency,
                       uint32_t entry, uint32_t max_degree)
    : adjacency_(std::move(adjacency)), entry_(entry), max_degree_(max_degree) {
  validate();
}

void GraphIndex::validate() const {
  const size_t n = adjacency_.size();
  if (n == 0) return;
  if (entry_ >= n) throw ValidationError("graph entry point out of range");
  for (size_t i = 0; i < n; ++i) {
    const auto& nbrs = adjacency_[i];
    if (nbrs.size() > max_degree_) {
      throw ValidationError("node " + std::to_string(i) + " has out-degree " +
                            std::to_string(nbrs.size()) + " > R=" +
                            std::to_string(max_degree_));
    }
    for (uint32_t j : nbrs) {
      if (j >= n) throw ValidationError("neighbor id out of range");
      if (j == i) throw ValidationError("self loop at node " + std::to_string(i));
    }
  }
}

size_t GraphIndex::reachable_count() const {
  if (adjacency_.empty()) return 0;
  std::vector<bool> seen(adjacency_.size());
  std::queue<uint32_t> frontier;
  frontier.push(entry_);
  seen[entry_] = true;
  size_t count = 1;
  while (!frontier.empty()) {
    const uint32_t u = frontier.front();
    frontier.pop();
    for (uint32_t v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        frontier.push(v);
      }
    }
  }
  return count;
}

uint32_t find_medoid(const VectorStore& store, size_t sample) {
  if (store.size() == 0) throw ValidationError("find_medoid: empty store");
  const auto ids = stride_sample(static_cast<Eigen::Index>(store.size()), sample);
  const size_t dim = store.dim();
  std::vector<double> centroid(dim, 0.0);
  std::vector<float> buf(dim);
  for (Eigen::Index id : ids) {
    store.decode(static_cast<size_t>(id), buf);
    for (size_t j = 0; j < dim; ++j) centroid[j] += buf[j];
  }
  std::vector<float> center(dim);
  for (size_t j = 0; j < dim; ++j) {
    center[j] = static_cast<float>(centroid[j] / static_cast<double>(ids.size()));
  }
  const PreparedQuery pq = store.prepare(center, Metric::euclidean);
  Candidate best{static_cast<uint32_t>(ids.front()),
                 store.similarity(pq, static_cast<size_t>(ids.front()))};
  for (Eigen::Index id : ids) {
    const Candidate c{static_cast<uint32_t>(id),
                      store.similarity(pq, static_cast<size_t>(id))};
    if (ranks_before(c, best)) best = c;
  }
  return best.id;
}

namespace {

class Builder {
 public:
  Builder(const VectorStore& store, Metric metric, const GraphBuildConfig& config)
      : store_(store),
        metric_(metric),
        config_(config),
        adjacency_(store.size()),
        locks_(config.threads > 1 ? store.size() : 0) {}

  std::vector<std::vector<uint32_t>> run(uint32_t entry) {
    entry_ = entry;
    const size_t n = store_.size();
    std::vector<uint32_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = static_cast<uint32_t>(i);
    std::mt19937_64 rng(config_.seed);
    for (size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }

    for (float alpha : {1.0f, config_.prune_alpha}) {
      if (config_.threads == 1) {
        SearchScratch scratch;
        for (uint32_t p : order) update(p, alpha, scratch);
      } else {
        std::vector<std::jthread> workers;
        for (size_t w = 0; w < config_.threads; ++w) {
          workers.emplace_back([&, w] {
            SearchScratch scratch;
            for (size_t i = w; i < n; i += config_.threads) {
              update(order[i], alpha, scratch);
            }
          });
        }
      }
    }
    // removing an edge can in rare cases cut off a node marked earlier
    for (int round = 0; round < 4 && connect_unreachable(); ++round) {
    }
    return std::move(adjacency_);
  }

 private:
  std::vector<uint32_t> neighbors_of(uint32_t id) {
    if (locks_.empty()) return adjacency_[id];
    std::lock_guard guard(locks_[id]);
    return adjacency_[id];
  }

  // Similarity between stored vectors `k` and `c`, with `c` as the query.
  // Prune loops hold `c` fixed while scanning kept ids, so its prepared
  // form is cached.
  struct PairScorer {
    const VectorStore& store;
    Metric metric;
    uint32_t cached = UINT32_MAX;
    PreparedQuery pq;
    float operator()(uint32_t k, uint32_t c) {
      if (c != cached) {
        pq = store.prepare(store.decode(c), metric);
        cached = c;
      }
      return store.similarity(pq, k);
    }
  };

  std::vector<uint32_t> prune(uint32_t node, std::vector<Candidate> cands,
                              float alpha) {
    PairScorer scorer{store_, metric_, UINT32_MAX, {}};
    return robust_prune(node, std::move(cands), alpha, config_.max_degree, scorer);
  }

  void update(uint32_t p, float alpha, SearchScratch& scratch) {
    const PreparedQuery pq = store_.prepare(store_.decode(p), metric_);
    auto score = [&](uint32_t id) { return store_.similarity(pq, id); };

    std::vector<Candidate> cands;
    std::vector<Candidate> pool =
        locks_.empty()
            ? detail::beam_search(
                  store_.size(), entry_,
                  [&](uint32_t id) {
                    return std::span<const uint32_t>(adjacency_[id]);
                  },
                  score, config_.build_window, scratch, &cands)
            : detail::beam_search(
                  store_.size(), entry_,
                  [&](uint32_t id) { return neighbors_of(id); }, score,
                  config_.build_window, scratch, &cands);
    cands.insert(cands.end(), pool.begin(), pool.end());
    for (uint32_t id : neighbors_of(p)) cands.push_back({id, score(id)});

    std::vector<uint32_t> pruned = prune(p, std::move(cands), alpha);
    if (locks_.empty()) {
      adjacency_[p] = pruned;
    } else {
      std::lock_guard guard(locks_[p]);
      adjacency_[p] = pruned;
    }

    for (uint32_t j : pruned) add_reverse_edge(j, p, alpha);
  }

  void add_reverse_edge(uint32_t j, uint32_t p, float alpha) {
    std::unique_lock<std::mutex> guard;
    if (!locks_.empty()) guard = std::unique_lock(locks_[j]);
    auto& list = adjacency_[j];
    if (std::find(list.begin(), list.end(), p) != list.end()) return;
    if (list.size() < config_.max_degree) {
      list.push_back(p);
      return;
    }
    const PreparedQuery pq = store_.prepare(store_.decode(j), metric_);
    std::vector<Candidate> cands;
    cands.reserve(list.size() + 1);
    for (uint32_t id : list) cands.push_back({id, store_.similarity(pq, id)});
    cands.push_back({p, store_.similarity(pq, p)});
    list = prune(j, std::move(cands), alpha);
  }

  // Marks everything reachable from `from` that is not yet marked.
  void mark_reachable(uint32_t from, std::vector<bool>& seen) const {
    std::vector<uint32_t> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
      const uint32_t u = stack.back();
      stack.pop_back();
      for (uint32_t v : adjacency_[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }

  // Pruning can strip every in-edge of a node (under inner product, short
  // vectors are rarely anyone's best neighbor). Each such node gets an edge
  // from the closest reachable node found by searching for it; a full list
  // gives up its last edge whose target has another in-edge.
  // Returns whether any node was unreachable.
  bool connect_unreachable() {
    const size_t n = store_.size();
    std::vector<bool> seen(n, false);
    mark_reachable(entry_, seen);
    if (std::find(seen.begin(), seen.end(), false) == seen.end()) return false;
    std::vector<uint32_t> in_degree(n, 0);
    for (const auto& list : adjacency_)
      for (uint32_t v : list) ++in_degree[v];

    SearchScratch scratch;
    for (uint32_t u = 0; u < n; ++u) {
      if (seen[u]) continue;
      const PreparedQuery pq = store_.prepare(store_.decode(u), metric_);
      auto score = [&](uint32_t id) { return store_.similarity(pq, id); };
      const auto pool = detail::beam_search(
          n, entry_,
          [&](uint32_t id) { return std::span<const uint32_t>(adjacency_[id]); },
          score, config_.build_window, scratch);
      uint32_t source = UINT32_MAX;
      for (const Candidate& c : pool) {
        if (c.id != u && adjacency_[c.id].size() < config_.max_degree) {
          source = c.id;
          break;
        }
      }
      if (source == UINT32_MAX) {
        for (const Candidate& c : pool) {
          if (c.id == u) continue;
          auto& list = adjacency_[c.id];
          for (size_t k = list.size(); k-- > 0;) {
            if (in_degree[list[k]] > 1) {
              --in_degree[list[k]];
              list.erase(list.begin() + static_cast<std::ptrdiff_t>(k));
              source = c.id;
              break;
            }
          }
          if (source != UINT32_MAX) break;
        }
      }
      if (source == UINT32_MAX) continue;  // nothing can give up an edge
      adjacency_[source].push_back(u);
      ++in_degree[u];
      mark_reachable(u, seen);
    }
    return true;
  }

  const VectorStore& store_;
  Metric metric_;
  const GraphBuildConfig& config_;
  uint32_t entry_ = 0;
  std::vector<std::vector<uint32_t>> adjacency_;
  std::vector<std::mutex> locks_;
};

}  // namespace

GraphIndex build_graph(const VectorStore& store, Metric metric,
                       const GraphBuildConfig& config) {
  config.validate();
  if (store.size() == 0) throw ValidationError("build_graph: empty store");
  if (store.size() > UINT32_MAX) throw ValidationError("build_graph: too many vectors");
  uint32_t entry;
  if (config.entry_point) {
    if (*config.entry_point >= store.size()) {
      throw ValidationError("build_graph: entry point out of range");
    }
    entry = *config.entry_point;
  } else {
    entry = find_medoid(store, config.medoid_sample);
  }
  Builder builder(store, metric, config);
  return GraphIndex(builder.run(entry), entry, config.max_degree);
}

}  // namespace projann
