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

#include "projann/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "projann/parallel.hpp"

namespace projann {

QueryResult rerank(std::span<const uint32_t> candidates, std::span<const float> q,
                   const VectorStore& secondary, Metric metric, size_t k) {
  const PreparedQuery pq = secondary.prepare(q, metric);
  std::vector<Candidate> scored;
  scored.reserve(candidates.size());
  for (uint32_t id : candidates) {
    if (id >= secondary.size()) throw ValidationError("rerank: candidate id out of range");
    scored.push_back({id, secondary.similarity(pq, id)});
  }
  std::sort(scored.begin(), scored.end(), ranks_before);
  scored.erase(std::unique(scored.begin(), scored.end(),
                           [](const Candidate& x, const Candidate& y) {
                             return x.id == y.id;
                           }),
               scored.end());
  if (scored.size() > k) scored.resize(k);
  QueryResult out;
  for (const Candidate& c : scored) {
    out.ids.push_back(c.id);
    out.scores.push_back(c.score);
  }
  return out;
}

TwoPhaseIndex::TwoPhaseIndex(ProjectionPair projection, VectorStore primary,
                             VectorStore secondary, GraphIndex graph,
                             Metric metric)
    : projection_(std::move(projection)),
      primary_(std::move(primary)),
      secondary_(std::move(secondary)),
      graph_(std::move(graph)),
      metric_(metric) {
  projection_.validate();
  if (primary_.dim() != static_cast<size_t>(projection_.d())) {
    throw ValidationError("primary store dimension " +
                          std::to_string(primary_.dim()) +
                          " != projection d " + std::to_string(projection_.d()));
  }
  if (secondary_.dim() != static_cast<size_t>(projection_.source_dim())) {
    throw ValidationError("secondary store dimension does not match projection D");
  }
  if (primary_.size() != secondary_.size() || graph_.size() != primary_.size()) {
    throw ValidationError("primary, secondary and graph sizes differ");
  }
  if (metric_ == Metric::euclidean && !projection_.shared()) {
    throw ValidationError(std::string(kEuclideanNeedsSharedProjection));
  }
  graph_.validate();
  query_map_ = projection_.a.cast<float>();
}

TwoPhaseIndex TwoPhaseIndex::build(const FloatMatrix& data,
                                   ProjectionPair projection,
                                   const IndexConfig& config) {
  projection.validate();
  if (data.cols() != projection.source_dim()) {
    throw ValidationError("data dimension " + std::to_string(data.cols()) +
                          " != projection D " +
                          std::to_string(projection.source_dim()));
  }
  if (config.metric == Metric::euclidean && !projection.shared()) {
    throw ValidationError(std::string(kEuclideanNeedsSharedProjection));
  }
  const FloatMatrix b = projection.b.cast<float>();
  const FloatMatrix reduced = data * b.transpose();
  VectorStore primary = VectorStore::encode(reduced, config.primary);
  VectorStore secondary = VectorStore::encode(data, config.secondary);
  GraphIndex graph = build_graph(primary, config.metric, config.graph);
  return TwoPhaseIndex(std::move(projection), std::move(primary),
                       std::move(secondary), std::move(graph), config.metric);
}

std::vector<float> TwoPhaseIndex::project_query(std::span<const float> q) const {
  if (q.size() != static_cast<size_t>(query_map_.cols())) {
    throw ValidationError("query dimension " + std::to_string(q.size()) +
                          " != index dimension " +
                          std::to_string(query_map_.cols()));
  }
  for (float v : q) {
    if (!std::isfinite(v)) throw ValidationError("query has a non-finite component");
  }
  projections_->fetch_add(1, std::memory_order_relaxed);
  Eigen::Map<const Eigen::VectorXf> qv(q.data(), static_cast<Eigen::Index>(q.size()));
  Eigen::VectorXf reduced = query_map_ * qv;
  return {reduced.data(), reduced.data() + reduced.size()};
}

std::vector<Candidate> TwoPhaseIndex::primary_search(std::span<const float> q,
                                                     const SearchParams& params,
                                                     SearchScratch* scratch) const {
  const PreparedQuery pq = primary_.prepare(project_query(q), metric_);
  return greedy_search(
      graph_, [&](uint32_t id) { return primary_.similarity(pq, id); }, params,
      scratch);
}

QueryResult TwoPhaseIndex::search(std::span<const float> q, size_t k,
                                  const SearchParams& params,
                                  SearchScratch* scratch) const {
  params.validate();
  if (k == 0) throw ValidationError("k must be >= 1");
  k = std::min(k, size());
  if (params.candidates_out < k) {
    throw ValidationError("candidates_out (" +
                          std::to_string(params.candidates_out) +
                          ") must be >= k (" + std::to_string(k) + ")");
  }
  const std::vector<Candidate> cands = primary_search(q, params, scratch);
  std::vector<uint32_t> ids;
  ids.reserve(cands.size());
  for (const Candidate& c : cands) ids.push_back(c.id);
  return rerank(ids, q, secondary_, metric_, k);
}

std::vector<QueryResult> TwoPhaseIndex::search_batch(const FloatMatrix& queries,
                                                     size_t k,
                                                     const SearchParams& params,
                                                     size_t threads) const {
  std::vector<QueryResult> out(static_cast<size_t>(queries.rows()));
  parallel_for(out.size(), threads, [&](size_t i) {
    thread_local SearchScratch scratch;
    out[i] = search(row(queries, static_cast<Eigen::Index>(i)), k, params, &scratch);
  });
  return out;
}

}  // namespace projann
