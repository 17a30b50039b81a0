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

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "projann/common.hpp"
#include "projann/graph.hpp"
#include "projann/projection.hpp"
#include "projann/vector_store.hpp"

namespace projann {

inline constexpr std::string_view kEuclideanNeedsSharedProjection =
    "euclidean metric requires a shared projection (a == b); "
    "||a q - b x|| does not approximate ||q - x|| when a != b";

struct IndexConfig {
  Metric metric = Metric::inner_product;
  StoreSpec primary = StoreSpec::lvq(8);
  StoreSpec secondary = StoreSpec::float32();
  GraphBuildConfig graph;
};

struct QueryResult {
  std::vector<uint32_t> ids;
  std::vector<float> scores;  // best first

  bool operator==(const QueryResult&) const = default;
};

/// Exact re-scoring of `candidates` against the secondary store; returns
/// the best k under (score, id) order.
QueryResult rerank(std::span<const uint32_t> candidates, std::span<const float> q,
                   const VectorStore& secondary, Metric metric, size_t k);

/// Graph index over reduced, compressed primary vectors b x, with
/// full-dimensional secondary vectors for re-ranking.
class TwoPhaseIndex {
 public:
  TwoPhaseIndex(ProjectionPair projection, VectorStore primary,
                VectorStore secondary, GraphIndex graph, Metric metric);

  /// Projects `data` with projection.b, encodes both stores and builds the
  /// graph over the primary vectors.
  static TwoPhaseIndex build(const FloatMatrix& data, ProjectionPair projection,
                             const IndexConfig& config);

  /// a q in single precision.
  std::vector<float> project_query(std::span<const float> q) const;

  /// Graph traversal on primary vectors only.
  std::vector<Candidate> primary_search(std::span<const float> q,
                                        const SearchParams& params,
                                        SearchScratch* scratch = nullptr) const;

  /// Project once, traverse, re-rank params.candidates_out survivors.
  QueryResult search(std::span<const float> q, size_t k,
                     const SearchParams& params,
                     SearchScratch* scratch = nullptr) const;

  std::vector<QueryResult> search_batch(const FloatMatrix& queries, size_t k,
                                        const SearchParams& params,
                                        size_t threads = 1) const;

  const ProjectionPair& projection() const { return projection_; }
  const VectorStore& primary() const { return primary_; }
  const VectorStore& secondary() const { return secondary_; }
  const GraphIndex& graph() const { return graph_; }
  Metric metric() const { return metric_; }
  size_t size() const { return primary_.size(); }

  /// Number of query projections performed so far.
  uint64_t projection_count() const { return projections_->load(); }

 private:
  ProjectionPair projection_;
  FloatMatrix query_map_;  // projection.a in float
  VectorStore primary_;
  VectorStore secondary_;
  GraphIndex graph_;
  Metric metric_;
  std::unique_ptr<std::atomic<uint64_t>> projections_ =
      std::make_unique<std::atomic<uint64_t>>(0);
};

}  // namespace projann
