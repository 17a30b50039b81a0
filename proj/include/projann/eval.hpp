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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "projann/common.hpp"
#include "projann/graph.hpp"
#include "projann/pipeline.hpp"

namespace projann {

/// Exact top-K ids per query, best first.
struct GroundTruth {
  std::vector<std::vector<uint32_t>> ids;
  Metric metric = Metric::inner_product;

  size_t depth() const { return ids.empty() ? 0 : ids.front().size(); }
  void validate() const;
};

/// Full scan with exact_similarity and (score, id) ordering.
GroundTruth brute_force_topk(const FloatMatrix& dataset, const FloatMatrix& queries,
                             size_t k, Metric metric, size_t threads = 1);

/// |S ∩ G| / k after truncating both lists to k.
double recall(std::span<const uint32_t> result, std::span<const uint32_t> truth,
              size_t k);

/// Mean k-recall@k over a batch.
double mean_recall(const std::vector<QueryResult>& results,
                   const GroundTruth& truth, size_t k);

struct SweepPoint {
  size_t window = 50;
  size_t candidates_out = 50;
};

struct BenchRow {
  SweepPoint point;
  double recall = 0.0;
  double qps = 0.0;
  double wall_ms = 0.0;  // wall time of the fastest run
};

struct BenchOptions {
  size_t k = 10;
  size_t runs = 10;
  size_t threads = 1;
};

struct BenchReport {
  size_t k = 10;
  std::vector<BenchRow> rows;
};

/// For every sweep point runs all queries `runs` times and keeps the best
/// QPS. Recall comes from the first run; results are deterministic, so later
/// runs must agree.
BenchReport bench(const TwoPhaseIndex& index, const FloatMatrix& queries,
                  const GroundTruth& truth, std::span<const SweepPoint> sweep,
                  const BenchOptions& options = {});

/// Header `W,candidates_out,recall_at_10,qps,wall_ms`, one row per point.
void write_csv(const BenchReport& report, std::ostream& out);

}  // namespace projann
