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

#include "projann/eval.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <string>
#include <unordered_set>

#include "projann/parallel.hpp"

namespace projann {

void GroundTruth::validate() const {
  const size_t k = depth();
  for (const auto& list : ids) {
    if (list.size() != k) throw ValidationError("ground truth depth is not uniform");
    std::unordered_set<uint32_t> seen(list.begin(), list.end());
    if (seen.size() != list.size()) {
      throw ValidationError("ground truth has duplicate ids for a query");
    }
  }
}

GroundTruth brute_force_topk(const FloatMatrix& dataset, const FloatMatrix& queries,
                             size_t k, Metric metric, size_t threads) {
  if (dataset.cols() != queries.cols()) {
    throw ValidationError("brute_force_topk: query and dataset dimensions differ");
  }
  const auto n = static_cast<size_t>(dataset.rows());
  if (k == 0 || k > n) {
    throw ValidationError("brute_force_topk: k=" + std::to_string(k) +
                          " must lie in [1, n=" + std::to_string(n) + "]");
  }
  GroundTruth gt;
  gt.metric = metric;
  gt.ids.resize(static_cast<size_t>(queries.rows()));
  parallel_for(gt.ids.size(), threads, [&](size_t qi) {
    const auto q = row(queries, static_cast<Eigen::Index>(qi));
    std::vector<Candidate> all(n);
    for (size_t i = 0; i < n; ++i) {
      all[i] = {static_cast<uint32_t>(i),
                exact_similarity(metric, q, row(dataset, static_cast<Eigen::Index>(i)))};
    }
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                      all.end(), ranks_before);
    auto& out = gt.ids[qi];
    out.resize(k);
    for (size_t j = 0; j < k; ++j) out[j] = all[j].id;
  });
  return gt;
}

double recall(std::span<const uint32_t> result, std::span<const uint32_t> truth,
              size_t k) {
  if (k == 0) throw ValidationError("recall: k must be >= 1");
  if (result.size() < k || truth.size() < k) {
    throw ValidationError("recall: need at least k=" + std::to_string(k) +
                          " result and truth ids");
  }
  std::unordered_set<uint32_t> expected(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(k));
  size_t hits = 0;
  for (size_t i = 0; i < k; ++i) hits += expected.count(result[i]);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double mean_recall(const std::vector<QueryResult>& results,
                   const GroundTruth& truth, size_t k) {
  if (truth.ids.size() < results.size()) {
    throw ValidationError("mean_recall: fewer ground-truth rows than results");
  }
  if (results.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < results.size(); ++i) {
    total += recall(results[i].ids, truth.ids[i], k);
  }
  return total / static_cast<double>(results.size());
}

BenchReport bench(const TwoPhaseIndex& index, const FloatMatrix& queries,
                  const GroundTruth& truth, std::span<const SweepPoint> sweep,
                  const BenchOptions& options) {
  if (truth.ids.empty() || truth.ids.size() < static_cast<size_t>(queries.rows())) {
    throw ValidationError("bench: ground truth missing for some queries");
  }
  if (truth.depth() < options.k) {
    throw ValidationError("bench: ground truth depth below k");
  }
  if (options.runs < 1) throw ValidationError("bench: runs must be >= 1");
  if (queries.rows() == 0) throw ValidationError("bench: no queries");

  BenchReport report;
  report.k = options.k;
  for (const SweepPoint& point : sweep) {
    const SearchParams params{point.window, point.candidates_out};
    params.validate();
    BenchRow row_out;
    row_out.point = point;
    std::vector<QueryResult> first;
    double best_seconds = 0.0;
    for (size_t run = 0; run < options.runs; ++run) {
      const auto start = std::chrono::steady_clock::now();
      auto results = index.search_batch(queries, options.k, params, options.threads);
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start;
      if (run == 0) {
        first = std::move(results);
        best_seconds = elapsed.count();
      } else {
        if (results != first) {
          throw std::logic_error("bench: search results changed between runs");
        }
        best_seconds = std::min(best_seconds, elapsed.count());
      }
    }
    row_out.recall = mean_recall(first, truth, options.k);
    best_seconds = std::max(best_seconds, 1e-9);
    row_out.qps = static_cast<double>(queries.rows()) / best_seconds;
    row_out.wall_ms = best_seconds * 1e3;
    report.rows.push_back(row_out);
  }
  return report;
}

void write_csv(const BenchReport& report, std::ostream& out) {
  out << "W,candidates_out,recall_at_10,qps,wall_ms\n";
  for (const BenchRow& r : report.rows) {
    out << r.point.window << ',' << r.point.candidates_out << ',' << r.recall
        << ',' << r.qps << ',' << r.wall_ms << '\n';
  }
}

}  // namespace projann
