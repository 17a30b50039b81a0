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

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>

#include "projann/eval.hpp"
#include "projann/linalg.hpp"
#include "projann/pipeline.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace projann;
using projann::testing::gaussian;

IndexConfig small_config(Metric metric, StoreSpec primary = StoreSpec::lvq(8)) {
  IndexConfig c;
  c.metric = metric;
  c.primary = primary;
  c.graph.max_degree = 24;
  c.graph.build_window = 48;
  c.graph.prune_alpha = metric == Metric::euclidean ? 1.2f : 0.95f;
  return c;
}

ProjectionPair pca(const FloatMatrix& x, Eigen::Index d) {
  return train_id(linalg::accumulate_gram(x), d);
}

}  // namespace

TEST_CASE("lossless identity pipeline equals brute force") {
  std::mt19937_64 rng(60);
  const FloatMatrix x = gaussian(300, 8, rng);
  const FloatMatrix q = gaussian(20, 8, rng);
  for (Metric metric : {Metric::inner_product, Metric::euclidean}) {
    const TwoPhaseIndex index = TwoPhaseIndex::build(
        x, ProjectionPair::identity(8), small_config(metric, StoreSpec::float32()));
    const GroundTruth gt = brute_force_topk(x, q, 10, metric);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      const QueryResult r = index.search(row(q, i), 10, SearchParams{300, 300});
      CHECK(r.ids == gt.ids[i]);
    }
  }
}

TEST_CASE("rerank of every id is exact top-k") {
  std::mt19937_64 rng(61);
  const FloatMatrix x = gaussian(100, 6, rng);
  const FloatMatrix q = gaussian(5, 6, rng);
  const VectorStore store = VectorStore::encode(x, StoreSpec::float32());
  std::vector<uint32_t> all(100);
  std::iota(all.begin(), all.end(), 0u);
  std::shuffle(all.begin(), all.end(), rng);
  const GroundTruth gt = brute_force_topk(x, q, 7, Metric::inner_product);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const QueryResult r = rerank(all, row(q, i), store, Metric::inner_product, 7);
    CHECK(r.ids == gt.ids[i]);
    CHECK(std::is_sorted(r.scores.rbegin(), r.scores.rend()));
    // idempotent on its own output
    CHECK(rerank(r.ids, row(q, i), store, Metric::inner_product, 7) == r);
    const QueryResult top1 = rerank(all, row(q, i), store, Metric::inner_product, 1);
    REQUIRE(top1.ids.size() == 1);
    CHECK(top1.ids[0] == r.ids[0]);
  }
  const std::vector<uint32_t> bad{100};
  CHECK_THROWS_AS(rerank(bad, row(q, 0), store, Metric::inner_product, 1), ValidationError);
}

TEST_CASE("each search projects the query once") {
  std::mt19937_64 rng(62);
  const FloatMatrix x = gaussian(400, 16, rng);
  const FloatMatrix q = gaussian(25, 16, rng);
  const TwoPhaseIndex index =
      TwoPhaseIndex::build(x, pca(x, 6), small_config(Metric::inner_product));
  CHECK(index.projection_count() == 0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) index.search(row(q, i), 10, SearchParams{40, 20});
  CHECK(index.projection_count() == 25);
  index.search_batch(q, 10, SearchParams{40, 20});
  CHECK(index.projection_count() == 50);
}

TEST_CASE("k larger than the index returns every vector") {
  std::mt19937_64 rng(63);
  const FloatMatrix x = gaussian(20, 4, rng);
  const TwoPhaseIndex index = TwoPhaseIndex::build(
      x, ProjectionPair::identity(4), small_config(Metric::euclidean, StoreSpec::float32()));
  const FloatMatrix q = gaussian(1, 4, rng);
  const QueryResult r = index.search(row(q, 0), 50, SearchParams{50, 50});
  CHECK(r.ids.size() == 20);
  std::vector<uint32_t> sorted = r.ids;
  std::sort(sorted.begin(), sorted.end());
  for (uint32_t i = 0; i < 20; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("input validation") {
  std::mt19937_64 rng(64);
  const FloatMatrix x = gaussian(100, 8, rng);
  ProjectionPair unequal{Mat::Identity(4, 8), 0.5 * Mat::Identity(4, 8), false};
  try {
    TwoPhaseIndex::build(x, unequal, small_config(Metric::euclidean));
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == kEuclideanNeedsSharedProjection);
  }
  // inner product accepts the same pair
  const TwoPhaseIndex ip = TwoPhaseIndex::build(x, unequal, small_config(Metric::inner_product));
  const std::vector<float> short_q(7, 1.0f);
  CHECK_THROWS_AS(ip.search(short_q, 5, SearchParams{10, 10}), ValidationError);
  std::vector<float> nan_q(8, 1.0f);
  nan_q[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(ip.search(nan_q, 5, SearchParams{10, 10}), ValidationError);
  const std::vector<float> q(8, 1.0f);
  CHECK_THROWS_AS(ip.search(q, 0, SearchParams{10, 10}), ValidationError);
  CHECK_THROWS_AS(ip.search(q, 20, SearchParams{10, 10}), ValidationError);
  CHECK_THROWS_AS(TwoPhaseIndex::build(gaussian(100, 9, rng), unequal,
                                       small_config(Metric::inner_product)),
                  ValidationError);
}

TEST_CASE("recall grows with the rerank budget") {
  std::mt19937_64 rng(65);
  projann::testing::InstanceShape shape;
  shape.n = 3000;
  shape.dim = 48;
  shape.rank = 12;
  shape.learn = 200;
  shape.test = 100;
  shape.ood = false;
  const auto inst = projann::testing::low_rank_instance(shape, 66);
  const TwoPhaseIndex index =
      TwoPhaseIndex::build(inst.data, pca(inst.data, 16), small_config(Metric::inner_product));
  const GroundTruth gt = brute_force_topk(inst.data, inst.test_queries, 10, Metric::inner_product);
  double prev = 0.0;
  for (size_t budget : {10, 20, 50, 100}) {
    const auto results = index.search_batch(inst.test_queries, 10, SearchParams{100, budget});
    const double r = mean_recall(results, gt, 10);
    CHECK(r >= prev);
    prev = r;
  }
  CHECK(prev >= 0.9);
}

TEST_CASE("batch search equals per-query search") {
  std::mt19937_64 rng(67);
  const FloatMatrix x = gaussian(500, 12, rng);
  const FloatMatrix q = gaussian(30, 12, rng);
  const TwoPhaseIndex index =
      TwoPhaseIndex::build(x, pca(x, 6), small_config(Metric::euclidean));
  const auto batch = index.search_batch(q, 5, SearchParams{30, 15}, 3);
  REQUIRE(batch.size() == 30);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    CHECK(batch[i] == index.search(row(q, i), 5, SearchParams{30, 15}));
  }
}
