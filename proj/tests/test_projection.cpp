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

#include "projann/linalg.hpp"
#include "projann/projection.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace projann;
using projann::testing::gaussian;
using projann::testing::gaussian_mat;

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

GramPair raw_grams(const FloatMatrix& x, const FloatMatrix& q) {
  GramOptions opt;
  opt.normalize_queries = false;
  return compute_grams(x, q, opt);
}

// Data and queries confined to the span of `basis` rows (d x D orthonormal).
GramPair subspace_grams(const Mat& basis, std::mt19937_64& rng) {
  const Eigen::Index d = basis.rows();
  const FloatMatrix x = (gaussian_mat(400, d, rng) * basis).cast<float>();
  const FloatMatrix q = (gaussian_mat(300, d, rng) * basis).cast<float>();
  GramPair g;
  g.k_x = linalg::accumulate_gram(x);
  g.k_q = linalg::accumulate_gram(q);
  g.n = 400;
  g.m = 300;
  return g;
}

Mat random_stiefel(Eigen::Index d, Eigen::Index big_d, std::mt19937_64& rng) {
  return projann::testing::random_rotation(big_d, rng).topRows(d);
}

}  // namespace

TEST_CASE("stride sampling") {
  CHECK(stride_sample(10, 4) == std::vector<Eigen::Index>{0, 3, 6, 9});
  CHECK(stride_sample(3, 10) == std::vector<Eigen::Index>{0, 1, 2});
  CHECK(stride_sample(5120, 512).size() == 512);
}

TEST_CASE("query normalization gives unit trace") {
  std::mt19937_64 rng(20);
  const FloatMatrix x = gaussian(50, 6, rng);
  const FloatMatrix q = gaussian(40, 6, rng, 7.0f);
  const GramPair g = compute_grams(x, q);
  CHECK(g.m == 40);
  CHECK(g.n == 50);
  CHECK(g.k_q.trace() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.k_x == linalg::accumulate_gram(x));
}

TEST_CASE("gram computation enforces the minimum sample count") {
  std::mt19937_64 rng(21);
  CHECK_THROWS_AS(compute_grams(gaussian(5, 8, rng), gaussian(20, 8, rng)), ValidationError);
  GramOptions opt;
  opt.max_queries = 4;
  CHECK_THROWS_AS(compute_grams(gaussian(20, 8, rng), gaussian(20, 8, rng), opt),
                  ValidationError);
  CHECK_THROWS_AS(compute_grams(gaussian(20, 8, rng), gaussian(20, 7, rng)), ValidationError);
}

TEST_CASE("PCA projection is shared, orthonormal and spans the leading eigenvectors") {
  std::mt19937_64 rng(22);
  const FloatMatrix x = gaussian(300, 10, rng) *
                        Eigen::VectorXf::LinSpaced(10, 5.0f, 0.5f).asDiagonal();
  const Mat k = linalg::accumulate_gram(x);
  const ProjectionPair p = train_id(k, 3);
  CHECK(p.shared());
  CHECK(p.orthonormal);
  CHECK(linalg::orthonormality_error(p.a) <= 1e-10);
  const linalg::EigenResult e = linalg::sym_eig(k);
  const Mat top = e.vectors.leftCols(3);
  // projector equality
  CHECK(max_abs(p.a.transpose() * p.a - top * top.transpose()) <= 1e-8);
  // reconstruction loss against a naive residual sum
  const Mat xd = x.cast<double>();
  const double naive = (xd - xd * p.a.transpose() * p.a).squaredNorm();
  CHECK(reconstruction_loss(p.a, k) == doctest::Approx(naive).epsilon(1e-9));
  CHECK(reconstruction_loss(p.a, k) == doctest::Approx(e.values.tail(7).sum()).epsilon(1e-9));
  CHECK_THROWS_AS(train_id(k, 10), ValidationError);
  CHECK_THROWS_AS(train_id(k, 0), ValidationError);
}

TEST_CASE("loss at zero projections is tr(Kq Kx)") {
  std::mt19937_64 rng(23);
  const GramPair g = raw_grams(gaussian(30, 5, rng), gaussian(20, 5, rng));
  CHECK(ood_loss(Mat::Zero(2, 5), Mat::Zero(2, 5), g) ==
        doctest::Approx((g.k_q * g.k_x).trace()).epsilon(1e-12));
}

TEST_CASE("loss equals the materialized pairwise form") {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const FloatMatrix x = gaussian(40, 9, rng);
    const FloatMatrix q = gaussian(35, 9, rng);
    const Mat a = gaussian_mat(4, 9, rng);
    const Mat b = gaussian_mat(4, 9, rng);
    const Mat xd = x.cast<double>(), qd = q.cast<double>();
    const double frob = ((qd * a.transpose()) * (b * xd.transpose()) - qd * xd.transpose())
                            .squaredNorm();
    CHECK(ood_loss(a, b, raw_grams(x, q)) == doctest::Approx(frob).epsilon(1e-9));
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(25);
  const GramPair g = raw_grams(gaussian(60, 10, rng), gaussian(60, 10, rng));
  const Mat a = 0.3 * gaussian_mat(3, 10, rng);
  const Mat b = 0.3 * gaussian_mat(3, 10, rng);
  const auto [ga, gb] = ood_gradients(a, b, g);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    Mat ap = a, am = a;
    ap.data()[i] += h;
    am.data()[i] -= h;
    worst = std::max(worst, std::abs((ood_loss(ap, b, g) - ood_loss(am, b, g)) / (2 * h) -
                                     ga.data()[i]));
    Mat bp = b, bm = b;
    bp.data()[i] += h;
    bm.data()[i] -= h;
    worst = std::max(worst, std::abs((ood_loss(a, bp, g) - ood_loss(a, bm, g)) / (2 * h) -
                                     gb.data()[i]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("zero query Gram gives zero gradients and gaps") {
  std::mt19937_64 rng(26);
  GramPair g = raw_grams(gaussian(30, 6, rng), gaussian(30, 6, rng));
  g.k_q.setZero();
  const Mat a = 0.2 * gaussian_mat(2, 6, rng);
  const Mat b = 0.2 * gaussian_mat(2, 6, rng);
  const auto [ga, gb] = ood_gradients(a, b, g);
  CHECK(max_abs(ga) == 0.0);
  CHECK(max_abs(gb) == 0.0);
  const FwGap gap = fw_gap(ProjectionPair{a, b, false}, g);
  CHECK(gap.a == 0.0);
  CHECK(gap.b == 0.0);
}

TEST_CASE("gap vanishes at a global minimum") {
  std::mt19937_64 rng(27);
  const Mat basis = random_stiefel(3, 8, rng);
  const GramPair g = subspace_grams(basis, rng);
  const FwGap gap = fw_gap(ProjectionPair::same(basis), g);
  CHECK(std::abs(gap.a) <= 1e-6);
  CHECK(std::abs(gap.b) <= 1e-6);
}

TEST_CASE("gap dominates random Stiefel directions and is nonnegative") {
  std::mt19937_64 rng(28);
  const GramPair g = raw_grams(gaussian(50, 8, rng), gaussian(50, 8, rng));
  const Mat a = linalg::stiefel_retract(gaussian_mat(3, 8, rng)) * 0.6;
  const Mat b = linalg::stiefel_retract(gaussian_mat(3, 8, rng)) * 0.8;
  const ProjectionPair p{a, b, false};
  const FwGap gap = fw_gap(p, g);
  CHECK(gap.a >= -1e-8);
  CHECK(gap.b >= -1e-8);
  const Mat neg_ga = -ood_gradients(a, b, g).first;
  const Mat s = linalg::spectral_lmo(neg_ga).s;
  CHECK(gap.a == doctest::Approx(neg_ga.cwiseProduct(s - a).sum()).epsilon(1e-12));
  // at the LMO point itself the gap expression is zero
  CHECK(std::abs(neg_ga.cwiseProduct(s - s).sum()) <= 1e-8);
  for (int i = 0; i < 500; ++i) {
    const Mat t = random_stiefel(3, 8, rng);
    CHECK(gap.a >= neg_ga.cwiseProduct(t - a).sum() - 1e-9);
  }
}

TEST_CASE("first Frank-Wolfe iterate from zero is in the hull") {
  std::mt19937_64 rng(29);
  const GramPair g = compute_grams(gaussian(100, 12, rng), gaussian(80, 12, rng));
  FwConfig cfg;
  cfg.max_iters = 1;
  const FwResult r = train_ood_fw(g, 4, cfg);
  // zero gradient at the origin: the LMO falls back to the truncated identity
  CHECK(r.pair.a == linalg::truncated_identity(4, 12));
  CHECK(linalg::op_norm(r.pair.b) <= 1.0 + 1e-6);
  CHECK(r.report.iterations_run == 1);
  CHECK(r.report.losses.size() == 2);
  CHECK(r.report.termination == Termination::max_iters);
  CHECK_FALSE(r.pair.orthonormal);
}

TEST_CASE("Frank-Wolfe report and hull feasibility") {
  std::mt19937_64 rng(30);
  const auto inst = projann::testing::rotated_instance(600, 300, 24, true, 31);
  const GramPair g = compute_grams(inst.data, inst.learn_queries);
  for (int max_iters = 1; max_iters <= 40; max_iters += 13) {
    FwConfig cfg;
    cfg.max_iters = max_iters;
    cfg.rel_tol = 1e-12;
    const FwResult r = train_ood_fw(g, 6, cfg);
    CHECK(linalg::op_norm(r.pair.a) <= 1.0 + 1e-6);
    CHECK(linalg::op_norm(r.pair.b) <= 1.0 + 1e-6);
    r.pair.validate();
  }
  const FwResult r = train_ood_fw(g, 6);
  const auto& rep = r.report;
  CHECK(rep.termination == Termination::tolerance);
  CHECK(rep.losses.size() == static_cast<size_t>(rep.iterations_run) + 1);
  CHECK(rep.gaps_a.size() == static_cast<size_t>(rep.iterations_run));
  CHECK(rep.steps.front() == 1.0);
  for (size_t t = 0; t < rep.gaps_a.size(); ++t) {
    CHECK(rep.gaps_a[t] >= -1e-8);
    CHECK(rep.gaps_b[t] >= -1e-8);
    CHECK(rep.steps[t] == doctest::Approx(std::pow(t + 1.0, -0.75)));
  }
  const size_t last = rep.losses.size() - 1;
  CHECK(std::abs(rep.losses[last] - rep.losses[last - 1]) <= 1e-3 * rep.losses[last - 1]);
  CHECK(rep.losses.back() == doctest::Approx(ood_loss(r.pair, g)).epsilon(1e-12));
  CHECK_FALSE(rep.loss_before_retraction.has_value());
}

TEST_CASE("Frank-Wolfe retraction records both losses") {
  std::mt19937_64 rng(32);
  const GramPair g = compute_grams(gaussian(200, 10, rng), gaussian(100, 10, rng));
  FwConfig cfg;
  cfg.retract_output = true;
  const FwResult r = train_ood_fw(g, 3, cfg);
  CHECK(r.pair.orthonormal);
  r.pair.validate();
  REQUIRE(r.report.loss_before_retraction.has_value());
  CHECK(*r.report.loss_before_retraction == r.report.losses.back());
  CHECK(*r.report.loss_after_retraction == doctest::Approx(ood_loss(r.pair, g)));
}

TEST_CASE("Frank-Wolfe reaches zero loss on an exact shared subspace") {
  std::mt19937_64 rng(33);
  const Mat basis = random_stiefel(3, 10, rng);
  const GramPair g = subspace_grams(basis, rng);
  // sublinear rate: the default 500 iterations stop near 4e-5 relative
  FwConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.max_iters = 10000;
  const FwResult r = train_ood_fw(g, 3, cfg);
  CHECK(ood_loss(r.pair, g) <= 1e-6 * (g.k_q * g.k_x).trace());
}

TEST_CASE("Frank-Wolfe validates its configuration and inputs") {
  std::mt19937_64 rng(34);
  const GramPair g = compute_grams(gaussian(40, 6, rng), gaussian(40, 6, rng));
  FwConfig bad;
  bad.alpha = 1.0;
  CHECK_THROWS_AS(train_ood_fw(g, 2, bad), ValidationError);
  CHECK_THROWS_AS(train_ood_fw(g, 6), ValidationError);
  GramPair neg = g;
  neg.k_x = -neg.k_x;
  CHECK_THROWS_AS(train_ood_fw(neg, 2), ValidationError);
}

TEST_CASE("eigenvector search is beta invariant in the exact in-distribution case") {
  std::mt19937_64 rng(35);
  const FloatMatrix x = gaussian(200, 12, rng);
  GramOptions opt;
  opt.normalize_queries = false;
  const GramPair g = compute_grams(x, x, opt);
  const double ref = eigsearch_loss(eigsearch_projection(g, 4, 0.0), g);
  for (int i = 1; i <= 100; ++i) {
    CHECK(eigsearch_loss(eigsearch_projection(g, 4, i / 100.0), g) ==
          doctest::Approx(ref).epsilon(1e-8));
  }
  const EsResult es = train_ood_es(g, 4);
  CHECK(es.search_loss == doctest::Approx(ref).epsilon(1e-8));
  const ProjectionPair pca = train_id(g.k_x, 4);
  CHECK(es.loss == doctest::Approx(ood_loss(pca, g)).epsilon(1e-8));
}

TEST_CASE("eigenvector search never loses to PCA and beats the beta grid") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = projann::testing::rotated_instance(800, 300, 20, true, 40 + seed);
    const GramPair g = compute_grams(inst.data, inst.learn_queries);
    const EsResult es = train_ood_es(g, 5);
    CHECK(es.pair.shared());
    CHECK(es.pair.orthonormal);
    es.pair.validate();
    CHECK(es.beta >= 0.0);
    CHECK(es.beta <= 1.0);
    const ProjectionPair pca = train_id(g.k_x, 5);
    CHECK(es.search_loss <= eigsearch_loss(pca.a, g) + 1e-9);
    double grid = 1e300;
    for (int i = 0; i <= 100; ++i) {
      grid = std::min(grid, eigsearch_loss(eigsearch_projection(g, 5, i / 100.0), g));
    }
    CHECK(es.search_loss <= grid + 1e-6 * std::abs(grid));
    CHECK(es.loss == doctest::Approx(ood_loss(es.pair, g)).epsilon(1e-12));
  }
}

TEST_CASE("eigenvector search rejects empty sample counts") {
  std::mt19937_64 rng(36);
  GramPair g = compute_grams(gaussian(40, 6, rng), gaussian(40, 6, rng));
  g.m = 0;
  CHECK_THROWS_AS(train_ood_es(g, 2), ValidationError);
}

TEST_CASE("projection pair validation") {
  std::mt19937_64 rng(37);
  const Mat r = random_stiefel(3, 7, rng);
  ProjectionPair::same(r).validate();
  CHECK_THROWS_AS(ProjectionPair::same(2.0 * r).validate(), ValidationError);
  ProjectionPair::same(0.5 * r, false).validate();
  CHECK_THROWS_AS(ProjectionPair::same(1.5 * r, false).validate(), ValidationError);
  CHECK_THROWS_AS((ProjectionPair{r, r.topRows(2), true}.validate()), ValidationError);
  CHECK_THROWS_AS(ProjectionPair::same(Mat::Zero(8, 7), false).validate(), ValidationError);
  ProjectionPair::identity(5).validate();
}
