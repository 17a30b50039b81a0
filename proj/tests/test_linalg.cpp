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

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "projann/linalg.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace projann;
using namespace projann::linalg;
using projann::testing::gaussian;
using projann::testing::gaussian_mat;

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

Mat random_stiefel(Eigen::Index d, Eigen::Index big_d, std::mt19937_64& rng) {
  return projann::testing::random_rotation(big_d, rng).topRows(d);
}

void check_eigen_invariants(const Mat& k, const EigenResult& e) {
  const Eigen::Index n = k.rows();
  CHECK(max_abs(e.vectors.transpose() * e.vectors - Mat::Identity(n, n)) <= 1e-8);
  const Mat rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  CHECK(max_abs(rebuilt - k) <= 1e-6 * std::max(max_abs(k), 1e-300));
  for (Eigen::Index i = 1; i < n; ++i) CHECK(e.values(i - 1) >= e.values(i));
}

}  // namespace

TEST_CASE("gram of a single basis vector") {
  FloatMatrix x = FloatMatrix::Zero(1, 5);
  x(0, 0) = 1.0f;
  Mat expected = Mat::Zero(5, 5);
  expected(0, 0) = 1.0;
  CHECK(accumulate_gram(x) == expected);
}

TEST_CASE("gram of identity rows is the identity") {
  const FloatMatrix x = FloatMatrix::Identity(6, 6);
  CHECK(accumulate_gram(x) == Mat::Identity(6, 6));
}

TEST_CASE("gram matches a naive double loop") {
  std::mt19937_64 rng(1);
  const FloatMatrix x = gaussian(50, 8, rng);
  Mat naive = Mat::Zero(8, 8);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index a = 0; a < 8; ++a)
      for (Eigen::Index b = 0; b < 8; ++b)
        naive(a, b) += static_cast<double>(x(i, a)) * static_cast<double>(x(i, b));
  CHECK(max_abs(accumulate_gram(x) - naive) <= 1e-10 * max_abs(naive));
}

TEST_CASE("gram is reproducible per worker count and close across counts") {
  std::mt19937_64 rng(2);
  const FloatMatrix x = gaussian(5000, 12, rng);
  const Mat one = accumulate_gram(x, 1);
  CHECK(accumulate_gram(x, 1) == one);
  const Mat three = accumulate_gram(x, 3);
  CHECK(accumulate_gram(x, 3) == three);
  CHECK(max_abs(three - one) <= 1e-10 * max_abs(one));
  CHECK(max_abs(one - one.transpose()) == 0.0);
}

TEST_CASE("weighted gram scales each outer product") {
  std::mt19937_64 rng(3);
  const FloatMatrix x = gaussian(20, 4, rng);
  std::vector<double> w(20);
  Mat naive = Mat::Zero(4, 4);
  for (Eigen::Index i = 0; i < 20; ++i) {
    w[static_cast<size_t>(i)] = 0.1 * static_cast<double>(i + 1);
    const Vec v = x.row(i).cast<double>().transpose();
    naive += w[static_cast<size_t>(i)] * v * v.transpose();
  }
  CHECK(max_abs(accumulate_gram(x, w) - naive) <= 1e-10 * max_abs(naive));
}

TEST_CASE("gram rejects non-finite input") {
  FloatMatrix x = FloatMatrix::Ones(3, 3);
  x(1, 2) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(accumulate_gram(x), ValidationError);
}

TEST_CASE("eigendecomposition of a diagonal matrix") {
  const Mat k = Eigen::Vector3d(3, 1, 2).asDiagonal();
  const EigenResult e = sym_eig(k);
  CHECK(e.values(0) == doctest::Approx(3));
  CHECK(e.values(1) == doctest::Approx(2));
  CHECK(e.values(2) == doctest::Approx(1));
  CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1));
  CHECK(std::abs(e.vectors(2, 1)) == doctest::Approx(1));
  CHECK(std::abs(e.vectors(1, 2)) == doctest::Approx(1));
}

TEST_CASE("eigendecomposition of the identity") {
  const Mat k = Mat::Identity(4, 4);
  const EigenResult e = sym_eig(k);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(e.values(i) == doctest::Approx(1));
  check_eigen_invariants(k, e);
}

TEST_CASE("eigendecomposition of random PSD matrices agrees with Eigen") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat g = gaussian_mat(16, 16, rng);
    const Mat k = g * g.transpose();
    const EigenResult e = sym_eig(k);
    check_eigen_invariants(k, e);
    const Eigen::SelfAdjointEigenSolver<Mat> oracle(k);
    const Vec expected = oracle.eigenvalues().reverse();
    CHECK(max_abs(e.values - expected) <= 1e-9 * expected(0));
  }
}

TEST_CASE("eigendecomposition rejects asymmetric input") {
  Mat k = Mat::Identity(3, 3);
  k(0, 1) = 0.5;
  CHECK_THROWS_AS(sym_eig(k), ValidationError);
}

TEST_CASE("thin svd of a rectangular diagonal") {
  Mat c(2, 3);
  c << 2, 0, 0, 0, 1, 0;
  const SvdResult r = thin_svd(c);
  CHECK(r.s(0) == doctest::Approx(2));
  CHECK(r.s(1) == doctest::Approx(1));
}

TEST_CASE("thin svd of the zero matrix") {
  const SvdResult r = thin_svd(Mat::Zero(3, 7));
  CHECK(r.s.cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs(r.u.transpose() * r.u - Mat::Identity(3, 3)) <= 1e-8);
  CHECK(max_abs(r.v.transpose() * r.v - Mat::Identity(3, 3)) <= 1e-8);
}

TEST_CASE("thin svd reconstructs and matches eigenvalues of C C^T") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat c = gaussian_mat(4, 12, rng);
    const SvdResult r = thin_svd(c);
    CHECK(max_abs(r.u * r.s.asDiagonal() * r.v.transpose() - c) <= 1e-6 * max_abs(c));
    CHECK(max_abs(r.u.transpose() * r.u - Mat::Identity(4, 4)) <= 1e-8);
    CHECK(max_abs(r.v.transpose() * r.v - Mat::Identity(4, 4)) <= 1e-8);
    const Vec lambda = sym_eig(c * c.transpose()).values;
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(std::abs(r.s(i) * r.s(i) - lambda(i)) <= 1e-8 * lambda(0));
    }
    const Eigen::JacobiSVD<Mat> oracle(c);
    CHECK(max_abs(r.s - oracle.singularValues()) <= 1e-9 * r.s(0));
  }
}

TEST_CASE("thin svd completes rank-deficient directions") {
  std::mt19937_64 rng(6);
  Mat c = gaussian_mat(4, 9, rng);
  c.row(3) = c.row(0) + c.row(1);
  const SvdResult r = thin_svd(c);
  CHECK(r.s(3) <= 1e-8 * r.s(0));
  CHECK(max_abs(r.v.transpose() * r.v - Mat::Identity(4, 4)) <= 1e-8);
  CHECK(max_abs(r.u * r.s.asDiagonal() * r.v.transpose() - c) <= 1e-6 * max_abs(c));
}

TEST_CASE("thin svd rejects wide-side input") {
  CHECK_THROWS_AS(thin_svd(Mat::Ones(5, 3)), ValidationError);
}

TEST_CASE("lmo of an orthonormal matrix is itself, also after scaling") {
  std::mt19937_64 rng(7);
  const Mat r = random_stiefel(3, 8, rng);
  CHECK(max_abs(spectral_lmo(r).s - r) <= 1e-8);
  CHECK(max_abs(spectral_lmo(5.0 * r).s - r) <= 1e-8);
}

TEST_CASE("lmo dominates random Stiefel candidates") {
  std::mt19937_64 rng(8);
  const Mat c = gaussian_mat(3, 8, rng);
  const LmoResult lmo = spectral_lmo(c);
  CHECK_FALSE(lmo.degenerate);
  CHECK(orthonormality_error(lmo.s) <= 1e-8);
  const double best = lmo.s.cwiseProduct(c).sum();
  CHECK(best == doctest::Approx(thin_svd(c).s.sum()).epsilon(1e-12));
  for (int i = 0; i < 1000; ++i) {
    const Mat t = random_stiefel(3, 8, rng);
    CHECK(t.cwiseProduct(c).sum() <= best + 1e-12);
  }
  CHECK(max_abs(spectral_lmo(0.01 * c).s - lmo.s) <= 1e-8);
}

TEST_CASE("lmo of zero is the flagged truncated identity") {
  const LmoResult lmo = spectral_lmo(Mat::Zero(2, 5));
  CHECK(lmo.degenerate);
  CHECK(lmo.s == truncated_identity(2, 5));
}

TEST_CASE("retraction is idempotent on orthonormal input and removes scale") {
  std::mt19937_64 rng(9);
  const Mat r = random_stiefel(4, 16, rng);
  CHECK(max_abs(stiefel_retract(r) - r) <= 1e-10);
  CHECK(max_abs(stiefel_retract(0.5 * r) - r) <= 1e-10);
  const Mat a = gaussian_mat(4, 16, rng);
  const Mat m = stiefel_retract(a);
  CHECK(max_abs(m * m.transpose() - Mat::Identity(4, 4)) <= 1e-8);
  // nearest row-orthonormal matrix
  for (int i = 0; i < 200; ++i) {
    const Mat t = random_stiefel(4, 16, rng);
    CHECK((m - a).squaredNorm() <= (t - a).squaredNorm() + 1e-12);
  }
}

TEST_CASE("retraction reports the rank of deficient input") {
  Mat a = Mat::Zero(3, 6);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  try {
    (void)stiefel_retract(a);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
}

TEST_CASE("operator norm") {
  Mat a(2, 3);
  a << 3, 0, 0, 0, -4, 0;
  CHECK(op_norm(a) == doctest::Approx(4));
}
