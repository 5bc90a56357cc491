#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>

#include "test_util.hpp"
#include "uda/linalg.hpp"

using namespace uda;
using test::random_tensor;

namespace {

Tensor reconstruct(const Svd& d) {
  Tensor us = d.u;
  for (std::size_t i = 0; i < us.rows(); ++i) {
    for (std::size_t k = 0; k < d.s.size(); ++k) us(i, k) *= d.s[k];
  }
  return matmul(us, transpose(d.v));
}

}  // namespace

TEST(Svd, ReconstructsTallAndWide) {
  Rng rng(21);
  for (auto [r, c] : {std::pair{8, 5}, std::pair{5, 8}, std::pair{1, 6}, std::pair{6, 1}, std::pair{7, 7}}) {
    const Tensor a = random_tensor(r, c, rng);
    const Svd d = svd_jacobi(a);
    ASSERT_EQ(d.s.size(), static_cast<std::size_t>(std::min(r, c)));
    EXPECT_LE(max_abs_diff(reconstruct(d), a), 1e-12) << r << "x" << c;
    EXPECT_TRUE(std::is_sorted(d.s.rbegin(), d.s.rend()));
  }
}

TEST(Svd, SingularValuesMatchEigenSolverOfGram) {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor(8, 5, rng);
    Eigen::MatrixXd m(8, 5);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 5; ++j) m(i, j) = a(i, j);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.transpose() * m);
    std::vector<double> ref;
    for (int k = 0; k < 5; ++k) ref.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(k))));
    std::sort(ref.rbegin(), ref.rend());
    const Svd d = svd_jacobi(a);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(d.s[k], ref[k], 1e-10);
  }
}

TEST(Svd, OrthonormalFactors) {
  Rng rng(23);
  const Tensor a = random_tensor(9, 4, rng);
  const Svd d = svd_jacobi(a);
  EXPECT_LE(max_abs_diff(matmul(transpose(d.u), d.u), Tensor::identity(4)), 1e-12);
  EXPECT_LE(max_abs_diff(matmul(transpose(d.v), d.v), Tensor::identity(4)), 1e-12);
}

TEST(Svd, RankDeficientAndZero) {
  const Svd ones = svd_jacobi(Tensor{{1, 1}, {1, 1}});
  EXPECT_NEAR(ones.s[0], 2.0, 1e-14);
  EXPECT_NEAR(ones.s[1], 0.0, 1e-14);
  const Svd zero = svd_jacobi(Tensor(3, 2));
  EXPECT_EQ(zero.s, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(zero.u, Tensor(3, 2));
}
