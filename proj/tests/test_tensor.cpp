#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kdbrain/tensor.hpp"

using kdbrain::Tensor;
namespace k = kdbrain::kernels;
using Catch::Matchers::WithinAbs;

TEST_CASE("matmul hand cases") {
  const Tensor a = Tensor::from_rows({{1, 0}, {0, 1}});
  const Tensor b = Tensor::from_rows({{3, 4}, {5, 6}});
  CHECK(k::matmul(a, b) == b);
  CHECK(k::matmul(Tensor::from_rows({{1, 2}}), Tensor::from_rows({{3}, {4}})) == Tensor::from_rows({{11}}));
  CHECK(k::matmul(b, Tensor(2, 3)) == Tensor(2, 3));
}

TEST_CASE("matmul rejects mismatched inner dimension") {
  CHECK_THROWS_AS(k::matmul(Tensor(2, 3), Tensor(2, 3)), kdbrain::DimensionError);
}

TEST_CASE("transposed products agree with explicit transpose") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  Tensor a(4, 3), b(4, 5), c(6, 3);
  for (double& v : a.data()) v = n(rng);
  for (double& v : b.data()) v = n(rng);
  for (double& v : c.data()) v = n(rng);
  const Tensor tn = k::matmul_tn(a, b);
  const Tensor ref_tn = k::matmul(k::transpose(a), b);
  for (std::size_t i = 0; i < tn.size(); ++i) CHECK_THAT(tn[i], WithinAbs(ref_tn[i], 1e-12));
  const Tensor nt = k::matmul_nt(a, c);
  const Tensor ref_nt = k::matmul(a, k::transpose(c));
  for (std::size_t i = 0; i < nt.size(); ++i) CHECK_THAT(nt[i], WithinAbs(ref_nt[i], 1e-12));
}

TEST_CASE("elementwise kernels") {
  const Tensor x = Tensor::row_vector({-1, 2});
  CHECK(k::leaky_relu(x, 0.2) == Tensor::row_vector({-0.2, 2}));
  CHECK(k::add(x, Tensor(1, 2)) == x);
  CHECK(k::scale(x, 0.0) == Tensor(1, 2));
  CHECK(k::mul(x, x) == Tensor::row_vector({1, 4}));
}

TEST_CASE("softmax rows") {
  const Tensor u = k::softmax_rows(Tensor::row_vector({0, 0, 0}));
  for (double v : u.data()) CHECK_THAT(v, WithinAbs(1.0 / 3.0, 1e-15));

  const Tensor s = k::softmax_rows(Tensor::row_vector({2, 0, 0}));
  CHECK_THAT(s[0], WithinAbs(0.78699, 5e-6));
  CHECK_THAT(s[1], WithinAbs(0.10651, 5e-6));
  CHECK_THAT(s[2], WithinAbs(0.10651, 5e-6));

  const Tensor shifted = k::softmax_rows(Tensor::row_vector({2 + 700, 700, 700}));
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(shifted[i], WithinAbs(s[i], 1e-15));
}

TEST_CASE("mean over rows") {
  CHECK(k::mean_rows(Tensor::from_rows({{2, 4}, {4, 8}})) == Tensor::row_vector({3, 6}));
  CHECK(k::mean_rows(Tensor::row_vector({1, 5})) == Tensor::row_vector({1, 5}));
  CHECK(k::mean_rows(Tensor(3, 2)) == Tensor(1, 2));
  CHECK_THROWS_AS(k::mean_rows(Tensor(0, 2)), kdbrain::DomainError);
}

TEST_CASE("constructor validates fill size") {
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1, 2, 3}), kdbrain::DimensionError);
}
