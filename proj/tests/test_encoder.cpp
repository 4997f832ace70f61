#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "kdbrain/encoder.hpp"
#include "support.hpp"

using namespace kdbrain;
using namespace kdbrain::ad;

namespace {

// Straight-line reference: explicit loops, no shared kernels.
Tensor oracle_features(const std::vector<Tensor>& a, const std::vector<Tensor>& wr, const std::vector<Tensor>& wc) {
  const std::size_t n = a[0].rows(), c_out = wr[0].cols();
  Tensor h(n, c_out);
  for (std::size_t c = 0; c < a.size(); ++c)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < c_out; ++o) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[c](i, j) * wr[c](j, o) + a[c](j, i) * wc[c](j, o);
        h(i, o) += s;
      }
  return h;
}

Tensor oracle_embed(const Tensor& h, const Tensor& fuse, const Tensor& proj) {
  const std::size_t n = h.rows(), hd = fuse.cols(), d = proj.cols();
  std::vector<double> pooled(hd, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < hd; ++k) {
      double s = 0.0;
      for (std::size_t o = 0; o < h.cols(); ++o) s += h(i, o) * fuse(o, k);
      pooled[k] += (s >= 0.0 ? s : 0.2 * s) / static_cast<double>(n);
    }
  Tensor z(1, d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < hd; ++k) z(0, j) += pooled[k] * proj(k, j);
  return z;
}

Var features(Tape& t, const Tensor& a, const Tensor& wr, const Tensor& wc) {
  const std::vector<Var> b{t.constant(a)}, r{t.constant(wr)}, c{t.constant(wc)};
  return encoder::bidirectional_features(b, r, c);
}

}  // namespace

TEST_CASE("bidirectional features hand example") {
  Tape t;
  const Var h = features(t, Tensor::from_rows({{0, 1}, {1, 0}}), Tensor::column_vector({1, 1}),
                         Tensor::column_vector({1, -1}));
  CHECK(h.value() == Tensor::column_vector({0, 2}));
}

TEST_CASE("zero connectome gives zero features and embedding") {
  std::mt19937_64 rng(1);
  Tape t;
  const Var h = features(t, Tensor(3, 3), testing::random_tensor(3, 4, rng), testing::random_tensor(3, 4, rng));
  CHECK(h.value() == Tensor(3, 4));
  const Var z = encoder::fuse_project(h, t.constant(testing::random_tensor(4, 5, rng)),
                                      t.constant(testing::random_tensor(5, 6, rng)));
  CHECK(z.value() == Tensor(1, 6));
}

TEST_CASE("symmetric input with tied kernels collapses") {
  std::mt19937_64 rng(2);
  Tensor a = testing::random_tensor(4, 4, rng);
  a = kernels::add(a, kernels::transpose(a));
  const Tensor w = testing::random_tensor(4, 3, rng);
  Tape t;
  const Tensor h = features(t, a, w, w).value();
  const Tensor ref = kernels::scale(kernels::matmul(a, w), 2.0);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK_THAT(h[i], Catch::Matchers::WithinAbs(ref[i], 1e-12));
}

TEST_CASE("single region pooling is the identity") {
  std::mt19937_64 rng(3);
  const Tensor h = testing::random_tensor(1, 4, rng), fuse = testing::random_tensor(4, 3, rng),
               proj = testing::random_tensor(3, 2, rng);
  Tape t;
  const Tensor z = encoder::fuse_project(t.constant(h), t.constant(fuse), t.constant(proj)).value();
  const Tensor ref = kernels::matmul(kernels::leaky_relu(kernels::matmul(h, fuse), 0.2), proj);
  CHECK(z == ref);
}

TEST_CASE("encoder matches the straight-line reference") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 5), channels = 1 + static_cast<std::size_t>(trial % 3);
    std::vector<Tensor> a, wr, wc;
    Tape t;
    std::vector<Var> va, vr, vc;
    for (std::size_t c = 0; c < channels; ++c) {
      a.push_back(testing::random_tensor(n, n, rng));
      wr.push_back(testing::random_tensor(n, 4, rng));
      wc.push_back(testing::random_tensor(n, 4, rng));
      va.push_back(t.constant(a.back()));
      vr.push_back(t.constant(wr.back()));
      vc.push_back(t.constant(wc.back()));
    }
    const Tensor fuse = testing::random_tensor(4, 5, rng), proj = testing::random_tensor(5, 3, rng);
    const Var h = encoder::bidirectional_features(va, vr, vc);
    const Tensor ref_h = oracle_features(a, wr, wc);
    for (std::size_t i = 0; i < ref_h.size(); ++i) CHECK_THAT(h.value()[i], Catch::Matchers::WithinAbs(ref_h[i], 1e-12));
    const Tensor z = encoder::fuse_project(h, t.constant(fuse), t.constant(proj)).value();
    const Tensor ref_z = oracle_embed(ref_h, fuse, proj);
    for (std::size_t i = 0; i < ref_z.size(); ++i) CHECK_THAT(z[i], Catch::Matchers::WithinAbs(ref_z[i], 1e-12));
  }
}

TEST_CASE("embedding is invariant to a consistent relabelling of regions") {
  std::mt19937_64 rng(5);
  const std::size_t n = 5;
  const Tensor a = testing::random_tensor(n, n, rng), wr = testing::random_tensor(n, 3, rng),
               wc = testing::random_tensor(n, 3, rng), fuse = testing::random_tensor(3, 4, rng),
               proj = testing::random_tensor(4, 2, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor pa(n, n), pr(n, 3), pc(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) pa(i, j) = a(perm[i], perm[j]);
    for (std::size_t o = 0; o < 3; ++o) {
      pr(i, o) = wr(perm[i], o);
      pc(i, o) = wc(perm[i], o);
    }
  }
  Tape t;
  const Tensor z = encoder::fuse_project(features(t, a, wr, wc), t.constant(fuse), t.constant(proj)).value();
  const Tensor pz = encoder::fuse_project(features(t, pa, pr, pc), t.constant(fuse), t.constant(proj)).value();
  for (std::size_t i = 0; i < z.size(); ++i) CHECK_THAT(pz[i], Catch::Matchers::WithinAbs(z[i], 1e-12));
}

TEST_CASE("encode_all stacks one row per subnetwork") {
  std::mt19937_64 rng(6);
  EncoderWeights<Var> w;
  Tape t;
  std::vector<std::vector<Var>> blocks(3);
  for (std::size_t k = 0; k < 3; ++k) {
    blocks[k].push_back(t.constant(testing::random_tensor(4, 4, rng)));
    w.row_kernels.push_back({t.constant(testing::random_tensor(4, 4, rng))});
    w.col_kernels.push_back({t.constant(testing::random_tensor(4, 4, rng))});
  }
  w.fuse = t.constant(testing::random_tensor(4, 8, rng));
  w.project = t.constant(testing::random_tensor(8, 8, rng));
  const Var z = encoder::encode_all(blocks, w);
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 8);
}

TEST_CASE("kernel size mismatch is rejected") {
  Tape t;
  CHECK_THROWS_AS(features(t, Tensor(3, 3), Tensor(2, 1), Tensor(3, 1)), DimensionError);
}
