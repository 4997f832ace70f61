#include <catch_amalgamated.hpp>

#include <cmath>

#include "kdbrain/ssil.hpp"
#include "support.hpp"

using namespace kdbrain;
using namespace kdbrain::ad;
using Catch::Matchers::WithinAbs;

namespace {

InteractionWeights<Var> bind(Tape& t, const Tensor& q, const Tensor& k) { return {t.constant(q), t.constant(k)}; }

// Straight-line reference for one interaction round.
Tensor oracle_alpha(const Tensor& z, const Tensor* prior, double lambda, const Tensor& wq, const Tensor& wk) {
  const std::size_t n = z.rows(), d = z.cols();
  Tensor q(n, d), k(n, d), alpha(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t m = 0; m < d; ++m) {
        const double src = z(i, m) + (prior ? lambda * (*prior)(i, m) : 0.0);
        q(i, j) += src * wq(m, j);
        k(i, j) += z(i, m) * wk(m, j);
      }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logit(n, 0.0);
    double mx = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t m = 0; m < d; ++m) logit[j] += q(i, m) * k(j, m);
      logit[j] /= std::sqrt(static_cast<double>(d));
      mx = std::max(mx, logit[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(logit[j] - mx);
    for (std::size_t j = 0; j < n; ++j) alpha(i, j) = std::exp(logit[j] - mx) / s;
  }
  return alpha;
}

Tensor oracle_update(const Tensor& alpha, const Tensor& z) {
  Tensor out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.rows(); ++j)
      for (std::size_t m = 0; m < z.cols(); ++m) out(i, m) += alpha(i, j) * z(j, m);
  return out;
}

void check_close(const Tensor& a, const Tensor& b, double tol) {
  REQUIRE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK_THAT(a[i], WithinAbs(b[i], tol));
}

}  // namespace

TEST_CASE("query injection") {
  std::mt19937_64 rng(1);
  const Tensor z = testing::random_tensor(3, 4, rng), h = testing::random_tensor(3, 4, rng),
               wq = testing::random_tensor(4, 4, rng), wk = testing::random_tensor(4, 4, rng);
  Tape t;
  const auto w = bind(t, wq, wk);
  const std::optional<Var> prior = t.constant(h);

  SECTION("zero strength matches a prior-free model") {
    CHECK(ssil::inject_query(t.constant(z), prior, w, 0.0).query.value() ==
          ssil::inject_query(t.constant(z), std::nullopt, w, 1.0).query.value());
  }
  SECTION("zero embedding gives a purely prior-driven query") {
    check_close(ssil::inject_query(t.constant(Tensor(3, 4)), prior, w, 1.0).query.value(), kernels::matmul(h, wq),
                1e-15);
  }
  SECTION("matches the reference") {
    const auto qk = ssil::inject_query(t.constant(z), prior, w, 0.7);
    Tensor ref(3, 4);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t m = 0; m < 4; ++m) ref(i, j) += (z(i, m) + 0.7 * h(i, m)) * wq(m, j);
    check_close(qk.query.value(), ref, 1e-12);
  }
}

TEST_CASE("interaction coefficients") {
  Tape t;
  SECTION("orthogonal queries give uniform rows") {
    const Tensor a = ssil::interaction_coefficients(t.constant(Tensor::from_rows({{1, 0}, {1, 0}, {1, 0}})),
                                                    t.constant(Tensor::from_rows({{0, 1}, {0, 2}, {0, 3}})))
                         .value();
    for (double v : a.data()) CHECK_THAT(v, WithinAbs(1.0 / 3.0, 1e-15));
  }
  SECTION("hand softmax") {
    const Tensor a = ssil::interaction_coefficients(t.constant(Tensor::column_vector({1, 0, 0})),
                                                    t.constant(Tensor::column_vector({2, 0, 0})))
                         .value();
    CHECK_THAT(a(0, 0), WithinAbs(0.78699, 5e-6));
    CHECK_THAT(a(0, 1), WithinAbs(0.10651, 5e-6));
    CHECK_THAT(a(0, 2), WithinAbs(0.10651, 5e-6));
  }
}

TEST_CASE("representation update") {
  Tape t;
  const Tensor z = Tensor::from_rows({{4, 0}, {0, 4}});
  CHECK(ssil::update_representations(t.constant(z), t.constant(Tensor::identity(2))).value() == z);
  CHECK(ssil::update_representations(t.constant(z), t.constant(Tensor::from_rows({{0.75, 0.25}, {0.5, 0.5}})))
            .value() == Tensor::from_rows({{3, 1}, {2, 2}}));
  const Tensor uniform(2, 2, 0.5);
  CHECK(ssil::update_representations(t.constant(z), t.constant(uniform)).value() == Tensor(2, 2, 2.0));
}

TEST_CASE("stack records one alpha per order") {
  std::mt19937_64 rng(2);
  Tape t;
  const auto w = bind(t, testing::random_tensor(4, 4, rng), testing::random_tensor(4, 4, rng));
  const Var z = t.constant(testing::random_tensor(3, 4, rng));
  CHECK(ssil::run_stack(z, std::nullopt, w, 1.0, 1).alphas.size() == 1);
  CHECK(ssil::run_stack(z, std::nullopt, w, 1.0, 3).alphas.size() == 3);
  CHECK_THROWS_AS(ssil::run_stack(z, std::nullopt, w, 1.0, 0), ValidationError);
}

TEST_CASE("zero projections average the representations") {
  std::mt19937_64 rng(3);
  Tape t;
  const Tensor z0 = testing::random_tensor(3, 4, rng);
  const auto w = bind(t, Tensor(4, 4), Tensor(4, 4));
  const auto trace = ssil::run_stack(t.constant(z0), std::nullopt, w, 0.0, 2);
  const Tensor mean = kernels::mean_rows(z0);
  for (const auto& a : trace.alphas)
    for (double v : a.value().data()) CHECK_THAT(v, WithinAbs(1.0 / 3.0, 1e-15));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t m = 0; m < 4; ++m) CHECK_THAT(trace.embedding.value()(k, m), WithinAbs(mean[m], 1e-12));
}

TEST_CASE("stack matches the straight-line reference") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor z0 = testing::random_tensor(3, 5, rng), h = testing::random_tensor(3, 5, rng),
                 wq = testing::random_tensor(5, 5, rng, 0.5), wk = testing::random_tensor(5, 5, rng, 0.5);
    Tape t;
    const auto trace = ssil::run_stack(t.constant(z0), t.constant(h), bind(t, wq, wk), 0.8, 3);
    Tensor z = z0;
    for (int l = 0; l < 3; ++l) {
      const Tensor a = oracle_alpha(z, &h, 0.8, wq, wk);
      check_close(trace.alphas[static_cast<std::size_t>(l)].value(), a, 1e-12);
      z = oracle_update(a, z);
    }
    check_close(trace.embedding.value(), z, 1e-12);
  }
}

TEST_CASE("updated rows stay in the convex hull of the previous rows") {
  std::mt19937_64 rng(5);
  Tape t;
  const Tensor z0 = testing::random_tensor(4, 3, rng);
  const auto trace =
      ssil::run_stack(t.constant(z0), std::nullopt,
                      bind(t, testing::random_tensor(3, 3, rng), testing::random_tensor(3, 3, rng)), 0.0, 1);
  const Tensor& z1 = trace.embedding.value();
  for (std::size_t m = 0; m < 3; ++m) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      lo = std::min(lo, z0(k, m));
      hi = std::max(hi, z0(k, m));
    }
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(z1(k, m) >= lo - 1e-12);
      CHECK(z1(k, m) <= hi + 1e-12);
    }
  }
}

TEST_CASE("classifier") {
  Tape t;
  ClassifierWeights<Var> w{t.constant(Tensor(6, 4)), t.constant(Tensor(1, 4)), t.constant(Tensor(4, 2)),
                           t.constant(Tensor(1, 2))};
  const Tensor logits = ssil::classify(t.constant(Tensor(3, 2)), w).value();
  CHECK(logits == Tensor(1, 2));
  CHECK(kernels::softmax_rows(logits) == Tensor::row_vector({0.5, 0.5}));

  std::mt19937_64 rng(6);
  const Tensor e = testing::random_tensor(3, 2, rng), h = testing::random_tensor(6, 4, rng),
               hb = testing::random_tensor(1, 4, rng), o = testing::random_tensor(4, 2, rng),
               ob = testing::random_tensor(1, 2, rng);
  const Tensor got = ssil::classify(t.constant(e), {t.constant(h), t.constant(hb), t.constant(o), t.constant(ob)})
                         .value();
  Tensor ref = ob;
  for (std::size_t j = 0; j < 4; ++j) {
    double s = hb[j];
    for (std::size_t i = 0; i < 6; ++i) s += e[i] * h(i, j);
    const double act = s >= 0 ? s : 0.2 * s;
    for (std::size_t c = 0; c < 2; ++c) ref[c] += act * o(j, c);
  }
  check_close(got, ref, 1e-12);
}
