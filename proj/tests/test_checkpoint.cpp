#include <catch_amalgamated.hpp>

#include "kdbrain/checkpoint.hpp"
#include "kdbrain/selfcheck.hpp"
#include "support.hpp"

using namespace kdbrain;

namespace {

ModelState small_state() {
  selfcheck::InstanceSpec spec;
  spec.batch = 4;
  const auto inst = selfcheck::make_instance(spec);
  TrainConfig cfg;
  cfg.model = spec.model;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  return train(inst.data, &inst.bank, &inst.prior, cfg).state;
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  const ModelState s = small_state();
  const ModelState back = checkpoint_from_json(ordered_json::parse(checkpoint_text(s)));
  CHECK(checkpoint_text(back) == checkpoint_text(s));
  const auto a = weight_refs(s.model.weights), b = weight_refs(back.model.weights);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
  CHECK(back.optimizer.step == s.optimizer.step);
  REQUIRE(back.bank);
  CHECK(back.bank->embeddings == s.bank->embeddings);
  REQUIRE(back.prior);
  CHECK(back.prior->matrix == s.prior->matrix);
}

TEST_CASE("corrupted checkpoint names the offending field") {
  const ordered_json good = ordered_json::parse(checkpoint_text(small_state()));

  ordered_json j = good;
  j["parameters"]["ssil.w_q"][0][0] = "x";
  CHECK_THROWS_WITH(checkpoint_from_json(j), Catch::Matchers::ContainsSubstring("ssil.w_q"));

  j = good;
  j["parameters"].erase("encoder.w_fuse");
  CHECK_THROWS_WITH(checkpoint_from_json(j), Catch::Matchers::ContainsSubstring("encoder.w_fuse"));

  j = good;
  j["config"]["d"] = 5;
  CHECK_THROWS_AS(checkpoint_from_json(j), ValidationError);

  j = good;
  j["format"] = "other";
  CHECK_THROWS_WITH(checkpoint_from_json(j), Catch::Matchers::ContainsSubstring("format"));

  CHECK_THROWS_AS(ordered_json::parse("{\"format\": "), ordered_json::parse_error);
}

TEST_CASE("history CSV marks missing PMC") {
  const auto dir = testing::scratch_dir("history");
  write_history_csv(dir / "h.csv", {{1, 0.5, std::nullopt, 0.75}, {2, 0.25, 0.125, 1.0}});
  CHECK(testing::slurp(dir / "h.csv") == "epoch,ce,pmc,acc\n1,0.5,NA,0.75\n2,0.25,0.125,1\n");
}
