// Copyright 2026 The Bundlerec Authors.
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

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "gradcases.hpp"

using namespace bundlerec;
using namespace bundlerec::model;
using testing::random_matrix;

namespace {

nn::Mlp attention_mlp(int d, Rng& rng) {
  return nn::Mlp("att", 4 * d, {80, 40, 1}, true, rng);
}

}  // namespace

TEST_CASE("attention weights are a distribution over the selected services") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int d = 6;
    auto mlp = attention_mlp(d, rng);
    for (int k = 1; k <= 3; ++k) {
      Matrix sel = random_matrix(d, k, rng, 2.0);
      Vector cand = random_matrix(d, 1, rng, 2.0).col(0);
      auto agg = aggregate_selected(Strategy::kAttention, sel, cand, mlp);
      REQUIRE(agg.weights.size() == static_cast<std::size_t>(k));
      double sum = 0;
      for (double w : agg.weights) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
      Vector expect = Vector::Zero(d);
      for (int i = 0; i < k; ++i) expect += agg.weights[i] * sel.col(i);
      CHECK((agg.v_ss - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("attention aggregation ignores selection order") {
  Rng rng(5);
  const int d = 4;
  auto mlp = attention_mlp(d, rng);
  Matrix sel = random_matrix(d, 3, rng);
  Vector cand = random_matrix(d, 1, rng).col(0);
  auto base = aggregate_selected(Strategy::kAttention, sel, cand, mlp);
  std::vector<int> perm{0, 1, 2};
  while (std::next_permutation(perm.begin(), perm.end())) {
    Matrix p(d, 3);
    for (int i = 0; i < 3; ++i) p.col(i) = sel.col(perm[i]);
    auto agg = aggregate_selected(Strategy::kAttention, p, cand, mlp);
    CHECK((agg.v_ss - base.v_ss).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 3; ++i) {
      CHECK(agg.weights[i] == doctest::Approx(base.weights[perm[i]]).epsilon(1e-12));
    }
  }
}

TEST_CASE("a single selected service gets weight exactly one") {
  Rng rng(9);
  auto mlp = attention_mlp(5, rng);
  Matrix sel = random_matrix(5, 1, rng);
  auto agg = aggregate_selected(Strategy::kAttention, sel,
                                random_matrix(5, 1, rng).col(0), mlp);
  CHECK(agg.weights == std::vector<double>{1.0});
  CHECK(agg.v_ss == sel.col(0));
}

TEST_CASE("other aggregation strategies") {
  Rng rng(2);
  const int d = 3;
  Matrix sel = random_matrix(d, 4, rng);
  Vector cand = random_matrix(d, 1, rng).col(0);
  nn::Mlp none_mlp;

  auto avg = aggregate_selected(Strategy::kAverage, sel.leftCols(2), cand, none_mlp);
  CHECK(avg.weights == std::vector<double>{0.5, 0.5});
  CHECK((avg.v_ss - 0.5 * (sel.col(0) + sel.col(1))).norm() < 1e-15);

  auto cat = aggregate_selected(Strategy::kConcat, sel.leftCols(2), cand, none_mlp);
  REQUIRE(cat.v_ss.size() == kConcatSlots * d);
  CHECK(cat.v_ss.segment(0, d) == sel.col(0));
  CHECK(cat.v_ss.segment(d, d) == sel.col(1));
  CHECK(cat.v_ss.segment(2 * d, d).isZero());
  CHECK(cat.weights.empty());
  auto cat4 = aggregate_selected(Strategy::kConcat, sel, cand, none_mlp);
  CHECK(cat4.v_ss.segment(2 * d, d) == sel.col(2));

  auto none = aggregate_selected(Strategy::kNone, sel, cand, none_mlp);
  CHECK(none.v_ss.isZero());
  CHECK(none.weights.empty());

  auto empty = aggregate_selected(Strategy::kAttention, Matrix(d, 0), cand,
                                  attention_mlp(d, rng));
  CHECK(empty.v_ss.isZero());
  CHECK(empty.weights.empty());
}

TEST_CASE("strategy and variant names") {
  CHECK(parse_strategy("concatenation") == Strategy::kConcat);
  CHECK(to_string(parse_strategy("attention")) == "attention");
  CHECK(to_string(parse_variant("nisr")) == "nisr");
  CHECK_THROWS_AS(parse_variant("xisr"), ConfigError);
  CHECK_THROWS_AS(parse_strategy("max"), ConfigError);
}

TEST_CASE("network gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    CAPTURE(seed);
    auto att = testing::check_attention_block(seed);
    CHECK(att.passed);
    CHECK(att.max_rel_error < 1e-4);
    auto fisr = testing::check_fisr(seed);
    CHECK(fisr.passed);
    CHECK(fisr.max_rel_error < 1e-4);
    auto head = testing::check_hisr_head(seed);
    CHECK(head.passed);
    CHECK(head.max_rel_error < 1e-4);
  }
}

TEST_CASE("network parameters survive a checkpoint round trip") {
  Rng rng(4);
  auto content = testing::tiny_content(6, rng);
  auto cfg = testing::tiny_network(Variant::kHisr, Strategy::kAttention,
                                   content.vocab.size());
  Network net(cfg, rng);
  Batch batch;
  for (const auto& in : content.inputs) batch.entities.push_back(&in);
  batch.content.push(0, {2, 3}, 4);
  batch.content.push(1, {}, 5);
  batch.invocation_table = random_matrix(cfg.node_dim, 6, rng);
  batch.invocation.push(0, {2, 3}, 4);
  batch.invocation.push(1, {}, 5);
  batch.labels = {1, 0};

  Checkpoint ckpt;
  net.save(ckpt, "net/");
  auto restored = Checkpoint::deserialize(ckpt.serialize());
  Rng other(99);
  Network copy(cfg, other);
  CHECK((copy.predict(batch) - net.predict(batch)).norm() > 0);
  copy.load(restored, "net/");
  CHECK(copy.predict(batch) == net.predict(batch));

  Network::Cache cache;
  net.forward(batch, cache);
  auto w = net.attention_weights(cache, 0);
  REQUIRE(w.size() == 2);
  CHECK(std::abs(w[0] + w[1] - 1.0) < 1e-9);
  CHECK(net.attention_weights(cache, 1).empty());
}

TEST_CASE("import_underlying copies pathway parameters and checks shapes") {
  Rng rng(8);
  auto fcfg = testing::tiny_network(Variant::kFisr, Strategy::kAttention, 10);
  auto ncfg = testing::tiny_network(Variant::kNisr, Strategy::kAttention, 10);
  auto hcfg = testing::tiny_network(Variant::kHisr, Strategy::kAttention, 10);
  Network fisr(fcfg, rng), nisr(ncfg, rng), hisr(hcfg, rng);
  hisr.import_underlying(fisr);
  hisr.import_underlying(nisr);
  CHECK(hisr.extractor->embedding.value == fisr.extractor->embedding.value);
  CHECK(hisr.invocation->interaction.layers()[0].weight.value ==
        nisr.invocation->interaction.layers()[0].weight.value);

  auto other = testing::tiny_network(Variant::kFisr, Strategy::kAverage, 10);
  Network avg(other, rng);
  CHECK_THROWS_AS(hisr.import_underlying(avg), IntegrityError);
  auto wide = fcfg;
  wide.vocab_size = 12;
  Network bigger(wide, rng);
  CHECK_THROWS_AS(hisr.import_underlying(bigger), IntegrityError);
}
