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

#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcases.hpp"

using namespace bundlerec;
using namespace bundlerec::text;

namespace {

Vocab abc_vocab() { return Vocab::from_tokens({"a", "b", "c", "d"}); }

TextConfig tiny_text() {
  TextConfig c;
  c.seq_len = 8;
  c.embed_dim = 4;
  c.windows = {2, 3};
  c.channels = 3;
  c.seq_out = 5;
  return c;
}

// Direct convolution over all L positions, padding embedded as zeros.
Vector naive_sequence(const ContentExtractor& ex, const EncodedText& enc) {
  const auto& cfg = ex.config();
  const int L = cfg.seq_len, d = cfg.embed_dim, C = cfg.channels;
  Matrix E = Matrix::Zero(d, L);
  for (int i = 0; i < L; ++i) {
    if (enc.ids[i] != Vocab::kPad) E.col(i) = ex.embedding.value.col(enc.ids[i]);
  }
  Vector pooled(C * static_cast<int>(cfg.windows.size()));
  for (std::size_t b = 0; b < cfg.windows.size(); ++b) {
    const int w = cfg.windows[b];
    Matrix x1(w * d, L - w + 1);
    for (int j = 0; j < L - w + 1; ++j) {
      for (int k = 0; k < w; ++k) x1.block(k * d, j, d, 1) = E.col(j + k);
    }
    Matrix h1 = ex.conv1[b].apply(x1);
    const int L2 = L - 2 * w + 2;
    Matrix x2(w * C, L2);
    for (int j = 0; j < L2; ++j) {
      for (int k = 0; k < w; ++k) x2.block(k * C, j, C, 1) = h1.col(j + k);
    }
    pooled.segment(b * C, C) = ex.conv2[b].apply(x2).rowwise().mean();
  }
  return ex.projection.apply(pooled).col(0);
}

}  // namespace

TEST_CASE("encode_sequence pads, truncates and maps unknown tokens") {
  auto v = abc_vocab();
  CHECK(v.id("a") == 2);
  CHECK(v.id("zzz") == Vocab::kUnk);
  auto e = encode_sequence({"a", "c"}, v, 4);
  CHECK(e.ids == std::vector<int>{2, 4, 0, 0});
  CHECK(e.length == 2);
  CHECK(e.mask() == std::vector<bool>{true, true, false, false});
  auto t = encode_sequence({"a", "b", "c"}, v, 2);
  CHECK(t.ids == std::vector<int>{2, 3});
  CHECK(encode_sequence({"q", "a"}, v, 3).ids == std::vector<int>{1, 2, 0});
}

TEST_CASE("vocab dump round-trips and orders by frequency") {
  auto repo = corpus::Repository::build(
      {testing::service("s1", "map map route", {"geo"}, "p"),
       testing::service("s2", "pay route", {"money"}, "p")},
      {testing::mashup("m1", "map pay", {"geo"}, {"s1", "s2"})});
  std::vector<int> train{0};
  auto v = build_vocab(repo, train);
  CHECK(v.token(2) == "map");  // 3 occurrences
  CHECK(v.token(3) == "geo");  // 2, ties lexicographic
  std::stringstream ss;
  v.write(ss);
  CHECK(ss.str().rfind("<pad>\t0\n<unk>\t1\nmap\t2\n", 0) == 0);
  auto back = Vocab::read(ss);
  CHECK(back.words() == v.words());
}

TEST_CASE("batched extraction matches a direct convolution") {
  Rng rng(3);
  auto v = abc_vocab();
  ContentExtractor ex("ex", v.size(), tiny_text(), rng);
  std::vector<ContentInput> inputs = {
      make_content_input({"a", "b", "c"}, {"d"}, v, 8),
      make_content_input({"d"}, {}, v, 8),
      make_content_input({}, {"a", "b"}, v, 8),
      make_content_input({"a", "b", "c", "d", "a", "b", "c", "d", "a"}, {}, v, 8),
      make_content_input({"c", "c", "c", "c", "c", "c"}, {"c"}, v, 8)};
  std::vector<const ContentInput*> ptrs;
  for (const auto& in : inputs) ptrs.push_back(&in);
  Matrix out = ex.apply(ptrs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    CAPTURE(i);
    Vector ref = naive_sequence(ex, inputs[i].sequence);
    CHECK((out.col(i).head(5) - ref).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ex.text_inception(inputs[i].sequence) - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Same real tokens, different neighbours in the batch: same features.
  std::vector<const ContentInput*> alone{&inputs[0]};
  CHECK((ex.apply(alone).col(0) - out.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tag set embedding") {
  Rng rng(4);
  auto v = abc_vocab();
  ContentExtractor ex("ex", v.size(), tiny_text(), rng);
  CHECK(tagset_embed({"b"}, ex, v) == ex.embedding.value.col(3));
  CHECK(tagset_embed({"a", "b"}, ex, v) == tagset_embed({"b", "a"}, ex, v));
  CHECK(tagset_embed({"a", "b", "a"}, ex, v) == tagset_embed({"a", "b"}, ex, v));
  CHECK(tagset_embed({}, ex, v).isZero());
  Vector mean = 0.5 * (ex.embedding.value.col(2) + ex.embedding.value.col(4));
  CHECK((tagset_embed({"a", "c"}, ex, v) - mean).norm() < 1e-15);
}

TEST_CASE("content feature shape and locality") {
  Rng rng(6);
  auto repo = corpus::Repository::build(
      {testing::service("s1", "alpha beta", {"geo"}, "p"),
       testing::service("s2", "gamma delta", {"pay"}, "p")},
      {testing::mashup("m1", "alpha gamma", {"geo"}, {"s1", "s2"})});
  std::vector<int> train{0};
  auto v = build_vocab(repo, train);
  ContentExtractor ex("ex", v.size(), TextConfig{}, rng);
  auto f1 = content_feature(repo.service(0), v, ex);
  CHECK(f1.v.size() == 100);
  CHECK(f1.v_seq.size() == 50);
  CHECK(f1.v_set.size() == 50);
  CHECK(content_feature(repo.service(0), v, ex).v == f1.v);
  auto f2 = content_feature(repo.service(1), v, ex);
  ex.embedding.value.col(v.id("beta")).array() += 0.5;
  CHECK((content_feature(repo.service(0), v, ex).v - f1.v).norm() > 0);
  CHECK(content_feature(repo.service(1), v, ex).v == f2.v);
}

TEST_CASE("all-padding input gives a constant sequence feature") {
  Rng rng(7);
  auto v = abc_vocab();
  ContentExtractor ex("ex", v.size(), tiny_text(), rng);
  auto a = make_content_input({}, {"a"}, v, 8);
  auto b = make_content_input({"zz"}, {}, v, 8);
  b.sequence = encode_sequence({}, v, 8);
  CHECK(ex.text_inception(a.sequence) == ex.text_inception(b.sequence));
  CHECK_THROWS_AS(ex.text_inception(encode_sequence({"a"}, v, 5)), ShapeError);
}

TEST_CASE("extractor gradients and the padding column") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    auto content = testing::tiny_content(5, rng);
    auto cfg = tiny_text();
    cfg.seq_len = 6;
    ContentExtractor ex("ex", content.vocab.size(), cfg, rng);
    std::vector<const ContentInput*> ptrs;
    for (const auto& in : content.inputs) ptrs.push_back(&in);
    const Matrix r = testing::random_matrix(ex.output_dim(), 5, rng);
    nn::ParamRefs params;
    ex.collect(params);
    testing::jitter_biases(params, rng);
    auto report = nn::grad_check(
        params, [&] { return ex.apply(ptrs).cwiseProduct(r).sum(); },
        [&] {
          ContentExtractor::Cache cache;
          ex.forward(ptrs, cache);
          ex.backward(r, cache);
        });
    CAPTURE(seed);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);

    nn::Adam adam({.lr = 0.05});
    for (int step = 0; step < 5; ++step) {
      nn::zero_grads(params);
      ContentExtractor::Cache cache;
      ex.forward(ptrs, cache);
      ex.backward(r, cache);
      adam.step(params);
    }
    CHECK(ex.embedding.value.col(Vocab::kPad).isZero());
  }
}
