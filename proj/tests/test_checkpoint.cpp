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

#include <filesystem>
#include <fstream>

#include "bundlerec/checkpoint.hpp"
#include "doctest.h"

using namespace bundlerec;

TEST_CASE("checkpoint round trip is byte-exact") {
  Checkpoint a;
  a.manifest = {{"format", "test"}, {"n", 3}};
  a.put("z", nn::Matrix::Constant(2, 3, 0.1));
  a.put("a", nn::Matrix::Identity(2, 2));
  const auto bytes = a.serialize();
  auto b = Checkpoint::deserialize(bytes);
  CHECK(b.serialize() == bytes);
  CHECK(b.get("z") == a.get("z"));
  CHECK(b.manifest == a.manifest);
  CHECK(b.hash() == a.hash());
  CHECK(hex64(0xabcULL) == "0000000000000abc");

  Checkpoint c;
  c.manifest = a.manifest;
  c.put("a", nn::Matrix::Identity(2, 2));
  c.put("z", nn::Matrix::Constant(2, 3, 0.1));
  CHECK(c.serialize() == bytes);  // insertion order does not matter

  auto path = std::filesystem::temp_directory_path() / "bundlerec_ckpt.bin";
  a.save(path);
  CHECK(Checkpoint::load(path).hash() == a.hash());
}

TEST_CASE("checkpoint rejects damaged input") {
  Checkpoint a;
  a.put("w", nn::Matrix::Ones(2, 2));
  auto bytes = a.serialize();
  CHECK_THROWS_AS(Checkpoint::deserialize("nonsense"), Error);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes + "x"), Error);
  CHECK_THROWS_AS(a.get("missing"), Error);
  CHECK_FALSE(a.has("missing"));
}

TEST_CASE("parameters stored by name") {
  Rng rng(1);
  nn::DenseLayer layer("dense", 3, 2, nn::Activation::kPRelu, rng);
  nn::ParamRefs params;
  layer.collect(params);
  Checkpoint ck;
  ck.put_params(params, "pre/");
  CHECK(ck.has("pre/dense.weight"));
  Rng other(2);
  nn::DenseLayer copy("dense", 3, 2, nn::Activation::kPRelu, other);
  nn::ParamRefs cp;
  copy.collect(cp);
  ck.get_params(cp, "pre/");
  CHECK(copy.weight.value == layer.weight.value);
  nn::DenseLayer wrong("dense", 4, 2, nn::Activation::kPRelu, other);
  nn::ParamRefs wp;
  wrong.collect(wp);
  CHECK_THROWS(ck.get_params(wp, "pre/"));
}
