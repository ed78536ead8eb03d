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

#include "cli_runner.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace bundlerec::testing;
namespace fs = std::filesystem;

namespace {

const std::string kSmall = "--mashups 40 --services 20 --vocab 120 --tags 12 --providers 5";

}  // namespace

TEST_CASE("gen-data is deterministic") {
  auto a = fresh_dir("cli_gen_a"), b = fresh_dir("cli_gen_b");
  CHECK(run_cli("gen-data --data-dir " + a.string() + " --seed 4 " + kSmall).exit_code == 0);
  CHECK(run_cli("gen-data --data-dir " + b.string() + " --seed 4 " + kSmall).exit_code == 0);
  CHECK(read_file(a / "mashups.jsonl") == read_file(b / "mashups.jsonl"));
  CHECK(read_file(a / "services.jsonl") == read_file(b / "services.jsonl"));
  CHECK_FALSE(read_file(a / "mashups.jsonl").empty());
}

TEST_CASE("argument handling") {
  auto bad = run_cli("train --no-such-flag");
  CHECK(bad.exit_code != 0);
  CHECK(run_cli("").exit_code != 0);
  CHECK(run_cli("train --variant xisr").exit_code != 0);

  auto dump = run_cli("train --variant nisr --strategy average --epochs 3 --dump-config");
  REQUIRE(dump.exit_code == 0);
  auto j = nlohmann::json::parse(dump.output);
  CHECK(j.at("variant") == "nisr");
  CHECK(j.at("strategy") == "average");
  CHECK(j.at("pipeline").at("train").at("epochs") == 3);
}

TEST_CASE("hybrid training needs its parts") {
  auto data = fresh_dir("cli_hisr_data"), out = fresh_dir("cli_hisr_out");
  REQUIRE(run_cli("gen-data --data-dir " + data.string() + " " + kSmall).exit_code == 0);
  auto r = run_cli("train --variant hisr --data-dir " + data.string() + " --out-dir " +
                   out.string() + " --fold 0");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("train --variant fisr") != std::string::npos);
}

TEST_CASE("first-round results do not depend on the strategy") {
  auto data = fresh_dir("cli_eval_data"), out = fresh_dir("cli_eval_out");
  REQUIRE(run_cli("gen-data --data-dir " + data.string() + " " + kSmall).exit_code == 0);
  const std::string common = " --variant nisr --folds 2 --epochs 2 --data-dir " +
                             data.string() + " --out-dir " + out.string();
  std::string reports[2];
  int i = 0;
  for (std::string s : {"attention", "none"}) {
    REQUIRE(run_cli("train --strategy " + s + common).exit_code == 0);
    auto r = run_cli("evaluate --rounds 0 --strategy " + s + common);
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(read_file(out / ("report-nisr-" + s + ".json")));
    reports[i++] = j.at("stage1").dump();
  }
  CHECK(reports[0] == reports[1]);
}
