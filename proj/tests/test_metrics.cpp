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

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace bundlerec;
using namespace bundlerec::eval;

TEST_CASE("worked metric example") {
  // rec = (x, b, y, d), act = {b, d}
  const std::vector<int> rec{10, 1, 11, 3};
  const std::vector<int> act{1, 3};
  auto m = metrics_at_n(rec, act, 4, 2);
  CHECK(m.precision == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.map == doctest::Approx(0.5).epsilon(1e-12));
  const double ndcg = (1 / std::log2(3.0) + 1 / std::log2(5.0)) / (1 + 1 / std::log2(3.0));
  CHECK(m.ndcg == doctest::Approx(ndcg).epsilon(1e-12));
  CHECK(std::abs(m.ndcg - 0.651) < 1e-3);
}

TEST_CASE("perfect, disjoint and short lists") {
  const std::vector<int> act{4, 5, 6};
  auto perfect = metrics_at_n(std::vector<int>{6, 5, 4}, act, 3, 3);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.map == doctest::Approx(1.0));
  CHECK(perfect.ndcg == doctest::Approx(1.0));

  auto none = metrics_at_n(std::vector<int>{1, 2, 3}, act, 3, 3);
  CHECK(none.precision == 0.0);
  CHECK(none.f1 == 0.0);
  CHECK(none.ndcg == 0.0);

  // Only the first n entries count.
  auto cut = metrics_at_n(std::vector<int>{1, 4, 5}, act, 1, 3);
  CHECK(cut.precision == 0.0);
  auto empty = metrics_at_n(std::vector<int>{}, act, 5, 3);
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);

  CHECK_THROWS_AS(metrics_at_n(std::vector<int>{1}, std::vector<int>{}, 5, 1), ConfigError);
  CHECK_THROWS_AS(metrics_at_n(std::vector<int>{1}, act, 0, 3), ConfigError);
}

TEST_CASE("metrics agree with the hit-sequence oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<int> pool(30);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int len = static_cast<int>(rng() % (n + 1));
    std::vector<int> rec(pool.begin(), pool.begin() + len);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int n_act = 1 + static_cast<int>(rng() % 6);
    std::vector<int> act(pool.begin(), pool.begin() + n_act);
    auto got = metrics_at_n(rec, act, n, n_act);
    auto want = testing::metric_oracle(rec, act, n, n_act);
    CAPTURE(trial);
    CHECK(testing::max_metric_gap(got, want) <= 1e-12);
  }
}

TEST_CASE("random baseline F1") {
  // 10 of 50 drawn, 2 relevant: 0.4 expected hits.
  CHECK(random_f1(50, 2, 10) == doctest::Approx(2 * 0.4 / 12));
  CHECK(random_f1(5, 5, 10) == doctest::Approx(1.0));
  CHECK(random_f1(0, 2, 10) == 0.0);
}

namespace {

// W+ with ranks counted directly: rank = #smaller + (#equal + 1) / 2.
double naive_w_plus(const std::vector<double>& d) {
  double w = 0;
  for (double x : d) {
    if (x <= 0) continue;
    double less = 0, equal = 0;
    for (double y : d) {
      if (std::abs(y) < std::abs(x)) ++less;
      if (std::abs(y) == std::abs(x)) ++equal;
    }
    w += less + (equal + 1) / 2;
  }
  return w;
}

}  // namespace

TEST_CASE("signed-rank statistic") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> value(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(8), b(8, 0.0), d;
    for (auto& x : a) {
      do x = value(rng); while (x == 0);
      d.push_back(x);
    }
    auto r = wilcoxon_signed_rank(a, b);
    CHECK(r.n == 8);
    CHECK(r.statistic == doctest::Approx(naive_w_plus(d)));
    CHECK(r.p_value >= 0.0);
    CHECK(r.p_value <= 1.0);
  }

  std::vector<double> a{1.1, 2.2, 3.3, 4.4, 5.5, 6.6, 7.7, 8.8, 9.9, 11.0};
  std::vector<double> b(10, 0.0);
  auto all_up = wilcoxon_signed_rank(a, b);
  CHECK(all_up.statistic == 55.0);
  CHECK(all_up.z == doctest::Approx(27.5 / std::sqrt(96.25)));
  CHECK(all_up.p_value == doctest::Approx(0.00506).epsilon(0.01));
  auto all_down = wilcoxon_signed_rank(b, a);
  CHECK(all_down.statistic == 0.0);
  CHECK(all_down.p_value == doctest::Approx(all_up.p_value));

  std::vector<double> same{1, 2, 3, 4, 5, 6, 7};
  auto almost = same;
  almost[0] = 9;
  CHECK_THROWS_AS(wilcoxon_signed_rank(same, almost), ConfigError);
  CHECK_THROWS_AS(wilcoxon_signed_rank(same, a), ConfigError);
}
