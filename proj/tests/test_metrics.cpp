#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "panoscan/errors.hpp"
#include "panoscan/metrics.hpp"
#include "panoscan/rng.hpp"

using namespace panoscan;

TEST_CASE("average ranks handle ties with mean ranks") {
  const std::vector<double> r1 = average_ranks({10.0, 20.0, 20.0, 30.0});
  CHECK(r1 == std::vector<double>{1.0, 2.5, 2.5, 4.0});
  const std::vector<double> r2 = average_ranks({5.0, 5.0, 5.0});
  CHECK(r2 == std::vector<double>{2.0, 2.0, 2.0});
  const std::vector<double> r3 = average_ranks({3.0, 1.0, 2.0});
  CHECK(r3 == std::vector<double>{3.0, 1.0, 2.0});
}

TEST_CASE("spearman pins") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {1, 3, 2, 5, 4};
  // 1 - 6*sum(d^2)/(n(n^2-1)) with d^2 = (0,1,1,1,1).
  CHECK(std::abs(srcc(x, y) - 0.8) < 1e-12);

  std::vector<double> ex;
  for (double v : x) ex.push_back(std::exp(v));  // strictly increasing map
  CHECK(srcc(x, y) == srcc(ex, y));              // rank construction: exact
  CHECK(std::abs(srcc(x, ex) - 1.0) < 1e-12);

  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(std::abs(srcc(x, neg) + 1.0) < 1e-12);

  CHECK(srcc(x, y) == srcc(y, x));
}

TEST_CASE("pearson pins") {
  const std::vector<double> x = {0, 1, 2};
  CHECK(std::abs(plcc(x, {0, 1, 3}) - std::sqrt(27.0 / 28.0)) < 1e-12);
  CHECK(std::abs(plcc(x, {0, 1, 3}) - 0.98198) < 1e-5);

  Rng rng(41);
  std::vector<double> a, b2;
  for (int i = 0; i < 40; ++i) a.push_back(rng.normal());
  for (double v : a) b2.push_back(2.0 * v + 3.0);
  CHECK(std::abs(plcc(a, b2) - 1.0) < 1e-12);

  std::vector<double> neg;
  for (double v : a) neg.push_back(-v);
  CHECK(std::abs(plcc(a, neg) + 1.0) < 1e-12);

  // Positive affine transforms of either side within 1e-12.
  std::vector<double> c;
  for (int i = 0; i < 40; ++i) c.push_back(rng.normal());
  std::vector<double> a_aff, c_aff;
  for (double v : a) a_aff.push_back(0.31 * v - 7.0);
  for (double v : c) c_aff.push_back(12.5 * v + 0.03);
  CHECK(std::abs(plcc(a, c) - plcc(a_aff, c)) < 1e-12);
  CHECK(std::abs(plcc(a, c) - plcc(a, c_aff)) < 1e-12);
  CHECK(plcc(a, c) == plcc(c, a));
}

TEST_CASE("degenerate correlation inputs are rejected") {
  CHECK_THROWS_AS(plcc({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), NumericalError);
  CHECK_THROWS_AS(plcc({1.0, 2.0, 3.0}, {5.0, 5.0, 5.0}), NumericalError);
  CHECK_THROWS_AS(srcc({2.0, 2.0}, {1.0, 3.0}), NumericalError);
  CHECK_THROWS_AS(plcc({1.0}, {2.0}), ArgumentError);
  CHECK_THROWS_AS(plcc({1.0, 2.0}, {1.0, 2.0, 3.0}), ContractError);
  CHECK_THROWS_AS(srcc({1.0, 2.0}, {1.0, 2.0, 3.0}), ContractError);
}

TEST_CASE("report bundles correlations and pairs") {
  const EvalReport r = make_report({10, 20, 30, 40}, {12, 19, 33, 41});
  CHECK(r.n == 4);
  CHECK(std::abs(r.srcc_v - 1.0) < 1e-12);
  CHECK(r.plcc_v > 0.99);
  CHECK(r.pairs[2].first == 30);
  CHECK(r.pairs[2].second == 33);
}

TEST_CASE("sweep walks the grid in order and times cells") {
  std::vector<std::pair<std::size_t, std::size_t>> calls;
  const auto cells = sweep({2, 3}, {1, 2}, [&](std::size_t k, std::size_t t) {
    calls.emplace_back(k, t);
    return std::make_pair(0.5 + 0.01 * k, 0.4 + 0.01 * t);
  });
  REQUIRE(cells.size() == 4);
  CHECK(calls == std::vector<std::pair<std::size_t, std::size_t>>{
                     {2, 1}, {2, 2}, {3, 1}, {3, 2}});
  CHECK(cells[0].K == 2);
  CHECK(cells[0].T == 1);
  CHECK(cells[3].K == 3);
  CHECK(cells[3].T == 2);
  CHECK(cells[1].srcc_v == 0.5 + 0.01 * 2);
  CHECK(cells[1].plcc_v == 0.4 + 0.01 * 2);
  for (const auto& c : cells) CHECK(c.wall_ms >= 0.0);

  const std::string csv = sweep_csv(cells);
  CHECK(csv.rfind("K,T,srcc,plcc,wall_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
