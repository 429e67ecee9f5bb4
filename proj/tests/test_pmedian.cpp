#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>

#include "boxsuite/error.hpp"
#include "boxsuite/pmedian.hpp"
#include "support.hpp"

using namespace boxsuite;
using boxsuite::testing::random_pmedian;

namespace {

PMedianInstance small(std::size_t p) { return PMedianInstance(3, 2, p, {1, 9, 9, 1, 2, 5}); }

// Brute force over p-subsets with a bitmask, independent of solve_exact.
double brute_optimum(const PMedianInstance& inst) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t m = inst.m();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != inst.p()) continue;
    double total = 0;
    for (std::size_t i = 0; i < inst.n(); ++i) {
      double mn = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < m; ++j)
        if (mask >> j & 1u) mn = std::min(mn, inst.d(i, j));
      total += mn;
    }
    best = std::min(best, total);
  }
  return best;
}

double row_minima(const PMedianInstance& inst) {
  double s = 0;
  for (std::size_t i = 0; i < inst.n(); ++i) s += *std::min_element(inst.row(i), inst.row(i) + inst.m());
  return s;
}

}  // namespace

TEST_CASE("instance validation") {
  CHECK_THROWS_AS(PMedianInstance(2, 2, 0, {1, 2, 3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(PMedianInstance(2, 2, 3, {1, 2, 3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(PMedianInstance(2, 2, 1, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(PMedianInstance(2, 2, 1, {1, -2, 3, 4}), std::invalid_argument);
  CHECK_THROWS_AS(PMedianInstance(2, 2, 1, {1, std::nan(""), 3, 4}), std::invalid_argument);
}

TEST_CASE("exact enumeration on the 3x2 example") {
  auto r1 = solve_exact(small(1));
  CHECK(r1.suite == Suite{0});
  CHECK(r1.cost == 12.0);
  auto r2 = solve_exact(small(2));
  CHECK(r2.suite == Suite{0, 1});
  CHECK(r2.cost == 4.0);
}

TEST_CASE("exact matches brute force and p = m gives row minima") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 40; ++t) {
    std::size_t m = 3 + t % 8;
    std::size_t p = 1 + t % m;
    auto inst = random_pmedian(rng, 20, m, p);
    auto r = solve_exact(inst);
    CHECK(r.cost == doctest::Approx(brute_optimum(inst)));
    CHECK(r.suite.size() == p);
    CHECK(std::is_sorted(r.suite.begin(), r.suite.end()));
    CHECK(suite_cost(inst, r.suite) == doctest::Approx(r.cost));
  }
  auto full = random_pmedian(rng, 30, 6, 6);
  CHECK(solve_exact(full).cost == doctest::Approx(row_minima(full)));
  CHECK(solve_grasp(full).cost == doctest::Approx(row_minima(full)));
}

TEST_CASE("exact refuses oversized enumerations") {
  std::mt19937_64 rng(1);
  auto inst = random_pmedian(rng, 5, 30, 10);
  CHECK_THROWS_AS(solve_exact(inst), BudgetError);
  ExactConfig tight;
  tight.max_subsets = 10;
  CHECK_THROWS_AS(solve_exact(random_pmedian(rng, 5, 8, 4), tight), BudgetError);
}

TEST_CASE("check_suite") {
  auto inst = small(1);
  CHECK_NOTHROW(check_suite(inst, Suite{1}));
  CHECK_THROWS_AS(check_suite(inst, Suite{2}), std::invalid_argument);
  CHECK_THROWS_AS(check_suite(inst, Suite{0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(check_suite(small(2), Suite{1, 1}), std::invalid_argument);
}

TEST_CASE("interchange from a bad start") {
  auto inst = small(1);
  auto r = local_search_interchange(inst, Suite{1});
  CHECK(r.suite == Suite{0});
  CHECK(r.cost == 12.0);
  auto fixed = local_search_interchange(inst, Suite{0});
  CHECK(fixed.suite == Suite{0});
  CHECK(fixed.cost == 12.0);
}

TEST_CASE("interchange never worsens and ends swap-optimal") {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 60; ++t) {
    auto inst = random_pmedian(rng, 60, 15, 2 + t % 4);
    std::vector<std::size_t> all(15);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    Suite start(all.begin(), all.begin() + inst.p());
    std::sort(start.begin(), start.end());
    const double start_cost = suite_cost(inst, start);
    for (auto nb : {Neighborhood::FirstImprovement, Neighborhood::BestImprovement}) {
      auto r = local_search_interchange(inst, start, nb);
      CHECK(r.cost <= start_cost);
      CHECK(r.cost == doctest::Approx(suite_cost(inst, r.suite)));
      CHECK_FALSE(find_improving_swap(inst, r.suite).has_value());
    }
  }
}

TEST_CASE("find_improving_swap agrees with direct recomputation") {
  std::mt19937_64 rng(5);
  auto inst = random_pmedian(rng, 15, 6, 2);
  Suite s{0, 1};
  auto sw = find_improving_swap(inst, s);
  double best = 0;
  for (std::size_t out : s) {
    for (std::size_t in = 0; in < 6; ++in) {
      if (std::find(s.begin(), s.end(), in) != s.end()) continue;
      Suite t = s;
      std::replace(t.begin(), t.end(), out, in);
      std::sort(t.begin(), t.end());
      best = std::min(best, suite_cost(inst, t) - suite_cost(inst, s));
    }
  }
  if (best < -1e-9) {
    REQUIRE(sw);
    CHECK(sw->delta == doctest::Approx(best));
  } else {
    CHECK_FALSE(sw);
  }
}

TEST_CASE("greedy construction") {
  std::mt19937_64 rng(8);
  auto inst = random_pmedian(rng, 40, 10, 4);
  auto g = greedy_construct(inst, 0.0, 1);
  CHECK(g.size() == 4);
  CHECK(greedy_construct(inst, 0.0, 99) == g);
  // Pure greedy: first pick is the best single facility.
  double best1 = std::numeric_limits<double>::infinity();
  std::size_t arg1 = 0;
  for (std::size_t j = 0; j < 10; ++j) {
    double c = suite_cost(PMedianInstance(40, 10, 1, {inst.data().begin(), inst.data().end()}), Suite{j});
    if (c < best1) {
      best1 = c;
      arg1 = j;
    }
  }
  CHECK(std::find(g.begin(), g.end(), arg1) != g.end());
  auto r = greedy_construct(inst, 0.5, 3);
  CHECK_NOTHROW(check_suite(inst, r));
  CHECK(greedy_construct(inst, 0.5, 3) == r);
}

TEST_CASE("path relinking") {
  std::mt19937_64 rng(9);
  auto inst = random_pmedian(rng, 40, 10, 3);
  Suite a{0, 1, 2};
  CHECK(path_relink(inst, a, a) == a);
  Suite b{0, 1, 5};
  auto r = path_relink(inst, a, b);
  // One step away: the only intermediate is the guide itself.
  CHECK(r == b);
  Suite far{6, 7, 8};
  auto rr = path_relink(inst, a, far);
  CHECK_NOTHROW(check_suite(inst, rr));
  // Best on the walked path is at most the cost of the guide.
  CHECK(suite_cost(inst, rr) <= suite_cost(inst, far) + 1e-9);
}

TEST_CASE("grasp is no worse than greedy and is reproducible") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 10; ++t) {
    auto inst = random_pmedian(rng, 60, 15, 3);
    GraspParams gp;
    gp.seed = 5;
    auto r = solve_grasp(inst, gp);
    CHECK(r.cost <= suite_cost(inst, greedy_construct(inst, 0.0, 0)) + 1e-9);
    CHECK(r.cost >= brute_optimum(inst) - 1e-9);
    CHECK(solve_grasp(inst, gp).suite == r.suite);
    gp.threads = 4;
    CHECK(solve_grasp(inst, gp).suite == r.suite);
  }
}

TEST_CASE("dual value") {
  auto inst = small(1);
  std::vector<double> zero(3, 0.0);
  CHECK(dual_value(inst, zero) == 0.0);
  // rho = (-11, -8): D = 23 - 11 = 12, the p = 1 optimum.
  std::vector<double> lam{9, 9, 5};
  Suite open;
  CHECK(dual_value(inst, lam, &open) == 12.0);
  CHECK(open == Suite{0});
  std::vector<double> minima{1, 1, 2};
  CHECK(dual_value(inst, minima) == 4.0);
}

TEST_CASE("lagrangian bounds sandwich the optimum") {
  std::mt19937_64 rng(123);
  for (int t = 0; t < 20; ++t) {
    auto inst = random_pmedian(rng, 40, 10, 2 + t % 3);
    std::vector<BoundStep> trace;
    auto r = lagrangian_bounds(inst, {}, &trace);
    const double opt = brute_optimum(inst);
    REQUIRE(r.lower_bound);
    CHECK(*r.lower_bound <= opt + 1e-6);
    CHECK(opt <= r.cost + 1e-9);
    REQUIRE(r.gap);
    CHECK(*r.gap >= 0.0);
    CHECK(*r.gap < 1.0);
    REQUIRE(!trace.empty());
    double prev = -std::numeric_limits<double>::infinity();
    for (const auto& s : trace) {
      CHECK(s.dual <= opt + 1e-6);
      CHECK(s.lower >= prev);
      CHECK(s.lower <= s.upper + 1e-9);
      prev = s.lower;
    }
  }
}

TEST_CASE("facility forcing keeps valid bounds") {
  std::mt19937_64 rng(321);
  std::size_t forced = 0;
  for (int t = 0; t < 30; ++t) {
    auto inst = random_pmedian(rng, 40, 10, 2 + t % 3);
    LagrangianParams lp;
    lp.force_facilities = true;
    std::vector<BoundStep> trace;
    auto r = lagrangian_bounds(inst, lp, &trace);
    const double opt = brute_optimum(inst);
    REQUIRE(r.lower_bound);
    CHECK(*r.lower_bound <= opt + 1e-6);
    CHECK(r.cost >= opt - 1e-9);
    for (const auto& s : trace) CHECK(s.forced_in <= inst.p());
    forced += trace.back().forced_in + trace.back().forced_out;
  }
  CHECK(forced > 0);
}

TEST_CASE("a subgradient step from zero improves the bound") {
  std::mt19937_64 rng(2);
  auto inst = random_pmedian(rng, 30, 8, 2);
  LagrangianParams lp;
  lp.lambda0 = std::vector<double>(30, 0.0);
  lp.max_iters = 5;
  std::vector<BoundStep> trace;
  lagrangian_bounds(inst, lp, &trace);
  REQUIRE(trace.size() >= 2);
  CHECK(trace[0].dual == 0.0);
  CHECK(trace.back().lower > 0.0);
}

TEST_CASE("assignment ties go to the lowest index") {
  const double G = 100;
  PMedianInstance inst(2, 3, 2, {8, 8, G, 5, 3, G});
  auto a = extract_assignment(inst, Suite{0, 1});
  CHECK(a.facility == std::vector<std::size_t>{0, 1});
}

TEST_CASE("feasibility against gamma") {
  SolveResult r;
  r.suite = {0, 2};
  r.cost = 50;
  CHECK(check_feasible(r, 51).has_value());
  CHECK_FALSE(check_feasible(r, 50).has_value());
}

TEST_CASE("result json") {
  SolveResult r;
  r.suite = {0, 2};
  r.cost = 12;
  r.lower_bound = 11;
  r.gap = 1.0 / 12;
  std::vector<std::int64_t> ids{100, 200, 300};
  auto j = nlohmann::json::parse(result_to_json(r, ids));
  CHECK(j["cost"].get<double>() == 12);
  CHECK(j["suite"][1].get<std::int64_t>() == 300);
  CHECK(j["lower_bound"].get<double>() == 11);
}
