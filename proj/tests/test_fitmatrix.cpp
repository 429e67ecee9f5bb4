#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "boxsuite/error.hpp"
#include "boxsuite/fitmatrix.hpp"
#include "support.hpp"

using namespace boxsuite;
using boxsuite::testing::TempDir;

namespace {

bool contains(const std::vector<std::size_t>& v, std::size_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::vector<Shipment> random_shipments(std::mt19937_64& rng, std::size_t count) {
  std::uniform_int_distribution<int> n(1, 4);
  std::uniform_int_distribution<int> d(1, 5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Shipment> out;
  for (std::size_t i = 0; i < count; ++i) {
    Shipment s;
    s.id = Id(100 + i);
    bool ho = u(rng) < 0.25;
    bool br = u(rng) < 0.2;
    int k = n(rng);
    for (int c = 0; c < k; ++c) {
      s.cartons.push_back(Carton{Dims3{double(d(rng)), double(d(rng)), double(d(rng))}, ho && u(rng) < 0.5,
                                 br && u(rng) < 0.6, Id(c)});
    }
    if (u(rng) < 0.15) s.foldables.push_back(FoldableItem{Dims3{double(d(rng)), 2, 1}, 50});
    if (u(rng) < 0.05) s.cartons.clear();
    if (s.cartons.empty() && s.foldables.empty()) s.foldables.push_back(FoldableItem{Dims3{3, 3, 3}, 51});
    out.push_back(s);
  }
  return out;
}

// Reference decision straight from the oracle. Boxes without HO cartons may
// stand on any face.
bool reference_fit(const Shipment& s, const CandidateBox& box) {
  if (liquid_volume(s) > box.volume) return false;
  if (s.cartons.empty()) return true;
  std::vector<Dims3> floors{box.inner};
  if (s.height_oriented_count() == 0) {
    floors.push_back(Dims3{box.inner.a, box.inner.c, box.inner.b});
    floors.push_back(Dims3{box.inner.b, box.inner.c, box.inner.a});
  }
  for (const auto& f : floors) {
    if (oracle_fit(FitProblem{s.cartons, f, PackingRules{}}).fits()) return true;
  }
  return false;
}

FitMatrixConfig config(std::size_t threads = 1) {
  FitMatrixConfig cfg;
  cfg.threads = threads;
  return cfg;
}

}  // namespace

TEST_CASE("nesting examples") {
  BoxSet b = make_box_set({make_box(1, {5, 4, 1}), make_box(2, {5, 4, 2}), make_box(3, {10, 2, 2}),
                           make_box(4, {5, 5, 5}), make_box(5, {6, 5, 4}), make_box(6, {5, 6, 9})});
  auto ns = compute_nest_sets(b);
  auto idx = [&](Id id) { return *b.index_of(id); };
  CHECK(contains(ns.free[idx(1)], idx(2)));
  CHECK(contains(ns.ho[idx(1)], idx(2)));
  CHECK_FALSE(contains(ns.free[idx(3)], idx(4)));
  CHECK(contains(ns.ho[idx(5)], idx(6)));
  CHECK(contains(ns.free[idx(5)], idx(6)));
}

TEST_CASE("nesting invariants") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> d(1, 9);
  std::vector<CandidateBox> raw;
  for (int j = 0; j < 60; ++j) raw.push_back(make_box(j + 1, {double(d(rng)), double(d(rng)), double(d(rng))}));
  BoxSet b = make_box_set(raw);
  auto ns = compute_nest_sets(b);
  for (std::size_t j = 0; j < b.size(); ++j) {
    REQUIRE(!ns.free[j].empty());
    CHECK(ns.free[j].front() == j);
    CHECK(ns.ho[j].front() == j);
    for (std::size_t k : ns.ho[j]) CHECK(contains(ns.free[j], k));
    for (std::size_t k = 0; k < b.size(); ++k) {
      const auto& x = b.boxes[j].inner;
      const auto& y = b.boxes[k].inner;
      bool free = leq3(sort3(x), sort3(y));
      bool ho = x.c <= y.c && leq3(sort2(x), sort2(y));
      // Equal-volume twins earlier in the order are not listed.
      if (k < j && b.boxes[k].volume == b.boxes[j].volume) continue;
      CHECK(contains(ns.free[j], k) == (free && k >= j));
      CHECK(contains(ns.ho[j], k) == (ho && k >= j));
      if (contains(ns.free[j], k)) CHECK(b.boxes[k].volume >= b.boxes[j].volume);
    }
  }
}

TEST_CASE("foldable-only shipment fills by volume") {
  BoxSet b = make_box_set({make_box(1, {2, 2, 1}), make_box(2, {2, 2, 2}), make_box(3, {3, 3, 3})});
  Shipment s;
  s.id = 1;
  s.foldables.push_back(FoldableItem{{2, 2, 2}});
  Shipment big;
  big.id = 2;
  big.cartons.push_back(Carton{{4, 1, 1}});
  std::vector<Shipment> ships{s, big};
  auto r = compute_fit_matrix(ships, b, compute_nest_sets(b), config());
  CHECK(r.matrix.rows[0] == std::vector<std::size_t>{1, 2});
  CHECK(r.matrix.rows[1].empty());
  REQUIRE(r.packable.size() == 1);
  CHECK(r.packable.shipments[0] == 0);
  CHECK(r.packable.boxes[0] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("fit matrix matches the oracle cell by cell") {
  std::mt19937_64 rng(31);
  auto ships = random_shipments(rng, 60);
  BoxSet b = make_box_set(box_grid(2, 8, 2, 6, 1, 5, 1));
  auto r = compute_fit_matrix(ships, b, compute_nest_sets(b), config(4));
  CHECK(r.timeouts.empty());
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < ships.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      bool ref = reference_fit(ships[i], b.boxes[j]);
      if (ref != r.matrix.test(i, j)) ++mismatches;
      CHECK((shipment_fits(ships[i], b.boxes[j], config()) == FitOutcome::Fit) == ref);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("fit matrix invariants") {
  std::mt19937_64 rng(8);
  auto ships = random_shipments(rng, 80);
  BoxSet b = make_box_set(box_grid(2, 9, 2, 7, 1, 6, 1));
  auto ns = compute_nest_sets(b);
  auto r = compute_fit_matrix(ships, b, ns, config(3));
  for (std::size_t i = 0; i < ships.size(); ++i) {
    const auto& row = r.matrix.rows[i];
    CHECK(std::is_sorted(row.begin(), row.end()));
    for (std::size_t j : row) {
      CHECK(b.boxes[j].volume >= liquid_volume(ships[i]));
      const auto& closure = ships[i].height_oriented_count() > 0 ? ns.ho[j] : ns.free[j];
      for (std::size_t k : closure) CHECK(r.matrix.test(i, k));
    }
  }
  auto w = packable_set(r.matrix);
  CHECK(w.shipments == r.packable.shipments);
  for (std::size_t t = 0; t < w.size(); ++t) {
    CHECK(!w.boxes[t].empty());
    CHECK(w.boxes[t] == r.matrix.rows[w.shipments[t]]);
  }
  std::size_t nonzero = 0;
  for (const auto& row : r.matrix.rows) nonzero += !row.empty();
  CHECK(nonzero == w.size());
}

TEST_CASE("thread count does not change the matrix") {
  std::mt19937_64 rng(12);
  auto ships = random_shipments(rng, 50);
  BoxSet b = make_box_set(box_grid(2, 8, 2, 6, 1, 5, 1));
  auto ns = compute_nest_sets(b);
  auto one = compute_fit_matrix(ships, b, ns, config(1));
  auto many = compute_fit_matrix(ships, b, ns, config(8));
  CHECK(one.matrix.rows == many.matrix.rows);
}

TEST_CASE("prescreen toggle does not change the matrix") {
  std::mt19937_64 rng(13);
  auto ships = random_shipments(rng, 50);
  BoxSet b = make_box_set(box_grid(2, 8, 2, 6, 1, 5, 1));
  auto ns = compute_nest_sets(b);
  auto cfg = config(2);
  auto on = compute_fit_matrix(ships, b, ns, cfg);
  cfg.prescreen_pairs_triples = false;
  auto off = compute_fit_matrix(ships, b, ns, cfg);
  CHECK(on.matrix.rows == off.matrix.rows);
}

TEST_CASE("prior columns are reused for boxes with the same dims") {
  std::mt19937_64 rng(21);
  auto ships = random_shipments(rng, 40);
  BoxSet first = make_box_set(box_grid(2, 7, 2, 6, 1, 5, 1));
  auto cfg = config(2);
  auto base = compute_fit_matrix(ships, first, compute_nest_sets(first), cfg);

  std::vector<CandidateBox> raw;
  Id next = 10000;
  for (const auto& box : first.boxes) {
    if (box.id % 3 == 0) raw.push_back(make_box(next++, box.inner));
  }
  raw.push_back(make_box(next++, {8, 3, 3}));
  BoxSet second = make_box_set(raw);
  cfg.prior = PriorFits{&base.matrix, &first, cfg.rules};
  auto reused = compute_fit_matrix(ships, second, compute_nest_sets(second), cfg);
  cfg.prior.reset();
  auto fresh = compute_fit_matrix(ships, second, compute_nest_sets(second), cfg);
  CHECK(reused.matrix.rows == fresh.matrix.rows);
  CHECK(reused.stats.reused > 0);
}

TEST_CASE("export and import round trip") {
  TempDir dir("fitmatrix");
  std::mt19937_64 rng(1);
  auto ships = random_shipments(rng, 30);
  BoxSet b = make_box_set(box_grid(2, 7, 2, 5, 1, 4, 1));
  auto cfg = config(2);
  auto r = compute_fit_matrix(ships, b, compute_nest_sets(b), cfg);
  auto path = dir.file("fit.csv");
  export_fit_matrix(path, r, ships, b, cfg);
  auto back = import_fit_matrix(path, ships, b);
  CHECK(back.rows == r.matrix.rows);
  auto manifest = nlohmann::json::parse(boxsuite::testing::read_file(path + ".manifest.json"));
  CHECK(manifest["set_bits"].get<std::size_t>() == r.matrix.nnz());
  CHECK(manifest["config_hash"].get<std::string>() == config_hash(cfg, ships, b));
  CHECK(std::filesystem::exists(path + ".timeouts.csv"));

  auto cfg2 = cfg;
  cfg2.solver.use_orthant_symmetry = false;
  CHECK(config_hash(cfg2, ships, b) != config_hash(cfg, ships, b));

  auto bad = dir.write("bad.csv", "shipment_id,box_id\n100,999999\n");
  CHECK_THROWS_AS(import_fit_matrix(bad, ships, b), ValidationError);
}

TEST_CASE("rules can be switched off") {
  Shipment s;
  s.id = 1;
  s.cartons.push_back(Carton{{1, 1, 3}, true, false});
  BoxSet b = make_box_set({make_box(1, {3, 3, 1})});
  std::vector<Shipment> ships{s};
  auto cfg = config();
  CHECK(compute_fit_matrix(ships, b, compute_nest_sets(b), cfg).matrix.rows[0].empty());
  cfg.rules.enforce_ho = false;
  CHECK(compute_fit_matrix(ships, b, compute_nest_sets(b), cfg).matrix.rows[0].size() == 1);
}
