#pragma once

// Seeded generators shared by unit tests and the acceptance runner.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "boxsuite/fitting.hpp"
#include "boxsuite/model.hpp"
#include "boxsuite/pmedian.hpp"

namespace boxsuite::testing {

// n in 2..5, carton dims 1..6, box dims 1..10; about a quarter of the
// instances carry HO flags and about 15% carry BR flags. With
// force_duplicate, one carton is copied so the instance has identical pairs.
inline FitProblem random_fit_problem(std::mt19937_64& rng, bool force_duplicate = false) {
  std::uniform_int_distribution<int> count(2, 5);
  std::uniform_int_distribution<int> cdim(1, 6);
  std::uniform_int_distribution<int> bdim(1, 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FitProblem p;
  int n = count(rng);
  bool ho = u(rng) < 0.25;
  bool br = u(rng) < 0.15;
  for (int i = 0; i < n; ++i) {
    Carton c;
    c.dims = Dims3{double(cdim(rng)), double(cdim(rng)), double(cdim(rng))};
    c.height_oriented = ho && u(rng) < 0.5;
    c.bottom_resting = br && u(rng) < 0.5;
    p.cartons.push_back(c);
  }
  if (force_duplicate || u(rng) < 0.3) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    int from = pick(rng);
    int to = pick(rng);
    if (to == from) to = (from + 1) % n;
    p.cartons[to] = p.cartons[from];
  }
  p.box = Dims3{double(bdim(rng)), double(bdim(rng)), double(bdim(rng))};
  return p;
}

// Uniform costs in [lo, hi].
inline PMedianInstance random_pmedian(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t p,
                                      double lo = 1.0, double hi = 100.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(n * m);
  for (auto& x : d) x = u(rng);
  return PMedianInstance(n, m, p, std::move(d));
}

// Up to 12 boxes and 20 shipments of 1..3 small cartons, with p and a lock
// set of size k < p. Box dims are tight enough that coverage often fails.
struct SmallPipeline {
  std::vector<Shipment> shipments;
  BoxSet boxes;
  std::size_t p = 2;
  std::vector<Id> locked_ids;
};

inline SmallPipeline random_small_pipeline(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nbox(4, 12);
  std::uniform_int_distribution<int> nship(3, 20);
  std::uniform_int_distribution<int> ncart(1, 3);
  std::uniform_int_distribution<int> bdim(1, 7);
  std::uniform_int_distribution<int> cdim(1, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SmallPipeline out;
  std::vector<CandidateBox> raw;
  const int J = nbox(rng);
  for (int j = 0; j < J; ++j) raw.push_back(make_box(j + 1, {double(bdim(rng)), double(bdim(rng)), double(bdim(rng))}));
  out.boxes = make_box_set(raw);
  const int I = nship(rng);
  for (int i = 0; i < I; ++i) {
    Shipment s;
    s.id = 100 + i;
    const int n = ncart(rng);
    for (int c = 0; c < n; ++c) {
      s.cartons.push_back(Carton{Dims3{double(cdim(rng)), double(cdim(rng)), double(cdim(rng))}, u(rng) < 0.1,
                                 u(rng) < 0.1, c});
    }
    out.shipments.push_back(s);
  }
  std::uniform_int_distribution<int> pp(1, std::min(4, J - 1));
  out.p = static_cast<std::size_t>(pp(rng));
  std::uniform_int_distribution<int> kk(0, static_cast<int>(out.p) - 1);
  const int k = kk(rng);
  std::vector<Id> ids;
  for (const auto& b : out.boxes.boxes) ids.push_back(b.id);
  std::shuffle(ids.begin(), ids.end(), rng);
  out.locked_ids.assign(ids.begin(), ids.begin() + k);
  return out;
}

// Cheapest p-subset of m boxes that contains every locked box and gives
// each customer t a box from fits[t]; cost(t, j) prices the assignment.
// Plain enumeration, independent of the penalty encoding.
struct BruteSuite {
  double cost = 0.0;
  std::vector<std::size_t> suite;
};

inline std::optional<BruteSuite> brute_force_suite(const std::vector<std::vector<std::size_t>>& fits, std::size_t m,
                                                   std::size_t p, const std::vector<std::size_t>& locked,
                                                   const std::function<double(std::size_t, std::size_t)>& cost) {
  std::optional<BruteSuite> best;
  std::vector<bool> pick(m, false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(p), true);
  do {
    bool ok = std::all_of(locked.begin(), locked.end(), [&](std::size_t j) { return pick[j]; });
    double total = 0.0;
    for (std::size_t t = 0; ok && t < fits.size(); ++t) {
      double mn = std::numeric_limits<double>::infinity();
      for (std::size_t j : fits[t])
        if (pick[j]) mn = std::min(mn, cost(t, j));
      if (mn == std::numeric_limits<double>::infinity()) ok = false;
      total += mn;
    }
    if (ok && (!best || total < best->cost)) {
      best = BruteSuite{total, {}};
      for (std::size_t j = 0; j < m; ++j)
        if (pick[j]) best->suite.push_back(j);
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("boxsuite_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(file(name)) << content;
    return file(name);
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace boxsuite::testing
