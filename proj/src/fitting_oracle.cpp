// Reference decision procedure: every orientation assignment, then a
// depth-first placement over normal positions. A coordinate of a carton on
// an axis is 0 or a sum of extents of a subset of the other cartons on that
// axis; any feasible packing can be pushed toward the origin until all
// coordinates have that form. Shares no search code with solve_fit.

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "boxsuite/fitting.hpp"
#include "fitting_internal.hpp"

namespace boxsuite {

namespace {

struct OracleSearch {
  const FitProblem& problem;
  double eps;
  std::size_t n;
  std::vector<std::size_t> order;  // placement order (original indices)
  std::vector<std::vector<detail::Orientation>> orients;
  std::vector<std::size_t> choice;  // orientation per original index
  std::vector<Dims3> pos;
  std::vector<bool> floor;
  std::uint64_t nodes = 0;

  std::vector<double> subset_sums(std::size_t self, int axis, double cap) const {
    std::vector<double> sums{0.0};
    for (std::size_t k = 0; k < n; ++k) {
      if (k == self) continue;
      double e = orients[k][choice[k]].ext[axis];
      std::size_t m = sums.size();
      for (std::size_t t = 0; t < m; ++t) {
        double s = sums[t] + e;
        if (s <= cap + eps) sums.push_back(s);
      }
    }
    std::sort(sums.begin(), sums.end());
    std::vector<double> out;
    for (double s : sums) {
      if (out.empty() || s > out.back() + eps) out.push_back(s);
    }
    return out;
  }

  bool free_at(std::size_t c, const Dims3& p, std::size_t placed) const {
    const Dims3& e = orients[c][choice[c]].ext;
    for (std::size_t t = 0; t < placed; ++t) {
      std::size_t o = order[t];
      const Dims3& eo = orients[o][choice[o]].ext;
      bool apart = false;
      for (int a = 0; a < 3 && !apart; ++a) {
        if (p[a] + e[a] <= pos[o][a] + eps || pos[o][a] + eo[a] <= p[a] + eps) apart = true;
      }
      if (!apart) return false;
    }
    return true;
  }

  bool place(std::size_t t, const std::array<std::vector<std::vector<double>>, 3>& coords) {
    ++nodes;
    if (t == n) return true;
    std::size_t c = order[t];
    for (double x : coords[0][c]) {
      for (double y : coords[1][c]) {
        for (double z : coords[2][c]) {
          if (floor[c] && z > eps) continue;
          Dims3 p{x, y, z};
          if (!free_at(c, p, t)) continue;
          pos[c] = p;
          if (place(t + 1, coords)) return true;
        }
      }
    }
    return false;
  }

  bool try_orientation() {
    std::array<std::vector<std::vector<double>>, 3> coords;
    for (int a = 0; a < 3; ++a) {
      coords[a].resize(n);
      for (std::size_t c = 0; c < n; ++c) {
        double cap = problem.box[a] - orients[c][choice[c]].ext[a];
        if (cap < -eps) return false;
        coords[a][c] = subset_sums(c, a, cap);
      }
    }
    return place(0, coords);
  }

  bool enumerate(std::size_t c) {
    if (c == n) return try_orientation();
    for (std::size_t o = 0; o < orients[c].size(); ++o) {
      if (!leq3(orients[c][o].ext, problem.box, eps)) continue;
      choice[c] = o;
      if (enumerate(c + 1)) return true;
    }
    return false;
  }
};

}  // namespace

FitVerdict oracle_fit(const FitProblem& problem) {
  if (problem.cartons.empty()) throw std::invalid_argument("oracle_fit needs at least one carton");
  auto t0 = std::chrono::steady_clock::now();
  OracleSearch s{problem, default_eps(problem.box), problem.cartons.size(), {}, {}, {}, {}, {}, 0};
  s.orients.resize(s.n);
  s.floor.resize(s.n);
  for (std::size_t c = 0; c < s.n; ++c) {
    s.orients[c] = detail::allowed_orientations(problem.cartons[c], problem.rules);
    s.floor[c] = detail::must_rest_on_floor(problem.cartons[c], problem.rules);
  }
  s.order.resize(s.n);
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(), [&](std::size_t l, std::size_t r) {
    return problem.cartons[l].dims.volume() > problem.cartons[r].dims.volume();
  });
  s.choice.assign(s.n, 0);
  s.pos.assign(s.n, Dims3{});

  FitVerdict v;
  double vol = 0.0;
  for (const auto& c : problem.cartons) vol += c.dims.volume();
  bool fits = vol <= problem.box.volume() + s.eps && s.enumerate(0);
  v.outcome = fits ? FitOutcome::Fit : FitOutcome::NoFit;
  if (fits) {
    std::vector<Placement> w(s.n);
    for (std::size_t c = 0; c < s.n; ++c) w[c] = detail::make_placement(s.orients[c][s.choice[c]], s.pos[c]);
    v.witness = std::move(w);
  }
  v.stats.nodes = s.nodes;
  v.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

}  // namespace boxsuite
