#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "boxsuite/fitting.hpp"
#include "fitting_internal.hpp"

namespace boxsuite {

namespace detail {

std::vector<Orientation> allowed_orientations(const Carton& c, const PackingRules& rules) {
  static constexpr std::array<std::array<int, 3>, 6> kPerms{{
      {0, 1, 2}, {1, 0, 2}, {0, 2, 1}, {2, 0, 1}, {1, 2, 0}, {2, 1, 0},
  }};
  const bool ho = rules.enforce_ho && c.height_oriented;
  std::vector<Orientation> out;
  for (const auto& perm : kPerms) {
    if (ho && perm[2] != 2) continue;
    Dims3 ext{c.dims[perm[0]], c.dims[perm[1]], c.dims[perm[2]]};
    bool dup = std::any_of(out.begin(), out.end(), [&](const Orientation& o) { return o.ext == ext; });
    if (!dup) out.push_back(Orientation{perm, ext});
  }
  return out;
}

bool must_rest_on_floor(const Carton& c, const PackingRules& rules) {
  return rules.enforce_br && c.bottom_resting;
}

Grouping group_cartons(const FitProblem& problem) {
  const auto& cs = problem.cartons;
  const std::size_t n = cs.size();
  std::vector<int> first_group(n, -1);
  std::vector<std::size_t> reps;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < reps.size(); ++g) {
      if (interchangeable(cs[reps[g]], cs[i], problem.rules)) {
        first_group[i] = static_cast<int>(g);
        break;
      }
    }
    if (first_group[i] < 0) {
      first_group[i] = static_cast<int>(reps.size());
      reps.push_back(i);
    }
  }
  Grouping g;
  g.order.resize(n);
  std::iota(g.order.begin(), g.order.end(), std::size_t{0});
  std::stable_sort(g.order.begin(), g.order.end(),
                   [&](std::size_t l, std::size_t r) { return first_group[l] < first_group[r]; });
  g.group.resize(n);
  for (std::size_t m = 0; m < n; ++m) g.group[m] = first_group[g.order[m]];
  g.link_next.assign(n, false);
  for (std::size_t m = 0; m + 1 < n; ++m) g.link_next[m] = g.group[m] == g.group[m + 1];

  g.anchor = 0;
  for (std::size_t m = 1; m < n; ++m) {
    if (cs[g.order[m]].dims.volume() < cs[g.order[g.anchor]].dims.volume()) g.anchor = m;
  }
  g.anchor_drops_z = std::any_of(cs.begin(), cs.end(), [&](const Carton& c) { return must_rest_on_floor(c, problem.rules); });
  return g;
}

Placement make_placement(const Orientation& o, Dims3 position) {
  return Placement{o.dim_on_axis, o.ext, position};
}

}  // namespace detail

std::string to_string(FitOutcome o) {
  switch (o) {
    case FitOutcome::Fit: return "fit";
    case FitOutcome::NoFit: return "nofit";
    case FitOutcome::TimedOut: return "timeout";
  }
  return "?";
}

double default_eps(const Dims3& box) { return 1e-9 * box.max(); }

bool interchangeable(const Carton& a, const Carton& b, const PackingRules& rules) {
  const bool ho_a = rules.enforce_ho && a.height_oriented;
  const bool ho_b = rules.enforce_ho && b.height_oriented;
  if (ho_a != ho_b) return false;
  if (detail::must_rest_on_floor(a, rules) != detail::must_rest_on_floor(b, rules)) return false;
  if (ho_a) return sort2(a.dims) == sort2(b.dims);
  return sort3(a.dims) == sort3(b.dims);
}

FitModelSize fit_model_size(const FitProblem& problem, const SolverConfig& cfg) {
  const std::size_t n = problem.cartons.size();
  FitModelSize s;
  s.continuous = 3 * n;
  s.binaries = 3 * n * (n - 1) + 9 * n;
  s.equalities = 5 * n;
  for (const auto& c : problem.cartons) {
    if (problem.rules.enforce_ho && c.height_oriented) ++s.equalities;
    if (detail::must_rest_on_floor(c, problem.rules)) ++s.equalities;
  }
  s.inequalities = 7 * n * (n - 1) / 2 + 6 * n;
  if (n == 0) return s;
  auto g = detail::group_cartons(problem);
  s.identical_links = static_cast<std::size_t>(std::count(g.link_next.begin(), g.link_next.end(), true));
  s.anchor = g.order[g.anchor];
  if (cfg.use_identical_symmetry) s.inequalities += s.identical_links;
  if (cfg.use_orthant_symmetry) s.inequalities += g.anchor_drops_z ? 2 : 3;
  return s;
}

bool fits_single(const Carton& carton, const Dims3& box, bool height_oriented, double eps) {
  if (height_oriented) {
    return carton.dims.c <= box.c + eps && leq3(sort2(carton.dims), sort2(box), eps);
  }
  return leq3(sort3(carton.dims), sort3(box), eps);
}

StackKeys stacking_keys(std::span<const Carton> cartons, const PackingRules& rules) {
  StackKeys k;
  k.cartons.reserve(cartons.size());
  for (const auto& c : cartons) {
    if (rules.enforce_ho && c.height_oriented) {
      k.cartons.push_back(sort2(c.dims));
      ++k.height_oriented;
    } else {
      k.cartons.push_back(sort3(c.dims));
    }
    if (detail::must_rest_on_floor(c, rules)) ++k.bottom_resting;
  }
  return k;
}

Dims3 box_key(const Dims3& box, std::size_t height_oriented) {
  return height_oriented > 0 ? sort2(box) : sort3(box);
}

bool fits_stacking(std::span<const Dims3> keyed, const Dims3& box_keyed, std::size_t bottom_resting, double eps) {
  Dims3 sum{0, 0, 0};
  for (const auto& d : keyed) {
    sum.a += d.a;
    sum.b += d.b;
    sum.c += d.c;
  }
  return sum.a <= box_keyed.a + eps || sum.b <= box_keyed.b + eps ||
         (bottom_resting <= 1 && sum.c <= box_keyed.c + eps);
}

namespace {

// Longest-path positions along one axis for three cartons given, per pair,
// either no relation on this axis or "first before second".
bool three_positions(const std::array<std::array<int, 3>, 3>& before, const std::array<double, 3>& ext,
                     std::array<double, 3>& pos) {
  pos = {0, 0, 0};
  for (int pass = 0; pass < 4; ++pass) {
    bool changed = false;
    for (int u = 0; u < 3; ++u) {
      for (int v = 0; v < 3; ++v) {
        if (before[u][v] && pos[u] + ext[u] > pos[v]) {
          pos[v] = pos[u] + ext[u];
          changed = true;
        }
      }
    }
    if (!changed) return true;
  }
  return false;
}

FitVerdict exact_two(const FitProblem& p, double eps) {
  FitVerdict v;
  const auto o0 = detail::allowed_orientations(p.cartons[0], p.rules);
  const auto o1 = detail::allowed_orientations(p.cartons[1], p.rules);
  const bool br[2] = {detail::must_rest_on_floor(p.cartons[0], p.rules),
                      detail::must_rest_on_floor(p.cartons[1], p.rules)};
  for (const auto& a : o0) {
    for (const auto& b : o1) {
      ++v.stats.nodes;
      const detail::Orientation* ors[2] = {&a, &b};
      for (int axis = 0; axis < 3; ++axis) {
        bool others_ok = true;
        for (int t = 0; t < 3; ++t) {
          if (t == axis) continue;
          if (a.ext[t] > p.box[t] + eps || b.ext[t] > p.box[t] + eps) others_ok = false;
        }
        if (!others_ok || a.ext[axis] + b.ext[axis] > p.box[axis] + eps) continue;
        for (int first = 0; first < 2; ++first) {
          const int second = 1 - first;
          if (axis == 2 && br[second]) continue;
          Dims3 pos0{0, 0, 0};
          Dims3 pos1{0, 0, 0};
          pos1[axis] = ors[first]->ext[axis];
          std::vector<Placement> w(2);
          w[first] = detail::make_placement(*ors[first], pos0);
          w[second] = detail::make_placement(*ors[second], pos1);
          v.outcome = FitOutcome::Fit;
          v.witness = std::move(w);
          return v;
        }
      }
    }
  }
  v.outcome = FitOutcome::NoFit;
  return v;
}

FitVerdict exact_three(const FitProblem& p, double eps) {
  FitVerdict v;
  std::array<std::vector<detail::Orientation>, 3> ors;
  std::array<bool, 3> br{};
  for (int i = 0; i < 3; ++i) {
    ors[i] = detail::allowed_orientations(p.cartons[i], p.rules);
    br[i] = detail::must_rest_on_floor(p.cartons[i], p.rules);
  }
  static constexpr std::array<std::pair<int, int>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

  for (const auto& a : ors[0]) {
    for (const auto& b : ors[1]) {
      for (const auto& c : ors[2]) {
        const detail::Orientation* o[3] = {&a, &b, &c};
        bool contained = true;
        for (int i = 0; i < 3 && contained; ++i) contained = leq3(o[i]->ext, p.box, eps);
        if (!contained) continue;
        // Relations per pair: axis*2 + (0: first before second, 1: second before first).
        std::array<std::vector<int>, 3> rels;
        bool any_empty = false;
        for (int q = 0; q < 3; ++q) {
          auto [i, k] = kPairs[q];
          for (int r = 0; r < 6; ++r) {
            int axis = r / 2;
            if (o[i]->ext[axis] + o[k]->ext[axis] > p.box[axis] + eps) continue;
            int upper = (r % 2 == 0) ? k : i;
            if (axis == 2 && br[upper]) continue;
            rels[q].push_back(r);
          }
          if (rels[q].empty()) any_empty = true;
        }
        if (any_empty) continue;
        for (int r0 : rels[0]) {
          for (int r1 : rels[1]) {
            for (int r2 : rels[2]) {
              ++v.stats.nodes;
              const int rs[3] = {r0, r1, r2};
              Dims3 pos[3];
              bool ok = true;
              for (int axis = 0; axis < 3 && ok; ++axis) {
                std::array<std::array<int, 3>, 3> before{};
                for (int q = 0; q < 3; ++q) {
                  if (rs[q] / 2 != axis) continue;
                  auto [i, k] = kPairs[q];
                  if (rs[q] % 2 == 0) before[i][k] = 1;
                  else before[k][i] = 1;
                }
                std::array<double, 3> ext{o[0]->ext[axis], o[1]->ext[axis], o[2]->ext[axis]};
                std::array<double, 3> at{};
                if (!three_positions(before, ext, at)) {
                  ok = false;
                  break;
                }
                for (int i = 0; i < 3; ++i) {
                  if (at[i] + ext[i] > p.box[axis] + eps) ok = false;
                  if (axis == 2 && br[i] && at[i] > eps) ok = false;
                  pos[i][axis] = at[i];
                }
              }
              if (!ok) continue;
              std::vector<Placement> w;
              for (int i = 0; i < 3; ++i) w.push_back(detail::make_placement(*o[i], pos[i]));
              v.outcome = FitOutcome::Fit;
              v.witness = std::move(w);
              return v;
            }
          }
        }
      }
    }
  }
  v.outcome = FitOutcome::NoFit;
  return v;
}

}  // namespace

FitVerdict fits_exact_small(const FitProblem& problem, double eps) {
  if (eps < 0) eps = default_eps(problem.box);
  if (problem.cartons.size() == 2) return exact_two(problem, eps);
  if (problem.cartons.size() == 3) return exact_three(problem, eps);
  throw std::invalid_argument("fits_exact_small expects 2 or 3 cartons");
}

std::string check_witness(const FitProblem& problem, std::span<const Placement> witness, double eps) {
  if (eps < 0) eps = default_eps(problem.box);
  const auto& cs = problem.cartons;
  if (witness.size() != cs.size()) return "witness size mismatch";
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto& w = witness[i];
    std::array<int, 3> seen{0, 0, 0};
    for (int a = 0; a < 3; ++a) {
      if (w.dim_on_axis[a] < 0 || w.dim_on_axis[a] > 2) return "carton " + std::to_string(i) + ": bad orientation";
      ++seen[w.dim_on_axis[a]];
      if (std::abs(w.extent[a] - cs[i].dims[w.dim_on_axis[a]]) > eps) {
        return "carton " + std::to_string(i) + ": extent does not match orientation";
      }
    }
    if (seen != std::array<int, 3>{1, 1, 1}) return "carton " + std::to_string(i) + ": orientation is not a permutation";
    if (problem.rules.enforce_ho && cs[i].height_oriented && w.dim_on_axis[2] != 2) {
      return "carton " + std::to_string(i) + ": height-oriented carton not upright";
    }
    if (problem.rules.enforce_br && cs[i].bottom_resting && std::abs(w.position.c) > eps) {
      return "carton " + std::to_string(i) + ": bottom-resting carton off the floor";
    }
    for (int a = 0; a < 3; ++a) {
      if (w.position[a] < -eps || w.position[a] + w.extent[a] > problem.box[a] + eps) {
        return "carton " + std::to_string(i) + ": outside the box";
      }
    }
  }
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t k = i + 1; k < cs.size(); ++k) {
      bool overlap = true;
      for (int a = 0; a < 3; ++a) {
        const double lo = std::max(witness[i].position[a], witness[k].position[a]);
        const double hi = std::min(witness[i].position[a] + witness[i].extent[a],
                                   witness[k].position[a] + witness[k].extent[a]);
        if (hi - lo <= eps) overlap = false;
      }
      if (overlap) return "cartons " + std::to_string(i) + " and " + std::to_string(k) + " overlap";
    }
  }
  return {};
}

std::string witness_to_json(std::span<const Placement> witness) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < witness.size(); ++i) {
    const auto& w = witness[i];
    arr.push_back({{"carton", i},
                   {"orientation", {w.dim_on_axis[0], w.dim_on_axis[1], w.dim_on_axis[2]}},
                   {"lbb", {w.position.a, w.position.b, w.position.c}}});
  }
  return arr.dump();
}

}  // namespace boxsuite
