// Branch-and-bound for the fitting problem.
//
// A node fixes a subset of the model's binaries: an orientation domain per
// carton (the l/w/h binaries) and, for some pairs, one relative-position
// relation (the a..f binaries). All remaining constraints are difference
// constraints on lbb coordinates, so each axis is a longest-path problem:
// earliest starts ("heads") come from predecessor chains, latest starts
// ("lates") from successor chains and upper bounds. The node is infeasible
// when some head exceeds its late. Propagation also drops orientations and
// relations that no longer fit, forces a pair's relation when only one is
// left, and bounds cliques of pairs that can only be separated along one
// axis. Branching resolves a pair that overlaps at the head positions, then
// fixes remaining orientations; a node with fixed orientations and no
// overlapping pair is a packing, with positions equal to the heads.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "boxsuite/fitting.hpp"
#include "fitting_internal.hpp"

namespace boxsuite {

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kUnresolved = -1;

// Relation r between pair (i, k), i < k: axis = r / 2; r even means i lies
// before k along the axis, odd means k lies before i.
constexpr int axis_of(int r) { return r >> 1; }
constexpr bool first_before(int r) { return (r & 1) == 0; }

class FitSearch {
 public:
  FitSearch(const FitProblem& problem, const SolverConfig& cfg, Clock::time_point deadline)
      : problem_(problem), cfg_(cfg), deadline_(deadline), eps_(default_eps(problem.box)) {
    grouping_ = detail::group_cartons(problem);
    n_ = static_cast<int>(problem.cartons.size());
    for (int a = 0; a < 3; ++a) box_[a] = problem.box[a];
    orients_.resize(n_);
    floor_.resize(n_);
    volume_.resize(n_);
    for (int m = 0; m < n_; ++m) {
      const Carton& c = problem.cartons[grouping_.order[m]];
      orients_[m] = detail::allowed_orientations(c, problem.rules);
      floor_[m] = detail::must_rest_on_floor(c, problem.rules);
      volume_[m] = c.dims.volume();
    }
    for (int a = 0; a < 3; ++a) {
      head_[a].resize(n_);
      late_[a].resize(n_);
      minext_[a].resize(n_);
      maxext_[a].resize(n_);
    }
    mask_.resize(static_cast<std::size_t>(n_) * n_);
  }

  FitVerdict run() {
    FitVerdict v;
    auto t0 = Clock::now();
    v.outcome = solve();
    v.stats.nodes = nodes_;
    v.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (v.outcome == FitOutcome::Fit) v.witness = std::move(witness_);
    return v;
  }

 private:
  struct State {
    std::vector<std::uint8_t> dom;  // bitmask over orients_[m]
    std::vector<std::int8_t> rel;   // n*n, upper triangle
    std::vector<std::uint8_t> forb;  // per pair, relations ruled out by earlier siblings
  };

  std::size_t idx(int i, int k) const { return static_cast<std::size_t>(i) * n_ + k; }

  bool same_group(int i, int k) const {
    return cfg_.use_identical_symmetry && grouping_.group[i] == grouping_.group[k];
  }

  FitOutcome solve() {
    // Cheap necessary conditions before any search.
    double vol = 0.0;
    for (int m = 0; m < n_; ++m) {
      vol += volume_[m];
      bool any = false;
      for (const auto& o : orients_[m]) {
        if (leq3(o.ext, problem_.box, eps_)) any = true;
      }
      if (!any) return FitOutcome::NoFit;
    }
    if (vol > problem_.box.volume() * (1.0 + 1e-12) + eps_) return FitOutcome::NoFit;
    if (!dff_feasible()) return FitOutcome::NoFit;

    State root;
    root.dom.resize(n_);
    for (int m = 0; m < n_; ++m) root.dom[m] = static_cast<std::uint8_t>((1u << orients_[m].size()) - 1);
    root.rel.assign(static_cast<std::size_t>(n_) * n_, kUnresolved);
    root.forb.assign(static_cast<std::size_t>(n_) * n_, 0);
    if (dfs(root)) return FitOutcome::Fit;
    return timed_out_ ? FitOutcome::TimedOut : FitOutcome::NoFit;
  }

  // Conservative volume test with dual feasible functions (Fekete-Schepers
  // U^eps family, plus identity) on each axis. Each carton contributes its
  // cheapest allowed orientation.
  bool dff_feasible() const {
    std::array<std::vector<double>, 3> params;
    for (int a = 0; a < 3; ++a) {
      params[a].push_back(0.0);
      for (int m = 0; m < n_; ++m) {
        for (const auto& o : orients_[m]) {
          double x = o.ext[a] / box_[a];
          if (x <= 0.5 + 1e-12) params[a].push_back(std::min(x, 0.5));
        }
      }
      std::sort(params[a].begin(), params[a].end());
      params[a].erase(std::unique(params[a].begin(), params[a].end()), params[a].end());
      if (params[a].size() > 12) {
        std::vector<double> thin;
        for (std::size_t t = 0; t < 12; ++t) thin.push_back(params[a][t * params[a].size() / 12]);
        params[a] = std::move(thin);
      }
    }
    constexpr double tol = 1e-12;
    auto u = [&](double x, double e) {
      if (e <= 0.0) return x;
      if (x > 1.0 - e + tol) return 1.0;
      if (x < e + tol) return 0.0;
      return x;
    };
    for (double ex : params[0]) {
      for (double ey : params[1]) {
        for (double ez : params[2]) {
          if (ex == 0.0 && ey == 0.0 && ez == 0.0) continue;
          double total = 0.0;
          for (int m = 0; m < n_; ++m) {
            double best = 1e300;
            for (const auto& o : orients_[m]) {
              double v = u(o.ext[0] / box_[0], ex) * u(o.ext[1] / box_[1], ey) * u(o.ext[2] / box_[2], ez);
              best = std::min(best, v);
            }
            total += best;
          }
          if (total > 1.0 + 1e-9) return false;
        }
      }
    }
    return true;
  }

  bool compute_heads(const State& s, int a) {
    auto& head = head_[a];
    std::fill(head.begin(), head.end(), 0.0);
    for (int pass = 0; pass <= n_; ++pass) {
      bool changed = false;
      for (int i = 0; i < n_; ++i) {
        for (int k = i + 1; k < n_; ++k) {
          int r = s.rel[idx(i, k)];
          if (r == kUnresolved || axis_of(r) != a) continue;
          int u = first_before(r) ? i : k;
          int v = first_before(r) ? k : i;
          double h = head[u] + minext_[a][u];
          if (h > head[v] + eps_ * 0.5) {
            head[v] = h;
            changed = true;
          }
        }
      }
      // A ruled-out "u before v" means v starts before u ends.
      for (int i = 0; i < n_; ++i) {
        for (int k = i + 1; k < n_; ++k) {
          std::uint8_t f = static_cast<std::uint8_t>(s.forb[idx(i, k)] >> (2 * a) & 3u);
          for (int side = 0; side < 2; ++side) {
            if (!(f >> side & 1u)) continue;
            int u = side == 0 ? i : k;
            int v = side == 0 ? k : i;
            double h = head[v] - maxext_[a][u];
            if (h > head[u] + eps_ * 0.5) {
              head[u] = h;
              changed = true;
            }
          }
        }
      }
      if (a == 0 && cfg_.use_identical_symmetry) {
        for (int m = 0; m + 1 < n_; ++m) {
          if (grouping_.link_next[m] && head[m] > head[m + 1] + eps_ * 0.5) {
            head[m + 1] = head[m];
            changed = true;
          }
        }
      }
      if (!changed) return true;
    }
    return false;  // positive cycle
  }

  void compute_lates(const State& s, int a) {
    auto& late = late_[a];
    for (int m = 0; m < n_; ++m) {
      late[m] = box_[a] - minext_[a][m];
      if (a == 2 && floor_[m]) late[m] = std::min(late[m], 0.0);
    }
    if (cfg_.use_orthant_symmetry && !(a == 2 && grouping_.anchor_drops_z)) {
      late[grouping_.anchor] = std::min(late[grouping_.anchor], box_[a] / 2.0);
    }
    for (int pass = 0; pass <= n_; ++pass) {
      bool changed = false;
      for (int i = 0; i < n_; ++i) {
        for (int k = i + 1; k < n_; ++k) {
          int r = s.rel[idx(i, k)];
          if (r == kUnresolved || axis_of(r) != a) continue;
          int u = first_before(r) ? i : k;
          int v = first_before(r) ? k : i;
          double l = late[v] - minext_[a][u];
          if (l < late[u] - eps_ * 0.5) {
            late[u] = l;
            changed = true;
          }
        }
      }
      for (int i = 0; i < n_; ++i) {
        for (int k = i + 1; k < n_; ++k) {
          std::uint8_t f = static_cast<std::uint8_t>(s.forb[idx(i, k)] >> (2 * a) & 3u);
          for (int side = 0; side < 2; ++side) {
            if (!(f >> side & 1u)) continue;
            int u = side == 0 ? i : k;
            int v = side == 0 ? k : i;
            double l = late[u] + maxext_[a][u];
            if (l < late[v] - eps_ * 0.5) {
              late[v] = l;
              changed = true;
            }
          }
        }
      }
      if (a == 0 && cfg_.use_identical_symmetry) {
        for (int m = n_ - 2; m >= 0; --m) {
          if (grouping_.link_next[m] && late[m + 1] < late[m] - eps_ * 0.5) {
            late[m] = late[m + 1];
            changed = true;
          }
        }
      }
      if (!changed) return;
    }
  }

  // Upper limit on the far face of carton i along axis a: box wall and the
  // lates of its successors along a.
  double far_limit(const State& s, int i, int a) const {
    double lim = box_[a];
    for (int k = 0; k < n_; ++k) {
      if (k == i) continue;
      int lo = std::min(i, k);
      int hi = std::max(i, k);
      int r = s.rel[idx(lo, hi)];
      if (r == kUnresolved || axis_of(r) != a) continue;
      int u = first_before(r) ? lo : hi;
      if (u == i) lim = std::min(lim, late_[a][k]);
    }
    return lim;
  }

  bool relation_possible(int i, int k, int r) const {
    int a = axis_of(r);
    int u = first_before(r) ? i : k;
    int v = first_before(r) ? k : i;
    if (a == 0 && same_group(i, k) && u > v) return false;
    return head_[a][u] + minext_[a][u] <= late_[a][v] + eps_;
  }

  // Maximum total minext along axis a over a set of cartons that must be
  // pairwise separated along a.
  double heaviest_chain(const std::vector<std::uint64_t>& adj, int a) const {
    double best = 0.0;
    std::vector<double> w(n_);
    for (int m = 0; m < n_; ++m) w[m] = minext_[a][m];
    // Small exact max-weight clique; n is the carton count.
    auto rec = [&](auto&& self, std::uint64_t cand, double acc) -> void {
      if (cand == 0) {
        best = std::max(best, acc);
        return;
      }
      double bound = acc;
      for (std::uint64_t c = cand; c; c &= c - 1) bound += w[std::countr_zero(c)];
      if (bound <= best) return;
      int v = std::countr_zero(cand);
      self(self, cand & adj[v], acc + w[v]);
      self(self, cand & ~(std::uint64_t{1} << v), acc);
    };
    rec(rec, n_ >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n_) - 1), 0.0);
    return best;
  }

  bool propagate(State& s) {
    for (;;) {
      for (int m = 0; m < n_; ++m) {
        for (int a = 0; a < 3; ++a) {
          double lo = 1e300;
          for (std::size_t o = 0; o < orients_[m].size(); ++o) {
            if (s.dom[m] >> o & 1u) lo = std::min(lo, orients_[m][o].ext[a]);
          }
          minext_[a][m] = lo;
          double hi = 0.0;
          for (std::size_t o = 0; o < orients_[m].size(); ++o) {
            if (s.dom[m] >> o & 1u) hi = std::max(hi, orients_[m][o].ext[a]);
          }
          maxext_[a][m] = hi;
        }
      }
      for (int a = 0; a < 3; ++a) {
        if (!compute_heads(s, a)) return false;
        compute_lates(s, a);
        for (int m = 0; m < n_; ++m) {
          if (head_[a][m] > late_[a][m] + eps_) return false;
        }
      }

      bool changed = false;
      for (int m = 0; m < n_; ++m) {
        std::uint8_t dom = s.dom[m];
        if (std::popcount(dom) == 1) continue;
        double lim[3];
        for (int a = 0; a < 3; ++a) lim[a] = far_limit(s, m, a);
        for (std::size_t o = 0; o < orients_[m].size(); ++o) {
          if (!(dom >> o & 1u)) continue;
          for (int a = 0; a < 3; ++a) {
            if (head_[a][m] + orients_[m][o].ext[a] > lim[a] + eps_) {
              dom = static_cast<std::uint8_t>(dom & ~(1u << o));
              break;
            }
          }
        }
        if (dom == 0) return false;
        if (dom != s.dom[m]) {
          s.dom[m] = dom;
          changed = true;
        }
      }
      if (changed) continue;

      std::array<std::vector<std::uint64_t>, 3> only_axis;
      for (auto& v : only_axis) v.assign(n_, 0);
      for (int i = 0; i < n_; ++i) {
        for (int k = i + 1; k < n_; ++k) {
          int r = s.rel[idx(i, k)];
          std::uint8_t mask = 0;
          if (r != kUnresolved) {
            mask = static_cast<std::uint8_t>(1u << r);
          } else {
            for (int q = 0; q < 6; ++q) {
              if (!(s.forb[idx(i, k)] >> q & 1u) && relation_possible(i, k, q)) mask = static_cast<std::uint8_t>(mask | (1u << q));
            }
            if (mask == 0) return false;
            if (std::popcount(mask) == 1) {
              s.rel[idx(i, k)] = static_cast<std::int8_t>(std::countr_zero(mask));
              changed = true;
            }
          }
          mask_[idx(i, k)] = mask;
          for (int a = 0; a < 3; ++a) {
            if ((mask & ~(3u << (2 * a))) == 0) {
              only_axis[a][i] |= std::uint64_t{1} << k;
              only_axis[a][k] |= std::uint64_t{1} << i;
            }
          }
        }
      }
      if (changed) continue;

      for (int a = 0; a < 3; ++a) {
        bool any = std::any_of(only_axis[a].begin(), only_axis[a].end(), [](std::uint64_t x) { return x != 0; });
        if (any && heaviest_chain(only_axis[a], a) > box_[a] + eps_) return false;
      }
      return true;
    }
  }

  bool overlapping(int i, int k) const {
    for (int a = 0; a < 3; ++a) {
      if (head_[a][i] + minext_[a][i] <= head_[a][k] + eps_) return false;
      if (head_[a][k] + minext_[a][k] <= head_[a][i] + eps_) return false;
    }
    return true;
  }

  // Most constrained unresolved pair that overlaps at the heads, or (-1, -1).
  std::pair<int, int> conflicting_pair(const State& s) const {
    int bi = -1;
    int bk = -1;
    int best_count = 7;
    double best_vol = -1.0;
    for (int i = 0; i < n_; ++i) {
      for (int k = i + 1; k < n_; ++k) {
        if (s.rel[idx(i, k)] != kUnresolved || !overlapping(i, k)) continue;
        int cnt = std::popcount(mask_[idx(i, k)]);
        double vol = volume_[i] + volume_[k];
        if (cnt < best_count || (cnt == best_count && vol > best_vol)) {
          best_count = cnt;
          best_vol = vol;
          bi = i;
          bk = k;
        }
      }
    }
    return {bi, bk};
  }

  bool branch_pair(State& s, int bi, int bk) {
    struct Choice {
      int r;
      double slack;
    };
    std::vector<Choice> choices;
    std::uint8_t mask = mask_[idx(bi, bk)];
    for (int r = 0; r < 6; ++r) {
      if (!(mask >> r & 1u)) continue;
      int a = axis_of(r);
      int u = first_before(r) ? bi : bk;
      int v = first_before(r) ? bk : bi;
      double slack = (late_[a][v] - head_[a][u] - minext_[a][u]) / box_[a];
      choices.push_back({r, slack});
    }
    std::stable_sort(choices.begin(), choices.end(),
                     [](const Choice& l, const Choice& r) { return l.slack > r.slack; });
    for (const auto& c : choices) {
      State child = s;
      child.rel[idx(bi, bk)] = static_cast<std::int8_t>(c.r);
      if (dfs(child)) return true;
      if (timed_out_) return false;
      // Later siblings only need packings where this relation fails.
      s.forb[idx(bi, bk)] = static_cast<std::uint8_t>(s.forb[idx(bi, bk)] | (1u << c.r));
    }
    return false;
  }

  bool branch_orientation(State& s, int pick) {
    struct Choice {
      std::size_t o;
      double load;
    };
    std::vector<Choice> choices;
    for (std::size_t o = 0; o < orients_[pick].size(); ++o) {
      if (!(s.dom[pick] >> o & 1u)) continue;
      double load = 0.0;
      for (int a = 0; a < 3; ++a) load += (head_[a][pick] + orients_[pick][o].ext[a]) / box_[a];
      choices.push_back({o, load});
    }
    std::stable_sort(choices.begin(), choices.end(),
                     [](const Choice& l, const Choice& r) { return l.load < r.load; });
    for (const auto& c : choices) {
      State child = s;
      child.dom[pick] = static_cast<std::uint8_t>(1u << c.o);
      if (dfs(child)) return true;
      if (timed_out_) return false;
    }
    return false;
  }

  bool dfs(State& s) {
    ++nodes_;
    if ((nodes_ & 63) == 0 && Clock::now() > deadline_) timed_out_ = true;
    if (timed_out_) return false;
    if (!propagate(s)) return false;

    auto [bi, bk] = conflicting_pair(s);
    if (bi >= 0) return branch_pair(s, bi, bk);
    int pick = -1;
    for (int m = 0; m < n_; ++m) {
      if (std::popcount(s.dom[m]) > 1 && (pick < 0 || volume_[m] > volume_[pick])) pick = m;
    }
    if (pick >= 0) return branch_orientation(s, pick);

    // Orientations fixed, no overlaps: the heads are a packing.
    std::vector<Placement> w(n_);
    for (int m = 0; m < n_; ++m) {
      const auto& o = orients_[m][std::countr_zero(s.dom[m])];
      w[grouping_.order[m]] = detail::make_placement(o, Dims3{head_[0][m], head_[1][m], head_[2][m]});
    }
    witness_ = std::move(w);
    return true;
  }

  const FitProblem& problem_;
  SolverConfig cfg_;
  Clock::time_point deadline_;
  double eps_;
  detail::Grouping grouping_;
  int n_ = 0;
  double box_[3] = {0, 0, 0};
  std::vector<std::vector<detail::Orientation>> orients_;
  std::vector<bool> floor_;
  std::vector<double> volume_;
  std::array<std::vector<double>, 3> head_;
  std::array<std::vector<double>, 3> late_;
  std::array<std::vector<double>, 3> minext_;
  std::array<std::vector<double>, 3> maxext_;
  std::vector<std::uint8_t> mask_;
  std::uint64_t nodes_ = 0;
  bool timed_out_ = false;
  std::vector<Placement> witness_;
};

}  // namespace

FitVerdict solve_fit(const FitProblem& problem, const SolverConfig& cfg) {
  if (problem.cartons.empty()) throw std::invalid_argument("solve_fit needs at least one carton");
  if (problem.cartons.size() > 64) throw std::invalid_argument("solve_fit supports at most 64 cartons");
  if (!problem.box.positive()) throw std::invalid_argument("box dimensions must be positive");
  if (cfg.time_limit.count() <= 0) throw std::invalid_argument("time limit must be positive");
  FitSearch search(problem, cfg, Clock::now() + cfg.time_limit);
  return search.run();
}

}  // namespace boxsuite
