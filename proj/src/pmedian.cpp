#include "boxsuite/pmedian.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <stdexcept>

#include "boxsuite/error.hpp"
#include "parallel.hpp"

namespace boxsuite {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Strict improvement threshold, relative to the current cost.
double improvement_tol(double cost) { return 1e-9 * std::max(1.0, std::abs(cost)); }

struct Closest {
  std::vector<std::size_t> f1;
  std::vector<double> d1;
  std::vector<double> d2;  // +inf when the suite has one facility
};

void closest(const PMedianInstance& inst, std::span<const std::size_t> suite, Closest& c) {
  const std::size_t n = inst.n();
  c.f1.assign(n, 0);
  c.d1.assign(n, kInf);
  c.d2.assign(n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = inst.row(i);
    for (std::size_t j : suite) {
      double v = row[j];
      if (v < c.d1[i]) {
        c.d2[i] = c.d1[i];
        c.d1[i] = v;
        c.f1[i] = j;
      } else if (v < c.d2[i]) {
        c.d2[i] = v;
      }
    }
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), tag};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

}  // namespace

PMedianInstance::PMedianInstance(std::size_t n, std::size_t m, std::size_t p, std::vector<double> d)
    : n_(n), m_(m), p_(p), d_(std::move(d)) {
  if (m_ == 0 || p_ < 1 || p_ > m_) throw std::invalid_argument("p-median needs 1 <= p <= m");
  if (d_.size() != n_ * m_) throw std::invalid_argument("cost matrix size does not match n x m");
  for (double v : d_) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("costs must be finite and nonnegative");
  }
}

void check_suite(const PMedianInstance& inst, std::span<const std::size_t> suite) {
  if (suite.size() != inst.p()) throw std::invalid_argument("suite must have exactly p facilities");
  std::vector<char> seen(inst.m(), 0);
  for (std::size_t j : suite) {
    if (j >= inst.m()) throw std::invalid_argument("facility index out of range");
    if (seen[j]) throw std::invalid_argument("facility listed twice in suite");
    seen[j] = 1;
  }
}

double suite_cost(const PMedianInstance& inst, std::span<const std::size_t> suite) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.n(); ++i) {
    const double* row = inst.row(i);
    double best = kInf;
    for (std::size_t j : suite) best = std::min(best, row[j]);
    total += best;
  }
  return total;
}

SolveResult solve_exact(const PMedianInstance& inst, const ExactConfig& cfg) {
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  const std::size_t p = inst.p();
  if (m > cfg.max_m) {
    throw BudgetError("exact enumeration allows at most " + std::to_string(cfg.max_m) + " facilities (got " +
                      std::to_string(m) + "); use the exchange, grasp or lagrangian methods");
  }
  // C(m, p), saturating at the budget.
  double subsets = 1.0;
  for (std::size_t t = 0; t < p; ++t) subsets = subsets * double(m - t) / double(t + 1);
  if (subsets > double(cfg.max_subsets)) {
    throw BudgetError("exact enumeration would visit " + std::to_string(subsets) + " suites; use a heuristic method");
  }

  auto t0 = Clock::now();
  SolveResult best;
  best.cost = kInf;
  Suite current;
  // mins[depth] holds per-customer minima over the first `depth` picks.
  std::vector<std::vector<double>> mins(p + 1, std::vector<double>(n, kInf));
  std::size_t visited = 0;
  auto rec = [&](auto&& self, std::size_t start, std::size_t depth) -> void {
    if (depth == p) {
      ++visited;
      double total = std::accumulate(mins[p].begin(), mins[p].end(), 0.0);
      if (total < best.cost) {
        best.cost = total;
        best.suite = current;
      }
      return;
    }
    for (std::size_t j = start; j + (p - depth) <= m; ++j) {
      const auto& prev = mins[depth];
      auto& next = mins[depth + 1];
      for (std::size_t i = 0; i < n; ++i) next[i] = std::min(prev[i], inst.d(i, j));
      current.push_back(j);
      self(self, j + 1, depth + 1);
      current.pop_back();
    }
  };
  rec(rec, 0, 0);
  if (n == 0) best.cost = 0.0;
  best.lower_bound = best.cost;
  best.gap = 0.0;
  best.iterations = visited;
  best.seconds = seconds_since(t0);
  return best;
}

SolveResult local_search_interchange(const PMedianInstance& inst, Suite start, Neighborhood nb) {
  check_suite(inst, start);
  auto t0 = Clock::now();
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  const std::size_t p = inst.p();
  std::sort(start.begin(), start.end());
  Suite s = std::move(start);
  std::vector<char> open(m, 0);
  for (std::size_t j : s) open[j] = 1;

  Closest c;
  std::vector<double> gain(m);
  std::vector<double> loss(m);
  std::vector<double> extra(p * m);
  std::vector<std::size_t> pos(m, 0);
  std::vector<double> colsum(m, 0.0);
  if (p == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) colsum[j] += inst.d(i, j);
    }
  }

  SolveResult r;
  for (;;) {
    closest(inst, s, c);
    double cost = std::accumulate(c.d1.begin(), c.d1.end(), 0.0);
    r.cost = cost;
    if (p == m || n == 0) break;
    for (std::size_t t = 0; t < p; ++t) pos[s[t]] = t;

    // delta(a, b) = gain(b) + loss(a) + extra(a, b) for a open, b closed.
    if (p > 1) {
      std::fill(gain.begin(), gain.end(), 0.0);
      std::fill(loss.begin(), loss.end(), 0.0);
      std::fill(extra.begin(), extra.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double* row = inst.row(i);
        const double d1 = c.d1[i];
        const double d2 = c.d2[i];
        loss[c.f1[i]] += d2 - d1;
        double* ex = extra.data() + pos[c.f1[i]] * m;
        for (std::size_t b = 0; b < m; ++b) {
          const double v = row[b];
          if (v < d1) gain[b] += v - d1;
          if (v < d2) ex[b] += std::max(v, d1) - d2;
        }
      }
    }

    const double tol = improvement_tol(cost);
    double best_delta = -tol;
    std::size_t best_a = m;
    std::size_t best_b = m;
    bool done = false;
    for (std::size_t t = 0; t < p && !done; ++t) {
      const std::size_t a = s[t];
      for (std::size_t b = 0; b < m; ++b) {
        if (open[b]) continue;
        double delta = p == 1 ? colsum[b] - cost : gain[b] + loss[a] + extra[t * m + b];
        if (delta < best_delta) {
          best_delta = delta;
          best_a = a;
          best_b = b;
          if (nb == Neighborhood::FirstImprovement) {
            done = true;
            break;
          }
        }
      }
    }
    if (best_a == m) break;
    open[best_a] = 0;
    open[best_b] = 1;
    *std::find(s.begin(), s.end(), best_a) = best_b;
    std::sort(s.begin(), s.end());
    ++r.iterations;
  }
  r.suite = std::move(s);
  r.seconds = seconds_since(t0);
  return r;
}

std::optional<Swap> find_improving_swap(const PMedianInstance& inst, std::span<const std::size_t> suite) {
  check_suite(inst, suite);
  const double cost = suite_cost(inst, suite);
  const double tol = improvement_tol(cost);
  std::vector<char> open(inst.m(), 0);
  for (std::size_t j : suite) open[j] = 1;
  std::optional<Swap> best;
  Suite trial(suite.begin(), suite.end());
  for (std::size_t t = 0; t < trial.size(); ++t) {
    const std::size_t a = suite[t];
    for (std::size_t b = 0; b < inst.m(); ++b) {
      if (open[b]) continue;
      trial[t] = b;
      double delta = suite_cost(inst, trial) - cost;
      if (delta < -tol && (!best || delta < best->delta)) best = Swap{a, b, delta};
    }
    trial[t] = a;
  }
  return best;
}

Suite greedy_construct(const PMedianInstance& inst, double alpha, std::uint64_t seed) {
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  std::mt19937_64 rng(seed);
  std::vector<double> cur(n, kInf);
  std::vector<char> open(m, 0);
  std::vector<double> value(m);
  Suite s;
  std::vector<std::size_t> rcl;
  for (std::size_t step = 0; step < inst.p(); ++step) {
    double lo = kInf;
    double hi = -kInf;
    for (std::size_t j = 0; j < m; ++j) {
      if (open[j]) continue;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += std::min(cur[i], inst.d(i, j));
      value[j] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double threshold = lo + alpha * (hi - lo);
    rcl.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (!open[j] && value[j] <= threshold) rcl.push_back(j);
    }
    std::size_t pick = rcl.front();
    if (alpha > 0.0 && rcl.size() > 1) {
      pick = rcl[std::uniform_int_distribution<std::size_t>(0, rcl.size() - 1)(rng)];
    }
    open[pick] = 1;
    s.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) cur[i] = std::min(cur[i], inst.d(i, pick));
  }
  std::sort(s.begin(), s.end());
  return s;
}

Suite path_relink(const PMedianInstance& inst, const Suite& source, const Suite& guide) {
  check_suite(inst, source);
  check_suite(inst, guide);
  Suite cur = source;
  Suite target = guide;
  std::sort(cur.begin(), cur.end());
  std::sort(target.begin(), target.end());
  if (cur == target) return cur;

  Closest c;
  Suite best;
  double best_cost = kInf;
  while (cur != target) {
    Suite ins;
    Suite rem;
    std::set_difference(target.begin(), target.end(), cur.begin(), cur.end(), std::back_inserter(ins));
    std::set_difference(cur.begin(), cur.end(), target.begin(), target.end(), std::back_inserter(rem));
    closest(inst, cur, c);
    double step_cost = kInf;
    std::size_t step_a = 0;
    std::size_t step_b = 0;
    for (std::size_t a : rem) {
      for (std::size_t b : ins) {
        double total = 0.0;
        for (std::size_t i = 0; i < inst.n(); ++i) {
          const double v = inst.d(i, b);
          total += std::min(c.f1[i] == a ? c.d2[i] : c.d1[i], v);
        }
        if (total < step_cost) {
          step_cost = total;
          step_a = a;
          step_b = b;
        }
      }
    }
    *std::find(cur.begin(), cur.end(), step_a) = step_b;
    std::sort(cur.begin(), cur.end());
    if (step_cost < best_cost) {
      best_cost = step_cost;
      best = cur;
    }
  }
  if (best == target) return best;
  return local_search_interchange(inst, best).suite;
}

namespace {

struct Elite {
  Suite suite;
  double cost = 0.0;
};

class ElitePool {
 public:
  explicit ElitePool(std::size_t capacity) : capacity_(capacity) {}

  // Same-size suites differ in at least two facilities unless equal.
  void offer(const Suite& s, double cost) {
    if (capacity_ == 0) return;
    for (const auto& e : members_) {
      if (e.suite == s) return;
    }
    if (members_.size() < capacity_) {
      members_.push_back({s, cost});
      return;
    }
    std::size_t worst = 0;
    for (std::size_t t = 1; t < members_.size(); ++t) {
      if (members_[t].cost > members_[worst].cost) worst = t;
    }
    if (cost < members_[worst].cost) members_[worst] = {s, cost};
  }

  const std::vector<Elite>& members() const { return members_; }

 private:
  std::size_t capacity_;
  std::vector<Elite> members_;
};

}  // namespace

SolveResult solve_grasp(const PMedianInstance& inst, const GraspParams& params) {
  if (params.rcl_alpha < 0.0 || params.rcl_alpha > 1.0) throw std::invalid_argument("rcl_alpha must lie in [0, 1]");
  auto t0 = Clock::now();
  const std::size_t iters = std::max<std::size_t>(params.iterations, 1);

  // Constructions and local searches are independent; the first one is the
  // pure greedy start.
  std::vector<Suite> local(iters);
  detail::parallel_for(iters, params.threads, [&](std::size_t k, std::size_t) {
    double alpha = k == 0 ? 0.0 : params.rcl_alpha;
    Suite start = greedy_construct(inst, alpha, derive_seed(params.seed, k, 0));
    local[k] = local_search_interchange(inst, std::move(start)).suite;
  });

  SolveResult best;
  best.cost = kInf;
  auto consider = [&](const Suite& s) {
    double cost = suite_cost(inst, s);
    if (cost < best.cost - improvement_tol(cost) || (cost <= best.cost && best.suite.empty())) {
      best.cost = cost;
      best.suite = s;
    }
    return cost;
  };

  ElitePool pool(params.elite_size);
  for (std::size_t k = 0; k < iters; ++k) {
    const Suite& s = local[k];
    double cost = consider(s);
    if (!pool.members().empty()) {
      std::mt19937_64 rng(derive_seed(params.seed, k, 1));
      const auto& elite = pool.members();
      const Suite guide = elite[std::uniform_int_distribution<std::size_t>(0, elite.size() - 1)(rng)].suite;
      Suite r = path_relink(inst, s, guide);
      pool.offer(r, consider(r));
    }
    pool.offer(s, cost);
  }
  const std::vector<Elite> snapshot = pool.members();
  for (std::size_t a = 0; a < snapshot.size(); ++a) {
    for (std::size_t b = a + 1; b < snapshot.size(); ++b) {
      Suite r = path_relink(inst, snapshot[a].suite, snapshot[b].suite);
      pool.offer(r, consider(r));
    }
  }
  best.iterations = iters;
  best.seconds = seconds_since(t0);
  return best;
}

namespace {

enum class Forced : signed char { Out = -1, Free = 0, In = 1 };

void compute_rho(const PMedianInstance& inst, std::span<const double> lambda, std::vector<double>& rho) {
  const std::size_t m = inst.m();
  rho.assign(m, 0.0);
  for (std::size_t i = 0; i < inst.n(); ++i) {
    const double* row = inst.row(i);
    const double li = lambda[i];
    for (std::size_t j = 0; j < m; ++j) {
      const double v = row[j] - li;
      if (v < 0.0) rho[j] += v;
    }
  }
}

// Opens every forced-in facility plus the cheapest free ones up to p.
// `free_order` receives the free facilities by increasing rho.
double restricted_dual(const PMedianInstance& inst, std::span<const double> lambda, const std::vector<double>& rho,
                       const std::vector<Forced>& status, Suite& open, std::vector<std::size_t>& free_order) {
  const std::size_t m = inst.m();
  open.clear();
  free_order.clear();
  for (std::size_t j = 0; j < m; ++j) {
    if (status[j] == Forced::In) open.push_back(j);
    if (status[j] == Forced::Free) free_order.push_back(j);
  }
  std::sort(free_order.begin(), free_order.end(),
            [&](std::size_t a, std::size_t b) { return rho[a] < rho[b] || (rho[a] == rho[b] && a < b); });
  const std::size_t want = inst.p() - open.size();
  open.insert(open.end(), free_order.begin(), free_order.begin() + static_cast<std::ptrdiff_t>(want));
  std::sort(open.begin(), open.end());
  double total = 0.0;
  for (std::size_t j : open) total += rho[j];
  for (double l : lambda) total += l;
  return total;
}

}  // namespace

double dual_value(const PMedianInstance& inst, std::span<const double> lambda, Suite* open) {
  if (lambda.size() != inst.n()) throw std::invalid_argument("one multiplier per customer");
  std::vector<double> rho;
  compute_rho(inst, lambda, rho);
  std::vector<Forced> status(inst.m(), Forced::Free);
  Suite chosen;
  std::vector<std::size_t> order;
  const double d = restricted_dual(inst, lambda, rho, status, chosen, order);
  if (open) *open = std::move(chosen);
  return d;
}

SolveResult lagrangian_bounds(const PMedianInstance& inst, const LagrangianParams& params,
                              std::vector<BoundStep>* trace) {
  if (params.theta0 <= 0.0) throw std::invalid_argument("theta0 must be positive");
  if (params.max_iters == 0) throw std::invalid_argument("max_iters must be positive");
  auto t0 = Clock::now();
  const std::size_t n = inst.n();
  const std::size_t m = inst.m();
  const std::size_t p = inst.p();
  std::vector<double> lambda;
  if (params.lambda0) {
    lambda = *params.lambda0;
    if (lambda.size() != n) throw std::invalid_argument("lambda0 needs one entry per customer");
    for (double l : lambda) {
      if (!std::isfinite(l)) throw std::invalid_argument("multipliers must be finite");
    }
  } else {
    lambda.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = inst.row(i);
      lambda[i] = *std::min_element(row, row + m);
    }
  }

  SolveResult r;
  r.cost = kInf;
  double lower = 0.0;  // D(0) for nonnegative costs
  double theta = params.theta0;
  std::size_t stale = 0;
  std::vector<double> g(n);
  std::vector<double> rho;
  std::vector<Forced> status(m, Forced::Free);
  std::size_t forced_in = 0;
  std::size_t forced_out = 0;
  std::vector<std::size_t> free_order;
  Suite open;
  std::size_t it = 0;
  for (; it < params.max_iters; ++it) {
    compute_rho(inst, lambda, rho);
    const double dual = restricted_dual(inst, lambda, rho, status, open, free_order);
    if (dual > lower) {
      lower = dual;
      stale = 0;
    } else {
      ++stale;
    }

    const double ub = suite_cost(inst, open);
    if (ub < r.cost) {
      r.cost = ub;
      r.suite = open;
      SolveResult polished = local_search_interchange(inst, open);
      if (polished.cost < r.cost) {
        r.cost = polished.cost;
        r.suite = polished.suite;
      }
    }

    // A free facility whose flip pushes this iteration's bound above the
    // incumbent is fixed for the rest of the run. Only strict exceedance
    // counts, so an optimal suite is never cut off.
    if (params.force_facilities) {
      const std::size_t want = p - forced_in;
      const double limit = r.cost + improvement_tol(r.cost);
      if (want > 0 && want <= free_order.size()) {
        const double last_in = rho[free_order[want - 1]];
        const bool has_next = want < free_order.size();
        const double first_out = has_next ? rho[free_order[want]] : kInf;
        for (std::size_t t = 0; t < free_order.size(); ++t) {
          const std::size_t j = free_order[t];
          if (t < want) {
            if (!has_next || dual - rho[j] + first_out > limit) {
              status[j] = Forced::In;
              ++forced_in;
            }
          } else if (dual + rho[j] - last_in > limit) {
            status[j] = Forced::Out;
            ++forced_out;
          }
        }
      }
    }

    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = inst.row(i);
      int assigned = 0;
      for (std::size_t j : open) assigned += row[j] < lambda[i] ? 1 : 0;
      g[i] = 1.0 - assigned;
      norm2 += g[i] * g[i];
    }
    if (trace) trace->push_back(BoundStep{it, dual, lower, r.cost, theta, forced_in, forced_out});
    if (norm2 == 0.0) break;
    if (r.cost > 0.0 && (r.cost - lower) / r.cost <= params.target_gap) break;
    if (forced_in == p) break;
    if (stale >= params.halving_patience) {
      theta /= 2.0;
      stale = 0;
    }
    const double step = theta * (r.cost - dual) / norm2;
    for (std::size_t i = 0; i < n; ++i) lambda[i] += step * g[i];
  }
  lower = std::min(lower, r.cost);
  r.lower_bound = lower;
  r.gap = r.cost > 0.0 ? (r.cost - lower) / r.cost : 0.0;
  r.iterations = std::min(it + 1, params.max_iters);
  r.seconds = seconds_since(t0);
  return r;
}

Assignment extract_assignment(const PMedianInstance& inst, std::span<const std::size_t> suite) {
  check_suite(inst, suite);
  Suite sorted(suite.begin(), suite.end());
  std::sort(sorted.begin(), sorted.end());
  Assignment a;
  a.facility.resize(inst.n());
  for (std::size_t i = 0; i < inst.n(); ++i) {
    const double* row = inst.row(i);
    std::size_t best = sorted.front();
    for (std::size_t j : sorted) {
      if (row[j] < row[best]) best = j;
    }
    a.facility[i] = best;
  }
  return a;
}

std::optional<Suite> check_feasible(const SolveResult& result, double gamma) {
  if (result.suite.empty() || result.cost >= gamma) return std::nullopt;
  return result.suite;
}

std::string result_to_json(const SolveResult& r, std::span<const std::int64_t> facility_ids) {
  nlohmann::json j;
  nlohmann::json suite = nlohmann::json::array();
  for (std::size_t f : r.suite) {
    if (facility_ids.empty()) {
      suite.push_back(f);
    } else {
      suite.push_back(facility_ids[f]);
    }
  }
  j["suite"] = suite;
  j["cost"] = r.cost;
  j["lower_bound"] = r.lower_bound ? nlohmann::json(*r.lower_bound) : nlohmann::json(nullptr);
  j["gap"] = r.gap ? nlohmann::json(*r.gap) : nlohmann::json(nullptr);
  j["iterations"] = r.iterations;
  j["seconds"] = r.seconds;
  return j.dump(2);
}

}  // namespace boxsuite
