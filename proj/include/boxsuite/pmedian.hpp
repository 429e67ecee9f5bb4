#pragma once

// p-median: choose p of m facilities minimizing the sum over n customers of
// the cheapest open facility. Exact enumeration for small m, swap local
// search, GRASP with path-relinking, and Lagrangian lower bounds.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace boxsuite {

class PMedianInstance {
 public:
  // d is row-major n x m, finite and nonnegative; 1 <= p <= m.
  PMedianInstance(std::size_t n, std::size_t m, std::size_t p, std::vector<double> d);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t p() const { return p_; }
  double d(std::size_t i, std::size_t j) const { return d_[i * m_ + j]; }
  const double* row(std::size_t i) const { return d_.data() + i * m_; }
  std::span<const double> data() const { return d_; }

 private:
  std::size_t n_;
  std::size_t m_;
  std::size_t p_;
  std::vector<double> d_;
};

// Sorted facility indices, exactly p of them.
using Suite = std::vector<std::size_t>;

struct SolveResult {
  Suite suite;
  double cost = 0.0;
  std::optional<double> lower_bound;
  std::optional<double> gap;  // (UB - LB) / UB
  std::size_t iterations = 0;
  double seconds = 0.0;
};

// Sum over customers of the cheapest facility in suite.
double suite_cost(const PMedianInstance& inst, std::span<const std::size_t> suite);

// Throws std::invalid_argument unless suite has p distinct in-range indices.
void check_suite(const PMedianInstance& inst, std::span<const std::size_t> suite);

struct ExactConfig {
  std::size_t max_m = 25;
  std::uint64_t max_subsets = 50'000'000;
};

// All p-subsets in lexicographic order; the first optimal one is kept.
// Throws BudgetError when m or C(m, p) exceeds the budget.
SolveResult solve_exact(const PMedianInstance& inst, const ExactConfig& cfg = {});

enum class Neighborhood { FirstImprovement, BestImprovement };

// Swap local search with closest/second-closest bookkeeping; each full
// neighborhood evaluation is O(n m).
SolveResult local_search_interchange(const PMedianInstance& inst, Suite start,
                                     Neighborhood nb = Neighborhood::BestImprovement);

// Best improving swap found by direct recomputation, or nullopt when the
// suite is swap-optimal. Used as an audit of local_search_interchange.
struct Swap {
  std::size_t out = 0;
  std::size_t in = 0;
  double delta = 0.0;
};
std::optional<Swap> find_improving_swap(const PMedianInstance& inst, std::span<const std::size_t> suite);

// Add-one-at-a-time greedy. Each step draws uniformly from the candidates
// whose resulting cost is within alpha of the best (alpha = 0: the best,
// lowest index on ties). rng_state seeds the draws.
Suite greedy_construct(const PMedianInstance& inst, double alpha, std::uint64_t seed);

// Walks from source to guide one swap at a time, taking the cheapest
// (insert guide-only, remove source-only) pair each step. Returns the best
// suite reached after the first step, polished by local search when it is
// strictly between the endpoints. source == guide returns source.
Suite path_relink(const PMedianInstance& inst, const Suite& source, const Suite& guide);

struct GraspParams {
  std::size_t iterations = 32;
  std::size_t elite_size = 10;
  double rcl_alpha = 0.2;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

SolveResult solve_grasp(const PMedianInstance& inst, const GraspParams& params = {});

struct LagrangianParams {
  std::size_t max_iters = 1000;
  double theta0 = 2.0;
  std::size_t halving_patience = 30;
  double target_gap = 0.0;
  std::optional<std::vector<double>> lambda0;  // default: row minima
  // Fix facilities in or out once a one-facility flip of the current
  // relaxation would exceed the incumbent; later bounds are taken over the
  // restricted problem, which keeps the optimum.
  bool force_facilities = false;
};

struct BoundStep {
  std::size_t iteration = 0;
  double dual = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double theta = 0.0;
  std::size_t forced_in = 0;
  std::size_t forced_out = 0;
};

// D(lambda) = sum of the p smallest rho_j plus sum lambda_i, where
// rho_j = sum_i min(0, d_ij - lambda_i). Optionally returns the opened set.
double dual_value(const PMedianInstance& inst, std::span<const double> lambda, Suite* open = nullptr);

SolveResult lagrangian_bounds(const PMedianInstance& inst, const LagrangianParams& params = {},
                              std::vector<BoundStep>* trace = nullptr);

// Cheapest facility in suite per customer, lowest index on ties.
struct Assignment {
  std::vector<std::size_t> facility;
};
Assignment extract_assignment(const PMedianInstance& inst, std::span<const std::size_t> suite);

// The suite when its cost is below gamma, else nullopt (no feasible suite).
std::optional<Suite> check_feasible(const SolveResult& result, double gamma);

std::string result_to_json(const SolveResult& r, std::span<const std::int64_t> facility_ids = {});

}  // namespace boxsuite
