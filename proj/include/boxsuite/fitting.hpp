#pragma once

// Orthogonal packing feasibility: can a set of rigid cartons be placed in a
// box with edges parallel to the box walls?
//
// Coordinates follow the box frame: X along the box length x, Y along the
// width y, Z along the height z, origin at the left-back-bottom corner.
// Height-oriented (HO) cartons keep their height r along Z; bottom-resting
// (BR) cartons sit at z = 0.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boxsuite/model.hpp"

namespace boxsuite {

struct PackingRules {
  bool enforce_ho = true;
  bool enforce_br = true;
};

struct FitProblem {
  std::vector<Carton> cartons;
  Dims3 box;  // inner (x, y, z), not necessarily sorted
  PackingRules rules;
};

enum class FitOutcome { Fit, NoFit, TimedOut };

std::string to_string(FitOutcome o);

// Placement of one carton. dim_on_axis[a] is the carton dimension (0 = length
// p, 1 = width q, 2 = height r) lying along box axis a.
struct Placement {
  std::array<int, 3> dim_on_axis{0, 1, 2};
  Dims3 extent;
  Dims3 position;  // lbb corner
};

struct FitStats {
  std::uint64_t nodes = 0;
  double seconds = 0.0;
};

struct FitVerdict {
  FitOutcome outcome = FitOutcome::NoFit;
  std::optional<std::vector<Placement>> witness;  // indexed like FitProblem::cartons
  FitStats stats;

  bool fits() const { return outcome == FitOutcome::Fit; }
};

struct SolverConfig {
  std::chrono::milliseconds time_limit{5000};
  bool use_identical_symmetry = true;
  bool use_orthant_symmetry = true;
};

// Size of the equivalent fitting MILP for the problem under cfg: 3n position
// variables, 3n(n-1)+9n binaries, 5n orientation equalities (plus one
// equality per active HO or BR restriction), and 7/2 n(n-1) + 6n + |V| + 3
// inequalities when both symmetry families are on (the orthant family drops
// its z row when BR cartons are present).
struct FitModelSize {
  std::size_t continuous = 0;
  std::size_t binaries = 0;
  std::size_t equalities = 0;
  std::size_t inequalities = 0;
  std::size_t identical_links = 0;  // |V|
  std::size_t anchor = 0;           // beta, as an index into the original cartons
};
FitModelSize fit_model_size(const FitProblem& problem, const SolverConfig& cfg);

// Identity key used for symmetry breaking: two cartons are interchangeable
// when both are non-HO with equal sorted dims, or both are HO with equal
// sorted (length, width) and equal height. BR cartons are only
// interchangeable with other BR cartons.
bool interchangeable(const Carton& a, const Carton& b, const PackingRules& rules);

// Single carton. Non-HO: sorted carton dims <= sorted box dims. HO: r <= z
// and sorted (p, q) <= sorted (x, y).
bool fits_single(const Carton& carton, const Dims3& box, bool height_oriented, double eps = 0.0);

// Per-carton keyed dims for the stacking and necessary-condition tests:
// HO cartons sort only (length, width), others sort all three. The matching
// box key is sort2(box) when any carton is HO, else sort3(box).
struct StackKeys {
  std::vector<Dims3> cartons;
  std::size_t height_oriented = 0;  // H
  std::size_t bottom_resting = 0;   // R
};
StackKeys stacking_keys(std::span<const Carton> cartons, const PackingRules& rules);
Dims3 box_key(const Dims3& box, std::size_t height_oriented);

// Stacking along any single box axis. Height stacking is allowed only with
// at most one bottom-resting carton; pass bottom_resting = 0 when BR is not
// enforced.
bool fits_stacking(std::span<const Dims3> keyed, const Dims3& box_keyed, std::size_t bottom_resting,
                   double eps = 0.0);

// Exact decision for two or three cartons.
FitVerdict fits_exact_small(const FitProblem& problem, double eps = -1.0);

// Branch-and-bound over orientations and pairwise relative positions with
// interval propagation on lbb coordinates. Exact up to cfg.time_limit.
FitVerdict solve_fit(const FitProblem& problem, const SolverConfig& cfg = {});

// Reference decision by exhaustive search over orientations and canonical
// positions. Exponential; meant for n <= 5.
FitVerdict oracle_fit(const FitProblem& problem);

// Independent check of a witness: orientation is a permutation, HO/BR hold,
// containment and pairwise interior disjointness. Returns an empty string
// when valid, else a description of the first violation.
std::string check_witness(const FitProblem& problem, std::span<const Placement> witness, double eps = -1.0);

// Default tolerance: 1e-9 times the largest box dimension.
double default_eps(const Dims3& box);

std::string witness_to_json(std::span<const Placement> witness);

}  // namespace boxsuite
