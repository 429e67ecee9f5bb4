#pragma once

#include <array>
#include <vector>

#include "boxsuite/fitting.hpp"

namespace boxsuite::detail {

struct Orientation {
  std::array<int, 3> dim_on_axis;
  Dims3 ext;
};

// Distinct orientations permitted for the carton (2 for HO under enforced
// rules, 6 otherwise, fewer when dims repeat).
std::vector<Orientation> allowed_orientations(const Carton& c, const PackingRules& rules);

bool must_rest_on_floor(const Carton& c, const PackingRules& rules);

// Cartons re-indexed so interchangeable ones are consecutive.
struct Grouping {
  std::vector<std::size_t> order;  // order[new] = original index
  std::vector<int> group;          // per new index
  std::vector<bool> link_next;     // new index m is in V (m and m+1 interchangeable)
  std::size_t anchor = 0;          // beta, as a new index
  bool anchor_drops_z = false;     // BR cartons present
};
Grouping group_cartons(const FitProblem& problem);

Placement make_placement(const Orientation& o, Dims3 position);

}  // namespace boxsuite::detail
