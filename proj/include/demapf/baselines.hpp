#pragma once

#include <optional>
#include <string>
#include <vector>

#include "demapf/network.hpp"
#include "demapf/plan.hpp"
#include "demapf/traveller.hpp"
#include "demapf/types.hpp"

namespace demapf {

struct BaselineResult {
  std::optional<SolutionSet> solution;
  std::string failure;  // set when a traveller is infeasible

  bool ok() const { return solution.has_value(); }
};

// Prioritized sequential planner: travellers in precedence order each take a
// constrained shortest path against the reservations of everyone before them
// (reservations widened by t_min on both sides).
BaselineResult priority_plan(const std::vector<TravellerSpec>& specs, const RoadNetwork& net,
                             const WorldConfig& cfg);

// Exact minimum-cost conflict-free solution for tiny instances
// (<= 3 travellers, <= 12 locations, horizon <= 64, all enforced).
// Deterministic tie-break by enumeration order.
BaselineResult brute_force_optimal(const std::vector<TravellerSpec>& specs, const RoadNetwork& net,
                                   const WorldConfig& cfg, Tick horizon = 64);

}  // namespace demapf
