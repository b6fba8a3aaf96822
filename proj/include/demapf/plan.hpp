#pragma once

#include <optional>
#include <string>
#include <vector>

#include "demapf/network.hpp"
#include "demapf/types.hpp"

namespace demapf {

struct PlanStep {
  LocIndex loc = kNoLocation;
  TimeSlot slot;

  bool operator==(const PlanStep&) const = default;
};

// Timed location sequence of one traveller. waits[i] is the idle time spent
// before entering step i (waits[0] delays departure).
struct Plan {
  std::string traveller;
  std::vector<PlanStep> steps;
  std::vector<Tick> waits;

  bool operator==(const Plan&) const = default;
};

// Router counter-offer, slot-aligned with the requested plan's steps.
struct ProposedPlan {
  std::string traveller;
  std::vector<PlanStep> steps;
  std::vector<bool> deviated;  // proposal entry later than request entry
};

struct SolutionSet {
  std::vector<Plan> plans;  // sorted by traveller id
  Tick cost = 0;
};

// Ticks one traveller spends on one location, head entry to tail exit:
// ceil((traveller.length + loc.length) / min(traveller.speed, loc.speed_limit)).
Tick traversal_duration(const TravellerSpec& spec, const Location& loc);

// Tail-clearance lag of the traveller: ceil(length / speed).
Tick tpp(const TravellerSpec& spec);

// Deterministic schedule over `path`:
//   entry(0)   = start + waits[0]
//   entry(i+1) = entry(i) + dur(i) - tpp + waits[i+1]
//   exit(i)    = entry(i+1) + tpp          (last: entry + dur)
// so exit(i) - entry(i+1) == tpp holds for every pair and any wait vector;
// a wait before entering step i+1 extends the tail's clearance of step i.
Plan build_schedule(const TravellerSpec& spec, const std::vector<LocIndex>& path, Tick start,
                    const std::vector<Tick>& waits, const RoadNetwork& net);

// Sum of per-location traversal durations plus all waits. Never derived from
// slot endpoints (consecutive slots overlap by tpp).
Tick plan_cost(const Plan& plan, const TravellerSpec& spec, const RoadNetwork& net);

// Recovers the wait vector of a schedule whose entries are already known.
std::vector<Tick> waits_from_entries(const TravellerSpec& spec, const std::vector<LocIndex>& path,
                                     const std::vector<Tick>& entries, Tick start,
                                     const RoadNetwork& net);

struct FirstDeviation {
  std::size_t step = 0;
  Tick delta = 0;

  bool operator==(const FirstDeviation&) const = default;
};

// Consistent iff every proposed slot equals the requested slot. Otherwise the
// earliest step whose proposed entry exceeds the requested entry. Proposals
// that are early or change a slot's duration violate the protocol.
std::optional<FirstDeviation> check_consistency(const Plan& request, const ProposedPlan& proposal,
                                                const TravellerSpec& spec);

struct Conflict {
  LocIndex loc = kNoLocation;
  std::string traveller_a;
  std::string traveller_b;
  TimeSlot slot_a;
  TimeSlot slot_b;
};

struct ValidationResult {
  std::optional<Conflict> conflict;
  std::string error;  // per-plan invariant breach, empty if none

  bool valid() const { return !conflict && error.empty(); }
};

// Checks every plan's own invariants, then the separation rule
// later.entry >= earlier.exit + t_min for every slot pair per location.
// Scan order is deterministic: locations by index, slots by (entry, id).
ValidationResult validate_solution(const SolutionSet& solution,
                                   const std::vector<TravellerSpec>& specs,
                                   const RoadNetwork& net, const WorldConfig& cfg);

// Per-plan invariants only (endpoints, adjacency, contiguity, depart bound).
std::string check_plan_invariants(const Plan& plan, const TravellerSpec& spec,
                                  const RoadNetwork& net);

std::string plan_to_json(const Plan& plan, const RoadNetwork& net);
Plan plan_from_json(const std::string& text, const RoadNetwork& net);
std::string solution_to_json(const SolutionSet& solution, const RoadNetwork& net);
SolutionSet solution_from_json(const std::string& text, const RoadNetwork& net);

// Canonical plan encoding used for duplicate detection in the search tree.
std::string plan_fingerprint(const Plan& plan);

}  // namespace demapf
