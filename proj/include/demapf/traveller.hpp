#pragma once

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "demapf/network.hpp"
#include "demapf/plan.hpp"
#include "demapf/types.hpp"

namespace demapf {

// Forbidden occupancy window [from, to) on one location.
struct Constraint {
  LocIndex loc = kNoLocation;
  Tick from = 0;
  Tick to = 0;

  bool operator==(const Constraint&) const = default;
  bool operator<(const Constraint& other) const {
    return std::tie(loc, from, to) < std::tie(other.loc, other.from, other.to);
  }
};

struct CTNode {
  Plan plan;
  std::vector<Constraint> constraints;  // sorted, inherited down the branch
  Tick cost = 0;
  int parent = -1;
};

// Least-cost schedule whose every occupancy window [entry, exit) avoids the
// forbidden intervals, with waits allowed at every transition. Entry times are
// capped at max(constraint end) + unconstrained cost; nullopt when no plan
// exists within that horizon. Plans visit a location at most once. Results
// cheaper than min_cost are skipped (used to keep child costs non-decreasing
// down the constraint tree).
std::optional<Plan> constrained_shortest_path(const TravellerSpec& spec, const RoadNetwork& net,
                                              const std::vector<Constraint>& constraints,
                                              Tick depart, Tick min_cost = 0);

enum class TravellerStatus { Negotiating, PlanFound, Failed };

// One Traveller agent: a best-first constraint tree over candidate plans.
// The node under negotiation stays current until a proposal is processed, so
// a held traveller re-requests the same slots next round.
class Traveller {
 public:
  Traveller(TravellerSpec spec, const RoadNetwork& net);

  TravellerStatus status() const { return status_; }
  const TravellerSpec& spec() const { return spec_; }
  const Plan* final_plan() const { return final_plan_ ? &*final_plan_ : nullptr; }

  // Plan whose slots should be requested this round: pops the least-cost open
  // node unless one is already under negotiation. nullptr = just failed
  // (open set exhausted).
  const Plan* next_request();

  enum class OutcomeKind { Accepted, Expanded };
  struct Outcome {
    OutcomeKind kind = OutcomeKind::Expanded;
    int children = 0;
  };
  // Algorithm-1 step for the proposal answering the current request.
  Outcome process_proposal(const ProposedPlan& proposal);

  // Instrumentation.
  std::size_t nodes_explored() const { return explored_; }
  std::size_t nodes_generated() const { return arena_.size(); }
  std::size_t open_size() const { return open_.size(); }
  std::size_t cost_regressions() const { return cost_regressions_; }
  std::size_t nonminimal_acceptances() const { return nonminimal_acceptances_; }

  std::string ct_to_json(const RoadNetwork& net) const;

 private:
  void insert_node(CTNode node);

  TravellerSpec spec_;
  const RoadNetwork& net_;
  TravellerStatus status_ = TravellerStatus::Negotiating;
  std::deque<CTNode> arena_;  // deque: references stay valid as children are added
  std::set<std::pair<Tick, int>> open_;  // (cost, insertion seq)
  std::unordered_set<std::string> fingerprints_;
  std::optional<int> current_;
  std::optional<Plan> final_plan_;
  std::vector<LocIndex> root_path_;
  Tick root_cost_ = 0;
  std::size_t explored_ = 0;
  std::size_t cost_regressions_ = 0;
  std::size_t nonminimal_acceptances_ = 0;
};

}  // namespace demapf
