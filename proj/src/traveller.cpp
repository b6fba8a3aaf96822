#include "demapf/traveller.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

namespace demapf {

using IntervalList = std::vector<std::pair<Tick, Tick>>;

namespace {

using ordered_json = nlohmann::ordered_json;

bool hits(const IntervalList& forbidden, Tick from, Tick to) {
  for (auto [a, b] : forbidden)
    if (a < to && from < b) return true;
  return false;
}

}  // namespace

namespace detail {
std::optional<Plan> constrained_search(const TravellerSpec& spec, const RoadNetwork& net,
                                       const std::vector<Constraint>& constraints, Tick depart,
                                       Tick min_cost, const std::vector<LocIndex>& base_path,
                                       Tick base_cost);
}  // namespace detail

std::optional<Plan> constrained_shortest_path(const TravellerSpec& spec, const RoadNetwork& net,
                                              const std::vector<Constraint>& constraints,
                                              Tick depart, Tick min_cost) {
  LocIndex src = net.index_of(spec.source);
  LocIndex dst = net.index_of(spec.destination);
  auto base = shortest_path(net, src, dst, spec);
  if (!base) return std::nullopt;
  Tick base_cost = 0;
  for (LocIndex l : *base) base_cost += traversal_duration(spec, net.location(l));
  return detail::constrained_search(spec, net, constraints, depart, min_cost, *base, base_cost);
}

namespace detail {

std::optional<Plan> constrained_search(const TravellerSpec& spec, const RoadNetwork& net,
                                       const std::vector<Constraint>& constraints, Tick depart,
                                       Tick min_cost, const std::vector<LocIndex>& base_path,
                                       Tick base_cost) {
  LocIndex src = net.index_of(spec.source);
  LocIndex dst = net.index_of(spec.destination);
  if (constraints.empty() && min_cost <= 0)
    return build_schedule(spec, base_path, depart, std::vector<Tick>(base_path.size(), 0), net);

  Tick horizon = base_cost;
  std::map<LocIndex, IntervalList> forbidden;
  for (const Constraint& c : constraints) {
    forbidden[c.loc].emplace_back(c.from, c.to);
    horizon = std::max(horizon, c.to + base_cost);
  }
  for (auto& [loc, list] : forbidden) std::sort(list.begin(), list.end());

  const IntervalList kEmpty;
  auto forbidden_of = [&](LocIndex l) -> const IntervalList& {
    auto it = forbidden.find(l);
    return it == forbidden.end() ? kEmpty : it->second;
  };
  const Tick lag = tpp(spec);
  auto dur = [&](LocIndex l) { return traversal_duration(spec, net.location(l)); };

  // States keyed by (location, entry); entries stay far below 2^40 at any
  // realistic horizon. The hash map never drives iteration order: pops come
  // from the queue, which is strictly ordered.
  auto key_of = [](LocIndex loc, Tick entry) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(loc)) << 40) |
           static_cast<std::uint64_t>(entry);
  };
  struct StateInfo {
    Tick g;
    LocIndex parent_loc;
    Tick parent_entry;
    bool closed = false;
  };
  std::unordered_map<std::uint64_t, StateInfo> states;
  // (g, entry, loc, seq): deterministic pop order.
  using QueueItem = std::tuple<Tick, Tick, LocIndex, std::uint64_t>;
  std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> queue;
  std::uint64_t seq = 0;

  // Dominance per location: (t1, g1) covers (t2, g2) when t1 <= t2,
  // g1 + (t2 - t1) <= g2 and no forbidden interval of the location ends inside
  // (t1, t2] (then both sit in one safe interval and every continuation of the
  // later state is available to the earlier one at no extra cost). The
  // destination is exempt so the min_cost floor keeps its candidates.
  std::unordered_map<LocIndex, std::vector<std::pair<Tick, Tick>>> frontier;
  auto same_interval = [&](LocIndex loc, Tick t1, Tick t2) {
    for (auto [a, b] : forbidden_of(loc)) {
      (void)a;
      if (b > t1 && b <= t2) return false;
    }
    return true;
  };
  auto dominated = [&](LocIndex loc, Tick t, Tick g) {
    if (loc == dst) return false;
    auto it = frontier.find(loc);
    if (it == frontier.end()) return false;
    for (auto [t1, g1] : it->second)
      if (t1 <= t && g1 + (t - t1) <= g && same_interval(loc, t1, t)) return true;
    return false;
  };

  auto relax = [&](LocIndex loc, Tick entry, Tick g, LocIndex parent_loc, Tick parent_entry) {
    if (entry > horizon) return;
    if (hits(forbidden_of(loc), entry, entry + dur(loc))) return;
    if (dominated(loc, entry, g)) return;
    auto [it, inserted] = states.try_emplace(key_of(loc, entry), StateInfo{g, parent_loc, parent_entry, false});
    if (!inserted) {
      if (it->second.g <= g) return;
      it->second = StateInfo{g, parent_loc, parent_entry, false};
    }
    if (loc != dst) {
      auto& list = frontier[loc];
      std::erase_if(list, [&](const std::pair<Tick, Tick>& other) {
        return entry <= other.first && g + (other.first - entry) <= other.second &&
               same_interval(loc, entry, other.first);
      });
      list.emplace_back(entry, g);
    }
    queue.emplace(g, entry, loc, seq++);
  };

  // Departure may be delayed to the end of any forbidden interval at the source.
  relax(src, depart, dur(src), kNoLocation, 0);
  for (auto [a, b] : forbidden_of(src)) {
    (void)a;
    if (b > depart) relax(src, b, dur(src) + (b - depart), kNoLocation, 0);
  }

  std::vector<Tick> arrivals;
  while (!queue.empty()) {
    auto [g, entry, loc, ignored] = queue.top();
    queue.pop();
    auto it = states.find(key_of(loc, entry));
    if (it == states.end() || it->second.closed || it->second.g != g) continue;
    it->second.closed = true;

    if (loc == dst) {
      if (g < min_cost) continue;  // dominated by the branch's own commitment
      std::vector<LocIndex> path;
      std::vector<Tick> entries;
      LocIndex l = loc;
      Tick t = entry;
      while (l != kNoLocation) {
        path.push_back(l);
        entries.push_back(t);
        const StateInfo& info = states.at(key_of(l, t));
        l = info.parent_loc;
        t = info.parent_entry;
      }
      std::reverse(path.begin(), path.end());
      std::reverse(entries.begin(), entries.end());
      // One request per location per round: looping candidates are unusable.
      std::vector<LocIndex> sorted = path;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
      auto waits = waits_from_entries(spec, path, entries, depart, net);
      return build_schedule(spec, path, depart, waits, net);
    }

    const LocIndex came_from = it->second.parent_loc;
    for (LocIndex next : net.adjacent(loc)) {
      if (next == came_from) continue;  // no immediate ping-pong
      Tick earliest = entry + dur(loc) - lag;
      arrivals.clear();
      arrivals.push_back(earliest);
      for (auto [a, b] : forbidden_of(next)) {
        (void)a;
        if (b > earliest && b <= horizon) arrivals.push_back(b);
      }
      std::sort(arrivals.begin(), arrivals.end());
      for (Tick arrival : arrivals) {
        // Waiting extends this location's occupancy; once it overlaps a
        // forbidden interval every later arrival does too.
        if (hits(forbidden_of(loc), entry, arrival + lag)) break;
        relax(next, arrival, g + (arrival - earliest) + dur(next), loc, entry);
      }
    }
  }
  return std::nullopt;
}

}  // namespace detail

Traveller::Traveller(TravellerSpec spec, const RoadNetwork& net)
    : spec_(std::move(spec)), net_(net) {
  spec_.validate();
  LocIndex src = net_.index_of(spec_.source);
  LocIndex dst = net_.index_of(spec_.destination);
  auto path = shortest_path(net_, src, dst, spec_);
  if (!path) {
    status_ = TravellerStatus::Failed;
    return;
  }
  root_path_ = *path;
  CTNode root;
  root.plan = build_schedule(spec_, root_path_, spec_.depart_not_before,
                             std::vector<Tick>(root_path_.size(), 0), net_);
  root.cost = plan_cost(root.plan, spec_, net_);
  root_cost_ = root.cost;
  insert_node(std::move(root));
}

void Traveller::insert_node(CTNode node) {
  fingerprints_.insert(plan_fingerprint(node.plan));
  int index = static_cast<int>(arena_.size());
  arena_.push_back(std::move(node));
  open_.emplace(arena_.back().cost, index);
}

const Plan* Traveller::next_request() {
  if (status_ != TravellerStatus::Negotiating) return nullptr;
  if (!current_) {
    if (open_.empty()) {
      status_ = TravellerStatus::Failed;
      return nullptr;
    }
    auto least = *open_.begin();
    open_.erase(open_.begin());
    current_ = least.second;
    ++explored_;
  }
  return &arena_[static_cast<size_t>(*current_)].plan;
}

Traveller::Outcome Traveller::process_proposal(const ProposedPlan& proposal) {
  if (status_ != TravellerStatus::Negotiating || !current_)
    throw ProtocolViolation("proposal delivered to a traveller with no open request: " + spec_.id);
  const int parent_index = *current_;
  const Plan parent_plan = arena_[static_cast<size_t>(parent_index)].plan;
  const std::vector<Constraint> parent_constraints =
      arena_[static_cast<size_t>(parent_index)].constraints;
  const Tick parent_cost = arena_[static_cast<size_t>(parent_index)].cost;
  auto deviation = check_consistency(parent_plan, proposal, spec_);

  if (!deviation) {
    if (!open_.empty() && open_.begin()->first < parent_cost) ++nonminimal_acceptances_;
    final_plan_ = parent_plan;
    status_ = TravellerStatus::PlanFound;
    current_.reset();
    return Outcome{OutcomeKind::Accepted, 0};
  }

  Outcome outcome{OutcomeKind::Expanded, 0};
  const std::size_t step = deviation->step;
  const Tick delta = deviation->delta;

  std::vector<LocIndex> path(parent_plan.steps.size());
  for (size_t i = 0; i < path.size(); ++i) path[i] = parent_plan.steps[i].loc;

  // Both children inherit the branch's constraints plus the window the
  // proposal pushed this plan out of.
  Constraint blocked{parent_plan.steps[step].loc, parent_plan.steps[step].slot.entry,
                     proposal.steps[step].slot.entry};
  std::vector<Constraint> constraints = parent_constraints;
  constraints.insert(std::upper_bound(constraints.begin(), constraints.end(), blocked), blocked);

  // Wait child: delay the entry into the first deviated location; the
  // recurrence shifts every later step and extends the previous exit. It
  // enters the blocked location exactly at the proposed time, so it satisfies
  // the new constraint by construction.
  {
    std::vector<Tick> waits = parent_plan.waits;
    waits[step] += delta;
    CTNode child;
    child.plan = build_schedule(spec_, path, spec_.depart_not_before, waits, net_);
    child.constraints = constraints;
    child.cost = plan_cost(child.plan, spec_, net_);
    child.parent = parent_index;
    if (child.cost < parent_cost) ++cost_regressions_;
    if (!fingerprints_.count(plan_fingerprint(child.plan))) {
      insert_node(std::move(child));
      ++outcome.children;
    }
  }

  // Detour child: replan around the constraint set. Plans cheaper than the
  // parent are dominated re-derivations of other branches and are skipped,
  // which keeps costs non-decreasing down the tree.
  {
    auto plan = detail::constrained_search(spec_, net_, constraints, spec_.depart_not_before,
                                           parent_cost, root_path_, root_cost_);
    if (plan) {
      CTNode child;
      child.plan = std::move(*plan);
      child.constraints = std::move(constraints);
      child.cost = plan_cost(child.plan, spec_, net_);
      child.parent = parent_index;
      if (child.cost < parent_cost) ++cost_regressions_;
      if (!fingerprints_.count(plan_fingerprint(child.plan))) {
        insert_node(std::move(child));
        ++outcome.children;
      }
    }
  }

  current_.reset();
  return outcome;
}

std::string Traveller::ct_to_json(const RoadNetwork& net) const {
  ordered_json nodes = ordered_json::array();
  for (size_t i = 0; i < arena_.size(); ++i) {
    const CTNode& node = arena_[i];
    ordered_json entry;
    entry["id"] = i;
    entry["parent"] = node.parent;
    entry["cost"] = node.cost;
    ordered_json constraints = ordered_json::array();
    for (const Constraint& c : node.constraints) {
      ordered_json cj;
      cj["loc"] = net.location(c.loc).id;
      cj["from"] = c.from;
      cj["to"] = c.to;
      constraints.push_back(std::move(cj));
    }
    entry["constraints"] = std::move(constraints);
    entry["plan"] = ordered_json::parse(plan_to_json(node.plan, net));
    nodes.push_back(std::move(entry));
  }
  ordered_json out;
  out["traveller"] = spec_.id;
  out["nodes"] = std::move(nodes);
  return out.dump(2);
}

}  // namespace demapf
