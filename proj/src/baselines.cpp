#include "demapf/baselines.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "demapf/router.hpp"

namespace demapf {

BaselineResult priority_plan(const std::vector<TravellerSpec>& specs, const RoadNetwork& net,
                             const WorldConfig& cfg) {
  if (specs.empty()) throw std::invalid_argument("priority_plan: no travellers");
  cfg.validate();
  validate_specs(specs, net);
  std::vector<TravellerSpec> ordered = specs;
  std::sort(ordered.begin(), ordered.end(), [](const TravellerSpec& a, const TravellerSpec& b) {
    return precedence_key(a) < precedence_key(b);
  });

  BaselineResult result;
  SolutionSet solution;
  std::vector<Constraint> reservations;
  for (const TravellerSpec& spec : ordered) {
    auto plan = constrained_shortest_path(spec, net, reservations, spec.depart_not_before);
    if (!plan) {
      result.failure = "no feasible plan for " + spec.id;
      return result;
    }
    for (const PlanStep& step : plan->steps) {
      Constraint widened{step.loc, step.slot.entry - cfg.t_min, step.slot.exit + cfg.t_min};
      reservations.insert(
          std::upper_bound(reservations.begin(), reservations.end(), widened), widened);
    }
    solution.cost += plan_cost(*plan, spec, net);
    solution.plans.push_back(std::move(*plan));
  }
  std::sort(solution.plans.begin(), solution.plans.end(),
            [](const Plan& a, const Plan& b) { return a.traveller < b.traveller; });
  result.solution = std::move(solution);
  return result;
}

namespace {

// All simple node/edge paths between two nodes, in lexicographic index order.
void enumerate_paths(const RoadNetwork& net, LocIndex current, LocIndex goal,
                     std::vector<LocIndex>& stack, std::vector<bool>& used,
                     std::vector<std::vector<LocIndex>>& out) {
  if (current == goal) {
    out.push_back(stack);
    return;
  }
  for (LocIndex next : net.adjacent(current)) {
    if (used[static_cast<size_t>(next)]) continue;
    used[static_cast<size_t>(next)] = true;
    stack.push_back(next);
    enumerate_paths(net, next, goal, stack, used, out);
    stack.pop_back();
    used[static_cast<size_t>(next)] = false;
  }
}

struct Var {
  int traveller;
  int step;
};

// Lower-bound difference constraints x[to] >= x[from] + weight; from == -1 is
// the origin (value 0). The componentwise-minimal solution, when one exists,
// minimizes every monotone objective simultaneously.
struct DiffSystem {
  int n = 0;
  struct Arc {
    int from;
    int to;
    Tick weight;
  };
  std::vector<Arc> arcs;

  std::optional<std::vector<Tick>> solve() const {
    std::vector<Tick> x(static_cast<size_t>(n), 0);
    for (const Arc& arc : arcs)
      if (arc.from < 0 && x[static_cast<size_t>(arc.to)] < arc.weight)
        x[static_cast<size_t>(arc.to)] = arc.weight;
    for (int pass = 0; pass <= n; ++pass) {
      bool changed = false;
      for (const Arc& arc : arcs) {
        Tick base = arc.from < 0 ? 0 : x[static_cast<size_t>(arc.from)];
        if (x[static_cast<size_t>(arc.to)] < base + arc.weight) {
          x[static_cast<size_t>(arc.to)] = base + arc.weight;
          changed = true;
        }
      }
      if (!changed) return x;
    }
    return std::nullopt;  // positive cycle: incompatible orderings
  }
};

}  // namespace

BaselineResult brute_force_optimal(const std::vector<TravellerSpec>& specs, const RoadNetwork& net,
                                   const WorldConfig& cfg, Tick horizon) {
  cfg.validate();
  validate_specs(specs, net);
  if (specs.empty()) throw std::invalid_argument("brute_force_optimal: no travellers");
  if (specs.size() > 3)
    throw std::invalid_argument("brute_force_optimal: more than 3 travellers");
  if (net.size() > 12) throw std::invalid_argument("brute_force_optimal: more than 12 locations");
  if (horizon <= 0 || horizon > 64)
    throw std::invalid_argument("brute_force_optimal: horizon must be in (0, 64]");

  const int k = static_cast<int>(specs.size());
  std::vector<std::vector<std::vector<LocIndex>>> paths(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    LocIndex src = net.index_of(specs[static_cast<size_t>(i)].source);
    LocIndex dst = net.index_of(specs[static_cast<size_t>(i)].destination);
    std::vector<LocIndex> stack{src};
    std::vector<bool> used(net.size(), false);
    used[static_cast<size_t>(src)] = true;
    enumerate_paths(net, src, dst, stack, used, paths[static_cast<size_t>(i)]);
    if (paths[static_cast<size_t>(i)].empty()) {
      BaselineResult result;
      result.failure = "no path for " + specs[static_cast<size_t>(i)].id;
      return result;
    }
  }

  BaselineResult result;
  Tick best_cost = std::numeric_limits<Tick>::max();
  std::optional<SolutionSet> best;

  std::vector<size_t> choice(static_cast<size_t>(k), 0);
  while (true) {
    // Variables and the per-traveller chain constraints for this path combo.
    DiffSystem sys;
    std::vector<int> var_base(static_cast<size_t>(k));
    std::vector<const std::vector<LocIndex>*> combo(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
      combo[static_cast<size_t>(i)] = &paths[static_cast<size_t>(i)][choice[static_cast<size_t>(i)]];
      var_base[static_cast<size_t>(i)] = sys.n;
      sys.n += static_cast<int>(combo[static_cast<size_t>(i)]->size());
    }
    auto var = [&](int traveller, int step) { return var_base[static_cast<size_t>(traveller)] + step; };
    std::vector<Tick> lag(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
      const TravellerSpec& spec = specs[static_cast<size_t>(i)];
      const auto& path = *combo[static_cast<size_t>(i)];
      lag[static_cast<size_t>(i)] = tpp(spec);
      sys.arcs.push_back({-1, var(i, 0), spec.depart_not_before});
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        Tick dur = traversal_duration(spec, net.location(path[s]));
        sys.arcs.push_back({var(i, static_cast<int>(s)), var(i, static_cast<int>(s + 1)),
                            dur - lag[static_cast<size_t>(i)]});
      }
    }

    // One ordering bit per (location, traveller pair) both paths visit.
    struct Meeting {
      int a;
      int a_step;
      int b;
      int b_step;
    };
    std::vector<Meeting> meetings;
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        const auto& pa = *combo[static_cast<size_t>(a)];
        const auto& pb = *combo[static_cast<size_t>(b)];
        for (size_t sa = 0; sa < pa.size(); ++sa)
          for (size_t sb = 0; sb < pb.size(); ++sb)
            if (pa[sa] == pb[sb])
              meetings.push_back({a, static_cast<int>(sa), b, static_cast<int>(sb)});
      }
    if (meetings.size() > 18)
      throw std::invalid_argument("brute_force_optimal: too many shared locations");

    size_t base_arcs = sys.arcs.size();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << meetings.size()); ++mask) {
      sys.arcs.resize(base_arcs);
      for (size_t m = 0; m < meetings.size(); ++m) {
        const Meeting& meet = meetings[m];
        // first's exit is its next entry + tpp (or entry + dur at the last step).
        auto add_order = [&](int first, int first_step, int second, int second_step) {
          const auto& path = *combo[static_cast<size_t>(first)];
          const TravellerSpec& spec = specs[static_cast<size_t>(first)];
          if (first_step + 1 < static_cast<int>(path.size())) {
            sys.arcs.push_back({var(first, first_step + 1), var(second, second_step),
                                lag[static_cast<size_t>(first)] + cfg.t_min});
          } else {
            Tick dur = traversal_duration(spec, net.location(path[static_cast<size_t>(first_step)]));
            sys.arcs.push_back({var(first, first_step), var(second, second_step),
                                dur + cfg.t_min});
          }
        };
        if (mask & (std::uint64_t{1} << m))
          add_order(meet.b, meet.b_step, meet.a, meet.a_step);
        else
          add_order(meet.a, meet.a_step, meet.b, meet.b_step);
      }

      auto entries = sys.solve();
      if (!entries) continue;
      bool within = true;
      for (Tick e : *entries)
        if (e > horizon) {
          within = false;
          break;
        }
      if (!within) continue;

      Tick total = 0;
      std::vector<Plan> plans;
      for (int i = 0; i < k; ++i) {
        const TravellerSpec& spec = specs[static_cast<size_t>(i)];
        const auto& path = *combo[static_cast<size_t>(i)];
        std::vector<Tick> plan_entries(path.size());
        for (size_t s = 0; s < path.size(); ++s)
          plan_entries[s] = (*entries)[static_cast<size_t>(var(i, static_cast<int>(s)))];
        auto waits = waits_from_entries(spec, path, plan_entries, spec.depart_not_before, net);
        Plan plan = build_schedule(spec, path, spec.depart_not_before, waits, net);
        total += plan_cost(plan, spec, net);
        plans.push_back(std::move(plan));
      }
      if (total < best_cost) {
        SolutionSet solution;
        solution.plans = std::move(plans);
        solution.cost = total;
        std::sort(solution.plans.begin(), solution.plans.end(),
                  [](const Plan& a, const Plan& b) { return a.traveller < b.traveller; });
        best_cost = total;
        best = std::move(solution);
      }
    }

    // Next path combination.
    int i = 0;
    for (; i < k; ++i) {
      if (++choice[static_cast<size_t>(i)] < paths[static_cast<size_t>(i)].size()) break;
      choice[static_cast<size_t>(i)] = 0;
    }
    if (i == k) break;
  }

  if (!best) {
    result.failure = "no conflict-free solution within horizon";
    return result;
  }
  result.solution = std::move(best);
  return result;
}

}  // namespace demapf
