#include "demapf/plan.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include <json.hpp>

namespace demapf {

namespace {
using ordered_json = nlohmann::ordered_json;
}

Tick traversal_duration(const TravellerSpec& spec, const Location& loc) {
  Speed effective = spec.speed;
  if (loc.speed_limit && *loc.speed_limit < effective) effective = *loc.speed_limit;
  return ceil_div(spec.length + loc.length, effective);
}

Tick tpp(const TravellerSpec& spec) { return ceil_div(spec.length, spec.speed); }

Plan build_schedule(const TravellerSpec& spec, const std::vector<LocIndex>& path, Tick start,
                    const std::vector<Tick>& waits, const RoadNetwork& net) {
  if (path.empty()) throw std::invalid_argument("build_schedule: empty path");
  if (waits.size() != path.size())
    throw std::invalid_argument("build_schedule: waits must align with path");
  if (start < spec.depart_not_before)
    throw std::invalid_argument("build_schedule: start before depart_not_before");
  for (Tick w : waits)
    if (w < 0) throw std::invalid_argument("build_schedule: negative wait");
  for (size_t i = 0; i + 1 < path.size(); ++i)
    if (!net.is_adjacent(path[i], path[i + 1]))
      throw std::invalid_argument("build_schedule: non-adjacent path entries " +
                                  net.location(path[i]).id + " -> " +
                                  net.location(path[i + 1]).id);

  const Tick lag = tpp(spec);
  std::vector<Tick> entries(path.size());
  entries[0] = start + waits[0];
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    Tick dur = traversal_duration(spec, net.location(path[i]));
    entries[i + 1] = entries[i] + dur - lag + waits[i + 1];
  }

  Plan plan;
  plan.traveller = spec.id;
  plan.waits = waits;
  plan.steps.resize(path.size());
  for (size_t i = 0; i < path.size(); ++i) {
    plan.steps[i].loc = path[i];
    plan.steps[i].slot.entry = entries[i];
    plan.steps[i].slot.exit =
        (i + 1 < path.size()) ? entries[i + 1] + lag
                              : entries[i] + traversal_duration(spec, net.location(path[i]));
  }
  return plan;
}

Tick plan_cost(const Plan& plan, const TravellerSpec& spec, const RoadNetwork& net) {
  Tick cost = 0;
  for (const PlanStep& step : plan.steps) cost += traversal_duration(spec, net.location(step.loc));
  for (Tick w : plan.waits) cost += w;
  return cost;
}

std::vector<Tick> waits_from_entries(const TravellerSpec& spec, const std::vector<LocIndex>& path,
                                     const std::vector<Tick>& entries, Tick start,
                                     const RoadNetwork& net) {
  if (entries.size() != path.size())
    throw std::invalid_argument("waits_from_entries: size mismatch");
  const Tick lag = tpp(spec);
  std::vector<Tick> waits(path.size());
  waits[0] = entries[0] - start;
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    Tick dur = traversal_duration(spec, net.location(path[i]));
    waits[i + 1] = entries[i + 1] - (entries[i] + dur - lag);
  }
  for (Tick w : waits)
    if (w < 0) throw std::invalid_argument("waits_from_entries: entries are not reachable");
  return waits;
}

std::optional<FirstDeviation> check_consistency(const Plan& request, const ProposedPlan& proposal,
                                                const TravellerSpec& spec) {
  (void)spec;
  if (proposal.steps.size() != request.steps.size())
    throw ProtocolViolation("proposal step count differs from request");
  std::optional<FirstDeviation> first;
  for (size_t i = 0; i < request.steps.size(); ++i) {
    const PlanStep& req = request.steps[i];
    const PlanStep& prop = proposal.steps[i];
    if (prop.loc != req.loc)
      throw ProtocolViolation("proposal location not in request at step " + std::to_string(i));
    if (prop.slot.entry < req.slot.entry)
      throw ProtocolViolation("proposal earlier than request at step " + std::to_string(i));
    if (prop.slot.duration() != req.slot.duration())
      throw ProtocolViolation("proposal changed slot duration at step " + std::to_string(i));
    if (prop.slot.entry > req.slot.entry && !first)
      first = FirstDeviation{i, prop.slot.entry - req.slot.entry};
  }
  return first;
}

std::string check_plan_invariants(const Plan& plan, const TravellerSpec& spec,
                                  const RoadNetwork& net) {
  if (plan.steps.empty()) return "plan has no steps";
  if (plan.waits.size() != plan.steps.size()) return "waits not aligned with steps";
  for (Tick w : plan.waits)
    if (w < 0) return "negative wait";
  const Location& first = net.location(plan.steps.front().loc);
  const Location& last = net.location(plan.steps.back().loc);
  if (first.id != spec.source) return "plan does not start at source";
  if (last.id != spec.destination) return "plan does not end at destination";
  if (plan.steps.front().slot.entry < spec.depart_not_before)
    return "plan departs before depart_not_before";
  const Tick lag = tpp(spec);
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    const PlanStep& step = plan.steps[i];
    if (step.slot.exit <= step.slot.entry) return "slot exit not after entry";
    if (i + 1 < plan.steps.size()) {
      const PlanStep& next = plan.steps[i + 1];
      if (!net.is_adjacent(step.loc, next.loc)) return "consecutive locations not adjacent";
      if (next.slot.entry < step.slot.entry) return "entries decrease";
      if (step.slot.exit - next.slot.entry != lag) return "contiguity broken (exit - entry != tpp)";
    } else {
      Tick dur = traversal_duration(spec, net.location(step.loc));
      if (step.slot.exit != step.slot.entry + dur) return "final slot duration mismatch";
    }
  }
  return {};
}

ValidationResult validate_solution(const SolutionSet& solution,
                                   const std::vector<TravellerSpec>& specs,
                                   const RoadNetwork& net, const WorldConfig& cfg) {
  ValidationResult result;
  std::map<std::string, const TravellerSpec*> by_id;
  for (const auto& spec : specs) by_id[spec.id] = &spec;

  Tick total = 0;
  for (const Plan& plan : solution.plans) {
    auto it = by_id.find(plan.traveller);
    if (it == by_id.end()) {
      result.error = "plan references unknown traveller: " + plan.traveller;
      return result;
    }
    std::string err = check_plan_invariants(plan, *it->second, net);
    if (!err.empty()) {
      result.error = plan.traveller + ": " + err;
      return result;
    }
    total += plan_cost(plan, *it->second, net);
  }
  if (total != solution.cost) {
    result.error = "solution cost does not equal the sum of plan costs";
    return result;
  }

  struct SlotRef {
    TimeSlot slot;
    const std::string* traveller;
  };
  std::map<LocIndex, std::vector<SlotRef>> per_location;
  for (const Plan& plan : solution.plans)
    for (const PlanStep& step : plan.steps)
      per_location[step.loc].push_back({step.slot, &plan.traveller});

  for (auto& [loc, slots] : per_location) {
    std::sort(slots.begin(), slots.end(), [](const SlotRef& a, const SlotRef& b) {
      return std::tie(a.slot.entry, *a.traveller) < std::tie(b.slot.entry, *b.traveller);
    });
    for (size_t i = 0; i < slots.size(); ++i) {
      for (size_t j = i + 1; j < slots.size(); ++j) {
        const SlotRef& a = slots[i];
        const SlotRef& b = slots[j];
        if (*a.traveller == *b.traveller) continue;
        bool separated = b.slot.entry >= a.slot.exit + cfg.t_min ||
                         a.slot.entry >= b.slot.exit + cfg.t_min;
        if (!separated) {
          result.conflict = Conflict{loc, *a.traveller, *b.traveller, a.slot, b.slot};
          return result;
        }
      }
    }
  }
  return result;
}

namespace {

ordered_json plan_json(const Plan& plan, const RoadNetwork& net) {
  ordered_json steps = ordered_json::array();
  for (const PlanStep& step : plan.steps) {
    ordered_json s;
    s["loc"] = net.location(step.loc).id;
    s["entry"] = step.slot.entry;
    s["exit"] = step.slot.exit;
    steps.push_back(std::move(s));
  }
  ordered_json out;
  out["traveller"] = plan.traveller;
  out["steps"] = std::move(steps);
  out["waits"] = plan.waits;
  return out;
}

Plan plan_from_json_obj(const ordered_json& in, const RoadNetwork& net) {
  Plan plan;
  plan.traveller = in.at("traveller").get<std::string>();
  for (const auto& s : in.at("steps")) {
    PlanStep step;
    step.loc = net.index_of(s.at("loc").get<std::string>());
    step.slot.entry = s.at("entry").get<Tick>();
    step.slot.exit = s.at("exit").get<Tick>();
    plan.steps.push_back(step);
  }
  plan.waits = in.at("waits").get<std::vector<Tick>>();
  return plan;
}

}  // namespace

std::string plan_to_json(const Plan& plan, const RoadNetwork& net) {
  return plan_json(plan, net).dump(2);
}

Plan plan_from_json(const std::string& text, const RoadNetwork& net) {
  return plan_from_json_obj(ordered_json::parse(text), net);
}

std::string solution_to_json(const SolutionSet& solution, const RoadNetwork& net) {
  ordered_json plans = ordered_json::array();
  for (const Plan& plan : solution.plans) plans.push_back(plan_json(plan, net));
  ordered_json out;
  out["plans"] = std::move(plans);
  out["cost"] = solution.cost;
  return out.dump(2);
}

SolutionSet solution_from_json(const std::string& text, const RoadNetwork& net) {
  ordered_json in = ordered_json::parse(text);
  SolutionSet solution;
  for (const auto& p : in.at("plans")) solution.plans.push_back(plan_from_json_obj(p, net));
  solution.cost = in.at("cost").get<Tick>();
  return solution;
}

std::string plan_fingerprint(const Plan& plan) {
  std::ostringstream out;
  for (const PlanStep& step : plan.steps)
    out << step.loc << ':' << step.slot.entry << ':' << step.slot.exit << ';';
  out << '|';
  for (Tick w : plan.waits) out << w << ',';
  return out.str();
}

}  // namespace demapf
