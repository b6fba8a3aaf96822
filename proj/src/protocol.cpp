#include "demapf/protocol.hpp"

#include <algorithm>

namespace demapf {

namespace {
using ordered_json = nlohmann::ordered_json;
}

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::ReserveRequest: return "reserve_request";
    case MessageKind::AllocationProposal: return "allocation_proposal";
    case MessageKind::Finalized: return "finalized";
    case MessageKind::Failed: return "failed";
  }
  return "unknown";
}

MessageKind message_kind_from_string(const std::string& s) {
  if (s == "reserve_request") return MessageKind::ReserveRequest;
  if (s == "allocation_proposal") return MessageKind::AllocationProposal;
  if (s == "finalized") return MessageKind::Finalized;
  if (s == "failed") return MessageKind::Failed;
  throw ProtocolViolation("unknown message kind: " + s);
}

ordered_json message_to_wire(const RoundMessage& msg) {
  ordered_json wire;
  wire["v"] = 1;
  wire["kind"] = to_string(msg.kind);
  wire["round"] = msg.round;
  wire["sender"] = msg.sender;
  wire["recipient"] = msg.recipient;
  wire["payload"] = msg.payload;
  return wire;
}

RoundMessage message_from_wire(const ordered_json& wire) {
  if (!wire.contains("v") || !wire["v"].is_number_integer() || wire["v"].get<int>() != 1)
    throw ProtocolViolation("unsupported wire version");
  RoundMessage msg;
  msg.kind = message_kind_from_string(wire.at("kind").get<std::string>());
  msg.round = wire.at("round").get<std::int64_t>();
  msg.sender = wire.at("sender").get<std::string>();
  msg.recipient = wire.at("recipient").get<std::string>();
  msg.payload = wire.at("payload");
  return msg;
}

void PairSequencer::observe(const RoundMessage& msg) {
  auto key = std::make_pair(msg.sender, msg.recipient);
  auto it = last_.find(key);
  if (it != last_.end() && msg.round <= it->second)
    throw ProtocolViolation("out-of-order message from " + msg.sender + " to " + msg.recipient +
                            ": round " + std::to_string(msg.round) + " after " +
                            std::to_string(it->second));
  last_[key] = msg.round;
}

// ---------------------------------------------------------------------------
// LocalEndpoint

namespace {

ordered_json stats_payload(const Traveller& t) {
  ordered_json stats;
  stats["explored"] = t.nodes_explored();
  stats["generated"] = t.nodes_generated();
  stats["cost_regressions"] = t.cost_regressions();
  stats["nonminimal_acceptances"] = t.nonminimal_acceptances();
  return stats;
}

}  // namespace

LocalEndpoint::LocalEndpoint(const RoadNetwork& net, std::vector<TravellerSpec> specs)
    : net_(net) {
  for (auto& spec : specs) {
    order_.push_back(spec.id);
    auto agent = std::make_unique<Traveller>(std::move(spec), net_);
    travellers_.emplace(order_.back(), std::move(agent));
  }
}

std::vector<std::string> LocalEndpoint::traveller_ids() { return order_; }

const Traveller* LocalEndpoint::traveller(const std::string& id) const {
  auto it = travellers_.find(id);
  return it == travellers_.end() ? nullptr : it->second.get();
}

RoundMessage LocalEndpoint::request_message(Traveller& t, std::int64_t round) {
  const Plan* plan = t.next_request();
  if (!plan) return outcome_message(t, round);
  RoundMessage msg;
  msg.kind = MessageKind::ReserveRequest;
  msg.round = round;
  msg.sender = t.spec().id;
  msg.recipient = "engine";
  ordered_json requests = ordered_json::array();
  for (const PlanStep& step : plan->steps) {
    ordered_json r;
    r["loc"] = net_.location(step.loc).id;
    r["entry"] = step.slot.entry;
    r["exit"] = step.slot.exit;
    requests.push_back(std::move(r));
  }
  msg.payload["requests"] = std::move(requests);
  msg.payload["speed"] = t.spec().speed;
  msg.payload["length"] = t.spec().length;
  msg.payload["stats"] = stats_payload(t);
  return msg;
}

RoundMessage LocalEndpoint::outcome_message(Traveller& t, std::int64_t round) {
  RoundMessage msg;
  msg.round = round;
  msg.sender = t.spec().id;
  msg.recipient = "engine";
  if (t.status() == TravellerStatus::PlanFound) {
    msg.kind = MessageKind::Finalized;
    msg.payload["plan"] = ordered_json::parse(plan_to_json(*t.final_plan(), net_));
  } else {
    msg.kind = MessageKind::Failed;
    msg.payload["reason"] =
        t.nodes_generated() == 0 ? "destination unreachable" : "open set exhausted";
  }
  msg.payload["stats"] = stats_payload(t);
  return msg;
}

std::vector<RoundMessage> LocalEndpoint::start() {
  std::vector<RoundMessage> out;
  for (const std::string& id : order_) {
    Traveller& t = *travellers_.at(id);
    if (t.status() == TravellerStatus::Failed)
      out.push_back(outcome_message(t, 0));
    else
      out.push_back(request_message(t, 0));
  }
  return out;
}

RoundMessage LocalEndpoint::deliver(const RoundMessage& proposal) {
  auto it = travellers_.find(proposal.recipient);
  if (it == travellers_.end())
    throw ProtocolViolation("proposal for unhosted traveller " + proposal.recipient);
  Traveller& t = *it->second;
  const std::int64_t next_round = proposal.round + 1;
  bool process = proposal.payload.at("process").get<bool>();
  if (!process) return request_message(t, next_round);

  const Plan* current = t.next_request();
  if (!current) return outcome_message(t, next_round);
  const auto& slots = proposal.payload.at("slots");
  ProposedPlan pp;
  pp.traveller = t.spec().id;
  if (slots.size() != current->steps.size())
    throw ProtocolViolation("proposal size mismatch for " + t.spec().id);
  for (size_t i = 0; i < current->steps.size(); ++i) {
    PlanStep step;
    step.loc = net_.index_of(slots.at(i).at("loc").get<std::string>());
    step.slot.entry = slots.at(i).at("entry").get<Tick>();
    step.slot.exit = slots.at(i).at("exit").get<Tick>();
    pp.steps.push_back(step);
    pp.deviated.push_back(step.slot.entry > current->steps[i].slot.entry);
  }
  auto outcome = t.process_proposal(pp);
  if (outcome.kind == Traveller::OutcomeKind::Accepted) return outcome_message(t, next_round);
  return request_message(t, next_round);  // reports Failed when the open set is spent
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(const RoadNetwork& net, const WorldConfig& cfg, std::vector<TravellerSpec> specs,
               std::vector<std::unique_ptr<TravellerEndpoint>> endpoints,
               std::optional<std::int64_t> max_rounds)
    : net_(net), cfg_(cfg), endpoints_(std::move(endpoints)) {
  cfg_.validate();
  validate_specs(specs, net_);
  max_rounds_ = max_rounds ? *max_rounds : default_max_rounds(net_, specs);
  if (max_rounds_ < 1) throw std::invalid_argument("max_rounds must be >= 1");

  std::sort(specs.begin(), specs.end(), [](const TravellerSpec& a, const TravellerSpec& b) {
    return precedence_key(a) < precedence_key(b);
  });
  std::map<std::string, TravellerEndpoint*> host_of;
  for (auto& ep : endpoints_)
    for (const std::string& id : ep->traveller_ids()) {
      if (!host_of.emplace(id, ep.get()).second)
        throw std::invalid_argument("traveller hosted twice: " + id);
    }
  for (auto& spec : specs) {
    auto it = host_of.find(spec.id);
    if (it == host_of.end()) throw std::invalid_argument("traveller not hosted: " + spec.id);
    AgentState agent;
    agent.spec = std::move(spec);
    agent.endpoint = it->second;
    agent_index_.emplace(agent.spec.id, agents_.size());
    agents_.push_back(std::move(agent));
    host_of.erase(it);
  }
  if (!host_of.empty())
    throw std::invalid_argument("endpoint hosts unknown traveller: " + host_of.begin()->first);
}

Engine Engine::local(const RoadNetwork& net, const WorldConfig& cfg,
                     std::vector<TravellerSpec> specs, std::optional<std::int64_t> max_rounds) {
  std::vector<std::unique_ptr<TravellerEndpoint>> endpoints;
  endpoints.push_back(std::make_unique<LocalEndpoint>(net, specs));
  return Engine(net, cfg, std::move(specs), std::move(endpoints), max_rounds);
}

std::int64_t Engine::default_max_rounds(const RoadNetwork& net,
                                        const std::vector<TravellerSpec>& specs) {
  std::int64_t total = 0;
  for (const auto& spec : specs) {
    auto path = shortest_path(net, net.index_of(spec.source), net.index_of(spec.destination), spec);
    std::int64_t k = path ? std::min<std::int64_t>(static_cast<std::int64_t>(path->size()), 12) : 1;
    total += std::int64_t{1} << k;
    if (total >= 100000) return 100000;
  }
  return std::max<std::int64_t>(total, 1);
}

std::vector<PlanStep> Engine::steps_from_payload(const ordered_json& payload) const {
  std::vector<PlanStep> steps;
  for (const auto& r : payload.at("requests")) {
    PlanStep step;
    step.loc = net_.index_of(r.at("loc").get<std::string>());
    step.slot.entry = r.at("entry").get<Tick>();
    step.slot.exit = r.at("exit").get<Tick>();
    steps.push_back(step);
  }
  return steps;
}

void Engine::ingest(const RoundMessage& msg) {
  sequencer_.observe(msg);
  auto it = agent_index_.find(msg.sender);
  if (it == agent_index_.end()) throw ProtocolViolation("message from unknown agent " + msg.sender);
  AgentState& agent = agents_[it->second];
  if (msg.payload.contains("stats")) {
    const auto& stats = msg.payload["stats"];
    agent.ct_nodes_explored = stats.at("explored").get<std::size_t>();
    agent.ct_nodes_generated = stats.at("generated").get<std::size_t>();
    agent.cost_regressions = stats.at("cost_regressions").get<std::size_t>();
    agent.nonminimal_acceptances = stats.at("nonminimal_acceptances").get<std::size_t>();
  }
  switch (msg.kind) {
    case MessageKind::ReserveRequest:
      agent.requested = steps_from_payload(msg.payload);
      agent.dirty = true;
      break;
    case MessageKind::Finalized: {
      agent.status = TravellerStatus::PlanFound;
      agent.final_plan = plan_from_json(msg.payload.at("plan").dump(), net_);
      // The accepted plan equals the request verbatim, so the books already
      // hold exactly these slots; it keeps re-emitting them every round.
      agent.requested = agent.final_plan->steps;
      agent.final_slots.clear();
      for (const PlanStep& step : agent.final_plan->steps)
        agent.final_slots.emplace(step.loc, step.slot);
      agent.dirty = false;
      break;
    }
    case MessageKind::Failed:
      agent.status = TravellerStatus::Failed;
      agent.requested.clear();
      agent.dirty = true;
      break;
    case MessageKind::AllocationProposal:
      throw ProtocolViolation("traveller sent an allocation proposal");
  }
}

RoundReport Engine::run_round() {
  if (done_) throw std::logic_error("run_round called after the engine stopped");
  if (!started_) {
    for (auto& ep : endpoints_)
      for (const RoundMessage& msg : ep->start()) ingest(msg);
    started_ = true;
    for (const AgentState& agent : agents_)
      if (agent.status == TravellerStatus::Failed) {
        done_ = true;
        return RoundReport{};
      }
  }

  RoundReport report;

  // Phase 1: place this round's requests. Every non-failed traveller's current
  // steps (finalized ones re-emit their final plans) count as this round's
  // requests; only changed agents touch the books.
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentState& agent = agents_[i];
    if (agent.status != TravellerStatus::Failed) {
      counters_.requests += agent.requested.size();
      counters_.proposals += agent.requested.size();  // every request is answered
    }
    if (!agent.dirty) continue;
    for (LocIndex loc : agent.placed) {
      auto it = location_requests_.find(loc);
      if (it != location_requests_.end()) {
        it->second.erase(i);
        dirty_locations_.push_back(loc);
        if (it->second.empty()) location_requests_.erase(it);
      }
    }
    agent.placed.clear();
    if (agent.status != TravellerStatus::Failed) {
      for (const PlanStep& step : agent.requested) {
        location_requests_[step.loc].emplace(
            i, Request{agent.spec.id, step.slot, agent.spec.speed, agent.spec.length});
        agent.placed.push_back(step.loc);
        dirty_locations_.push_back(step.loc);
      }
    }
    agent.dirty = false;
  }

  // Phase 2: re-allocate locations whose request set changed; everything else
  // is unchanged by purity of allocate_round.
  std::sort(dirty_locations_.begin(), dirty_locations_.end());
  dirty_locations_.erase(std::unique(dirty_locations_.begin(), dirty_locations_.end()),
                         dirty_locations_.end());
  for (LocIndex loc : dirty_locations_) {
    auto it = location_requests_.find(loc);
    if (it == location_requests_.end()) {
      allocations_.erase(loc);
      continue;
    }
    std::vector<Request> inputs;
    inputs.reserve(it->second.size());
    for (const auto& [agent_index, request] : it->second) inputs.push_back(request);
    RoundAllocation allocation = allocate_round(std::move(inputs), cfg_.t_min);
    if (allocation.proposals.size() != it->second.size()) ++counters_.conservation_violations;
    // Finality: a finalized traveller's re-granted slot must equal its plan.
    for (const auto& [traveller, slot] : allocation.proposals) {
      const AgentState& owner = agents_[agent_index_.at(traveller)];
      if (owner.status == TravellerStatus::PlanFound && !(owner.final_slots.at(loc) == slot))
        ++counters_.finality_violations;
    }
    allocations_[loc] = std::move(allocation);
  }
  dirty_locations_.clear();
  if (trace_) {
    for (const auto& [loc, allocation] : allocations_)
      for (const auto& [traveller, slot] : allocation.proposals)
        *trace_ << "round=" << round_ << " loc=" << net_.location(loc).id << " traveller="
                << traveller << " slot=(" << slot.entry << "," << slot.exit << ")\n";
  }

  // Phase 3: process proposals in precedence order. A traveller may accept or
  // expand only when every higher-precedence traveller is final; the first
  // one that expands (or fails) blocks the rest for this round.
  bool prefix_final = true;
  for (AgentState& agent : agents_) {
    if (agent.status != TravellerStatus::Negotiating) continue;
    if (!prefix_final && !agent.endpoint->requires_round_delivery()) continue;

    RoundMessage proposal;
    proposal.kind = MessageKind::AllocationProposal;
    proposal.round = round_;
    proposal.sender = "engine";
    proposal.recipient = agent.spec.id;
    ordered_json slots = ordered_json::array();
    for (const PlanStep& step : agent.requested) {
      const TimeSlot& granted = allocations_.at(step.loc).proposals.at(agent.spec.id);
      ordered_json s;
      s["loc"] = net_.location(step.loc).id;
      s["entry"] = granted.entry;
      s["exit"] = granted.exit;
      slots.push_back(std::move(s));
    }
    proposal.payload["slots"] = std::move(slots);
    proposal.payload["process"] = prefix_final;
    sequencer_.observe(proposal);
    ++report.proposals_delivered;

    std::vector<PlanStep> previous = agent.requested;
    bool processed = prefix_final;
    RoundMessage reply = agent.endpoint->deliver(proposal);
    if (reply.sender != agent.spec.id || reply.round != round_ + 1)
      throw ProtocolViolation("bad reply from " + agent.spec.id);
    ingest(reply);
    if (processed) {
      switch (reply.kind) {
        case MessageKind::Finalized:
          ++report.acceptances;
          break;
        case MessageKind::ReserveRequest:
          ++report.expansions;
          prefix_final = false;
          break;
        case MessageKind::Failed:
          prefix_final = false;
          break;
        default:
          throw ProtocolViolation("unexpected reply kind from " + agent.spec.id);
      }
    } else {
      if (reply.kind != MessageKind::ReserveRequest || agent.requested != previous)
        throw ProtocolViolation("held traveller changed its request: " + agent.spec.id);
    }
  }

  ++round_;
  bool all_done = true;
  for (const AgentState& agent : agents_) {
    if (agent.status == TravellerStatus::Failed) done_ = true;
    if (agent.status != TravellerStatus::PlanFound) all_done = false;
  }
  if (all_done) done_ = true;
  return report;
}

EngineResult Engine::make_result(EngineResult::Status status) {
  EngineResult result;
  result.status = status;
  result.rounds = round_;
  for (const AgentState& agent : agents_) {
    TravellerReport report;
    report.id = agent.spec.id;
    report.status = agent.status;
    report.ct_nodes_explored = agent.ct_nodes_explored;
    report.ct_nodes_generated = agent.ct_nodes_generated;
    counters_.ct_nodes_explored += agent.ct_nodes_explored;
    counters_.ct_nodes_generated += agent.ct_nodes_generated;
    counters_.cost_regressions += agent.cost_regressions;
    counters_.nonminimal_acceptances += agent.nonminimal_acceptances;
    if (agent.final_plan) {
      result.solution.plans.push_back(*agent.final_plan);
      report.cost = plan_cost(*agent.final_plan, agent.spec, net_);
      result.solution.cost += report.cost;
    }
    result.travellers.push_back(std::move(report));
  }
  std::sort(result.solution.plans.begin(), result.solution.plans.end(),
            [](const Plan& a, const Plan& b) { return a.traveller < b.traveller; });
  std::sort(result.travellers.begin(), result.travellers.end(),
            [](const TravellerReport& a, const TravellerReport& b) { return a.id < b.id; });
  counters_.messages_sent = counters_.requests + counters_.proposals;
  result.counters = counters_;
  return result;
}

EngineResult Engine::run_to_convergence() {
  while (true) {
    run_round();
    if (done_) break;
    if (round_ >= max_rounds_) break;
  }

  bool any_failed = false;
  bool all_found = !agents_.empty();
  for (const AgentState& agent : agents_) {
    if (agent.status == TravellerStatus::Failed) any_failed = true;
    if (agent.status != TravellerStatus::PlanFound) all_found = false;
  }
  if (any_failed) return make_result(EngineResult::Status::AgentFailed);
  if (!all_found) return make_result(EngineResult::Status::RoundLimit);

  EngineResult result = make_result(EngineResult::Status::Converged);
  std::vector<TravellerSpec> specs;
  for (const AgentState& agent : agents_) specs.push_back(agent.spec);
  ValidationResult validation = validate_solution(result.solution, specs, net_, cfg_);
  if (!validation.valid()) {
    std::string detail = validation.error;
    if (validation.conflict)
      detail = "conflict on " + net_.location(validation.conflict->loc).id + " between " +
               validation.conflict->traveller_a + " and " + validation.conflict->traveller_b;
    throw std::logic_error("converged solution failed validation: " + detail);
  }
  return result;
}

EngineResult solve(const RoadNetwork& net, const WorldConfig& cfg,
                   std::vector<TravellerSpec> specs, std::optional<std::int64_t> max_rounds) {
  Engine engine = Engine::local(net, cfg, specs, max_rounds);
  return engine.run_to_convergence();
}

}  // namespace demapf
