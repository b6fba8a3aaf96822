#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "demapf/network.hpp"
#include "demapf/plan.hpp"
#include "demapf/router.hpp"
#include "demapf/traveller.hpp"
#include "demapf/types.hpp"

namespace demapf {

enum class MessageKind { ReserveRequest, AllocationProposal, Finalized, Failed };

std::string to_string(MessageKind kind);
MessageKind message_kind_from_string(const std::string& s);

struct RoundMessage {
  MessageKind kind = MessageKind::ReserveRequest;
  std::int64_t round = 0;
  std::string sender;
  std::string recipient;
  nlohmann::ordered_json payload;
};

// Wire form carries "v":1; unknown versions are rejected.
nlohmann::ordered_json message_to_wire(const RoundMessage& msg);
RoundMessage message_from_wire(const nlohmann::ordered_json& wire);

// Enforces the per-pair FIFO contract: round numbers from one sender to one
// recipient must strictly increase.
class PairSequencer {
 public:
  void observe(const RoundMessage& msg);

 private:
  std::map<std::pair<std::string, std::string>, std::int64_t> last_;
};

// A set of travellers reachable by the engine: in-process agents or a worker
// process behind the TCP transport. deliver() is a blocking request/reply.
class TravellerEndpoint {
 public:
  virtual ~TravellerEndpoint() = default;
  virtual std::vector<std::string> traveller_ids() = 0;
  // Round-0 messages for every hosted traveller (requests or failures).
  virtual std::vector<RoundMessage> start() = 0;
  // Reply is the traveller's next request, a finalization, or a failure.
  virtual RoundMessage deliver(const RoundMessage& proposal) = 0;
  // Whether held travellers need their (no-op) proposal each round. Remote
  // workers do: the delivery is their round barrier.
  virtual bool requires_round_delivery() const { return true; }
};

// Hosts Traveller agents in-process.
class LocalEndpoint : public TravellerEndpoint {
 public:
  LocalEndpoint(const RoadNetwork& net, std::vector<TravellerSpec> specs);

  std::vector<std::string> traveller_ids() override;
  std::vector<RoundMessage> start() override;
  RoundMessage deliver(const RoundMessage& proposal) override;
  bool requires_round_delivery() const override { return false; }

  const Traveller* traveller(const std::string& id) const;

 private:
  RoundMessage request_message(Traveller& t, std::int64_t round);
  RoundMessage outcome_message(Traveller& t, std::int64_t round);

  const RoadNetwork& net_;
  std::map<std::string, std::unique_ptr<Traveller>> travellers_;
  std::vector<std::string> order_;
};

struct RoundReport {
  std::size_t proposals_delivered = 0;
  std::size_t acceptances = 0;
  std::size_t expansions = 0;
};

struct EngineCounters {
  std::size_t requests = 0;
  std::size_t proposals = 0;
  std::size_t messages_sent = 0;  // requests + proposals
  std::size_t ct_nodes_explored = 0;
  std::size_t ct_nodes_generated = 0;
  std::size_t cost_regressions = 0;
  std::size_t nonminimal_acceptances = 0;
  std::size_t finality_violations = 0;
  std::size_t conservation_violations = 0;
};

struct TravellerReport {
  std::string id;
  TravellerStatus status = TravellerStatus::Negotiating;
  Tick cost = 0;  // final plan cost when PlanFound
  std::size_t ct_nodes_explored = 0;
  std::size_t ct_nodes_generated = 0;
};

struct EngineResult {
  enum class Status { Converged, AgentFailed, RoundLimit };
  Status status = Status::RoundLimit;
  SolutionSet solution;  // complete when converged, partial otherwise
  std::vector<TravellerReport> travellers;
  std::int64_t rounds = 0;
  EngineCounters counters;

  bool converged() const { return status == Status::Converged; }
};

// Synchronous-round negotiation engine. Each round: every traveller's current
// plan is requested (finalized travellers hold their reservations by
// re-entering their final plans), every location allocates with Algorithm 2,
// and proposals are processed in precedence order: a traveller may accept or
// expand only once every higher-precedence traveller has finalized, which
// keeps finalized reservations stable for the rest of the run.
class Engine {
 public:
  Engine(const RoadNetwork& net, const WorldConfig& cfg, std::vector<TravellerSpec> specs,
         std::vector<std::unique_ptr<TravellerEndpoint>> endpoints,
         std::optional<std::int64_t> max_rounds = std::nullopt);

  // Convenience: all travellers hosted in-process.
  static Engine local(const RoadNetwork& net, const WorldConfig& cfg,
                      std::vector<TravellerSpec> specs,
                      std::optional<std::int64_t> max_rounds = std::nullopt);

  RoundReport run_round();
  EngineResult run_to_convergence();

  std::int64_t max_rounds() const { return max_rounds_; }
  void set_trace(std::ostream* sink) { trace_ = sink; }

  // Safety-net default: sum over travellers of 2^min(root path length, 12),
  // capped at 100000 (worst-case tree growth is exponential in the number of
  // contended locations).
  static std::int64_t default_max_rounds(const RoadNetwork& net,
                                         const std::vector<TravellerSpec>& specs);

 private:
  struct AgentState {
    TravellerSpec spec;
    TravellerEndpoint* endpoint = nullptr;
    TravellerStatus status = TravellerStatus::Negotiating;
    std::vector<PlanStep> requested;  // current requested steps
    bool dirty = true;                // requests changed since last placement
    std::vector<LocIndex> placed;     // locations currently in the books
    std::optional<Plan> final_plan;
    std::map<LocIndex, TimeSlot> final_slots;
    std::size_t ct_nodes_explored = 0;
    std::size_t ct_nodes_generated = 0;
    std::size_t cost_regressions = 0;
    std::size_t nonminimal_acceptances = 0;
  };

  void ingest(const RoundMessage& msg);
  std::vector<PlanStep> steps_from_payload(const nlohmann::ordered_json& payload) const;
  EngineResult make_result(EngineResult::Status status);

  const RoadNetwork& net_;
  WorldConfig cfg_;
  std::vector<std::unique_ptr<TravellerEndpoint>> endpoints_;
  std::vector<AgentState> agents_;  // precedence order
  std::map<std::string, std::size_t> agent_index_;
  // Request books and allocations persist across rounds; only locations whose
  // request set changed are re-allocated (allocate_round is a pure function of
  // that set, so the cache is exact).
  std::map<LocIndex, std::map<std::size_t, Request>> location_requests_;
  std::map<LocIndex, RoundAllocation> allocations_;
  std::vector<LocIndex> dirty_locations_;
  PairSequencer sequencer_;
  std::int64_t max_rounds_ = 0;
  std::int64_t round_ = 0;
  bool started_ = false;
  bool done_ = false;
  EngineCounters counters_;
  std::ostream* trace_ = nullptr;
};

// One-call local solve used by the CLI, bindings and tests.
EngineResult solve(const RoadNetwork& net, const WorldConfig& cfg,
                   std::vector<TravellerSpec> specs,
                   std::optional<std::int64_t> max_rounds = std::nullopt);

}  // namespace demapf
