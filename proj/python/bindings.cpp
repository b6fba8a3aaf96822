#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "demapf/baselines.hpp"
#include "demapf/network.hpp"
#include "demapf/plan.hpp"
#include "demapf/protocol.hpp"
#include "demapf/router.hpp"
#include "demapf/traveller.hpp"

namespace py = pybind11;
using namespace demapf;

PYBIND11_MODULE(_demapf, m) {
  m.doc() = "Decentralised multi-agent path finding for spatially extended agents";

  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<ProtocolViolation>(m, "ProtocolViolation");

  py::class_<WorldConfig>(m, "WorldConfig")
      .def(py::init<>())
      .def_readwrite("edge_length", &WorldConfig::edge_length)
      .def_readwrite("node_length", &WorldConfig::node_length)
      .def_readwrite("t_min", &WorldConfig::t_min)
      .def_readwrite("default_speed_limit", &WorldConfig::default_speed_limit);

  py::class_<TravellerSpec>(m, "TravellerSpec")
      .def(py::init([](std::string id, Dist length, Speed speed, std::string source,
                       std::string destination, Tick depart_not_before) {
             TravellerSpec spec{std::move(id), length, speed, std::move(source),
                                std::move(destination), depart_not_before};
             spec.validate();
             return spec;
           }),
           py::arg("id"), py::arg("length"), py::arg("speed"), py::arg("source"),
           py::arg("destination"), py::arg("depart_not_before") = 0)
      .def_readwrite("id", &TravellerSpec::id)
      .def_readwrite("length", &TravellerSpec::length)
      .def_readwrite("speed", &TravellerSpec::speed)
      .def_readwrite("source", &TravellerSpec::source)
      .def_readwrite("destination", &TravellerSpec::destination)
      .def_readwrite("depart_not_before", &TravellerSpec::depart_not_before);

  py::class_<TimeSlot>(m, "TimeSlot")
      .def(py::init<Tick, Tick>(), py::arg("entry"), py::arg("exit"))
      .def_readwrite("entry", &TimeSlot::entry)
      .def_readwrite("exit", &TimeSlot::exit)
      .def("duration", &TimeSlot::duration)
      .def("__repr__", [](const TimeSlot& s) {
        return "TimeSlot(" + std::to_string(s.entry) + ", " + std::to_string(s.exit) + ")";
      });

  py::class_<RoadNetwork>(m, "RoadNetwork")
      .def(py::init<>())
      .def("add_node", &RoadNetwork::add_node, py::arg("id"), py::arg("length") = 0,
           py::arg("speed_limit") = py::none())
      .def("add_edge", &RoadNetwork::add_edge, py::arg("id"), py::arg("node_a"),
           py::arg("node_b"), py::arg("length"), py::arg("speed_limit") = py::none())
      .def("__len__", &RoadNetwork::size)
      .def("node_count", &RoadNetwork::node_count)
      .def("edge_count", &RoadNetwork::edge_count)
      .def("index_of", &RoadNetwork::index_of)
      .def("location_id", [](const RoadNetwork& net, LocIndex i) { return net.location(i).id; })
      .def("is_edge",
           [](const RoadNetwork& net, LocIndex i) {
             return net.location(i).kind == LocKind::Edge;
           })
      .def("adjacent", [](const RoadNetwork& net, LocIndex i) {
        auto span = net.adjacent(i);
        return std::vector<LocIndex>(span.begin(), span.end());
      });

  py::class_<PlanStep>(m, "PlanStep")
      .def_readonly("loc", &PlanStep::loc)
      .def_readonly("slot", &PlanStep::slot);

  py::class_<Plan>(m, "Plan")
      .def_readonly("traveller", &Plan::traveller)
      .def_readonly("steps", &Plan::steps)
      .def_readonly("waits", &Plan::waits);

  py::class_<SolutionSet>(m, "SolutionSet")
      .def_readonly("plans", &SolutionSet::plans)
      .def_readonly("cost", &SolutionSet::cost);

  py::class_<ValidationResult>(m, "ValidationResult")
      .def("valid", &ValidationResult::valid)
      .def_readonly("error", &ValidationResult::error)
      .def_property_readonly("conflict", [](const ValidationResult& r) -> py::object {
        if (!r.conflict) return py::none();
        py::dict d;
        d["loc"] = r.conflict->loc;
        d["traveller_a"] = r.conflict->traveller_a;
        d["traveller_b"] = r.conflict->traveller_b;
        d["slot_a"] = r.conflict->slot_a;
        d["slot_b"] = r.conflict->slot_b;
        return d;
      });

  py::class_<TravellerReport>(m, "TravellerReport")
      .def_readonly("id", &TravellerReport::id)
      .def_readonly("cost", &TravellerReport::cost)
      .def_readonly("ct_nodes_explored", &TravellerReport::ct_nodes_explored)
      .def_property_readonly("status", [](const TravellerReport& r) {
        switch (r.status) {
          case TravellerStatus::PlanFound: return "plan_found";
          case TravellerStatus::Failed: return "failed";
          default: return "negotiating";
        }
      });

  py::class_<EngineResult>(m, "EngineResult")
      .def("converged", &EngineResult::converged)
      .def_readonly("solution", &EngineResult::solution)
      .def_readonly("travellers", &EngineResult::travellers)
      .def_readonly("rounds", &EngineResult::rounds)
      .def_property_readonly("messages_sent",
                             [](const EngineResult& r) { return r.counters.messages_sent; })
      .def_property_readonly("ct_nodes_explored",
                             [](const EngineResult& r) { return r.counters.ct_nodes_explored; });

  py::class_<BaselineResult>(m, "BaselineResult")
      .def("ok", &BaselineResult::ok)
      .def_readonly("failure", &BaselineResult::failure)
      .def_property_readonly("solution", [](const BaselineResult& r) -> py::object {
        if (!r.solution) return py::none();
        return py::cast(*r.solution);
      });

  py::class_<Request>(m, "Request")
      .def(py::init([](std::string traveller, TimeSlot slot, Speed speed, Dist length) {
             return Request{std::move(traveller), slot, speed, length};
           }),
           py::arg("traveller"), py::arg("slot"), py::arg("speed"), py::arg("length"))
      .def_readwrite("traveller", &Request::traveller)
      .def_readwrite("slot", &Request::slot)
      .def_readwrite("speed", &Request::speed)
      .def_readwrite("length", &Request::length);

  m.def("parse_map", &parse_map, py::arg("text"), py::arg("cfg"));
  m.def("parse_scenario", &parse_scenario, py::arg("text"), py::arg("net"));
  m.def("net_to_json", &net_to_json);
  m.def("net_from_json", &net_from_json);
  m.def(
      "shortest_path",
      [](const RoadNetwork& net, const std::string& from, const std::string& to,
         const TravellerSpec& spec) -> py::object {
        auto path = shortest_path(net, net.index_of(from), net.index_of(to), spec);
        if (!path) return py::none();
        std::vector<std::string> ids;
        for (LocIndex i : *path) ids.push_back(net.location(i).id);
        return py::cast(ids);
      },
      py::arg("net"), py::arg("from_node"), py::arg("to_node"), py::arg("spec"));
  m.def(
      "traversal_duration",
      [](const TravellerSpec& spec, const RoadNetwork& net, const std::string& loc) {
        return traversal_duration(spec, net.location(net.index_of(loc)));
      },
      py::arg("spec"), py::arg("net"), py::arg("loc"));
  m.def("tpp", &tpp, py::arg("spec"));
  m.def(
      "build_schedule",
      [](const TravellerSpec& spec, const std::vector<std::string>& path, Tick start,
         const std::vector<Tick>& waits, const RoadNetwork& net) {
        std::vector<LocIndex> indices;
        for (const std::string& id : path) indices.push_back(net.index_of(id));
        return build_schedule(spec, indices, start, waits, net);
      },
      py::arg("spec"), py::arg("path"), py::arg("start"), py::arg("waits"), py::arg("net"));
  m.def("plan_cost", &plan_cost, py::arg("plan"), py::arg("spec"), py::arg("net"));
  m.def(
      "check_consistency",
      [](const Plan& request, const std::vector<TimeSlot>& proposed,
         const TravellerSpec& spec) -> py::object {
        ProposedPlan proposal;
        proposal.traveller = request.traveller;
        if (proposed.size() != request.steps.size())
          throw ProtocolViolation("proposal size mismatch");
        for (size_t i = 0; i < proposed.size(); ++i) {
          proposal.steps.push_back({request.steps[i].loc, proposed[i]});
          proposal.deviated.push_back(proposed[i].entry > request.steps[i].slot.entry);
        }
        auto deviation = check_consistency(request, proposal, spec);
        if (!deviation) return py::none();
        return py::make_tuple(deviation->step, deviation->delta);
      },
      py::arg("request"), py::arg("proposed_slots"), py::arg("spec"),
      "None when consistent, else (first deviated step, delta).");
  m.def("validate_solution", &validate_solution, py::arg("solution"), py::arg("specs"),
        py::arg("net"), py::arg("cfg"));
  m.def(
      "allocate_round",
      [](std::vector<Request> requests, Tick t_min) {
        return allocate_round(std::move(requests), t_min).proposals;
      },
      py::arg("requests"), py::arg("t_min"));
  m.def("solve", &solve, py::arg("net"), py::arg("cfg"), py::arg("specs"),
        py::arg("max_rounds") = py::none());
  m.def("priority_plan", &priority_plan, py::arg("specs"), py::arg("net"), py::arg("cfg"));
  m.def("brute_force_optimal", &brute_force_optimal, py::arg("specs"), py::arg("net"),
        py::arg("cfg"), py::arg("horizon") = 64);
  m.def("plan_to_json", &plan_to_json, py::arg("plan"), py::arg("net"));
  m.def("solution_to_json", &solution_to_json, py::arg("solution"), py::arg("net"));
  m.def("solution_from_json", &solution_from_json, py::arg("text"), py::arg("net"));
}
