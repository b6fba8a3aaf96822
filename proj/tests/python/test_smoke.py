"""End-to-end smoke tests for the Python bindings."""

import json

import pytest

import demapf


MAP_3X3 = "type octile\nheight 3\nwidth 3\nmap\n...\n...\n...\n"


def make_world():
    cfg = demapf.WorldConfig()
    net = demapf.parse_map(MAP_3X3, cfg)
    return cfg, net


def test_parse_map_counts():
    _, net = make_world()
    assert net.node_count() == 9
    assert net.edge_count() == 12
    assert len(net) == 21


def test_duration_and_tpp():
    spec = demapf.TravellerSpec("t0", 2, 1, "n0_0", "n2_2")
    _, net = make_world()
    assert demapf.tpp(spec) == 2
    assert demapf.traversal_duration(spec, net, "n0_0") == 2
    assert demapf.traversal_duration(spec, net, "e0_0-0_1") == 12  # (2 + 10) / 1


def test_build_schedule_contiguity():
    cfg, net = make_world()
    spec = demapf.TravellerSpec("t0", 2, 1, "n0_0", "n0_2")
    path = demapf.shortest_path(net, "n0_0", "n0_2", spec)
    assert path is not None
    plan = demapf.build_schedule(spec, path, 0, [0] * len(path), net)
    lag = demapf.tpp(spec)
    for a, b in zip(plan.steps, plan.steps[1:]):
        assert a.slot.exit - b.slot.entry == lag
    assert demapf.plan_cost(plan, spec, net) == sum(
        demapf.traversal_duration(spec, net, net.location_id(s.loc)) for s in plan.steps
    )


def test_allocate_round_pushes_lower_precedence():
    proposals = demapf.allocate_round(
        [
            demapf.Request("slowpoke", demapf.TimeSlot(0, 5), 1, 1),
            demapf.Request("express", demapf.TimeSlot(0, 5), 3, 1),
        ],
        1,
    )
    assert proposals["express"].entry == 0
    assert proposals["slowpoke"].entry == 6


def test_solve_and_validate():
    cfg, net = make_world()
    specs = [
        demapf.TravellerSpec("a", 1, 2, "n0_0", "n2_2"),
        demapf.TravellerSpec("b", 2, 1, "n2_0", "n0_2"),
        demapf.TravellerSpec("c", 1, 1, "n0_2", "n2_0", 1),
    ]
    result = demapf.solve(net, cfg, specs)
    assert result.converged()
    check = demapf.validate_solution(result.solution, specs, net, cfg)
    assert check.valid()
    assert result.solution.cost == sum(t.cost for t in result.travellers)

    text = demapf.solution_to_json(result.solution, net)
    parsed = json.loads(text)
    assert parsed["cost"] == result.solution.cost
    again = demapf.solution_from_json(text, net)
    assert again.cost == result.solution.cost


def test_check_consistency_reports_first_deviation():
    cfg, net = make_world()
    spec = demapf.TravellerSpec("t0", 1, 1, "n0_0", "n0_1")
    path = demapf.shortest_path(net, "n0_0", "n0_1", spec)
    plan = demapf.build_schedule(spec, path, 0, [0] * len(path), net)
    slots = [demapf.TimeSlot(s.slot.entry, s.slot.exit) for s in plan.steps]
    assert demapf.check_consistency(plan, slots, spec) is None
    slots[1] = demapf.TimeSlot(slots[1].entry + 4, slots[1].exit + 4)
    assert demapf.check_consistency(plan, slots, spec) == (1, 4)


def test_baselines_ordering():
    cfg, net = make_world()
    specs = [
        demapf.TravellerSpec("fast", 1, 3, "n0_0", "n0_2"),
        demapf.TravellerSpec("slow", 1, 1, "n0_0", "n0_2"),
    ]
    demapf_result = demapf.solve(net, cfg, specs)
    priority = demapf.priority_plan(specs, net, cfg)
    assert demapf_result.converged()
    assert priority.ok()
    assert demapf_result.solution.cost <= priority.solution.cost


def test_oracle_caps():
    cfg, net = make_world()
    specs = [demapf.TravellerSpec("a", 1, 1, "n0_0", "n2_2")]
    with pytest.raises(ValueError):
        demapf.brute_force_optimal(specs, net, cfg)  # 21 locations > 12


def test_parse_errors_surface_as_exceptions():
    cfg = demapf.WorldConfig()
    with pytest.raises(demapf.ParseError):
        demapf.parse_map("type octile\nheight 1\nwidth 2\nmap\n.x\n", cfg)
    _, net = make_world()
    with pytest.raises(demapf.ParseError):
        demapf.parse_scenario("0\tm\t3\t3\t0\t0\t0\t0\t0\t1\t1\t0\n", net)
