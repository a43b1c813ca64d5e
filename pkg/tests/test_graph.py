import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoemu import emulator, graph, lindblad
from thermoemu.graph import GraphEdge, RateGraph
from thermoemu.model import BathParams, build_three_level, reference_baths

from conftest import ref_four, ref_leak, ref_specs, ref_three
from oracles import cycle_tree_weight, exact_stationary, kirchhoff_tree_count, kirchhoff_weights, relative


def _graph(spec):
    return graph.from_rate_matrix(emulator.build_rate_matrix(spec))


def _cycle_graph(fwd, bwd):
    """Pure cycle 0 -> 1 -> ... -> N-1 -> 0 with edge k carrying fwd[k], bwd[k]."""
    n = len(fwd)
    return RateGraph(n, tuple(GraphEdge(k, (k + 1) % n, fwd[k], bwd[k]) for k in range(n)))


@pytest.mark.parametrize("name, trees, circuits", [("three", 3, 1), ("four_d1_+0.1", 4, 1), ("leak", 5, 3)])
def test_tree_and_circuit_counts(name, trees, circuits):
    g = _graph(ref_specs()[name])
    assert len(g.trees) == trees
    assert len(g.circuits) == circuits
    assert len(g.trees) == kirchhoff_tree_count(g.n, [(e.u, e.v) for e in g.edges])


def test_unit_rates_give_unit_weights():
    g = _cycle_graph([1.0] * 4, [1.0] * 4)
    for t in g.trees:
        for root in range(4):
            assert graph.tree_weight(t, root, g) == 1.0


def test_closed_form_tree_weights_exact():
    fwd = [Fraction(k + 2, 3) for k in range(5)]
    bwd = [Fraction(7, k + 4) for k in range(5)]
    g = _cycle_graph(fwd, bwd)
    padded_f, padded_b = [None] + fwd, [None] + bwd
    for t in g.trees:
        (missing,) = set(range(5)) - set(t.edges)
        k = missing + 1
        for l in range(1, 6):
            assert graph.tree_weight(t, l - 1, g) == cycle_tree_weight(padded_f, padded_b, k, l)


def test_populations_exact_against_kirchhoff():
    fwd = [Fraction(3), Fraction(1, 2), Fraction(5, 7)]
    bwd = [Fraction(2, 3), Fraction(4), Fraction(1, 9)]
    g = _cycle_graph(fwd, bwd)
    W = [[Fraction(0)] * 3 for _ in range(3)]
    for e in g.edges:
        W[e.v][e.u] += e.forward
        W[e.u][e.v] += e.backward
    weights = kirchhoff_weights(W)
    for root in range(3):
        assert sum(graph.tree_weight(t, root, g) for t in g.trees) == weights[root]


def test_populations_match_kirchhoff_on_leak(leak):
    W = emulator.build_rate_matrix(leak)
    g = graph.from_rate_matrix(W)
    exact = [float(x) for x in exact_stationary(W.matrix.tolist())]
    assert relative(graph.graph_steady_populations(g), exact) < 1e-12


def test_symmetric_rates_balance_cycles():
    g = _cycle_graph([2.0, 3.0, 5.0], [2.0, 3.0, 5.0])
    c = g.circuits[0]
    assert graph.cycle_weight(c, 1, g) == graph.cycle_weight(c, -1, g)
    assert graph.circuit_flux(g) == 0.0
    assert np.allclose(graph.graph_steady_populations(_cycle_graph([1.0] * 6, [1.0] * 6)), 1 / 6)


def test_reversible_point_has_no_flux():
    # X_c = X_h at omega_c = omega_h T_c / T_h
    g = _graph(build_three_level(0.5, 1.0, 1e-8, reference_baths()))
    assert abs(graph.circuit_flux(g)) < 1e-12 * g.min_rate


def test_flux_formula_matches_edge_flux(three):
    W = emulator.build_rate_matrix(three)
    g = graph.from_rate_matrix(W)
    p = graph.graph_steady_populations(g)
    assert graph.circuit_flux(g) == pytest.approx(emulator.edge_fluxes(W, p)[0], rel=1e-9)


def test_forces_and_cop(three):
    g = _graph(three)
    c = graph.main_circuit(g)
    # main circuit runs along the cooling cycle; its reverse has X^c = X_c, X^h = -X_h
    rev = c.reversed()
    assert graph.thermo_force(g, rev, "cold") == pytest.approx(0.3 / 1.5, rel=1e-12)
    assert graph.thermo_force(g, rev, "hot") == pytest.approx(-1.0 / 3.0, rel=1e-12)
    assert graph.thermo_force(g, c, "cold") == pytest.approx(-0.2, rel=1e-12)
    assert graph.thermo_force(g, c, "work") == 0.0
    assert graph.cycle_weight(rev, 1, g) / graph.cycle_weight(rev, -1, g) == pytest.approx(math.exp(0.2 - 1 / 3))
    for label, temp in (("cold", 1.5), ("hot", 3.0)):
        climb = sum(d * g.edges[k].gap for k, d in c.steps if g.edges[k].label == label)
        assert climb == pytest.approx(-temp * graph.thermo_force(g, c, label), rel=1e-12)
    assert graph.cop_from_forces(g) == pytest.approx(0.3 / 0.7, rel=1e-12)


def test_leak_decomposition(leak):
    g = _graph(leak)
    cc = graph.circuit_heat_currents(g)
    _, rep = lindblad.solve(leak)
    assert cc.q_c == pytest.approx(rep.q_c, rel=1e-8)
    assert cc.q_h == pytest.approx(rep.q_h, rel=1e-8)
    assert sum(c.heat["cold"] for c in cc.contributions) == pytest.approx(cc.q_c, rel=1e-14)
    with pytest.raises(graph.GraphError):
        graph.circuit_flux(g)


def test_vanishing_leak_recovers_single_circuit():
    base = graph.circuit_heat_currents(_graph(ref_three()))
    tiny = graph.circuit_heat_currents(_graph(ref_leak(1e-20)))
    assert tiny.q_c == pytest.approx(base.q_c, rel=1e-6)
    assert tiny.power == pytest.approx(base.power, rel=1e-6)


def test_edge_fluxes_from_circuits(leak):
    g = _graph(leak)
    j = graph.circuit_edge_fluxes(g)
    p = graph.graph_steady_populations(g)
    direct = [e.forward * p[e.u] - e.backward * p[e.v] for e in g.edges]
    assert relative(j, direct) < 1e-8


def test_denominator_approximation_d1():
    for spec in (ref_three(), ref_four(0.1)):
        approx = graph.denominator_approx(_graph(spec))
        assert approx.precondition_ok
        assert abs(approx.ratio - 1) < 1e-3


def test_denominator_warning_small_epsilon_d3():
    with pytest.warns(graph.ApproximationWarning):
        approx = graph.denominator_approx(_graph(ref_four(0.01, dim=3)))
    assert not approx.precondition_ok


def test_denominator_warning_when_work_rate_largest():
    edges = (GraphEdge(0, 1, 1.0, 2.0, "cold"), GraphEdge(1, 2, 50.0, 50.0, "work"), GraphEdge(2, 0, 1.0, 0.5, "hot"))
    with pytest.warns(graph.ApproximationWarning):
        graph.denominator_approx(RateGraph(3, edges))


def test_refuses_failed_certificate(three):
    W = emulator.build_rate_matrix(three)
    bad = emulator.BalanceCertificate(*(emulator.CheckResult(False, 1.0),) * 3)
    with pytest.raises(graph.GraphError):
        graph.from_rate_matrix(W, certificate=bad)


def test_refuses_disconnected_graph():
    with pytest.raises(graph.GraphError):
        graph.enumerate_maximal_trees(RateGraph(4, (GraphEdge(0, 1, 1.0, 1.0), GraphEdge(2, 3, 1.0, 1.0))))


def test_unsupported_topology():
    # two independent cycles sharing a vertex
    edges = tuple(GraphEdge(u, v, 1.0, 2.0, "hot") for u, v in [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])
    g = RateGraph(5, edges, {"cold": 1.0, "hot": 2.0})
    with pytest.raises(graph.UnsupportedTopology):
        graph.circuit_heat_currents(g)


def test_log_space_for_tiny_rates():
    # rates below 1e-12 trigger log-space tree tables; results must not change
    scale = 1e-15
    fwd = [2.0 * scale, 3.0 * scale, 0.5 * scale]
    bwd = [1.0 * scale, 0.7 * scale, 4.0 * scale]
    tiny, unit = _cycle_graph(fwd, bwd), _cycle_graph([f / scale for f in fwd], [b / scale for b in bwd])
    assert tiny.use_log and not unit.use_log
    assert relative(graph.graph_steady_populations(tiny), graph.graph_steady_populations(unit)) < 1e-13
    assert graph.circuit_flux(tiny) / scale == pytest.approx(graph.circuit_flux(unit), rel=1e-12)


def test_dump_is_deterministic(leak):
    assert _graph(leak).dump() == _graph(leak).dump()
    assert len(_graph(leak).dump().strip().splitlines()) == 5


rates = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=60)
@given(st.integers(3, 6).flatmap(lambda n: st.tuples(st.lists(rates, min_size=n, max_size=n),
                                                     st.lists(rates, min_size=n, max_size=n))))
def test_random_cycles_match_kirchhoff(pair):
    fwd, bwd = pair
    g = _cycle_graph(fwd, bwd)
    n = len(fwd)
    W = [[0.0] * n for _ in range(n)]
    for e in g.edges:
        W[e.v][e.u] += e.forward
        W[e.u][e.v] += e.backward
    exact = [float(x) for x in exact_stationary(W)]
    assert relative(graph.graph_steady_populations(g), exact) < 1e-12


finite = dict(allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 0.95, **finite), st.floats(0.2, 5, **finite), st.floats(0.2, 5, **finite),
       st.floats(1e-8, 1e-5, **finite), st.floats(1e-8, 1e-5, **finite), st.integers(1, 3))
def test_second_law(wc, tc, th, gc, gh, d):
    baths = (BathParams("cold", tc, gc, d), BathParams("hot", th, gh, d))
    spec = build_three_level(wc, 1.0, 1e-9, baths)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cc = graph.circuit_heat_currents(_graph(spec))
    scale = max(abs(cc.q_c), abs(cc.q_h), abs(cc.power))
    assert cc.q_c / tc + cc.q_h / th <= 1e-12 * scale / min(tc, th)
    assert abs(cc.q_c + cc.q_h + cc.power) <= 1e-12 * scale
