"""Hill-Schnakenberg graph algebra for the emulator's rate network.

Vertices are states; each rate pair of ``W`` is an undirected edge carrying a
forward rate ``u -> v`` and a backward rate ``v -> u``. Parallel edges are
kept distinct, which is how the heat-leak model gets its extra circuits.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .emulator import BalanceCertificate, EmulatorEdge, RateMatrix, assemble
from .lindblad import ThermoReport, make_report

LOG_SPACE_BELOW = 1e-12


class GraphError(ValueError):
    """Malformed graph or a request the graph cannot answer."""


class UnsupportedTopology(GraphError):
    """Circuit structure outside a single cycle plus at most one parallel edge."""


class ApproximationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GraphEdge:
    u: int
    v: int
    forward: float
    backward: float
    label: str = "edge"
    gap: float = math.nan

    def rate(self, direction: int) -> float:
        return self.forward if direction > 0 else self.backward


@dataclass(frozen=True)
class MaximalTree:
    """Spanning tree given by the indices of its retained edges."""

    edges: tuple[int, ...]


@dataclass(frozen=True)
class Circuit:
    """Closed walk as ``(edge index, direction)`` steps; direction +1 is ``u -> v``."""

    steps: tuple[tuple[int, int], ...]

    def reversed(self) -> "Circuit":
        return Circuit(tuple((k, -d) for k, d in reversed(self.steps)))

    @property
    def edge_set(self) -> frozenset:
        return frozenset(k for k, _ in self.steps)


@dataclass(frozen=True)
class RateGraph:
    n: int
    edges: tuple[GraphEdge, ...]
    temperatures: dict | None = None

    def matrix(self) -> np.ndarray:
        return assemble(self.n, [_as_emulator_edge(e) for e in self.edges])

    @property
    def min_rate(self) -> float:
        return min(min(e.forward, e.backward) for e in self.edges)

    @property
    def use_log(self) -> bool:
        return self.min_rate < LOG_SPACE_BELOW

    def is_connected(self) -> bool:
        return _connected(self.n, [(e.u, e.v) for e in self.edges])

    def dump(self) -> str:
        """Edge list, one edge per line: ``u v label forward backward``."""
        lines = ["# u v label forward(u->v) backward(v->u)"]
        for e in self.edges:
            lines.append(f"{e.u} {e.v} {e.label} {e.forward:.17g} {e.backward:.17g}")
        return "\n".join(lines) + "\n"

    @cached_property
    def trees(self) -> list[MaximalTree]:
        return enumerate_maximal_trees(self)

    @cached_property
    def circuits(self) -> list[Circuit]:
        return enumerate_circuits(self)

    @cached_property
    def tree_table(self) -> tuple[np.ndarray, float]:
        """``A(T_k^l)`` for tree k oriented towards vertex l, as ``(table, log_scale)``.

        In log space the table is divided by ``exp(log_scale)`` so that its
        largest entry is 1; otherwise ``log_scale`` is 0.
        """
        oriented = [[orient_tree(t, l, self) for l in range(self.n)] for t in self.trees]
        if not self.use_log:
            return np.array([[math.prod(_directed_rates(self, s)) for s in row] for row in oriented]), 0.0
        logs = np.array([[_log_weight(self, s) for s in row] for row in oriented])
        scale = float(logs.max())
        return np.exp(logs - scale), scale

    def scaled(self, log_value: float) -> float:
        """A weight given by its logarithm, in the units of ``tree_table``."""
        return math.exp(log_value - self.tree_table[1])

    @cached_property
    def scaled_denominator(self) -> float:
        return math.fsum(self.tree_table[0].ravel())


def _as_emulator_edge(e: GraphEdge):
    return EmulatorEdge(e.u, e.v, e.forward, e.backward, e.label, e.gap)


def _connected(n, pairs) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        parent[find(u)] = find(v)
    return len({find(x) for x in range(n)}) == 1


def from_rate_matrix(W, labels=None, certificate: BalanceCertificate | None = None,
                     temperatures: dict | None = None) -> RateGraph:
    """Graph of a rate matrix: one labelled edge per rate pair.

    ``W`` is a RateMatrix (edge decomposition and labels are taken from it,
    so parallel edges survive) or a bare array, in which case ``labels`` may
    map ``(k, l)`` pairs with ``k < l`` to labels. A failed certificate, a
    non-positive rate or non-zero column sums are refused.
    """
    if certificate is not None and not certificate.passed:
        raise GraphError("rate matrix failed balance certification")
    if isinstance(W, RateMatrix):
        m = W.matrix
        edges = tuple(GraphEdge(e.source, e.target, e.forward, e.backward, e.label, e.gap) for e in W.edges)
        temperatures = temperatures or W.temperatures
    else:
        m = np.asarray(W, dtype=float)
        labels = labels or {}
        edges = []
        for k in range(m.shape[0]):
            for l in range(k + 1, m.shape[0]):
                if m[l, k] != 0 or m[k, l] != 0:
                    edges.append(GraphEdge(k, l, float(m[l, k]), float(m[k, l]), labels.get((k, l), "edge")))
        edges = tuple(edges)
    n = m.shape[0]
    if any(not (e.forward > 0 and e.backward > 0) for e in edges):
        raise GraphError("every edge needs strictly positive rates in both directions")
    scale = np.abs(m).max()
    if np.abs(m.sum(axis=0)).max() > 1e-12 * scale:
        raise GraphError("rate matrix columns do not sum to zero")
    g = RateGraph(n, edges, temperatures)
    off = ~np.eye(n, dtype=bool)
    if np.abs((g.matrix() - m)[off]).max() > 1e-12 * scale:
        raise GraphError("edge decomposition does not reproduce the rate matrix")
    return g


# -- trees ------------------------------------------------------------------------------


def _is_spanning_tree(n, pairs) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        ru, rv = find(u), find(v)
        if ru == rv:
            return False
        parent[ru] = rv
    return True


def enumerate_maximal_trees(g: RateGraph) -> list[MaximalTree]:
    """All spanning trees, by exhaustive search over (n-1)-edge subsets."""
    if not g.is_connected():
        raise GraphError("graph is disconnected")
    pairs = [(e.u, e.v) for e in g.edges]
    return [
        MaximalTree(subset)
        for subset in itertools.combinations(range(len(g.edges)), g.n - 1)
        if _is_spanning_tree(g.n, [pairs[k] for k in subset])
    ]


def orient_tree(tree: MaximalTree, target: int, g: RateGraph) -> list[tuple[int, int]]:
    """Direct every tree edge towards ``target``; returns ``(edge, direction)`` steps."""
    adj = {x: [] for x in range(g.n)}
    for k in tree.edges:
        e = g.edges[k]
        adj[e.u].append((k, e.v))
        adj[e.v].append((k, e.u))
    steps = []
    seen = {target}
    frontier = [target]
    while frontier:
        x = frontier.pop()
        for k, y in adj[x]:
            if y in seen:
                continue
            seen.add(y)
            frontier.append(y)
            # y hands its probability to x
            steps.append((k, 1 if g.edges[k].u == y else -1))
    if len(seen) != g.n:
        raise GraphError("not a spanning tree")
    return steps


def _directed_rates(g: RateGraph, steps):
    return [g.edges[k].rate(d) for k, d in steps]


def _log_weight(g: RateGraph, steps) -> float:
    return math.fsum(math.log(r) for r in _directed_rates(g, steps))


def _weight(g: RateGraph, steps):
    rates = _directed_rates(g, steps)
    if g.use_log:
        return math.exp(math.fsum(math.log(r) for r in rates))
    return math.prod(rates)


def tree_weight(tree: MaximalTree, target: int, g: RateGraph):
    """Product of directed rates of ``tree`` oriented towards ``target``."""
    if not 0 <= target < g.n:
        raise GraphError(f"vertex {target} not in graph")
    return _weight(g, orient_tree(tree, target, g))


def denominator(g: RateGraph) -> float:
    """Sum of all oriented maximal-tree weights."""
    return g.scaled_denominator * math.exp(g.tree_table[1])


def graph_steady_populations(g: RateGraph) -> np.ndarray:
    """``p_l = sum_k A(T_k^l) / D``."""
    table = g.tree_table[0]
    return np.array([math.fsum(table[:, l]) for l in range(g.n)]) / g.scaled_denominator


# -- circuits ---------------------------------------------------------------------------


def _walk(g: RateGraph, subset) -> Circuit | None:
    """Order an edge subset into a closed walk, or None if it is not a single circuit."""
    subset = sorted(subset)
    start = subset[0]
    e0 = g.edges[start]
    steps = [(start, 1)]
    used = {start}
    here = e0.v
    while here != e0.u:
        nxt = [k for k in subset if k not in used and here in (g.edges[k].u, g.edges[k].v)]
        if not nxt:
            return None
        k = nxt[0]
        e = g.edges[k]
        d = 1 if e.u == here else -1
        steps.append((k, d))
        used.add(k)
        here = e.v if d > 0 else e.u
    return Circuit(tuple(steps)) if len(used) == len(subset) else None


def enumerate_circuits(g: RateGraph) -> list[Circuit]:
    """All circuits: edge subsets in which every touched vertex has degree two."""
    out = []
    m = len(g.edges)
    for size in range(2, m + 1):
        for subset in itertools.combinations(range(m), size):
            deg = {}
            for k in subset:
                e = g.edges[k]
                deg[e.u] = deg.get(e.u, 0) + 1
                deg[e.v] = deg.get(e.v, 0) + 1
            if any(d != 2 for d in deg.values()) or len(deg) != size:
                continue
            c = _walk(g, subset)
            if c is not None:
                out.append(c)
    return out


def circuit_vertices(g: RateGraph, circuit: Circuit) -> set[int]:
    return {x for k, _ in circuit.steps for x in (g.edges[k].u, g.edges[k].v)}


def cycle_weight(circuit: Circuit, orientation: int, g: RateGraph):
    """``A(C)`` for orientation +1, ``A(-C)`` for -1."""
    c = circuit if orientation > 0 else circuit.reversed()
    return _weight(g, c.steps)


def _check_supported(g: RateGraph) -> None:
    """Allow one cycle through every vertex, optionally with one parallel edge."""
    pairs = [frozenset((e.u, e.v)) for e in g.edges]
    distinct = set(pairs)
    extra = len(pairs) - len(distinct)
    if len(distinct) != g.n or extra > 1 or not g.is_connected():
        raise UnsupportedTopology("only a single cycle plus at most one parallel edge is supported")
    deg = {}
    for p in distinct:
        for x in p:
            deg[x] = deg.get(x, 0) + 1
    if any(d != 2 for d in deg.values()):
        raise UnsupportedTopology("underlying simple graph is not a single cycle")


def main_circuit(g: RateGraph) -> Circuit:
    """The circuit through every vertex that avoids leak edges.

    For graphs built from a machine this follows the machine's cycle order.
    """
    full = [c for c in g.circuits if len(circuit_vertices(g, c)) == g.n]
    if not full:
        raise GraphError("no circuit visits every vertex")
    full.sort(key=lambda c: sorted(c.edge_set))
    return full[0]


def thermo_force(g: RateGraph, circuit: Circuit, label: str) -> float:
    """``ln[A^label(C) / A^label(-C)]`` over the circuit's edges with that label."""
    x = 0.0
    for k, d in circuit.steps:
        e = g.edges[k]
        if e.label == label:
            x += math.log(e.rate(d)) - math.log(e.rate(-d))
    return x


def circuit_flux(g: RateGraph, circuit: Circuit | None = None) -> float:
    """``J = [A(C) - A(-C)] / D`` on a single-circuit graph."""
    if len(g.circuits) != 1:
        raise GraphError("graph has several circuits; use circuit_heat_currents")
    c = circuit or g.circuits[0]
    return _cycle_flux(g, c, 1.0)


def _cycle_flux(g: RateGraph, c: Circuit, forest: float) -> float:
    if g.use_log:
        plus = g.scaled(_log_weight(g, c.steps) + math.log(forest))
        minus = g.scaled(_log_weight(g, c.reversed().steps) + math.log(forest))
    else:
        plus = math.prod(_directed_rates(g, c.steps)) * forest
        minus = math.prod(_directed_rates(g, c.reversed().steps)) * forest
    return (plus - minus) / g.scaled_denominator


def forest_factor(g: RateGraph, circuit: Circuit) -> float:
    """``det(-W)`` restricted to the vertices off the circuit (1 if none)."""
    rest = sorted(set(range(g.n)) - circuit_vertices(g, circuit))
    if not rest:
        return 1.0
    m = -g.matrix()
    return float(np.linalg.det(m[np.ix_(rest, rest)]))


@dataclass(frozen=True)
class CircuitContribution:
    circuit: Circuit
    flux: float
    forces: dict
    heat: dict
    power: float


@dataclass(frozen=True)
class CircuitCurrents:
    contributions: tuple[CircuitContribution, ...]
    heat: dict
    power: float

    @property
    def q_c(self) -> float:
        return self.heat["cold"]

    @property
    def q_h(self) -> float:
        return self.heat["hot"]


def circuit_heat_currents(g: RateGraph) -> CircuitCurrents:
    """Heat currents and power as sums of per-circuit contributions.

    Each circuit contributes ``Q_a(C) = -T_a X^a(C) F(C) [A(C) - A(-C)] / D``
    with ``F(C)`` the forest factor of the vertices off the circuit.
    """
    if g.temperatures is None:
        raise GraphError("graph has no bath temperatures attached")
    _check_supported(g)
    labels = sorted(g.temperatures)
    contributions = []
    for c in g.circuits:
        forest = forest_factor(g, c)
        j = _cycle_flux(g, c, forest)
        forces = {a: thermo_force(g, c, a) for a in labels}
        heat = {a: -g.temperatures[a] * forces[a] * j for a in labels}
        contributions.append(CircuitContribution(c, j, forces, heat, -sum(heat.values())))
    total = {a: math.fsum(cc.heat[a] for cc in contributions) for a in labels}
    return CircuitCurrents(tuple(contributions), total, math.fsum(cc.power for cc in contributions))


def circuit_edge_fluxes(g: RateGraph, currents: CircuitCurrents | None = None) -> np.ndarray:
    """Net flux ``u -> v`` of every edge, summed over the circuits through it."""
    if currents is None:
        currents = circuit_heat_currents(g)
    flux = [[] for _ in g.edges]
    for cc in currents.contributions:
        for k, d in cc.circuit.steps:
            flux[k].append(d * cc.flux)
    return np.array([math.fsum(f) for f in flux])


def graph_report(spec, g: RateGraph) -> ThermoReport:
    """ThermoReport of the graph route; edges must follow ``build_rate_matrix`` order."""
    cc = circuit_heat_currents(g)
    j = circuit_edge_fluxes(g, cc)
    n = spec.num_levels
    w = spec.work_position
    leak = float(j[n]) if len(j) > n else None
    coherence = j[w] / (2.0 * spec.coupling) if spec.coupling else 0.0
    return make_report(spec, cc.heat, cc.power, float(j[w]), [float(x) for x in j[:n]], float(coherence), leak)


def cop_from_forces(g: RateGraph, circuit: Circuit | None = None) -> float:
    """``-T_c X^c / (T_c X^c + T_h X^h)`` for a tightly coupled circuit."""
    c = circuit or main_circuit(g)
    tc, th = g.temperatures["cold"], g.temperatures["hot"]
    xc, xh = thermo_force(g, c, "cold"), thermo_force(g, c, "hot")
    return -tc * xc / (tc * xc + th * xh)


@dataclass(frozen=True)
class DenominatorApprox:
    exact: float
    approx: float
    ratio: float
    precondition_ok: bool


def denominator_approx(g: RateGraph, work_edge: int | None = None, factor: float = 10.0) -> DenominatorApprox:
    """Approximate ``D`` by the trees that drop the (slowest) driven edge.

    The precondition holds when the driven rate is at least ``factor`` times
    smaller than every other rate in the graph.
    """
    if work_edge is None:
        work = [k for k, e in enumerate(g.edges) if e.label == "work"]
        if len(work) != 1:
            raise GraphError("graph needs exactly one work edge")
        work_edge = work[0]
    w = g.edges[work_edge]
    others = [r for k, e in enumerate(g.edges) if k != work_edge for r in (e.forward, e.backward)]
    ok = factor * max(w.forward, w.backward) <= min(others)
    if not ok:
        warnings.warn(f"driven rate is not {factor:g}x below the other rates; "
                      "the denominator approximation is unreliable",
                      ApproximationWarning, stacklevel=2)
    table = g.tree_table[0]
    keep = [k for k, t in enumerate(g.trees) if work_edge not in t.edges]
    approx = math.fsum(table[keep].ravel())
    unit = math.exp(g.tree_table[1])
    return DenominatorApprox(
        exact=g.scaled_denominator * unit,
        approx=approx * unit,
        ratio=g.scaled_denominator / approx,
        precondition_ok=ok,
    )
