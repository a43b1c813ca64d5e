"""Classical stochastic emulator: an N-state rate network whose steady state
reproduces the machine's populations, heat currents and power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.sparse.csgraph import connected_components

from .lindblad import ThermoReport, make_report
from .model import BATH_LABELS, MachineSpec
from .rates import edge_rates, work_rate


class ReducibleRateMatrix(ValueError):
    def __init__(self, blocks):
        self.blocks = blocks
        super().__init__(f"rate matrix is reducible; communicating classes: {blocks}")


@dataclass(frozen=True)
class EmulatorEdge:
    """One rate pair of the emulator; ``forward`` is the rate ``source -> target``."""

    source: int
    target: int
    forward: float
    backward: float
    label: str
    gap: float


@dataclass(frozen=True)
class RateMatrix:
    """Generator ``W`` of ``dq/dt = W q`` together with its edge decomposition.

    ``W[k, l]`` is the rate ``l -> k``; parallel edges (the heat leak) are
    summed in ``matrix`` but kept separate in ``edges``.
    """

    matrix: np.ndarray
    edges: tuple[EmulatorEdge, ...]
    temperatures: dict

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_rate_matrix(spec: MachineSpec) -> RateMatrix:
    spec.check()
    n = spec.num_levels
    edges = []
    for e in spec.cycle:
        if e.is_work:
            r = work_rate(spec)
            edges.append(EmulatorEdge(e.source, e.target, r, r, "work", spec.gap(e)))
        else:
            fwd, bwd = edge_rates(spec, e)
            edges.append(EmulatorEdge(e.source, e.target, fwd, bwd, e.bath, spec.gap(e)))
    if spec.leak is not None:
        fwd, bwd = edge_rates(spec, spec.leak)
        edges.append(EmulatorEdge(spec.leak.source, spec.leak.target, fwd, bwd, "hot", spec.gap(spec.leak)))
    return RateMatrix(assemble(n, edges), tuple(edges), spec.temperatures)


def assemble(n: int, edges) -> np.ndarray:
    w = np.zeros((n, n))
    for e in edges:
        w[e.target, e.source] += e.forward
        w[e.source, e.target] += e.backward
    w[np.diag_indices(n)] = 0.0
    w[np.diag_indices(n)] = -w.sum(axis=0)
    return w


def _as_matrix(W) -> np.ndarray:
    return W.matrix if isinstance(W, RateMatrix) else np.asarray(W, dtype=float)


def communicating_classes(W) -> list[list[int]]:
    m = _as_matrix(W)
    adj = (m != 0) & ~np.eye(m.shape[0], dtype=bool)
    ncomp, labels = connected_components(adj.astype(int), directed=True, connection="strong")
    return [sorted(np.flatnonzero(labels == c).tolist()) for c in range(ncomp)]


def classical_steady_state(W) -> np.ndarray:
    """Normalised kernel of ``W``; the last balance equation is replaced by normalisation."""
    m = _as_matrix(W)
    blocks = communicating_classes(m)
    if len(blocks) != 1:
        raise ReducibleRateMatrix(blocks)
    a = m.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(m.shape[0])
    rhs[-1] = 1.0
    p = la.solve(a, rhs)
    p += la.solve(a, rhs - a @ p)
    return p / p.sum()


def classical_propagate(W, q0, t: float) -> np.ndarray:
    """``exp(t W) q0``; eigendecomposition unless the eigenvectors are ill-conditioned."""
    if t < 0:
        raise ValueError("t must be non-negative")
    m = _as_matrix(W)
    q0 = np.asarray(q0, dtype=float)
    if t == 0:
        return q0.copy()
    w, V = la.eig(m)
    if np.linalg.cond(V) < 1e8:
        w = np.where(np.abs(w) <= 1e-12 * np.max(np.abs(w)), 0.0, w)
        q = np.real(V @ (np.exp(t * w) * la.solve(V, q0.astype(complex))))
    else:
        q = la.expm(t * m) @ q0
    return np.clip(q, 0.0, 1.0)


# -- certification ------------------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    worst: float
    detail: str = ""


@dataclass(frozen=True)
class BalanceCertificate:
    """Outcome of the three proper-balance-equation checks.

    ``positivity``: off-diagonal rates are positive on edges and zero elsewhere.
    ``detailed_balance``: each bath edge has ``backward/forward`` equal to the
    Boltzmann factor of its gap and bath temperature, each work edge is
    symmetric, and the edges add up to the matrix entries.
    ``column_sums``: columns sum to zero.
    """

    positivity: CheckResult
    detailed_balance: CheckResult
    column_sums: CheckResult

    @property
    def passed(self) -> bool:
        return self.positivity.passed and self.detailed_balance.passed and self.column_sums.passed


def certify_balance(W: RateMatrix, spec: MachineSpec, rtol: float = 1e-10) -> BalanceCertificate:
    m = W.matrix
    n = m.shape[0]
    connected = np.zeros((n, n), dtype=bool)
    for e in W.edges:
        connected[e.source, e.target] = connected[e.target, e.source] = True
    off = ~np.eye(n, dtype=bool)

    on_edges = m[connected & off]
    elsewhere = m[~connected & off]
    worst_pos = min(0.0, float(on_edges.min())) if on_edges.size else 0.0
    pos_ok = bool(np.all(on_edges > 0) and np.all(elsewhere == 0))
    positivity = CheckResult(pos_ok, worst_pos if worst_pos < 0 else float(np.abs(elsewhere).max(initial=0.0)))

    worst_db = 0.0
    failed = []
    temps = spec.temperatures
    for k, e in enumerate(W.edges):
        if e.forward <= 0 or e.backward <= 0:
            failed.append(k)
            worst_db = math.inf
            continue
        if e.label == "work":
            dev = abs(e.backward / e.forward - 1.0)
        else:
            # backward/forward = exp(gap/T) since forward climbs by gap
            log_ratio = math.log(e.backward / e.forward)
            dev = abs(log_ratio - e.gap / temps[e.label]) / max(1.0, abs(e.gap / temps[e.label]))
        worst_db = max(worst_db, dev)
        if dev > rtol:
            failed.append(k)
    rebuilt = assemble(n, W.edges)
    scale = np.abs(m).max()
    recon = float(np.abs((rebuilt - m)[off]).max() / scale) if scale else 0.0
    if recon > rtol:
        failed.append("reconstruction")
    detailed = CheckResult(not failed, max(worst_db, recon), f"failing edges: {failed}" if failed else "")

    cs = float(np.abs(m.sum(axis=0)).max() / scale) if scale else 0.0
    column_sums = CheckResult(cs <= 1e-14, cs)
    return BalanceCertificate(positivity, detailed, column_sums)


# -- thermodynamics of the emulator ----------------------------------------------------


def edge_fluxes(W: RateMatrix, p) -> np.ndarray:
    """Net rate ``source -> target`` of every emulator edge."""
    p = np.asarray(p, dtype=float)
    return np.array([e.forward * p[e.source] - e.backward * p[e.target] for e in W.edges])


def emulator_report(spec: MachineSpec, W: RateMatrix, p=None) -> ThermoReport:
    """Heat currents and power of the emulator from its edge fluxes."""
    if p is None:
        p = classical_steady_state(W)
    fluxes = edge_fluxes(W, p)
    heat = {label: 0.0 for label in BATH_LABELS}
    power = 0.0
    work_flux = 0.0
    for e, j in zip(W.edges, fluxes):
        if e.label == "work":
            power += e.gap * j
            work_flux = float(j)
        else:
            heat[e.label] += e.gap * j
    n_cycle = spec.num_levels
    leak = float(fluxes[n_cycle]) if len(W.edges) > n_cycle else None
    # the emulator has no coherence; report the one it stands in for
    coherence = work_flux / (2.0 * spec.coupling) if spec.coupling else 0.0
    return make_report(spec, heat, float(power), work_flux, [float(j) for j in fluxes[:n_cycle]], coherence, leak)
