"""Bath-induced transition rates for d-dimensional bosonic baths."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import BathParams, CycleEdge, MachineSpec


@dataclass(frozen=True)
class RatePair:
    """Emission (``down``) and absorption (``up``) rates across one gap."""

    down: float
    up: float


def decay_rates(omega: float, bath: BathParams) -> RatePair:
    """Rates across a positive gap ``omega`` for an infinite-cutoff bath.

    ``down = gamma (omega/omega0)^d / (1 - exp(-omega/T))`` and
    ``up = exp(-omega/T) * down``.
    """
    if not omega > 0:
        raise ValueError(f"decay rates need a positive gap, got {omega!r}")
    x = omega / bath.temperature
    down = bath.gamma * (omega / bath.omega0) ** bath.dim / -math.expm1(-x)
    return RatePair(down=down, up=math.exp(-x) * down)


def check_detailed_balance(pair: RatePair, omega: float, temperature: float, rtol: float = 1e-10) -> bool:
    if not (omega > 0 and temperature > 0):
        raise ValueError("omega and temperature must be positive")
    if not (pair.down > 0 and pair.up >= 0):
        return False
    boltzmann = math.exp(-omega / temperature)
    return abs(pair.up - boltzmann * pair.down) <= rtol * boltzmann * pair.down


def edge_rates(spec: MachineSpec, edge: CycleEdge) -> tuple[float, float]:
    """Return ``(forward, backward)`` rates of a dissipative edge.

    ``forward`` is the rate of ``source -> target``. The gap is canonicalised
    to its absolute value, so an edge pointing downhill has the emission rate
    as its forward rate.
    """
    if edge.is_work:
        raise ValueError("the driven edge has no bath rates")
    gap = spec.gap(edge)
    pair = decay_rates(abs(gap), spec.edge_bath(edge))
    if gap > 0:
        return pair.up, pair.down
    return pair.down, pair.up


def escape_rate(spec: MachineSpec, state: int) -> float:
    """Total bath-induced rate out of ``state``."""
    total = 0.0
    for e in spec.bath_edges():
        fwd, bwd = edge_rates(spec, e)
        if e.source == state:
            total += fwd
        elif e.target == state:
            total += bwd
    return total


def work_rate(spec: MachineSpec) -> float:
    """Effective classical rate of the driven transition, 4 lambda^2 / kappa.

    ``kappa`` is the summed bath escape rate out of both driven levels, the
    decay rate of their coherence being ``kappa / 2``.
    """
    w = spec.work_edge
    kappa = escape_rate(spec, w.source) + escape_rate(spec, w.target)
    return 4.0 * spec.coupling ** 2 / kappa
