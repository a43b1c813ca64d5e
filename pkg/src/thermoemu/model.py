"""Machine specifications for weakly driven N-level cyclic thermal machines.

All quantities use hbar = k_B = 1. States are labelled 0..N-1 and the cycle is
an ordered list of edges ``source -> target`` where each edge's target is the
next edge's source. Exactly one edge is driven by the external field; every
other edge is mediated by the cold or the hot bath.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

UNITS = "hbar = k_B = 1"
BATH_LABELS = ("cold", "hot")
# levels closer than this (relative) count as degenerate
DEGENERACY_RTOL = 1e-12


class SpecError(ValueError):
    """Raised for structurally invalid machine specifications."""


class ConfigError(ValueError):
    """Raised when a machine config file cannot be parsed.

    ``where`` names the offending location, either ``line:col`` for syntax
    errors or a field path such as ``edges[2].bath``.
    """

    def __init__(self, message: str, where: str | None = None):
        self.message = message
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class BathParams:
    label: str
    temperature: float
    gamma: float
    dim: int = 1
    omega0: float = 1.0

    def __post_init__(self):
        if self.label not in BATH_LABELS:
            raise SpecError(f"bath label must be one of {BATH_LABELS}, got {self.label!r}")
        if not self.temperature > 0:
            raise SpecError(f"{self.label} bath: temperature must be positive")
        if not self.gamma > 0:
            raise SpecError(f"{self.label} bath: gamma must be positive")
        if self.dim not in (1, 2, 3):
            raise SpecError(f"{self.label} bath: dimension must be 1, 2 or 3")
        if not self.omega0 > 0:
            raise SpecError(f"{self.label} bath: omega0 must be positive")


@dataclass(frozen=True)
class CycleEdge:
    """A transition ``source -> target``; ``bath`` is None for the driven edge."""

    source: int
    target: int
    bath: str | None = None

    @property
    def is_work(self) -> bool:
        return self.bath is None

    @property
    def label(self) -> str:
        return "work" if self.bath is None else self.bath


@dataclass(frozen=True)
class MachineSpec:
    """Full description of a cyclic machine.

    ``leak`` optionally holds a hot-bath edge in parallel with the driven
    transition (the heat-leak model); its coupling defaults to the hot
    bath's ``gamma`` unless ``leak_gamma`` is given.
    """

    energies: tuple[float, ...]
    cycle: tuple[CycleEdge, ...]
    coupling: float
    baths: tuple[BathParams, ...]
    leak: CycleEdge | None = None
    leak_gamma: float | None = None
    units: str = field(default=UNITS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))
        object.__setattr__(self, "cycle", tuple(self.cycle))
        object.__setattr__(self, "baths", tuple(self.baths))
        self.check()

    # -- structure -----------------------------------------------------------

    def check(self) -> None:
        """Raise SpecError unless the spec is a well-formed cyclic machine."""
        n = len(self.energies)
        if n < 3:
            raise SpecError("a cyclic machine needs at least 3 levels")
        if not all(math.isfinite(e) for e in self.energies):
            raise SpecError("energies must be finite")
        tol = DEGENERACY_RTOL * max(1.0, max(abs(e) for e in self.energies))
        levels = sorted(self.energies)
        if any(b - a <= tol for a, b in zip(levels, levels[1:])):
            raise SpecError("energy spectrum must be non-degenerate")
        if not self.coupling >= 0 or not math.isfinite(self.coupling):
            raise SpecError("driving strength must be finite and non-negative")
        labels = [b.label for b in self.baths]
        if sorted(labels) != sorted(BATH_LABELS):
            raise SpecError("exactly one cold and one hot bath are required")

        if len(self.cycle) != n:
            raise SpecError(f"cycle must have {n} edges, got {len(self.cycle)}")
        for k, e in enumerate(self.cycle):
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise SpecError(f"edge {k} refers to a state outside 0..{n - 1}")
            if e.source == e.target:
                raise SpecError(f"edge {k} is a self-loop")
            if e.bath is not None and e.bath not in BATH_LABELS:
                raise SpecError(f"edge {k}: unknown bath {e.bath!r}")
            nxt = self.cycle[(k + 1) % n]
            if e.target != nxt.source:
                raise SpecError(
                    f"cycle is not closed: edge {k} ends at {e.target} "
                    f"but edge {(k + 1) % n} starts at {nxt.source}"
                )
        if sorted(e.source for e in self.cycle) != list(range(n)):
            raise SpecError("cycle must visit every state exactly once")
        n_work = sum(e.is_work for e in self.cycle)
        if n_work != 1:
            raise SpecError(f"exactly one driven edge is required, got {n_work}")

        if self.leak is not None:
            w = self.work_edge
            if self.leak.bath != "hot" or {self.leak.source, self.leak.target} != {w.source, w.target}:
                raise SpecError("the heat leak must be a hot edge parallel to the driven edge")
            if self.leak_gamma is not None and not self.leak_gamma > 0:
                raise SpecError("leak_gamma must be positive")
        elif self.leak_gamma is not None:
            raise SpecError("leak_gamma given without a leak edge")

        for label in BATH_LABELS:
            gaps = [abs(self.gap(e)) for e in self.bath_edges(label)]
            if any(g == 0 for g in gaps):
                raise SpecError(f"{label} bath edge with zero gap")
            gaps.sort()
            if any(b - a <= tol for a, b in zip(gaps, gaps[1:])):
                raise SpecError(f"{label} bath edges must have pairwise distinct gaps")
        if self.gap(self.work_edge) == 0:
            raise SpecError("driven edge has zero gap")

    # -- derived quantities --------------------------------------------------

    @property
    def num_levels(self) -> int:
        return len(self.energies)

    @property
    def work_position(self) -> int:
        return next(k for k, e in enumerate(self.cycle) if e.is_work)

    @property
    def work_edge(self) -> CycleEdge:
        return self.cycle[self.work_position]

    @property
    def order(self) -> tuple[int, ...]:
        """States in the order the cycle visits them."""
        return tuple(e.source for e in self.cycle)

    def bath(self, label: str) -> BathParams:
        for b in self.baths:
            if b.label == label:
                return b
        raise KeyError(label)

    def gap(self, edge: CycleEdge) -> float:
        """Signed gap E_target - E_source."""
        return self.energies[edge.target] - self.energies[edge.source]

    def bath_edges(self, label: str | None = None) -> list[CycleEdge]:
        """Dissipative edges, including the leak; optionally only one bath's."""
        edges = [e for e in self.cycle if not e.is_work]
        if self.leak is not None:
            edges.append(self.leak)
        if label is None:
            return edges
        return [e for e in edges if e.bath == label]

    def edge_bath(self, edge: CycleEdge) -> BathParams:
        """Bath parameters for a dissipative edge (leak coupling applied)."""
        b = self.bath(edge.bath)
        if edge == self.leak and self.leak_gamma is not None:
            b = dataclasses.replace(b, gamma=self.leak_gamma)
        return b

    @property
    def temperatures(self) -> dict[str, float]:
        return {b.label: b.temperature for b in self.baths}

    # -- serialisation -------------------------------------------------------

    def to_config(self) -> dict[str, Any]:
        edges = [_edge_to_dict(e) for e in self.cycle]
        if self.leak is not None:
            edges.append(_edge_to_dict(self.leak))
        cfg: dict[str, Any] = {
            "units": UNITS,
            "levels": list(self.energies),
            "edges": edges,
            "lambda": self.coupling,
            "baths": [
                {"label": b.label, "T": b.temperature, "gamma": b.gamma, "d": b.dim, "omega0": b.omega0}
                for b in self.baths
            ],
        }
        if self.leak_gamma is not None:
            cfg["leak_gamma"] = self.leak_gamma
        return cfg

    def render(self) -> str:
        return json.dumps(self.to_config(), indent=2) + "\n"

    def fingerprint(self) -> str:
        """Short stable hash of the canonical config."""
        blob = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _edge_to_dict(e: CycleEdge) -> dict[str, Any]:
    if e.is_work:
        return {"from": e.source, "to": e.target, "kind": "work"}
    return {"from": e.source, "to": e.target, "kind": "bath", "bath": e.bath}


# -- config parsing -----------------------------------------------------------


def _number(obj: Mapping, key: str, where: str, *, integer: bool = False, default=None):
    if key not in obj:
        if default is not None:
            return default
        raise ConfigError(f"missing key {key!r}", where)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"expected a number, got {val!r}", f"{where}.{key}" if where else key)
    if integer:
        if int(val) != val:
            raise ConfigError(f"expected an integer, got {val!r}", f"{where}.{key}" if where else key)
        return int(val)
    return float(val)


def from_config(cfg: Mapping[str, Any]) -> MachineSpec:
    """Build a MachineSpec from a decoded config mapping."""
    if not isinstance(cfg, Mapping):
        raise ConfigError("top level must be an object")
    for key in ("levels", "edges", "lambda", "baths"):
        if key not in cfg:
            raise ConfigError(f"missing key {key!r}")
    levels = cfg["levels"]
    if not isinstance(levels, list) or not levels:
        raise ConfigError("expected a non-empty list of energies", "levels")
    for i, e in enumerate(levels):
        if isinstance(e, bool) or not isinstance(e, (int, float)):
            raise ConfigError(f"expected a number, got {e!r}", f"levels[{i}]")

    raw_edges = cfg["edges"]
    if not isinstance(raw_edges, list):
        raise ConfigError("expected a list", "edges")
    edges = []
    for i, raw in enumerate(raw_edges):
        where = f"edges[{i}]"
        if not isinstance(raw, Mapping):
            raise ConfigError("expected an object", where)
        src = _number(raw, "from", where, integer=True)
        tgt = _number(raw, "to", where, integer=True)
        kind = raw.get("kind")
        if kind == "work":
            edges.append(CycleEdge(src, tgt))
        elif kind == "bath":
            bath = raw.get("bath")
            if bath not in BATH_LABELS:
                raise ConfigError(f"expected one of {BATH_LABELS}, got {bath!r}", f"{where}.bath")
            edges.append(CycleEdge(src, tgt, bath))
        else:
            raise ConfigError(f"expected 'bath' or 'work', got {kind!r}", f"{where}.kind")

    raw_baths = cfg["baths"]
    if not isinstance(raw_baths, list):
        raise ConfigError("expected a list", "baths")
    baths = []
    for i, raw in enumerate(raw_baths):
        where = f"baths[{i}]"
        if not isinstance(raw, Mapping):
            raise ConfigError("expected an object", where)
        try:
            baths.append(
                BathParams(
                    label=raw.get("label"),
                    temperature=_number(raw, "T", where),
                    gamma=_number(raw, "gamma", where),
                    dim=_number(raw, "d", where, integer=True, default=1),
                    omega0=_number(raw, "omega0", where, default=1.0),
                )
            )
        except SpecError as exc:
            raise ConfigError(str(exc), where) from None

    coupling = _number(cfg, "lambda", "")
    leak_gamma = _number(cfg, "leak_gamma", "") if "leak_gamma" in cfg else None

    n = len(levels)
    cycle, leak = edges, None
    if len(edges) == n + 1:
        # the extra edge must run parallel to the driven one
        work = [e for e in edges if e.is_work]
        parallel = [
            k for k, e in enumerate(edges)
            if not e.is_work and len(work) == 1 and {e.source, e.target} == {work[0].source, work[0].target}
        ]
        if len(parallel) != 1:
            raise ConfigError("an extra edge is only allowed as a heat leak parallel to the work edge", "edges")
        leak = edges[parallel[0]]
        cycle = edges[: parallel[0]] + edges[parallel[0] + 1:]
    try:
        return MachineSpec(tuple(levels), tuple(cycle), coupling, tuple(baths), leak=leak, leak_gamma=leak_gamma)
    except SpecError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> MachineSpec:
    """Parse config text (JSON); syntax errors report ``line:col``."""
    if not text.strip():
        raise ConfigError("empty machine config")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}:{exc.colno}") from None
    return from_config(cfg)


def load_machine(path: str | Path) -> MachineSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read machine file: {exc.strerror}", str(path)) from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        where = f"{path}:{exc.where}" if exc.where else str(path)
        raise ConfigError(exc.message, where) from None


# -- builders -------------------------------------------------------------------


def _bath_tuple(baths: Iterable[BathParams] | Mapping[str, BathParams]) -> tuple[BathParams, ...]:
    if isinstance(baths, Mapping):
        baths = baths.values()
    return tuple(baths)


def reference_baths(dim: int = 1, gamma: float = 1e-6, t_cold: float = 1.5, t_hot: float = 3.0) -> tuple[BathParams, ...]:
    """Cold and hot baths with the reference parameters used throughout the tests."""
    return (
        BathParams("cold", t_cold, gamma, dim),
        BathParams("hot", t_hot, gamma, dim),
    )


def build_three_level(omega_c: float, omega_h: float, coupling: float, baths) -> MachineSpec:
    """Power-driven three-level refrigerator with energies {0, omega_c, omega_h}.

    Cycle 0 -> 1 (cold), 1 -> 2 (driven), 2 -> 0 (hot).
    """
    if not 0 < omega_c < omega_h:
        raise SpecError(f"need 0 < omega_c < omega_h, got omega_c={omega_c}, omega_h={omega_h}")
    return MachineSpec(
        energies=(0.0, omega_c, omega_h),
        cycle=(CycleEdge(0, 1, "cold"), CycleEdge(1, 2), CycleEdge(2, 0, "hot")),
        coupling=coupling,
        baths=_bath_tuple(baths),
    )


def build_four_level(omega_c: float, omega_h: float, epsilon: float, coupling: float, baths) -> MachineSpec:
    """Hybrid four-level refrigerator: an extra level at omega_h + epsilon.

    Cycle 0 -> 1 (cold), 1 -> 3 (driven, gap omega_h - omega_c + epsilon),
    3 -> 2 (hot, gap -epsilon), 2 -> 0 (hot).
    """
    if not 0 < omega_c < omega_h:
        raise SpecError(f"need 0 < omega_c < omega_h, got omega_c={omega_c}, omega_h={omega_h}")
    if epsilon == 0:
        raise SpecError("epsilon = 0 makes the extra hot transition gapless")
    return MachineSpec(
        energies=(0.0, omega_c, omega_h, omega_h + epsilon),
        cycle=(CycleEdge(0, 1, "cold"), CycleEdge(1, 3), CycleEdge(3, 2, "hot"), CycleEdge(2, 0, "hot")),
        coupling=coupling,
        baths=_bath_tuple(baths),
    )


def build_heat_leak_variant(spec: MachineSpec, leak_gamma: float | None = None) -> MachineSpec:
    """Add a hot-bath transition in parallel with the driven edge."""
    if spec.leak is not None:
        raise SpecError("spec already has a heat leak; only one is supported")
    w = spec.work_edge
    return dataclasses.replace(spec, leak=CycleEdge(w.source, w.target, "hot"), leak_gamma=leak_gamma)


# -- time scales ------------------------------------------------------------------


@dataclass(frozen=True)
class ScaleViolation:
    name: str
    smaller: float
    larger: float

    def __str__(self):
        return f"{self.name}: {self.smaller:.3g} is not << {self.larger:.3g}"


@dataclass(frozen=True)
class ValidationReport:
    """Time scales of the machine and the orderings that fail.

    ``tau_R`` is the fastest relaxation time 1/max(gamma); ``tau_R_slow`` is
    1/min(gamma) and is the one compared against the driving time.
    """

    tau_B: float
    tau_0: float
    tau_R: float
    tau_R_slow: float
    tau_sd: float
    separation_factor: float
    warnings: tuple[ScaleViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.warnings


def _bath_frequencies(spec: MachineSpec) -> dict[str, list[float]]:
    return {label: [abs(spec.gap(e)) for e in spec.bath_edges(label)] for label in BATH_LABELS}


def validate_spec(spec: MachineSpec, separation_factor: float = 10.0) -> ValidationReport:
    """Check the time-scale separations required by the local master equation.

    Each strict ordering ``a << b`` is accepted when ``separation_factor * a <= b``.
    """
    if not separation_factor >= 1:
        raise ValueError("separation_factor must be >= 1")
    spec.check()
    f = separation_factor
    tau_B = max(1.0 / b.temperature for b in spec.baths)
    # a separately weakened leak is a perturbation and does not set tau_R
    gammas = [b.gamma for b in spec.baths]
    tau_R = 1.0 / max(gammas)
    tau_R_slow = 1.0 / min(gammas)
    tau_sd = math.inf if spec.coupling == 0 else 1.0 / spec.coupling

    # secular scale: differences between frequencies of the same bath, and 2*omega
    inv = []
    freqs = _bath_frequencies(spec)
    for omegas in freqs.values():
        for k, wk in enumerate(omegas):
            inv.append(1.0 / (2.0 * wk))
            for wl in omegas[k + 1:]:
                inv.append(1.0 / abs(wk - wl))
                inv.append(1.0 / (wk + wl))
    tau_0 = max(inv)

    warnings = []
    if f * tau_B > tau_R:
        warnings.append(ScaleViolation("tau_B << tau_R (Born-Markov)", tau_B, tau_R))
    if f * tau_0 > tau_R:
        warnings.append(ScaleViolation("tau_0 << tau_R (secular)", tau_0, tau_R))
    if f * tau_R_slow > tau_sd:
        warnings.append(ScaleViolation("tau_R << tau_sd (weak driving)", tau_R_slow, tau_sd))
    for label, omegas in freqs.items():
        g = max(e_b.gamma for e_b in (spec.edge_bath(e) for e in spec.bath_edges(label)))
        for w in omegas:
            if 2.0 * w < f * g:
                warnings.append(ScaleViolation(f"2*omega >> gamma_{label} (gap {w:.6g})", g, 2.0 * w))
    return ValidationReport(tau_B, tau_0, tau_R, tau_R_slow, tau_sd, f, tuple(warnings))
