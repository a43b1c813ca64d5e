"""Three-level benchmark versus four-level hybrid refrigerator.

Both machines share omega_c, omega_h, lambda and the baths; the four-level
device adds a level at omega_h + epsilon. Cooling rates come from the graph
route, coherences from the full master-equation solve.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from concurrent.futures import ProcessPoolExecutor

from scipy.optimize import brentq
from dataclasses import dataclass

from . import emulator, graph, lindblad
from .model import MachineSpec, SpecError, build_four_level, build_three_level, validate_spec
from .rates import decay_rates, edge_rates

SWEEP_PARAMETERS = ("x_eps", "epsilon", "omega_c", "omega_h", "lambda", "gamma_c", "gamma_h", "T_c", "T_h")


@dataclass(frozen=True)
class DeviceParams:
    omega_c: float
    omega_h: float
    epsilon: float | None
    coupling: float
    baths: tuple

    def temperature(self, label):
        return next(b.temperature for b in self.baths if b.label == label)


def device_params(spec: MachineSpec) -> DeviceParams:
    """Recover builder parameters from a three- or four-level refrigerator spec."""
    e = spec.energies
    if spec.leak is None and spec.num_levels == 3:
        p = DeviceParams(e[1], e[2], None, spec.coupling, spec.baths)
        rebuilt = build_three_level(p.omega_c, p.omega_h, p.coupling, p.baths)
    elif spec.leak is None and spec.num_levels == 4:
        p = DeviceParams(e[1], e[2], e[3] - e[2], spec.coupling, spec.baths)
        rebuilt = build_four_level(p.omega_c, p.omega_h, p.epsilon, p.coupling, p.baths)
    else:
        raise SpecError("expected a three- or four-level refrigerator layout")
    if rebuilt != spec:
        raise SpecError("spec does not follow the three-/four-level refrigerator layout")
    return p


def _shared(p3: DeviceParams, p4: DeviceParams, allow_self: bool = True) -> None:
    # a three-level second machine means comparing the benchmark with itself
    if p3.epsilon is not None or (p4.epsilon is None and not allow_self):
        raise SpecError("expected a three-level spec and a four-level spec, in that order")
    for name in ("omega_c", "omega_h", "coupling", "baths"):
        if getattr(p3, name) != getattr(p4, name):
            raise SpecError(f"machines differ in {name}; the comparison needs shared parameters")


def thermodynamic_forces(p: DeviceParams) -> tuple[float, float, float]:
    """``(X_c, X_h, X_eps)`` = ``(omega_c/T_c, omega_h/T_h, epsilon/T_h)``."""
    tc, th = p.temperature("cold"), p.temperature("hot")
    return p.omega_c / tc, p.omega_h / th, (p.epsilon or 0.0) / th


def asymmetry_factor(xc: float, xh: float, xe: float) -> float:
    """Ratio of cycle asymmetries and tree sums; depends on the forces only."""
    base = 1.0 + math.exp(xc) + math.exp(xc - xh)
    return base / (base + math.exp(xc - xh - xe)) * (-math.expm1(xc - xh - xe)) / (-math.expm1(xc - xh))


@dataclass(frozen=True)
class RatioApproximation:
    A: float
    D: float
    AD: float
    precondition_ok: bool


def ratio_approximation(spec3: MachineSpec, spec4: MachineSpec, factor: float = 10.0) -> RatioApproximation:
    """``R ~ A * D`` with ``D`` the ratio of the driven-pair escape rates.

    The four-level escape rate from the upper driven level is that of the
    ``3 -> 2`` hot transition, i.e. the emission rate across ``|epsilon|``
    when epsilon > 0 and the absorption rate when epsilon < 0.
    """
    p3, p4 = device_params(spec3), device_params(spec4)
    _shared(p3, p4)
    if p4.epsilon is None:
        return RatioApproximation(1.0, 1.0, 1.0, True)
    a = asymmetry_factor(*thermodynamic_forces(p4))
    cold = next(b for b in p4.baths if b.label == "cold")
    hot = next(b for b in p4.baths if b.label == "hot")
    g_c = decay_rates(p4.omega_c, cold).down
    g_h = decay_rates(p4.omega_h, hot).down
    g_eps, _ = edge_rates(spec4, spec4.cycle[2])
    d = (g_c + g_h) / (g_c + g_eps)
    g4 = graph.from_rate_matrix(emulator.build_rate_matrix(spec4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", graph.ApproximationWarning)
        ok = graph.denominator_approx(g4, factor=factor).precondition_ok
    return RatioApproximation(a, d, a * d, ok)


@dataclass(frozen=True)
class CoolingWindow:
    omega_c: float
    boundary: float
    inside: bool
    q_c: float
    consistent: bool


def cooling_window(spec: MachineSpec) -> CoolingWindow:
    """Cooling requires ``omega_c < (omega_h + epsilon) T_c / T_h``.

    The closed-form membership is cross-checked against the sign of the
    cold current from the graph route.
    """
    p = device_params(spec)
    boundary = (p.omega_h + (p.epsilon or 0.0)) * p.temperature("cold") / p.temperature("hot")
    cc = graph.circuit_heat_currents(graph.from_rate_matrix(emulator.build_rate_matrix(spec)))
    inside = p.omega_c < boundary
    consistent = (cc.q_c > 0) == inside or abs(cc.q_c) <= lindblad.noise_floor(spec)
    return CoolingWindow(p.omega_c, boundary, inside, cc.q_c, consistent)


def locate_cooling_edge(spec: MachineSpec, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Value of omega_c in ``(lo, hi)`` at which the cold current changes sign."""
    p = device_params(spec)

    def q_c(omega_c):
        s = dataclasses.replace(p, omega_c=omega_c)
        if p.epsilon is None:
            m = build_three_level(s.omega_c, s.omega_h, s.coupling, s.baths)
        else:
            m = build_four_level(s.omega_c, s.omega_h, s.epsilon, s.coupling, s.baths)
        return graph.circuit_heat_currents(graph.from_rate_matrix(emulator.build_rate_matrix(m))).q_c

    return float(brentq(q_c, lo, hi, xtol=xtol))


@dataclass(frozen=True)
class CopRatio:
    value: float | None
    closed_form: float
    matches: bool
    modes: tuple[str, str]


def _graph_report(spec: MachineSpec):
    W = emulator.build_rate_matrix(spec)
    g = graph.from_rate_matrix(W)
    cc = graph.circuit_heat_currents(g)
    mode = lindblad.operation_mode(cc.q_c, cc.q_h, cc.power, atol=lindblad.noise_floor(spec))
    return cc, mode


def cop_ratio(spec3: MachineSpec, spec4: MachineSpec, rtol: float = 1e-12) -> CopRatio:
    """``E4/E3`` from the currents, checked against ``1/(1 + epsilon/omega_w)``."""
    p3, p4 = device_params(spec3), device_params(spec4)
    _shared(p3, p4)
    closed = 1.0 / (1.0 + (p4.epsilon or 0.0) / (p4.omega_h - p4.omega_c))
    (c3, m3), (c4, m4) = _graph_report(spec3), _graph_report(spec4)
    if m3 != "refrigerator" or m4 != "refrigerator":
        return CopRatio(None, closed, False, (m3, m4))
    value = (c4.q_c / c4.power) / (c3.q_c / c3.power)
    return CopRatio(value, closed, abs(value - closed) <= rtol * abs(closed), (m3, m4))


@dataclass(frozen=True)
class ComparisonPoint:
    epsilon: float
    x_eps: float
    R: float
    A: float
    D: float
    AD: float
    cop3: float | None
    cop4: float | None
    cop_ratio: float | None
    qc3: float
    qc4: float
    qh3: float
    qh4: float
    p3: float
    p4: float
    coherence3: float
    coherence4: float
    coherence_ratio: float
    in_window3: bool
    in_window4: bool
    mode3: str
    mode4: str
    approx_ok: bool
    warnings: tuple[str, ...] = ()
    value: float | None = None
    error: str | None = None

    @property
    def valid(self) -> bool:
        return self.error is None and not self.warnings


def performance_ratio(spec3: MachineSpec, spec4: MachineSpec, separation_factor: float = 10.0) -> ComparisonPoint:
    """Cooling-rate ratio ``R = Q_c(4)/Q_c(3)`` and everything reported alongside it."""
    p3, p4 = device_params(spec3), device_params(spec4)
    _shared(p3, p4)
    (c3, m3), (c4, m4) = _graph_report(spec3), _graph_report(spec4)
    rho3, _ = lindblad.solve(spec3)
    rho4, _ = lindblad.solve(spec4)
    w3, w4 = spec3.work_edge, spec4.work_edge
    coh3 = lindblad.coherence_l1(rho3, (w3.source, w3.target))
    coh4 = lindblad.coherence_l1(rho4, (w4.source, w4.target))
    approx = ratio_approximation(spec3, spec4, separation_factor)
    cop3 = c3.q_c / c3.power if m3 == "refrigerator" else None
    cop4 = c4.q_c / c4.power if m4 == "refrigerator" else None
    flags = [f"3-level: {v}" for v in validate_spec(spec3, separation_factor).warnings]
    flags += [f"4-level: {v}" for v in validate_spec(spec4, separation_factor).warnings]
    if not approx.precondition_ok:
        flags.append("driven rate is not well below the other four-level rates")
    win3, win4 = cooling_window(spec3), cooling_window(spec4)
    return ComparisonPoint(
        epsilon=p4.epsilon or 0.0,
        x_eps=thermodynamic_forces(p4)[2],
        R=c4.q_c / c3.q_c,
        A=approx.A,
        D=approx.D,
        AD=approx.AD,
        cop3=cop3,
        cop4=cop4,
        cop_ratio=cop4 / cop3 if cop3 is not None and cop4 is not None else None,
        qc3=c3.q_c,
        qc4=c4.q_c,
        qh3=c3.q_h,
        qh4=c4.q_h,
        p3=c3.power,
        p4=c4.power,
        coherence3=coh3,
        coherence4=coh4,
        coherence_ratio=coh4 / coh3,
        in_window3=win3.inside,
        in_window4=win4.inside,
        mode3=m3,
        mode4=m4,
        approx_ok=approx.precondition_ok,
        warnings=tuple(flags),
    )


def _rebuild(p: DeviceParams, parameter: str, value: float) -> tuple[MachineSpec, MachineSpec]:
    baths = {b.label: b for b in p.baths}
    kw = dict(omega_c=p.omega_c, omega_h=p.omega_h, epsilon=p.epsilon, coupling=p.coupling)
    if parameter == "x_eps":
        kw["epsilon"] = value * baths["hot"].temperature
    elif parameter in ("epsilon", "omega_c", "omega_h"):
        kw[parameter] = value
    elif parameter == "lambda":
        kw["coupling"] = value
    elif parameter in ("gamma_c", "gamma_h"):
        label = "cold" if parameter == "gamma_c" else "hot"
        baths[label] = dataclasses.replace(baths[label], gamma=value)
    elif parameter in ("T_c", "T_h"):
        label = "cold" if parameter == "T_c" else "hot"
        baths[label] = dataclasses.replace(baths[label], temperature=value)
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    bt = (baths["cold"], baths["hot"])
    spec3 = build_three_level(kw["omega_c"], kw["omega_h"], kw["coupling"], bt)
    spec4 = build_four_level(kw["omega_c"], kw["omega_h"], kw["epsilon"], kw["coupling"], bt)
    return spec3, spec4


def _failed_point(value, p: DeviceParams, parameter: str, exc: Exception) -> ComparisonPoint:
    nan = math.nan
    eps = value * p.temperature("hot") if parameter == "x_eps" else (value if parameter == "epsilon" else p.epsilon)
    return ComparisonPoint(
        epsilon=eps, x_eps=eps / p.temperature("hot"), R=nan, A=nan, D=nan, AD=nan,
        cop3=None, cop4=None, cop_ratio=None, qc3=nan, qc4=nan, qh3=nan, qh4=nan, p3=nan, p4=nan,
        coherence3=nan, coherence4=nan, coherence_ratio=nan, in_window3=False, in_window4=False,
        mode3="", mode4="", approx_ok=False, value=value, error=f"{type(exc).__name__}: {exc}",
    )


def _evaluate(args) -> ComparisonPoint:
    p, parameter, value, factor = args
    try:
        spec3, spec4 = _rebuild(p, parameter, value)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", graph.ApproximationWarning)
            point = performance_ratio(spec3, spec4, factor)
        return dataclasses.replace(point, value=value)
    except (SpecError, ArithmeticError, ValueError, lindblad.DegenerateSteadyState) as exc:
        if isinstance(exc, ValueError) and str(exc).startswith("unknown sweep parameter"):
            raise
        return _failed_point(value, p, parameter, exc)


def sweep(spec3: MachineSpec, spec4: MachineSpec, parameter: str, grid, separation_factor: float = 10.0,
          workers: int = 1) -> list[ComparisonPoint]:
    """One ComparisonPoint per grid value, in grid order.

    Points whose machines cannot be built or solved are kept with ``error``
    set; the sweep carries on.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    p3, p4 = device_params(spec3), device_params(spec4)
    _shared(p3, p4, allow_self=False)
    jobs = [(p4, parameter, float(v), separation_factor) for v in grid]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluate, jobs))
    return [_evaluate(job) for job in jobs]


__all__ = [
    "ComparisonPoint",
    "CoolingWindow",
    "CopRatio",
    "DeviceParams",
    "RatioApproximation",
    "SWEEP_PARAMETERS",
    "asymmetry_factor",
    "cooling_window",
    "cop_ratio",
    "device_params",
    "performance_ratio",
    "locate_cooling_edge",
    "ratio_approximation",
    "sweep",
    "thermodynamic_forces",
]
