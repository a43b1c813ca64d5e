"""Rotating-frame local master equation of a weakly driven cyclic machine.

Density matrices are plain ``(N, N)`` complex arrays. Superoperators act on
column-stacked vectors, ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .model import BATH_LABELS, MachineSpec
from .rates import edge_rates, escape_rate

logger = logging.getLogger(__name__)

KERNEL_RTOL = 1e-12


class DegenerateSteadyState(RuntimeError):
    """The generator's kernel is not one-dimensional."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        super().__init__(f"generator kernel has dimension {dimension}, expected 1")


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def _spre(a):
    return np.kron(np.eye(a.shape[0]), a)


def _spost(b):
    return np.kron(b.T, np.eye(b.shape[0]))


def dissipator(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``A . A^dag - {A^dag A, .}/2``."""
    ada = a.conj().T @ a
    return np.kron(a.conj(), a) - 0.5 * _spre(ada) - 0.5 * _spost(ada)


def _ket_bra(n, i, j):
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass(frozen=True)
class Generator:
    """Liouvillian of the rotating-frame master equation.

    ``parts`` keeps the coherent part under ``"drive"`` and each bath's
    dissipator under its label, so heat currents can be read off as
    ``tr(H0 L_alpha rho)``.
    """

    spec: MachineSpec
    matrix: np.ndarray
    parts: dict = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.spec.num_levels

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def trace_functional(self) -> np.ndarray:
        return vec(np.eye(self.dim))


def drive_hamiltonian(spec: MachineSpec) -> np.ndarray:
    n = spec.num_levels
    w = spec.work_edge
    return spec.coupling * (_ket_bra(n, w.source, w.target) + _ket_bra(n, w.target, w.source))


def build_generator(spec: MachineSpec) -> Generator:
    spec.check()
    n = spec.num_levels
    h = drive_hamiltonian(spec)
    drive = -1j * (_spre(h) - _spost(h))
    parts = {"drive": drive}
    for label in BATH_LABELS:
        lb = np.zeros((n * n, n * n), dtype=complex)
        for e in spec.bath_edges(label):
            fwd, bwd = edge_rates(spec, e)
            lb += fwd * dissipator(_ket_bra(n, e.target, e.source))
            lb += bwd * dissipator(_ket_bra(n, e.source, e.target))
        parts[label] = lb
    return Generator(spec, drive + parts["cold"] + parts["hot"], parts)


def kernel_dimension(matrix: np.ndarray, rtol: float = KERNEL_RTOL) -> int:
    s = la.svdvals(matrix)
    return int(np.sum(s <= rtol * s[0]))


def _hermitize(rho):
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def steady_state(gen: Generator) -> np.ndarray:
    """Unit-trace kernel element of the generator.

    The population equation of state 0 is replaced by the trace constraint,
    which is the redundant row since the trace functional annihilates the
    generator's range.
    """
    L = gen.matrix
    dim = kernel_dimension(L)
    if dim != 1:
        raise DegenerateSteadyState(dim)
    m = L.copy()
    m[0, :] = gen.trace_functional()
    rhs = np.zeros(L.shape[0], dtype=complex)
    rhs[0] = 1.0
    v = la.solve(m, rhs)
    # one step of refinement against the rate-scale spread
    v += la.solve(m, rhs - m @ v)
    rho = _hermitize(unvec(v, gen.dim))
    resid = np.linalg.norm(L @ vec(rho))
    scale = np.linalg.norm(L, 2)
    if resid > 1e-12 * scale:
        logger.warning("steady-state residual %.3g exceeds 1e-12 * |L| = %.3g", resid, 1e-12 * scale)
    return rho


def _expm_action(L: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    """``exp(t L) v`` by eigendecomposition, or scaling-and-squaring if ill-conditioned."""
    w, V = la.eig(L)
    if np.linalg.cond(V) < 1e8:
        # snap numerically-zero eigenvalues so long horizons do not amplify them
        w = np.where(np.abs(w) <= 1e-12 * np.max(np.abs(w)), 0.0, w)
        return V @ (np.exp(t * w) * la.solve(V, v))
    return la.expm(t * L) @ v


def propagate(gen: Generator, rho0: np.ndarray, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    rho0 = np.asarray(rho0, dtype=complex)
    if t == 0:
        return rho0.copy()
    rho = unvec(_expm_action(gen.matrix, vec(rho0), t), gen.dim)
    return 0.5 * (rho + rho.conj().T)


def spectral_gap(gen: Generator) -> float:
    """Smallest non-zero relaxation rate ``min |Re(lambda)|``."""
    w = la.eigvals(gen.matrix)
    re = np.abs(w.real)
    return float(np.min(re[re > 1e-12 * np.max(re)]))


def check_density_matrix(rho: np.ndarray, atol: float = 1e-12) -> None:
    """Raise ValueError unless ``rho`` is Hermitian, unit trace and positive."""
    rho = np.asarray(rho)
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError("density matrix does not have unit trace")
    if np.min(la.eigvalsh(0.5 * (rho + rho.conj().T))) < -1e-10:
        raise ValueError("density matrix has negative eigenvalues")


# -- thermodynamics -------------------------------------------------------------


@dataclass(frozen=True)
class ThermoReport:
    """Steady-state energetics of a machine.

    ``edge_fluxes`` lists the net rate ``source -> target`` of every cycle
    edge in cycle order; the leak edge, if any, is reported in
    ``leak_flux``. ``cop`` is only set in refrigerator mode.
    """

    heat: dict
    power: float
    flux: float
    edge_fluxes: tuple
    entropy_production: float
    coherence: float
    mode: str
    cop: float | None
    temperatures: dict
    leak_flux: float | None = None

    @property
    def q_c(self) -> float:
        return self.heat["cold"]

    @property
    def q_h(self) -> float:
        return self.heat["hot"]

    @property
    def first_law_residual(self) -> float:
        scale = max(abs(self.q_c), abs(self.q_h), abs(self.power))
        if scale == 0:
            return 0.0
        return abs(self.q_c + self.q_h + self.power) / scale

    @property
    def clausius_sum(self) -> float:
        """``Q_c/T_c + Q_h/T_h``, non-positive by the second law."""
        return self.q_c / self.temperatures["cold"] + self.q_h / self.temperatures["hot"]


def noise_floor(spec: MachineSpec) -> float:
    """Magnitude below which a current is treated as numerically zero."""
    rates = [r for e in spec.bath_edges() for r in edge_rates(spec, e)]
    gaps = [abs(spec.gap(e)) for e in spec.cycle]
    return 1e-12 * max(rates) * max(gaps)


def operation_mode(q_c: float, q_h: float, power: float, atol: float = 0.0) -> str:
    """Classify the sign pattern of the steady-state currents."""
    sign = [0 if abs(x) <= atol else (1 if x > 0 else -1) for x in (q_c, q_h, power)]
    if sign == [0, 0, 0]:
        return "idle"
    if sign == [1, -1, 1]:
        return "refrigerator"
    if sign == [-1, 1, -1]:
        return "engine"
    if sign[2] == 1 and sign[0] == -1 and sign[1] == 1:
        return "accelerator"
    if sign[2] >= 0 and sign[0] <= 0 and sign[1] <= 0:
        return "heater"
    return "leak"


def make_report(spec: MachineSpec, heat: dict, power: float, flux: float, edge_fluxes, coherence: float,
                leak_flux: float | None = None) -> ThermoReport:
    temps = spec.temperatures
    mode = operation_mode(heat["cold"], heat["hot"], power, atol=noise_floor(spec))
    cop = heat["cold"] / power if mode == "refrigerator" else None
    sigma = -heat["cold"] / temps["cold"] - heat["hot"] / temps["hot"]
    return ThermoReport(
        heat=dict(heat),
        power=power,
        flux=flux,
        edge_fluxes=tuple(edge_fluxes),
        entropy_production=sigma,
        coherence=coherence,
        mode=mode,
        cop=cop,
        temperatures=temps,
        leak_flux=leak_flux,
    )


def coherence_l1(rho: np.ndarray, pair: tuple[int, int]) -> float:
    """``Im <s|rho|t>`` for the driven pair ``(s, t)``.

    This is the quantifier used for these machines; it is not the textbook
    l1-norm (sum of all off-diagonal moduli).
    """
    s, t = pair
    return float(np.asarray(rho)[s, t].imag)


def thermo_report(spec: MachineSpec, rho: np.ndarray) -> ThermoReport:
    """Heat currents, power and flux from a steady state of the master equation."""
    p = np.real(np.diag(rho))
    w = spec.work_edge
    c = coherence_l1(rho, (w.source, w.target))
    drive_flux = 2.0 * spec.coupling * c
    power = spec.gap(w) * drive_flux

    heat = {label: 0.0 for label in BATH_LABELS}
    fluxes = []
    for e in spec.cycle:
        if e.is_work:
            fluxes.append(drive_flux)
            continue
        fwd, bwd = edge_rates(spec, e)
        j = float(fwd * p[e.source] - bwd * p[e.target])
        fluxes.append(j)
        heat[e.bath] += spec.gap(e) * j
    leak_flux = None
    if spec.leak is not None:
        fwd, bwd = edge_rates(spec, spec.leak)
        leak_flux = float(fwd * p[spec.leak.source] - bwd * p[spec.leak.target])
        heat["hot"] += spec.gap(spec.leak) * leak_flux
    return make_report(spec, heat, power, drive_flux, fluxes, c, leak_flux)


def heat_currents_from_generator(gen: Generator, rho: np.ndarray) -> dict:
    """``tr(H0 L_alpha rho)`` per bath and ``-i tr(H0 [h_d, rho])``."""
    h0 = np.diag(gen.spec.energies)
    v = vec(rho)
    out = {}
    for key in ("cold", "hot", "drive"):
        out[key] = float(np.trace(h0 @ unvec(gen.parts[key] @ v, gen.dim)).real)
    return out


def stationary_coherence(spec: MachineSpec, populations) -> complex:
    """Stationary ``<s|sigma|t>`` of the driven pair from the populations alone."""
    w = spec.work_edge
    p = np.asarray(populations, dtype=float)
    kappa = escape_rate(spec, w.source) + escape_rate(spec, w.target)
    return complex(0.0, 2.0 * spec.coupling * (p[w.source] - p[w.target]) / kappa)


def reduced_generator(spec: MachineSpec) -> np.ndarray:
    """Real generator on (p_0..p_{N-1}, Re c, Im c), c the driven coherence.

    Only the driven pair's coherence couples to the populations, so this
    ``N + 2`` system has the same stationary populations as the full one.
    """
    n = spec.num_levels
    m = np.zeros((n + 2, n + 2))
    for e in spec.bath_edges():
        fwd, bwd = edge_rates(spec, e)
        s, t = e.source, e.target
        m[t, s] += fwd
        m[s, s] -= fwd
        m[s, t] += bwd
        m[t, t] -= bwd
    w = spec.work_edge
    s, t = w.source, w.target
    lam = spec.coupling
    kappa = escape_rate(spec, s) + escape_rate(spec, t)
    re, im = n, n + 1
    m[s, im] -= 2 * lam
    m[t, im] += 2 * lam
    m[re, re] = -kappa / 2
    m[im, im] = -kappa / 2
    m[im, t] -= lam
    m[im, s] += lam
    return m


def reduced_steady_state(spec: MachineSpec) -> tuple[np.ndarray, complex]:
    """Populations and driven coherence from the reduced ``N + 2`` system."""
    n = spec.num_levels
    m = reduced_generator(spec)
    m[0, :n] = 1.0
    m[0, n:] = 0.0
    rhs = np.zeros(n + 2)
    rhs[0] = 1.0
    x = la.solve(m, rhs)
    x += la.solve(m, rhs - m @ x)
    return x[:n], complex(x[n], x[n + 1])


def solve(spec: MachineSpec) -> tuple[np.ndarray, ThermoReport]:
    """Full superoperator steady state and its report."""
    rho = steady_state(build_generator(spec))
    return rho, thermo_report(spec, rho)


def gibbs_populations(energies, temperature: float) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    w = np.exp(-(e - e.min()) / temperature)
    return w / w.sum()


def max_relative_difference(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))))


__all__ = [
    "DegenerateSteadyState",
    "Generator",
    "ThermoReport",
    "build_generator",
    "check_density_matrix",
    "coherence_l1",
    "dissipator",
    "gibbs_populations",
    "heat_currents_from_generator",
    "kernel_dimension",
    "make_report",
    "noise_floor",
    "operation_mode",
    "propagate",
    "reduced_generator",
    "reduced_steady_state",
    "solve",
    "spectral_gap",
    "stationary_coherence",
    "steady_state",
    "thermo_report",
    "unvec",
    "vec",
]
