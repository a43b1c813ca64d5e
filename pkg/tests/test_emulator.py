import dataclasses

import numpy as np
import pytest

from thermoemu import emulator, lindblad
from thermoemu.emulator import EmulatorEdge, RateMatrix, assemble

from conftest import ref_four, ref_leak, ref_three
from oracles import brute_population_solve, relative


def test_rate_matrix_structure(three):
    W = emulator.build_rate_matrix(three)
    assert W.dim == 3
    assert np.allclose(W.matrix.sum(axis=0), 0.0, atol=1e-22)
    labels = [e.label for e in W.edges]
    assert labels == ["cold", "work", "hot"]
    work = W.edges[1]
    assert work.forward == work.backward


def test_leak_adds_parallel_rates(leak):
    W = emulator.build_rate_matrix(leak)
    base = emulator.build_rate_matrix(ref_three())
    assert len(W.edges) == 4
    lk = W.edges[3]
    assert (lk.source, lk.target, lk.label) == (1, 2, "hot")
    # the drive rate shrinks (wider kappa) but the leak adds on top of it
    assert W.edges[1].forward < base.edges[1].forward
    assert W.matrix[2, 1] == pytest.approx(W.edges[1].forward + lk.forward, rel=1e-15)


@pytest.mark.parametrize("make", [ref_three, ref_leak, lambda: ref_four(-0.1, 3)])
def test_certificate_passes(make):
    spec = make()
    cert = emulator.certify_balance(emulator.build_rate_matrix(spec), spec)
    assert cert.passed, cert


def test_certificate_catches_negated_rate(three):
    W = emulator.build_rate_matrix(three)
    m = W.matrix.copy()
    m[1, 0] = -m[1, 0]
    cert = emulator.certify_balance(dataclasses.replace(W, matrix=m), three)
    assert not cert.positivity.passed
    assert not cert.passed


def test_certificate_catches_broken_balance(three):
    W = emulator.build_rate_matrix(three)
    e = W.edges[0]
    edges = (dataclasses.replace(e, backward=1.5 * e.backward),) + W.edges[1:]
    bad = RateMatrix(assemble(3, edges), edges, W.temperatures)
    assert not emulator.certify_balance(bad, three).detailed_balance.passed


def test_steady_state_matches_quantum(three):
    p = emulator.classical_steady_state(emulator.build_rate_matrix(three))
    rho, _ = lindblad.solve(three)
    assert relative(p, np.real(np.diag(rho))) < 1e-8


def test_steady_state_against_least_squares(leak):
    W = emulator.build_rate_matrix(leak)
    assert relative(emulator.classical_steady_state(W), brute_population_solve(W.matrix)) < 1e-8


def test_uniform_cycle_is_uniform():
    n = 5
    edges = [EmulatorEdge(k, (k + 1) % n, 1.0, 1.0, "edge", 1.0) for k in range(n)]
    p = emulator.classical_steady_state(assemble(n, edges))
    assert np.allclose(p, 1.0 / n, rtol=1e-14)


def test_reducible_matrix_rejected():
    m = np.zeros((4, 4))
    m[1, 0] = m[0, 1] = 1.0
    m[3, 2] = m[2, 3] = 1.0
    m[np.diag_indices(4)] = -m.sum(axis=0)
    with pytest.raises(emulator.ReducibleRateMatrix) as info:
        emulator.classical_steady_state(m)
    assert info.value.blocks == [[0, 1], [2, 3]]


def test_propagation_limits(three):
    W = emulator.build_rate_matrix(three)
    q0 = np.array([0.0, 1.0, 0.0])
    assert np.array_equal(emulator.classical_propagate(W, q0, 0.0), q0)
    late = emulator.classical_propagate(W, q0, 1e10)
    assert relative(late, emulator.classical_steady_state(W)) < 1e-8
    with pytest.raises(ValueError):
        emulator.classical_propagate(W, q0, -1.0)


def test_emulator_reproduces_quantum_currents(leak):
    W = emulator.build_rate_matrix(leak)
    rep = emulator.emulator_report(leak, W)
    _, qrep = lindblad.solve(leak)
    for a, b in ((rep.q_c, qrep.q_c), (rep.q_h, qrep.q_h), (rep.power, qrep.power)):
        assert a == pytest.approx(b, rel=1e-8)
    assert rep.coherence == pytest.approx(qrep.coherence, rel=1e-8)
