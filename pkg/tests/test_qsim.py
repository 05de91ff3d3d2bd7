import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlfc import qsim
from qlfc.errors import QsimError
from qlfc.qsim import CNOT, H, PHASE, RX, RZ, Circuit, GateOp, Statevector

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]])
P0 = np.diag([1, 0])
P1 = np.diag([0, 1])


def dense_single(kind, angle):
    if kind == H:
        return np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    if kind == PHASE:
        return np.diag([1, np.exp(1j * angle)])
    if kind == RX:
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]])
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def kron_all(mats):
    out = np.array([[1.0]])
    for m in mats:
        out = np.kron(out, m)
    return out


def dense(gate, n):
    """Reference full matrix with qubit 0 as the most significant bit."""
    if gate.kind == CNOT:
        a = [I2] * n
        b = [I2] * n
        a[gate.control] = P0
        b[gate.control] = P1
        b[gate.target] = X
        return kron_all(a) + kron_all(b)
    ops = [I2] * n
    ops[gate.target] = dense_single(gate.kind, gate.angle)
    return kron_all(ops)


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return Statevector(n, v / np.linalg.norm(v))


gate_kinds = st.sampled_from([H, PHASE, RX, RZ, CNOT])
angles = st.floats(-20, 20, allow_nan=False)


@st.composite
def gates(draw, n=3):
    kind = draw(gate_kinds)
    target = draw(st.integers(0, n - 1))
    if kind == CNOT:
        control = draw(st.integers(0, n - 1).filter(lambda c: c != target))
        return GateOp(CNOT, target, control=control)
    if kind == H:
        return GateOp(H, target)
    return GateOp(kind, target, angle=draw(angles))


@settings(max_examples=200, deadline=None)
@given(gates(), st.integers(0, 2**32 - 1))
def test_gate_matches_dense_reference(gate, seed):
    psi = random_state(np.random.default_rng(seed), 3)
    got = qsim.apply_gate(psi, gate).amplitudes
    np.testing.assert_allclose(got, dense(gate, 3) @ psi.amplitudes, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(gates(), min_size=1, max_size=40), st.integers(0, 2**32 - 1))
def test_norm_preserved(gate_list, seed):
    state = random_state(np.random.default_rng(seed), 3)
    for g in gate_list:
        state = qsim.apply_gate(state, g)
        assert abs(state.norm2() - 1.0) < 1e-10


@settings(max_examples=50, deadline=None)
@given(gates(), st.integers(0, 2**32 - 1))
def test_inverse_gate_restores_state(gate, seed):
    psi = random_state(np.random.default_rng(seed), 3)
    inverse = gate if gate.kind in (H, CNOT) else GateOp(gate.kind, gate.target, angle=-gate.angle)
    back = qsim.apply_gate(qsim.apply_gate(psi, gate), inverse)
    np.testing.assert_allclose(back.amplitudes, psi.amplitudes, atol=1e-12)


def test_big_endian_ordering():
    # X on qubit 0 of |000> lands on index 4 = 0b100
    state = qsim.run_circuit(Circuit(3).rx(np.pi, 0))
    assert np.argmax(qsim.probabilities(state)) == 4
    state = qsim.run_circuit(Circuit(3).rx(np.pi, 2))
    assert np.argmax(qsim.probabilities(state)) == 1


def test_batched_angles_match_loop():
    rng = np.random.default_rng(0)
    thetas = rng.uniform(-3, 3, 5)
    amps = np.tile(random_state(rng, 3).amplitudes, (5, 1))
    batched = qsim.apply_gate_array(amps, GateOp(RX, 1, angle=thetas), 3)
    for k, th in enumerate(thetas):
        single = qsim.apply_gate_array(amps[k], GateOp(RX, 1, angle=float(th)), 3)
        np.testing.assert_allclose(batched[k], single, atol=1e-14)


def test_apply_gate_does_not_mutate_input():
    psi = Statevector.zero(2)
    before = psi.amplitudes.copy()
    qsim.apply_gate(psi, GateOp(H, 0))
    assert np.array_equal(psi.amplitudes, before)


def test_bell_state_exact():
    bell = qsim.run_circuit(Circuit(2).h(0).cx(0, 1))
    assert np.array_equal(qsim.probabilities(bell), np.array([0.5, 0.0, 0.0, 0.5]))
    assert qsim.expectation_z(bell, 0) == pytest.approx(0.0, abs=1e-15)


def test_expectation_z_basis_states():
    for idx in range(8):
        s = Statevector.basis(3, idx)
        for q in range(3):
            bit = (idx >> (2 - q)) & 1
            assert qsim.expectation_z(s, q) == (1 - 2 * bit)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: sum(v) > 0.1),
       st.integers(1, 5000), st.integers(0, 2**32 - 1))
def test_shot_counts_invariants(weights, shots, seed):
    p = np.array(weights) / sum(weights)
    counts = qsim.sample_counts(p, shots, seed)
    assert sum(counts.counts.values()) == shots
    assert all(0 <= b < len(p) and c > 0 for b, c in counts.counts.items())
    assert all(p[b] > 0 for b in counts.counts)
    assert counts == qsim.sample_counts(p, shots, seed)


def test_sampling_within_binomial_bounds():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    shots = 200_000
    counts = qsim.sample_counts(p, shots, seed=7).frequencies(4) * shots
    sigma = np.sqrt(shots * p * (1 - p))
    assert np.all(np.abs(counts - shots * p) <= 4 * sigma)


def test_sampling_rejects_bad_input():
    with pytest.raises(QsimError):
        qsim.sample_counts([0.5, 0.5], 0, 0)
    with pytest.raises(QsimError):
        qsim.sample_counts([0.7, 0.7], 10, 0)
    with pytest.raises(QsimError):
        qsim.sample_counts([-0.5, 1.5], 10, 0)


def test_gate_validation():
    with pytest.raises(QsimError):
        GateOp("SWAP", 0)
    with pytest.raises(QsimError):
        GateOp(CNOT, 0)
    with pytest.raises(QsimError):
        GateOp(H, 0, control=1)
    with pytest.raises(QsimError):
        Circuit(2).cx(1, 1)
    with pytest.raises(QsimError):
        Circuit(2).h(2)
    with pytest.raises(QsimError):
        Statevector(2, np.ones(3))
    with pytest.raises(QsimError):
        qsim.run_circuit(Circuit(2).h(0), Statevector.zero(3))
    assert GateOp("cx", 1, control=0).kind == CNOT
    assert GateOp("phase", 0, angle=1.0).kind == PHASE


def test_circuit_counts():
    c = Circuit(3).h(0).h(1).cx(0, 1).rz(0.3, 2)
    assert len(c) == 4 and c.count("H") == 2 and c.count("cx") == 1


def test_textbook_gate_actions():
    h = qsim.apply_gate(Statevector.zero(1), GateOp(H, 0))
    np.testing.assert_allclose(h.amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)
    cx = qsim.apply_gate(Statevector.basis(2, 0b10), GateOp(CNOT, 1, control=0))
    np.testing.assert_array_equal(cx.amplitudes, Statevector.basis(2, 0b11).amplitudes)
    x = qsim.apply_gate(Statevector.zero(1), GateOp(RX, 0, angle=math.pi))
    np.testing.assert_allclose(x.amplitudes, [0, -1j], atol=1e-15)


def test_simple_circuits():
    zero = Statevector.zero(3)
    assert np.array_equal(qsim.run_circuit(Circuit(3), zero).amplitudes, zero.amplitudes)
    hh = qsim.run_circuit(Circuit(1).h(0).h(0))
    np.testing.assert_allclose(hh.amplitudes, [1, 0], atol=1e-15)
    np.testing.assert_array_equal(qsim.probabilities(zero), np.eye(8)[0])
    uniform = qsim.run_circuit(Circuit(3).h(0).h(1).h(2))
    np.testing.assert_allclose(qsim.probabilities(uniform), np.full(8, 0.125), atol=1e-15)


def test_expectation_z_superpositions():
    assert qsim.expectation_z(qsim.run_circuit(Circuit(1).h(0)), 0) == pytest.approx(0.0, abs=1e-15)
    half = qsim.run_circuit(Circuit(1).rx(math.pi / 2, 0))
    assert abs(qsim.expectation_z(half, 0)) < 1e-12
    with pytest.raises(QsimError):
        qsim.expectation_z(half, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2), angles, st.integers(0, 2**32 - 1))
def test_phase_gate_leaves_probabilities(q, lam, seed):
    psi = random_state(np.random.default_rng(seed), 3)
    out = qsim.apply_gate(psi, GateOp(PHASE, q, angle=lam))
    np.testing.assert_allclose(qsim.probabilities(out), qsim.probabilities(psi), atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2**32 - 1))
def test_cnot_keeps_uniform_magnitudes(c, t, seed):
    if c == t:
        return
    phases = np.random.default_rng(seed).uniform(0, 2 * np.pi, 8)
    psi = Statevector(3, np.exp(1j * phases) / math.sqrt(8))
    out = qsim.apply_gate(psi, GateOp(CNOT, t, control=c))
    np.testing.assert_allclose(qsim.probabilities(out), np.full(8, 0.125), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.lists(gates(), min_size=1, max_size=10), st.integers(0, 2**32 - 1))
def test_self_inverse_gates_on_random_states(gate_list, seed):
    psi = random_state(np.random.default_rng(seed), 3)
    for g in gate_list:
        if g.kind in (H, CNOT):
            twice = qsim.apply_gate(qsim.apply_gate(psi, g), g)
            np.testing.assert_allclose(twice.amplitudes, psi.amplitudes, atol=1e-12)


def test_degenerate_distribution_sampling():
    p = np.eye(8)[0]
    for seed in range(5):
        assert qsim.sample_counts(p, 100, seed).counts == {0: 100}


@pytest.mark.parametrize("seed", range(10))
def test_bell_sampling_at_ten_thousand_shots(seed):
    bell = qsim.probabilities(qsim.run_circuit(Circuit(2).h(0).cx(0, 1)))
    counts = qsim.sample_counts(bell, 10_000, seed)
    assert abs(counts.counts.get(0, 0) / 10_000 - 0.5) <= 0.015
    assert set(counts.counts) <= {0, 3}


def test_bell_sampling_converges_at_one_million_shots():
    bell = qsim.probabilities(qsim.run_circuit(Circuit(2).h(0).cx(0, 1)))
    freq = qsim.sample_counts(bell, 1_000_000, 11).frequencies(4)
    assert np.max(np.abs(freq - bell)) < 0.005
