"""Dense statevector simulation for small qubit registers.

Basis ordering is big-endian: qubit 0 is the most significant bit of the
basis index, so on three qubits ``|100>`` is index 4.  Every count,
probability vector and class index in the package uses this convention.

The array kernels accept amplitude arrays with arbitrary leading batch
dimensions, and gate angles may be arrays broadcastable over those batch
dimensions.  The vqc module relies on this to evolve a whole dataset of
encoded inputs in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import QsimError

H = "H"
PHASE = "P"
RX = "RX"
RZ = "RZ"
CNOT = "CNOT"

GATE_KINDS = (H, PHASE, RX, RZ, CNOT)
_ALIASES = {"PHASE": PHASE, "CX": CNOT}

_SQRT1_2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int
    control: int | None = None
    angle: float | np.ndarray = 0.0

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.upper(), self.kind.upper())
        if kind not in GATE_KINDS:
            raise QsimError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == CNOT and self.control is None:
            raise QsimError("CNOT requires a control qubit")
        if kind != CNOT and self.control is not None:
            raise QsimError(f"{kind} takes no control qubit")

    def check(self, n_qubits: int) -> None:
        if not 0 <= self.target < n_qubits:
            raise QsimError(f"target qubit {self.target} out of range for {n_qubits} qubits")
        if self.kind == CNOT:
            if not 0 <= self.control < n_qubits:
                raise QsimError(f"control qubit {self.control} out of range for {n_qubits} qubits")
            if self.control == self.target:
                raise QsimError("CNOT control and target must differ")


@dataclass
class Circuit:
    n_qubits: int
    gates: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise QsimError("a circuit needs at least one qubit")
        for g in self.gates:
            g.check(self.n_qubits)

    def append(self, gate: GateOp) -> "Circuit":
        gate.check(self.n_qubits)
        self.gates.append(gate)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise QsimError("cannot join circuits of different width")
        self.gates.extend(other.gates)
        return self

    def h(self, q):
        return self.append(GateOp(H, q))

    def p(self, lam, q):
        return self.append(GateOp(PHASE, q, angle=lam))

    def rx(self, theta, q):
        return self.append(GateOp(RX, q, angle=theta))

    def rz(self, theta, q):
        return self.append(GateOp(RZ, q, angle=theta))

    def cx(self, control, target):
        return self.append(GateOp(CNOT, target, control=control))

    def count(self, kind: str) -> int:
        kind = _ALIASES.get(kind.upper(), kind.upper())
        return sum(1 for g in self.gates if g.kind == kind)

    def __len__(self):
        return len(self.gates)


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise QsimError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class ShotCounts:
    shots: int
    counts: dict[int, int]

    def frequencies(self, n_outcomes: int) -> np.ndarray:
        freq = np.zeros(n_outcomes)
        for b, c in self.counts.items():
            freq[b] = c
        return freq / self.shots


# -- array kernels ---------------------------------------------------------


def _single_qubit_matrix(kind, angle):
    """Entries (m00, m01, m10, m11) of a one-qubit gate; angle may be an array."""
    if kind == H:
        return _SQRT1_2, _SQRT1_2, _SQRT1_2, -_SQRT1_2
    half = np.asarray(angle, dtype=float) / 2.0
    if kind == RX:
        c, s = np.cos(half), -1j * np.sin(half)
        return c, s, s, c
    if kind == RZ:
        return np.exp(-1j * half), 0.0, 0.0, np.exp(1j * half)
    raise QsimError(f"{kind} is not a dense single-qubit gate")


def _expand(angle, n_rest):
    """Reshape a batch-shaped angle so it broadcasts over the remaining qubit axes."""
    a = np.asarray(angle)
    if a.ndim == 0:
        return a
    return a.reshape(a.shape + (1,) * n_rest)


def apply_gate_array(amps: np.ndarray, gate: GateOp, n_qubits: int) -> np.ndarray:
    """Apply ``gate`` to amplitude array(s) of shape (..., 2**n_qubits).

    Returns a new array; the input is left untouched.
    """
    batch = amps.shape[:-1]
    nb = len(batch)
    psi = amps.reshape(batch + (2,) * n_qubits).copy()
    t = nb + gate.target

    if gate.kind == CNOT:
        c = nb + gate.control
        # swap the target halves inside the control=1 slab
        idx1 = [slice(None)] * psi.ndim
        idx1[c] = 1
        idx1[t] = 0
        idx2 = list(idx1)
        idx2[t] = 1
        idx1, idx2 = tuple(idx1), tuple(idx2)
        tmp = psi[idx1].copy()
        psi[idx1] = psi[idx2]
        psi[idx2] = tmp
        return psi.reshape(amps.shape)

    lo = [slice(None)] * psi.ndim
    hi = [slice(None)] * psi.ndim
    lo[t] = 0
    hi[t] = 1
    lo, hi = tuple(lo), tuple(hi)

    if gate.kind == PHASE:
        psi[hi] = psi[hi] * np.exp(1j * _expand(gate.angle, n_qubits - 1))
        return psi.reshape(amps.shape)

    m00, m01, m10, m11 = (
        _expand(m, n_qubits - 1) for m in _single_qubit_matrix(gate.kind, gate.angle)
    )
    a0 = psi[lo].copy()
    a1 = psi[hi].copy()
    psi[lo] = m00 * a0 + m01 * a1
    psi[hi] = m10 * a0 + m11 * a1
    return psi.reshape(amps.shape)


def apply_gates_array(amps: np.ndarray, gates, n_qubits: int) -> np.ndarray:
    for g in gates:
        amps = apply_gate_array(amps, g, n_qubits)
    return amps


# -- public operations -----------------------------------------------------


def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    gate.check(state.n_qubits)
    if np.ndim(gate.angle) != 0:
        raise QsimError("apply_gate takes a scalar angle; use apply_gate_array for batches")
    return Statevector(state.n_qubits, apply_gate_array(state.amplitudes, gate, state.n_qubits))


def run_circuit(circuit: Circuit, initial: Statevector | None = None) -> Statevector:
    if initial is None:
        initial = Statevector.zero(circuit.n_qubits)
    if initial.n_qubits != circuit.n_qubits:
        raise QsimError(
            f"circuit acts on {circuit.n_qubits} qubits but the state has {initial.n_qubits}"
        )
    amps = initial.amplitudes
    for g in circuit.gates:
        g.check(circuit.n_qubits)
        amps = apply_gate_array(amps, g, circuit.n_qubits)
    return Statevector(circuit.n_qubits, amps)


def probabilities(state: Statevector | np.ndarray) -> np.ndarray:
    """Born-rule distribution over basis states (works on batched arrays too).

    Each distribution is divided by its sum, which strips the rounding drift
    of the squared amplitudes (e.g. (1/sqrt 2)^2 = 0.5000000000000001).
    """
    amps = state.amplitudes if isinstance(state, Statevector) else np.asarray(state)
    p = amps.real**2 + amps.imag**2
    return p / p.sum(axis=-1, keepdims=True)


def _draw(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    # inverse CDF; renormalising the last cdf entry keeps u < 1 inside the table
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    u = rng.random(shots)
    outcomes = np.searchsorted(cdf, u, side="right")
    return np.bincount(outcomes, minlength=len(probs))


def _check_probs(probs, shots):
    p = np.asarray(probs, dtype=float)
    if shots <= 0:
        raise QsimError(f"shots must be positive, got {shots}")
    if p.ndim != 1 or p.size == 0:
        raise QsimError("probability vector must be one-dimensional and nonempty")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise QsimError("probability vector must be nonnegative and sum to 1")
    return np.clip(p, 0.0, None)


def sample_counts_rng(probs, shots: int, rng: np.random.Generator) -> ShotCounts:
    """Like :func:`sample_counts` but draws from an existing generator."""
    p = _check_probs(probs, shots)
    hist = _draw(p, int(shots), rng)
    return ShotCounts(int(shots), {int(b): int(c) for b, c in enumerate(hist) if c})


def sample_counts(probs, shots: int, seed: int) -> ShotCounts:
    """Multinomial measurement record of ``shots`` repetitions.

    Draws come from numpy's PCG64 generator seeded with ``seed``, mapped to
    outcomes by inverse-CDF lookup, so identical (probs, shots, seed) give
    identical counts on every platform numpy supports.
    """
    return sample_counts_rng(probs, shots, np.random.default_rng(seed))


def expectation_z(state: Statevector, qubit: int) -> float:
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise QsimError(f"qubit {qubit} out of range for {n} qubits")
    p = probabilities(state)
    bit = (np.arange(2**n) >> (n - 1 - qubit)) & 1
    return float(np.sum(np.where(bit == 0, p, -p)))
