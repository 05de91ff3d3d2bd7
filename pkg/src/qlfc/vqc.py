"""Three-qubit variational classifier: feature map, ansatz, loss and gradients.

The model maps a window of three frequency deviations (Hz) to a probability
distribution over the eight computational basis states.  Class ``k`` of the
lookup table is identified with basis state ``k`` (big-endian, see qsim).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import qsim
from .errors import VqcError
from .qsim import CNOT, H, PHASE, RX, RZ, Circuit, GateOp

N_QUBITS = 3
N_OUTCOMES = 2**N_QUBITS
LINEAR_CHAIN = ((0, 1), (1, 2))

MODEL_SCHEMA = 1


@dataclass(frozen=True)
class FeatureMapSpec:
    full_scale_hz: float = 1.0
    repetitions: int = 1
    n_qubits: int = N_QUBITS

    def __post_init__(self):
        if not self.full_scale_hz > 0:
            raise VqcError("full_scale_hz must be positive")
        if self.repetitions < 1:
            raise VqcError("feature map needs at least one repetition")
        if self.n_qubits != N_QUBITS:
            raise VqcError(f"only {N_QUBITS}-qubit feature maps are supported")


@dataclass(frozen=True)
class AnsatzSpec:
    layers: int = 2
    entanglement: tuple[tuple[int, int], ...] = LINEAR_CHAIN
    n_qubits: int = N_QUBITS

    def __post_init__(self):
        if self.layers < 1:
            raise VqcError("ansatz needs at least one layer")
        object.__setattr__(self, "entanglement", tuple(tuple(p) for p in self.entanglement))
        for c, t in self.entanglement:
            if c == t or not (0 <= c < self.n_qubits and 0 <= t < self.n_qubits):
                raise VqcError(f"invalid entangling pair ({c}, {t})")

    @property
    def n_params(self) -> int:
        return self.layers * self.n_qubits * 2


@dataclass(frozen=True)
class Exact:
    """Evaluate the Born-rule distribution directly."""


@dataclass(frozen=True)
class Shots:
    """Estimate the distribution from ``shots`` seeded measurements."""

    shots: int
    seed: int = 0

    def __post_init__(self):
        if self.shots <= 0:
            raise VqcError("shots must be positive")


Backend = Exact | Shots


@dataclass
class VqcModel:
    feature_map: FeatureMapSpec = field(default_factory=FeatureMapSpec)
    ansatz: AnsatzSpec = field(default_factory=AnsatzSpec)
    params: np.ndarray | None = None
    n_classes: int = N_OUTCOMES
    seed: int = 0

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.ansatz, self.seed)
        self.params = np.asarray(self.params, dtype=float).copy()
        if self.params.shape != (self.ansatz.n_params,):
            raise VqcError(
                f"ansatz with {self.ansatz.layers} layers needs {self.ansatz.n_params} parameters,"
                f" got {self.params.size}"
            )
        if not np.all(np.isfinite(self.params)):
            raise VqcError("parameters must be finite")
        if not 1 <= self.n_classes <= N_OUTCOMES:
            raise VqcError(f"n_classes must lie in [1, {N_OUTCOMES}]")

    def with_params(self, theta) -> "VqcModel":
        return replace(self, params=np.asarray(theta, dtype=float))


def init_params(ansatz: AnsatzSpec, seed: int) -> np.ndarray:
    """Uniform draw in [-pi, pi] from a PCG64 generator seeded with ``seed``."""
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, ansatz.n_params)


# -- circuit construction --------------------------------------------------


def scaled_inputs(x, spec: FeatureMapSpec) -> np.ndarray:
    """Map Hz deviations to angles in [-pi, pi] by clamping at +-full_scale."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n_qubits:
        raise VqcError(f"feature window needs {spec.n_qubits} values, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise VqcError("feature window contains non-finite values")
    return np.pi * np.clip(x / spec.full_scale_hz, -1.0, 1.0)


def _feature_gates(xt: np.ndarray, spec: FeatureMapSpec) -> list[GateOp]:
    # xt[..., i] are the scaled angles; angles stay batch-shaped arrays
    gates = []
    for _ in range(spec.repetitions):
        for q in range(spec.n_qubits):
            gates.append(GateOp(H, q))
        for q in range(spec.n_qubits):
            gates.append(GateOp(PHASE, q, angle=2.0 * xt[..., q]))
        for i, j in LINEAR_CHAIN:
            gates.append(GateOp(CNOT, j, control=i))
            gates.append(GateOp(PHASE, j, angle=2.0 * (np.pi - xt[..., i]) * (np.pi - xt[..., j])))
            gates.append(GateOp(CNOT, j, control=i))
    return gates


def encode_features(x, spec: FeatureMapSpec) -> Circuit:
    xt = scaled_inputs(x, spec)
    if xt.ndim != 1:
        raise VqcError("encode_features takes a single window")
    gates = [replace(g, angle=float(g.angle)) if g.kind == PHASE else g for g in _feature_gates(xt, spec)]
    return Circuit(spec.n_qubits, gates)


def _ansatz_gates(theta: np.ndarray, spec: AnsatzSpec) -> list[GateOp]:
    # a 2-D theta (B, n_params) yields batch angles of shape (B, 1), one per parameter set
    if theta.ndim == 1:
        angle = lambda k: float(theta[k])  # noqa: E731
    else:
        angle = lambda k: theta[:, k, None]  # noqa: E731
    gates = []
    k = 0
    for _ in range(spec.layers):
        for q in range(spec.n_qubits):
            gates.append(GateOp(RX, q, angle=angle(k)))
            gates.append(GateOp(RZ, q, angle=angle(k + 1)))
            k += 2
        for c, t in spec.entanglement:
            gates.append(GateOp(CNOT, t, control=c))
    return gates


def build_ansatz(params, spec: AnsatzSpec) -> Circuit:
    theta = np.asarray(params, dtype=float)
    if theta.shape != (spec.n_params,):
        raise VqcError(f"expected {spec.n_params} ansatz parameters, got {theta.size}")
    return Circuit(spec.n_qubits, _ansatz_gates(theta, spec))


def full_circuit(model: VqcModel, x) -> Circuit:
    return encode_features(x, model.feature_map).extend(build_ansatz(model.params, model.ansatz))


# -- evaluation ------------------------------------------------------------


def feature_states(model: VqcModel, X) -> np.ndarray:
    """Amplitudes after the feature map for a batch of windows, shape (N, 8)."""
    xt = scaled_inputs(np.atleast_2d(X), model.feature_map)
    amps = np.zeros((xt.shape[0], N_OUTCOMES), dtype=np.complex128)
    amps[:, 0] = 1.0
    return qsim.apply_gates_array(amps, _feature_gates(xt, model.feature_map), N_QUBITS)


def ansatz_unitary(theta, spec: AnsatzSpec) -> np.ndarray:
    """8x8 matrix of the ansatz, built by pushing each basis vector through the gates."""
    theta = np.asarray(theta, dtype=float)
    cols = qsim.apply_gates_array(np.eye(N_OUTCOMES, dtype=np.complex128), _ansatz_gates(theta, spec), N_QUBITS)
    return cols.T


def ansatz_unitaries(thetas, spec: AnsatzSpec) -> np.ndarray:
    """Stack of ansatz matrices, shape (B, 8, 8), for parameter rows ``thetas``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    eye = np.broadcast_to(np.eye(N_OUTCOMES, dtype=np.complex128), (len(thetas), N_OUTCOMES, N_OUTCOMES))
    cols = qsim.apply_gates_array(np.ascontiguousarray(eye), _ansatz_gates(thetas, spec), N_QUBITS)
    return np.swapaxes(cols, -1, -2)


def _exact_from_states(model: VqcModel, states: np.ndarray, theta=None) -> np.ndarray:
    # one 8x8 product per batch is far cheaper than gate-by-gate evolution of N rows
    theta = model.params if theta is None else theta
    return qsim.probabilities(states @ ansatz_unitary(theta, model.ansatz).T)


def exact_evaluator(model: VqcModel) -> Callable[[np.ndarray], np.ndarray]:
    """Exact forward pass with the ansatz matrix built once, for repeated calls."""
    U = ansatz_unitary(model.params, model.ansatz)

    def evaluate(X):
        return qsim.probabilities(feature_states(model, X) @ U.T)

    return evaluate


def sample_distributions(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Replace each row of exact probabilities by empirical shot frequencies."""
    out = np.empty_like(probs)
    for i, p in enumerate(probs):
        out[i] = qsim.sample_counts_rng(p, shots, rng).frequencies(probs.shape[1])
    return out


def forward_batch(model: VqcModel, X, backend: Backend = Exact()) -> np.ndarray:
    probs = _exact_from_states(model, feature_states(model, X))
    if isinstance(backend, Shots):
        return sample_distributions(probs, backend.shots, np.random.default_rng(backend.seed))
    return probs


def forward(model: VqcModel, x, backend: Backend = Exact()) -> np.ndarray:
    """Distribution over the 8 basis outcomes for one window.

    ``Exact`` returns the Born probabilities; ``Shots(n, seed)`` returns the
    frequencies of an n-shot measurement record.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise VqcError("forward takes a single window; use forward_batch")
    return forward_batch(model, x[None, :], backend)[0]


def decide(probs: np.ndarray, n_classes: int) -> np.ndarray:
    """Argmax over the first ``n_classes`` outcomes; ties go to the lowest index."""
    return np.argmax(np.asarray(probs)[..., :n_classes], axis=-1)


def predict_class(model: VqcModel, x, backend: Backend = Exact()) -> int:
    return int(decide(forward(model, x, backend), model.n_classes))


def predict_batch(model: VqcModel, X, backend: Backend = Exact()) -> np.ndarray:
    return decide(forward_batch(model, X, backend), model.n_classes)


def expectation_values(model: VqcModel, x) -> np.ndarray:
    """Per-qubit <Z> of the evolved state; exposed for inspection only."""
    state = qsim.run_circuit(full_circuit(model, x))
    return np.array([qsim.expectation_z(state, q) for q in range(N_QUBITS)])


# -- loss and gradients ----------------------------------------------------


def as_arrays(dataset) -> tuple[np.ndarray, np.ndarray]:
    """Accept ``(X, y)`` arrays or an iterable of ``(window, class)`` pairs."""
    if isinstance(dataset, tuple) and len(dataset) == 2 and isinstance(dataset[0], np.ndarray):
        X, y = dataset
    else:
        pairs = list(dataset)
        if not pairs:
            raise VqcError("dataset is empty")
        X = np.array([p[0] for p in pairs], dtype=float)
        y = np.array([p[1] for p in pairs], dtype=int)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise VqcError("dataset is empty")
    if len(X) != len(y):
        raise VqcError("windows and targets differ in length")
    return X, y


def onehot(y: np.ndarray) -> np.ndarray:
    return np.eye(N_OUTCOMES)[y]


def _mse(probs: np.ndarray, Y: np.ndarray) -> float:
    return float(np.mean(np.sum((Y - probs) ** 2, axis=1)))


def loss(model: VqcModel, dataset) -> float:
    """Mean over samples of the squared distance between one-hot target and
    the exact output distribution."""
    X, y = as_arrays(dataset)
    return _mse(forward_batch(model, X), onehot(y))


class _Objective:
    """Feature states cached once; the ansatz is re-run per parameter vector."""

    def __init__(self, model: VqcModel, dataset):
        X, y = as_arrays(dataset)
        self.model = model
        self.states = feature_states(model, X)
        self.Y = onehot(y)

    def probs(self, theta):
        return _exact_from_states(self.model, self.states, theta)

    def loss(self, theta) -> float:
        return _mse(self.probs(theta), self.Y)

    def gradient(self, theta) -> tuple[float, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        n = theta.size
        shifts = (np.pi / 2) * np.eye(n)
        # rows: theta, then theta + pi/2 e_j, then theta - pi/2 e_j; evaluated in one batch
        U = ansatz_unitaries(np.vstack([theta, theta + shifts, theta - shifts]), self.model.ansatz)
        probs = qsim.probabilities(np.einsum("sj,bij->bsi", self.states, U))
        p = probs[0]
        dp = 0.5 * (probs[1 : n + 1] - probs[n + 1 :])
        resid = p - self.Y
        grad = np.mean(np.sum(2.0 * resid[None] * dp, axis=2), axis=1)
        return _mse(p, self.Y), grad


def parameter_shift_gradient(model: VqcModel, dataset) -> np.ndarray:
    """Exact gradient of :func:`loss` via the +-pi/2 shift rule.

    Each ansatz angle drives exactly one RX or RZ gate, whose generator has
    eigenvalues +-1/2, so d p_b / d theta_j = (p_b(theta_j + pi/2) - p_b(theta_j - pi/2)) / 2.
    """
    return _Objective(model, dataset).gradient(model.params)[1]


# -- SPSA ------------------------------------------------------------------


@dataclass(frozen=True)
class SpsaConfig:
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise VqcError("SPSA perturbation magnitude c must be positive")
        if not self.a > 0:
            raise VqcError("SPSA step size a must be positive")

    def gains(self, k: int) -> tuple[float, float]:
        return self.a / (k + 1 + self.A) ** self.alpha, self.c / (k + 1) ** self.gamma


def spsa_update(theta, objective: Callable[[np.ndarray], float], iteration: int, config: SpsaConfig) -> np.ndarray:
    """One simultaneous-perturbation step on an arbitrary objective.

    The Rademacher direction is drawn from a generator keyed on
    (config.seed, iteration), so a trajectory is reproducible step by step.
    """
    theta = np.asarray(theta, dtype=float)
    ak, ck = config.gains(iteration)
    rng = np.random.default_rng([config.seed, iteration])
    delta = rng.choice((-1.0, 1.0), size=theta.size)
    g = (objective(theta + ck * delta) - objective(theta - ck * delta)) / (2.0 * ck) * delta
    return theta - ak * g


def spsa_step(model: VqcModel, dataset, iteration: int, config: SpsaConfig, backend: Backend = Exact()) -> np.ndarray:
    X, y = as_arrays(dataset)
    Y = onehot(y)
    states = feature_states(model, X)

    if isinstance(backend, Shots):
        calls = iter(range(2))

        def objective(theta):
            rng = np.random.default_rng([backend.seed, iteration, next(calls)])
            p = sample_distributions(_exact_from_states(model, states, theta), backend.shots, rng)
            return _mse(p, Y)

    else:

        def objective(theta):
            return _mse(_exact_from_states(model, states, theta), Y)

    return spsa_update(model.params, objective, iteration, config)


# -- persistence -----------------------------------------------------------


def model_to_dict(model: VqcModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA,
        "kind": "vqc_model",
        "feature_map": {
            "n_qubits": model.feature_map.n_qubits,
            "full_scale_hz": model.feature_map.full_scale_hz,
            "repetitions": model.feature_map.repetitions,
        },
        "ansatz": {
            "layers": model.ansatz.layers,
            "entanglement": [list(p) for p in model.ansatz.entanglement],
        },
        "theta": [float(t) for t in model.params],
        "n_classes": model.n_classes,
        "seed": model.seed,
    }


def model_from_dict(doc: dict) -> VqcModel:
    if doc.get("kind") != "vqc_model" or doc.get("schema_version") != MODEL_SCHEMA:
        raise VqcError("not a version-1 vqc_model document")
    try:
        fm = FeatureMapSpec(**doc["feature_map"])
        an = doc["ansatz"]
        ansatz = AnsatzSpec(layers=an["layers"], entanglement=tuple(tuple(p) for p in an["entanglement"]))
        return VqcModel(fm, ansatz, np.array(doc["theta"], dtype=float), doc["n_classes"], doc.get("seed", 0))
    except (KeyError, TypeError) as exc:
        raise VqcError(f"malformed model document: {exc}") from exc


def save_model(model: VqcModel, path) -> None:
    from .io import write_json

    write_json(path, model_to_dict(model))


def load_model(path) -> VqcModel:
    from .io import read_json

    return model_from_dict(read_json(path))
