"""Expert labelling: exhaustive PI-gain search, lookup table, replay memory.

The expert simulates every event under every (Kp, Ki) cell of a grid and
keeps the cheapest cell.  Distinct winners become lookup-table classes
(most frequent first, at most eight); each event is then labelled with the
cheapest surviving class, and the frequency trajectory it produces under
that class is cut into three-sample windows for supervised training.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ExpertError
from .io import read_json, write_csv, write_json
from .plant import LoadEvent, PiGains, PlantParams, response_cost, simulate

MAX_CLASSES = 8
SCHEMA_VERSION = 1
COSTS = ("ISE", "ITAE")


@dataclass(frozen=True)
class GainGrid:
    kp_values: tuple[float, ...] = (0.1, 0.3, 0.5, 1.0, 2.0)
    ki_values: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 5.0)

    def __post_init__(self):
        kp = tuple(float(v) for v in self.kp_values)
        ki = tuple(float(v) for v in self.ki_values)
        for name, vals in (("kp_values", kp), ("ki_values", ki)):
            if not vals:
                raise ExpertError(f"{name} must be nonempty")
            if any(v < 0 for v in vals):
                raise ExpertError(f"{name} must be nonnegative")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ExpertError(f"{name} must be strictly ascending")
        object.__setattr__(self, "kp_values", kp)
        object.__setattr__(self, "ki_values", ki)

    def cells(self) -> list[PiGains]:
        """Every (Kp, Ki) pair, Kp-major."""
        return [PiGains(kp, ki) for kp in self.kp_values for ki in self.ki_values]

    def __len__(self):
        return len(self.kp_values) * len(self.ki_values)


@dataclass(frozen=True)
class LookupTable:
    entries: tuple[PiGains, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if not 1 <= len(entries) <= MAX_CLASSES:
            raise ExpertError(f"lookup table needs 1..{MAX_CLASSES} entries, got {len(entries)}")
        if len(set(e.as_tuple() for e in entries)) != len(entries):
            raise ExpertError("lookup table entries must be distinct")
        object.__setattr__(self, "entries", entries)

    @property
    def n_classes(self) -> int:
        return len(self.entries)

    def __getitem__(self, k: int) -> PiGains:
        return self.entries[k]

    def __len__(self):
        return len(self.entries)

    def index(self, gains: PiGains) -> int:
        return [e.as_tuple() for e in self.entries].index(gains.as_tuple())

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "lookup_table",
            "entries": [{"class": k, "Kp": g.Kp, "Ki": g.Ki} for k, g in enumerate(self.entries)],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LookupTable":
        _check_doc(doc, "lookup_table")
        rows = sorted(doc["entries"], key=lambda r: r["class"])
        return cls(tuple(PiGains(r["Kp"], r["Ki"]) for r in rows))


@dataclass(frozen=True)
class ReplaySample:
    window: tuple[float, float, float]
    target_class: int
    event_id: int
    sample_time: float


@dataclass
class ReplayMemory:
    samples: list[ReplaySample]
    table: LookupTable
    events: list[LoadEvent]
    labels: dict[int, int]
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.samples:
            if not 0 <= s.target_class < self.table.n_classes:
                raise ExpertError(f"sample of event {s.event_id} has invalid class {s.target_class}")

    def __len__(self):
        return len(self.samples)

    @property
    def event_ids(self) -> list[int]:
        return sorted({s.event_id for s in self.samples})

    def event(self, event_id: int) -> LoadEvent:
        for ev in self.events:
            if ev.id == event_id:
                return ev
        raise ExpertError(f"no event with id {event_id}")

    def arrays(self, event_ids=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(windows, classes, event ids) restricted to ``event_ids`` if given."""
        keep = None if event_ids is None else set(int(e) for e in event_ids)
        rows = [s for s in self.samples if keep is None or s.event_id in keep]
        X = np.array([s.window for s in rows], dtype=float).reshape(-1, 3)
        y = np.array([s.target_class for s in rows], dtype=int)
        e = np.array([s.event_id for s in rows], dtype=int)
        return X, y, e

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "replay_memory",
            "config": self.config,
            "table": self.table.to_dict(),
            "events": [
                {"id": ev.id, "steps": [list(s) for s in ev.steps], "class": self.labels[ev.id]}
                for ev in self.events
            ],
            "samples": [
                {
                    "event_id": s.event_id,
                    "sample_time": s.sample_time,
                    "window": list(s.window),
                    "target_class": s.target_class,
                }
                for s in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReplayMemory":
        _check_doc(doc, "replay_memory")
        try:
            events = [LoadEvent(e["id"], tuple(tuple(s) for s in e["steps"])) for e in doc["events"]]
            labels = {int(e["id"]): int(e["class"]) for e in doc["events"]}
            samples = [
                ReplaySample(tuple(s["window"]), int(s["target_class"]), int(s["event_id"]), float(s["sample_time"]))
                for s in doc["samples"]
            ]
            return cls(samples, LookupTable.from_dict(doc["table"]), events, labels, doc.get("config", {}))
        except (KeyError, TypeError) as exc:
            raise ExpertError(f"malformed replay memory document: {exc}") from exc

    def save(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path) -> "ReplayMemory":
        return cls.from_dict(read_json(path))

    def samples_csv(self, path) -> None:
        rows = (
            (s.event_id, s.sample_time, *s.window, s.target_class)
            for s in self.samples
        )
        write_csv(path, ("event_id", "sample_time", "df_t-3_hz", "df_t-2_hz", "df_t-1_hz", "target_class"), rows)


def _check_doc(doc, kind):
    if not isinstance(doc, dict) or doc.get("kind") != kind:
        raise ExpertError(f"document is not a {kind}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ExpertError(f"unsupported {kind} schema_version {doc.get('schema_version')!r}")


# -- event catalog ---------------------------------------------------------


def event_catalog(magnitudes=None, step_times=(10.0, 21.0)) -> list[LoadEvent]:
    """Single steps at each time, then one paired event per magnitude.

    The paired event applies the same magnitude at both times, so the total
    load after the second step is twice the magnitude.  Ids follow list order.
    """
    if magnitudes is None:
        magnitudes = np.round(np.linspace(0.05, 0.40, 26), 4)
    mags = [float(m) for m in magnitudes]
    shapes = [[(t, m)] for t in step_times for m in mags]
    shapes += [[(t, m) for t in step_times] for m in mags]
    return [LoadEvent(i, tuple(s)) for i, s in enumerate(shapes)]


# -- search ----------------------------------------------------------------


def _cost_of(gains, event, p, cost, duration, dt):
    try:
        v = response_cost(p, gains, event, duration, dt, cost)
    except DivergenceError:
        return np.inf
    return v if np.isfinite(v) else np.inf


def _check_cost(cost):
    cost = cost.upper()
    if cost not in COSTS:
        raise ExpertError(f"cost must be one of {COSTS}, got {cost!r}")
    return cost


def gain_costs(event: LoadEvent, cells, p: PlantParams, cost="ISE", duration=60.0, dt=1e-3) -> np.ndarray:
    """Cost of ``event`` under each gain pair; divergent runs cost +inf."""
    cost = _check_cost(cost)
    return np.array([_cost_of(g, event, p, cost, duration, dt) for g in cells])


def _best(cells, costs):
    # cheapest; exact ties go to lower Ki, then lower Kp
    order = sorted(range(len(cells)), key=lambda k: (costs[k], cells[k].Ki, cells[k].Kp))
    return order[0]


def grid_search(event: LoadEvent, grid: GainGrid, p: PlantParams, cost="ISE", duration=60.0, dt=1e-3):
    """Exhaustive search; returns (best PiGains, its cost)."""
    cells = grid.cells()
    costs = gain_costs(event, cells, p, cost, duration, dt)
    if not np.any(np.isfinite(costs)):
        raise ExpertError(f"every grid cell is unstable for event {event.id}")
    k = _best(cells, costs)
    return cells[k], float(costs[k])


def cost_matrix(events, grid: GainGrid, p: PlantParams, cost="ISE", duration=60.0, dt=1e-3) -> np.ndarray:
    """(n_events, n_cells) costs, cells in :meth:`GainGrid.cells` order."""
    cells = grid.cells()
    return np.array([gain_costs(ev, cells, p, cost, duration, dt) for ev in events])


def table_from_costs(grid: GainGrid, costs: np.ndarray, max_classes: int = MAX_CLASSES) -> LookupTable:
    """Rank each event's optimal cell by how often it wins and keep the top ones.

    Cells that win equally often keep the order in which they first win
    (catalog order), as Counter.most_common does.
    """
    if not 1 <= max_classes <= MAX_CLASSES:
        raise ExpertError(f"max_classes must lie in [1, {MAX_CLASSES}]")
    cells = grid.cells()
    winners = []
    for e, row in enumerate(costs):
        if not np.any(np.isfinite(row)):
            raise ExpertError(f"every grid cell is unstable for event index {e}")
        winners.append(_best(cells, row))
    ranked = [k for k, _ in Counter(winners).most_common(max_classes)]
    return LookupTable(tuple(cells[k] for k in ranked))


def build_lookup_table(events, grid: GainGrid, p: PlantParams, max_classes: int = MAX_CLASSES,
                       cost="ISE", duration=60.0, dt=1e-3) -> LookupTable:
    if not events:
        raise ExpertError("need at least one event")
    return table_from_costs(grid, cost_matrix(events, grid, p, cost, duration, dt), max_classes)


def labels_from_costs(events, grid: GainGrid, costs: np.ndarray, table: LookupTable) -> dict[int, int]:
    """Same labelling as :func:`assign_classes`, read off a precomputed cost matrix."""
    keys = [c.as_tuple() for c in grid.cells()]
    try:
        cols = [keys.index(g.as_tuple()) for g in table.entries]
    except ValueError as exc:
        raise ExpertError("lookup table holds gains that are not grid cells") from exc
    labels = {}
    for i, ev in enumerate(events):
        row = np.asarray(costs[i, cols], dtype=float)
        if not np.any(np.isfinite(row)):
            raise ExpertError(f"every table entry is unstable for event {ev.id}")
        labels[ev.id] = _best(list(table.entries), row)
    return labels


def assign_classes(events, table: LookupTable, p: PlantParams, cost="ISE", duration=60.0, dt=1e-3) -> dict[int, int]:
    """Label each event with its cheapest table entry.

    An event whose grid optimum survived in the table gets that class; the
    others fall back to the least-cost surviving entry.
    """
    labels = {}
    for ev in events:
        costs = gain_costs(ev, table.entries, p, cost, duration, dt)
        if not np.any(np.isfinite(costs)):
            raise ExpertError(f"every table entry is unstable for event {ev.id}")
        labels[ev.id] = _best(list(table.entries), costs)
    return labels


def sample_schedule(event: LoadEvent, sampling_period=0.1, capture_offset=0.0, capture_duration=1.0) -> np.ndarray:
    """Sample instants of the capture interval that starts ``capture_offset``
    after the event's first load step."""
    if not sampling_period > 0 or not capture_duration > 0:
        raise ExpertError("sampling period and capture duration must be positive")
    n = int(round(capture_duration / sampling_period))
    if n < 3:
        raise ExpertError("capture interval must hold at least 3 samples")
    start = event.onset + capture_offset
    return start + sampling_period * np.arange(n)


def windows_from_series(t, delta_f_hz, times) -> np.ndarray:
    """Three-sample sliding windows of the series at the given instants."""
    dt = t[1] - t[0]
    idx = np.rint((np.asarray(times) - t[0]) / dt).astype(int)
    if idx.min() < 0 or idx.max() >= len(t):
        raise ExpertError("capture interval lies outside the simulation horizon")
    if not np.allclose(t[idx], times, atol=1e-9 + 1e-6 * dt):
        raise ExpertError("sample instants must fall on integration steps")
    s = np.asarray(delta_f_hz)[idx]
    return np.lib.stride_tricks.sliding_window_view(s, 3).copy()


def generate_replay(events, table: LookupTable, labels: dict[int, int], p: PlantParams,
                    sampling_period=0.1, capture_offset=0.0, capture_duration=1.0,
                    duration=60.0, dt=1e-3, config=None) -> ReplayMemory:
    """Simulate every event under its labelled gains and window the response.

    Each window holds the deviations (Hz) at three consecutive sample
    instants; its ``sample_time`` is the instant of the newest sample.
    """
    samples = []
    for ev in events:
        if ev.id not in labels:
            raise ExpertError(f"event {ev.id} has no class label")
        cls = labels[ev.id]
        times = sample_schedule(ev, sampling_period, capture_offset, capture_duration)
        if times[-1] > duration:
            raise ExpertError(f"capture interval of event {ev.id} ends after the horizon")
        res = simulate(p, table[cls], ev, duration, dt)
        wins = windows_from_series(res.t, res.delta_f * p.f_base, times)
        for k, w in enumerate(wins):
            samples.append(ReplaySample(tuple(float(v) for v in w), cls, ev.id, float(round(times[k + 2], 9))))
    return ReplayMemory(samples, table, list(events), dict(labels), dict(config or {}))
