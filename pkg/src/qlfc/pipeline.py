"""Pipeline stages behind the CLI; each reads and writes files in a directory.

Layout::

    data/   replay_memory.json lookup_table.json samples.csv expert_costs.csv config.json
    model/  model.json loss.csv split.json
    out/    eval.json accuracy.csv accuracy_summary.csv heatmap.csv
            closed_loop_event<id>.csv decisions_event<id>.csv closed_loop_event<id>.json
            compare_event<id>.csv compare_event<id>.json fleet_stats.json
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import expert, harness, trainer, vqc
from .config import PipelineConfig
from .errors import ArtifactError
from .io import read_csv, read_json, write_csv, write_json

MEMORY_FILE = "replay_memory.json"
TABLE_FILE = "lookup_table.json"
MODEL_FILE = "model.json"
SPLIT_FILE = "split.json"
CONFIG_FILE = "config.json"


def _need(path: Path) -> Path:
    if not path.is_file():
        raise ArtifactError(f"missing input artifact: {path}")
    return path


def resolve_config(config_path, data_dir=None, seed=None) -> PipelineConfig:
    """Explicit config file, else the copy saved next to the data, else defaults."""
    if config_path is not None:
        cfg = PipelineConfig.load(config_path)
    elif data_dir is not None and (Path(data_dir) / CONFIG_FILE).is_file():
        cfg = PipelineConfig.load(Path(data_dir) / CONFIG_FILE)
    else:
        cfg = PipelineConfig.default()
    return cfg.with_seed(seed)


def _sim(cfg):
    s = cfg["simulation"]
    return s["duration"], s["dt"]


# -- gen-data --------------------------------------------------------------


def gen_data(cfg: PipelineConfig, out_dir) -> expert.ReplayMemory:
    out = Path(out_dir)
    p, grid, events = cfg.plant_params(), cfg.grid(), cfg.events()
    duration, dt = _sim(cfg)
    e = cfg["expert"]
    costs = expert.cost_matrix(events, grid, p, e["cost"], duration, dt)
    table = expert.table_from_costs(grid, costs, e["max_classes"])
    labels = expert.labels_from_costs(events, grid, costs, table)
    memory = expert.generate_replay(
        events, table, labels, p,
        sampling_period=e["sampling_period"],
        capture_offset=e["capture_offset"],
        capture_duration=e["capture_duration"],
        duration=duration, dt=dt, config=cfg.doc,
    )
    memory.save(out / MEMORY_FILE)
    write_json(out / TABLE_FILE, table.to_dict())
    memory.samples_csv(out / "samples.csv")
    cells = grid.cells()
    rows = ((ev.id, c.Kp, c.Ki, costs[i, j]) for i, ev in enumerate(events) for j, c in enumerate(cells))
    write_csv(out / "expert_costs.csv", ("event_id", "Kp", "Ki", e["cost"]), rows)
    write_json(out / CONFIG_FILE, cfg.doc)
    return memory


def load_memory(data_dir) -> expert.ReplayMemory:
    return expert.ReplayMemory.load(_need(Path(data_dir) / MEMORY_FILE))


# -- train / eval / sweep --------------------------------------------------


@dataclass
class TrainOutcome:
    model: vqc.VqcModel
    history: list[float]
    train_set: trainer.Dataset
    test_set: trainer.Dataset


def train_stage(cfg: PipelineConfig, data_dir, out_dir) -> TrainOutcome:
    memory = load_memory(data_dir)
    train_set, test_set = trainer.split_dataset(memory, cfg["training"]["n_test_events"], cfg.seed)
    model, history, _ = trainer.train_restarts(
        cfg.model(memory.table.n_classes), train_set, cfg.train_config(), cfg["training"]["restarts"]
    )
    out = Path(out_dir)
    vqc.save_model(model, out / MODEL_FILE)
    trainer.write_loss_csv(out / "loss.csv", history)
    write_json(out / SPLIT_FILE, {"train_events": train_set.events, "test_events": test_set.events})
    return TrainOutcome(model, history, train_set, test_set)


def load_model(model_dir) -> vqc.VqcModel:
    return vqc.load_model(_need(Path(model_dir) / MODEL_FILE))


def test_events(model_dir) -> list[int]:
    return [int(e) for e in read_json(_need(Path(model_dir) / SPLIT_FILE))["test_events"]]


def test_set(memory: expert.ReplayMemory, model_dir) -> trainer.Dataset:
    ids = test_events(model_dir)
    X, y, e = memory.arrays(ids)
    if len(X) == 0:
        raise ArtifactError("split document names no events present in the replay memory")
    return trainer.Dataset(X, y, e)


def eval_stage(cfg: PipelineConfig, data_dir, model_dir, out_dir) -> dict:
    memory, model = load_memory(data_dir), load_model(model_dir)
    ts = test_set(memory, model_dir)
    doc = {
        "exact_accuracy": trainer.evaluate_accuracy(model, ts, None),
        "n_test_samples": len(ts),
        "event_correct": {str(k): v for k, v in trainer.event_correct(model, ts).items()},
    }
    write_json(Path(out_dir) / "eval.json", doc)
    return doc


def sweep_stage(cfg: PipelineConfig, data_dir, model_dir, out_dir):
    memory, model = load_memory(data_dir), load_model(model_dir)
    ts = test_set(memory, model_dir)
    ev = cfg["evaluation"]
    reports = trainer.shots_sweep(model, ts, ev["shots"], ev["runs"], cfg.seed)
    grids = trainer.event_heatmap(model, ts, ev["shots"], ev["runs"], cfg.seed)
    out = Path(out_dir)
    trainer.write_accuracy_csv(out / "accuracy.csv", reports)
    exact = trainer.evaluate_accuracy(model, ts, None)
    trainer.write_accuracy_summary_csv(out / "accuracy_summary.csv", reports, exact)
    trainer.write_heatmap_csv(out / "heatmap.csv", grids)
    return reports, grids, exact


# -- closed loop -----------------------------------------------------------


def _event_ids(spec, model_dir) -> list[int]:
    if str(spec) == "test":
        return test_events(model_dir)
    return [int(spec)]


def simulate_stage(cfg: PipelineConfig, data_dir, model_dir, out_dir, event="test") -> list[harness.ClosedLoopResult]:
    memory, model = load_memory(data_dir), load_model(model_dir)
    duration, dt = _sim(cfg)
    d = cfg["deploy"]
    out = Path(out_dir)
    results = []
    for eid in _event_ids(event, model_dir):
        dep = harness.DeployConfig(
            model, memory.table, memory.event(eid), cfg.plant_params(), cfg.deploy_backend(),
            d["update_period"], cfg["expert"]["sampling_period"], duration, dt,
        )
        cl = harness.closed_loop_simulate(dep)
        cl.result.to_csv(out / f"closed_loop_event{eid}.csv", d["decimate"])
        cl.decisions_csv(out / f"decisions_event{eid}.csv")
        write_json(out / f"closed_loop_event{eid}.json", {"event_id": eid, **cl.result.metrics.as_dict()})
        results.append(cl)
    return results


def compare_stage(cfg: PipelineConfig, data_dir, out_dir, event) -> list[harness.Comparison]:
    memory = load_memory(data_dir)
    duration, dt = _sim(cfg)
    out = Path(out_dir)
    ids = memory.event_ids if str(event) == "all" else [int(event)]
    comps = []
    for eid in ids:
        c = harness.compare_optimal_suboptimal(
            memory.event(eid), memory.table, cfg.plant_params(), cfg["expert"]["cost"], duration, dt,
            optimal_class=memory.labels[eid],
        )
        write_json(out / f"compare_event{eid}.json", c.to_dict())
        c.series_csv(out / f"compare_event{eid}.csv", cfg["deploy"]["decimate"])
        comps.append(c)
    return comps


_SERIES = re.compile(r"closed_loop_event(\d+)\.csv$")


def stats_stage(in_dir, pm_offset: float = harness.PM_OFFSET) -> harness.FleetStats:
    """Fleet statistics over every exported closed-loop series in ``in_dir``."""
    d = Path(in_dir)
    files = sorted((p for p in d.glob("closed_loop_event*.csv") if _SERIES.search(p.name)),
                   key=lambda p: int(_SERIES.search(p.name).group(1)))
    if not files:
        raise ArtifactError(f"no closed_loop_event*.csv series in {d}")
    f_parts, pm_parts = [], []
    for path in files:
        rows = read_csv(path)
        f_parts.append(np.array([float(r["f_hz"]) for r in rows]))
        pm_parts.append(np.array([float(r["P_m_pu"]) for r in rows]))
    stats = harness.fleet_stats_from_arrays(f_parts, pm_parts, pm_offset)
    write_json(d / "fleet_stats.json", stats.to_dict())
    return stats
