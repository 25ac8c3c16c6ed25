"""Command-line entry point: ingest, cluster, train, eval, interpret.

Configuration is an INI file with sections ``run``, ``data``, ``cluster``,
``encoder``, ``train``, ``task`` and ``spectral``. Relative paths resolve
against the config file's directory. Precedence: command-line flags override
config values, which override built-in defaults.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import dyngraph as dg
from .cluster import ClusterModel, fit_clusters, save_clusters, structural_features
from .encoder import EncoderConfig
from .learn import (
    LinkTask,
    NodeTask,
    TaskModel,
    TaskSpec,
    TrafficTask,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
    write_epoch_log,
    write_reports,
)
from .spectral import SpectralBasis, build_laplacian, energy_profile, inter_perturb, intra_perturb, nystrom_eig, parse_band

logger = logging.getLogger("ctgraph")

EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 1, 2, 3

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {"task": "link", "seed": "0", "out": "run"},
    "data": {
        "events": "", "features": "", "edges": "", "labels": "", "readings": "",
        "n_nodes": "", "t_split": "", "horizon": "",
    },
    "cluster": {"k": "8", "features": "auto", "max_iter": "100"},
    "encoder": {
        "dim": "32", "layers": "1", "heads": "1", "variant": "SA",
        "intensity": "true", "temporal_encoding": "true", "negative_slope": "0.2",
    },
    "train": {
        "lr": "0.001", "epochs": "50", "batch_size": "32", "mask_ratio": "0.2",
        "integrator": "trapezoid", "mc_samples": "5", "patience": "10",
        "decay_every": "10", "decay": "0.9", "masking": "cam", "weight_decay": "0",
    },
    "task": {
        "gamma": "0.1", "split": "", "max_len": "50", "tpp_events": "16", "ks": "10",
        "window": "12", "horizons": "3,6,9", "train_horizons": "", "time_scale": "",
    },
    "spectral": {
        "graph": "", "predictions": "", "predictions2": "", "truth": "", "kind": "",
        "mode": "intra", "band": "", "freq_above": "", "s": "", "r": "", "p": "10", "q": "3",
        "spectrum_end": "low", "power": "A",
    },
}
PATH_FIELDS = {
    ("data", "events"), ("data", "features"), ("data", "edges"), ("data", "labels"), ("data", "readings"),
    ("spectral", "graph"), ("spectral", "predictions"), ("spectral", "predictions2"), ("spectral", "truth"),
}
DEFAULT_SPLITS = {"link": "0.8,0.1,0.1", "node": "", "traffic": "0.7,0.1,0.2"}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


class UsageError(Exception):
    pass


def sub_seed(seed: int, label: str) -> int:
    """Independent per-module seed derived from the run seed and a module label."""
    return int(np.random.SeedSequence([seed, zlib.crc32(label.encode())]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    values: dict[str, dict[str, str]]
    source: Path | None = None

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def path(self, section: str, key: str) -> Path | None:
        v = self.get(section, key)
        return Path(v) if v else None

    @property
    def task(self) -> str:
        return self.get("run", "task")

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    @property
    def out(self) -> Path:
        return Path(self.get("run", "out"))

    def write(self, path: Path) -> None:
        cp = configparser.ConfigParser(interpolation=None)
        for sec in DEFAULTS:
            cp[sec] = dict(self.values[sec])
        with open(path, "w") as fh:
            cp.write(fh)


def load_config(path: str | Path | None, overrides: dict[tuple[str, str], str] | None = None) -> RunConfig:
    values = {sec: dict(d) for sec, d in DEFAULTS.items()}
    base = Path.cwd()
    problems = []
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([f"config file {path} does not exist"])
        cp = configparser.ConfigParser(interpolation=None)
        cp.read(path)
        base = path.resolve().parent
        for sec in cp.sections():
            if sec not in values:
                problems.append(f"[{sec}] unknown section")
                continue
            for k, v in cp[sec].items():
                if k not in values[sec]:
                    problems.append(f"[{sec}] {k}: unknown field")
                else:
                    values[sec][k] = v.strip()
    for (sec, k), v in (overrides or {}).items():
        values[sec][k] = v
    for sec, k in PATH_FIELDS:
        if values[sec][k]:
            values[sec][k] = str((base / values[sec][k]).resolve())
    out = Path(values["run"]["out"])
    values["run"]["out"] = str(out if out.is_absolute() else (base / out).resolve())
    if not values["task"]["split"]:
        values["task"]["split"] = DEFAULT_SPLITS.get(values["run"]["task"], "")
    if problems:
        raise ConfigError(problems)
    return RunConfig(values, path)


def _check(problems, cond, msg):
    if not cond:
        problems.append(msg)


def _typed(problems, cfg: RunConfig, sec: str, key: str, kind, allow_empty=False):
    raw = cfg.get(sec, key)
    if raw == "" and allow_empty:
        return None
    try:
        if kind is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return raw.lower() in ("true", "1", "yes")
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "ints":
            return tuple(int(x) for x in raw.split(",") if x.strip())
        return kind(raw)
    except ValueError:
        problems.append(f"[{sec}] {key}: cannot parse {raw!r}")
        return None


def validate(cfg: RunConfig, command: str) -> None:
    """Collect every invalid field before reporting."""
    p: list[str] = []
    task = cfg.task
    _check(p, task in ("link", "node", "traffic"), f"[run] task: must be link, node or traffic, got {task!r}")
    _typed(p, cfg, "run", "seed", int)
    for key in ("k", "max_iter"):
        v = _typed(p, cfg, "cluster", key, int)
        _check(p, v is None or v >= 1, f"[cluster] {key}: must be >= 1")
    _check(p, cfg.get("cluster", "features") in ("auto", "node", "structural", "profile"),
           "[cluster] features: must be auto, node, structural or profile")
    for key in ("dim", "layers", "heads"):
        v = _typed(p, cfg, "encoder", key, int)
        _check(p, v is None or v >= 1, f"[encoder] {key}: must be >= 1")
    _check(p, cfg.get("encoder", "variant") in ("SA", "GAT", "GATv2"), "[encoder] variant: must be SA, GAT or GATv2")
    for key in ("intensity", "temporal_encoding"):
        _typed(p, cfg, "encoder", key, bool)
    _typed(p, cfg, "encoder", "negative_slope", float)
    for key, kind in (("lr", float), ("epochs", int), ("batch_size", int), ("mask_ratio", float), ("mc_samples", int),
                      ("patience", int), ("decay_every", int), ("decay", float), ("weight_decay", float)):
        _typed(p, cfg, "train", key, kind)
    _check(p, cfg.get("train", "integrator") in ("trapezoid", "mc"), "[train] integrator: must be trapezoid or mc")
    _check(p, cfg.get("train", "masking") in ("cam", "special", "none"), "[train] masking: must be cam, special or none")
    g = _typed(p, cfg, "task", "gamma", float)
    _check(p, g is None or g >= 0, "[task] gamma: must be >= 0")
    for key in ("max_len", "tpp_events", "window"):
        _typed(p, cfg, "task", key, int)
    for key in ("ks", "horizons", "train_horizons"):
        _typed(p, cfg, "task", key, "ints", allow_empty=True)
    _typed(p, cfg, "task", "split", "floats", allow_empty=True)
    _typed(p, cfg, "task", "time_scale", float, allow_empty=True)
    _typed(p, cfg, "data", "n_nodes", int, allow_empty=True)
    _typed(p, cfg, "data", "horizon", float, allow_empty=True)
    _typed(p, cfg, "data", "t_split", "floats", allow_empty=True)
    if command in ("ingest", "cluster", "train", "eval"):
        need = {"link": ["events"], "node": ["events", "labels"], "traffic": ["readings", "edges"]}.get(task, [])
        for key in need:
            _check(p, bool(cfg.get("data", key)), f"[data] {key}: required for the {task} task")
    if command == "interpret":
        _check(p, bool(cfg.get("spectral", "graph")), "[spectral] graph: required")
        _check(p, cfg.get("spectral", "mode") in ("intra", "inter"), "[spectral] mode: must be intra or inter")
        _check(p, cfg.get("spectral", "spectrum_end") in ("low", "high"), "[spectral] spectrum_end: must be low or high")
        for key in ("s", "r", "p", "q"):
            _typed(p, cfg, "spectral", key, int, allow_empty=True)
        _typed(p, cfg, "spectral", "freq_above", float, allow_empty=True)
        if cfg.get("spectral", "mode") == "inter":
            _check(p, bool(cfg.get("spectral", "predictions2")), "[spectral] predictions2: required for inter mode")
    for sec, key in sorted(PATH_FIELDS):
        v = cfg.get(sec, key)
        if v and v != "identity" and not Path(v).exists():
            p.append(f"[{sec}] {key}: path {v} does not exist")
    if p:
        raise ConfigError(p)


# ---------------------------------------------------------------------------
# pipeline stages


@dataclass
class Dataset:
    kind: str
    graph: dg.DynamicGraph | None = None
    labels: np.ndarray | None = None
    timestamps: np.ndarray | None = None
    readings: np.ndarray | None = None
    road_edges: np.ndarray | None = None


def ingest(cfg: RunConfig) -> Dataset:
    if cfg.task == "traffic":
        ts, readings = dg.load_readings(cfg.get("data", "readings"))
        edges = dg.load_edges(cfg.get("data", "edges"))
        return Dataset("traffic", timestamps=ts, readings=readings, road_edges=edges)
    n_nodes = int(cfg.get("data", "n_nodes")) if cfg.get("data", "n_nodes") else None
    edges = dg.load_edges(cfg.get("data", "edges")) if cfg.get("data", "edges") else None
    g = dg.load_events(cfg.get("data", "events"), n_nodes=n_nodes, initial_edges=edges)
    feat_path = cfg.get("data", "features")
    if feat_path:
        g = g.with_features(dg.load_features(feat_path))
    elif cfg.task == "link":
        g = g.with_features(np.eye(g.n_nodes))
    labels = None
    if cfg.task == "node":
        labels = np.loadtxt(cfg.get("data", "labels"), delimiter=",", skiprows=1, dtype=np.int64, ndmin=1)
        if len(labels) != g.n_nodes:
            raise ConfigError([f"[data] labels: expected {g.n_nodes} rows, got {len(labels)}"])
    return Dataset(cfg.task, graph=g, labels=labels)


def cluster_features(cfg: RunConfig, data: Dataset) -> np.ndarray:
    mode = cfg.get("cluster", "features")
    if data.kind == "traffic":
        x = data.readings[..., 0] if data.readings.ndim == 3 else data.readings
        n_train = int(round(float(cfg.get("task", "split").split(",")[0]) * len(x)))
        hours = dg.hour_of_day(data.timestamps[:n_train])
        prof = np.stack([x[:n_train][hours == h].mean(0) if np.any(hours == h) else x[:n_train].mean(0) for h in range(24)], 1)
        return prof
    g = data.graph
    if mode == "node" or (mode == "auto" and cfg.task == "node" and g.features.shape[1] > 0):
        return g.features
    return structural_features(g.n_nodes, g.events.u, g.events.v, g.events.t)


def cluster(cfg: RunConfig, data: Dataset) -> ClusterModel:
    x = cluster_features(cfg, data)
    k = min(int(cfg.get("cluster", "k")), len(x))
    return fit_clusters(x, k, seed=sub_seed(cfg.seed, "cluster"), max_iter=int(cfg.get("cluster", "max_iter")))


def build_task(cfg: RunConfig, data: Dataset, assignment: np.ndarray):
    gamma = float(cfg.get("task", "gamma"))
    ts = cfg.get("task", "time_scale")
    time_scale = float(ts) if ts else None
    split = tuple(float(x) for x in cfg.get("task", "split").split(",")) if cfg.get("task", "split") else None
    tpp_events = int(cfg.get("task", "tpp_events"))
    if data.kind == "link":
        return LinkTask.from_graph(
            data.graph, assignment, seed=sub_seed(cfg.seed, "split"), split=split, time_scale=time_scale,
            gamma=gamma, max_len=int(cfg.get("task", "max_len")),
            ks=tuple(int(k) for k in cfg.get("task", "ks").split(",")),
        )
    if data.kind == "node":
        t_split = tuple(float(x) for x in cfg.get("data", "t_split").split(",")) if cfg.get("data", "t_split") else None
        horizon = float(cfg.get("data", "horizon")) if cfg.get("data", "horizon") else None
        return NodeTask.from_graph(
            data.graph, data.labels, assignment, t_split, horizon, time_scale, gamma=gamma, tpp_events=tpp_events
        )
    th = cfg.get("task", "train_horizons")
    return TrafficTask(
        data.timestamps, data.readings, data.road_edges, assignment,
        window=int(cfg.get("task", "window")),
        horizons=tuple(int(h) for h in cfg.get("task", "horizons").split(",")),
        train_horizons=tuple(int(h) for h in th.split(",")) if th else None,
        split=split, gamma=gamma, tpp_events=tpp_events,
    )


def encoder_config(cfg: RunConfig, in_dim: int, k: int) -> EncoderConfig:
    flag = lambda key: cfg.get("encoder", key).lower() in ("true", "1", "yes")
    return EncoderConfig(
        in_dim=in_dim, n_clusters=k, dim=int(cfg.get("encoder", "dim")), n_layers=int(cfg.get("encoder", "layers")),
        n_heads=int(cfg.get("encoder", "heads")), variant=cfg.get("encoder", "variant"),
        negative_slope=float(cfg.get("encoder", "negative_slope")), intensity=flag("intensity"),
        temporal_encoding=flag("temporal_encoding"),
    )


def train_config(cfg: RunConfig) -> TrainConfig:
    t = cfg.values["train"]
    return TrainConfig(
        lr=float(t["lr"]), epochs=int(t["epochs"]), batch_size=int(t["batch_size"]), seed=sub_seed(cfg.seed, "train"),
        mask_ratio=float(t["mask_ratio"]), integrator=t["integrator"], mc_samples=int(t["mc_samples"]),
        patience=int(t["patience"]), decay_every=int(t["decay_every"]), decay=float(t["decay"]),
        masking=t["masking"], weight_decay=float(t["weight_decay"]),
    )


def _in_dim(task) -> int:
    if isinstance(task, LinkTask):
        return task.h0.shape[1]
    if isinstance(task, NodeTask):
        return task.h0.shape[1]
    return task.window + int(task.assignment.max()) + 1


def _n_outputs(task) -> tuple[int, int]:
    if isinstance(task, LinkTask):
        return task.n_items, 1
    if isinstance(task, NodeTask):
        return task.n_classes, task.n_classes
    return 1, 1


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: RunConfig) -> None:
    data = ingest(cfg)
    out = cfg.out / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    if data.kind == "traffic":
        dg.save_readings(out / "readings.csv", data.timestamps, data.readings)
        dg.save_edges(out / "edges.csv", data.road_edges)
        summary = {"sensors": data.readings.shape[1], "readings": data.readings.shape[0]}
    else:
        dg.save_events(out / "events.csv", data.graph)
        dg.save_features(out / "features.bin", data.graph.features, binary=True)
        summary = {"nodes": data.graph.n_nodes, "events": len(data.graph.events)}
    (out / "summary.csv").write_text("key,value\n" + "".join(f"{k},{v}\n" for k, v in summary.items()))


def cmd_cluster(cfg: RunConfig) -> ClusterModel:
    data = ingest(cfg)
    model = cluster(cfg, data)
    save_clusters(cfg.out / "clusters", model)
    return model


def cmd_train(cfg: RunConfig) -> None:
    torch.set_num_threads(1)
    data = ingest(cfg)
    cm = cluster(cfg, data)
    save_clusters(cfg.out / "clusters", cm)
    task = build_task(cfg, data, cm.assignment)
    n_out, label_dim = _n_outputs(task)
    spec = TaskSpec(cfg.task, n_out, float(cfg.get("task", "gamma")), label_dim)
    model = TaskModel(encoder_config(cfg, _in_dim(task), cm.k), spec, seed=sub_seed(cfg.seed, "model"))
    tc = train_config(cfg)
    extra = {"masking": tc.masking, "seed": cfg.seed}
    try:
        result = train(model, task, tc)
    except TrainingDiverged as err:
        save_checkpoint(cfg.out / "checkpoint.bin", err.checkpoint, extra, {"assignment": cm.assignment})
        raise
    write_epoch_log(cfg.out / "epochs.csv", result.log)
    save_checkpoint(cfg.out / "checkpoint.bin", result.model, extra, {"assignment": cm.assignment})


def cmd_eval(cfg: RunConfig, checkpoint: Path) -> None:
    torch.set_num_threads(1)
    model, extra, arrays = load_checkpoint(checkpoint)
    if model.task.kind != cfg.task:
        raise ConfigError([f"[run] task: checkpoint was trained for {model.task.kind!r}, config says {cfg.task!r}"])
    data = ingest(cfg)
    task = build_task(cfg, data, arrays["assignment"])
    reports = task.evaluate(model, "test", extra.get("masking", "cam"))
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_reports(cfg.out / "metrics.csv", reports)


def _read_matrix(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _interpret_inputs(cfg: RunConfig, checkpoint: Path | None):
    """Prediction matrices (N, m) and truth, from files or from a checkpoint's test split."""
    kind = cfg.get("spectral", "kind") or ("traffic" if cfg.task == "traffic" else "link")
    if checkpoint is None:
        y1 = _read_matrix(cfg.get("spectral", "predictions"))
        y2 = _read_matrix(cfg.get("spectral", "predictions2")) if cfg.get("spectral", "predictions2") else None
        truth_path = cfg.get("spectral", "truth")
        truth = None
        if truth_path:
            truth = np.loadtxt(truth_path, delimiter=",", ndmin=1 if kind == "link" else 2)
        return kind, y1, y2, truth
    model, extra, arrays = load_checkpoint(checkpoint)
    data = ingest(cfg)
    task = build_task(cfg, data, arrays["assignment"])
    if isinstance(task, TrafficTask):
        pairs = task.pairs("test", task.horizons[:1])
        return "traffic", task.predict(model, pairs).T, None, task.truth(pairs).T
    if isinstance(task, LinkTask):
        scores, truth = task.predict(model, "test", extra.get("masking", "cam"))
        return "link", scores.T, None, truth
    raise ConfigError(["[run] task: interpret from a checkpoint supports link and traffic tasks"])


def _metrics(kind: str, y: np.ndarray, truth) -> dict[str, float]:
    if truth is None:
        return {}
    if kind == "link":
        return evaluate("link", y.T, np.asarray(truth, np.int64), (10,)).values
    return evaluate("traffic", y, truth).values


def cmd_interpret(cfg: RunConfig, checkpoint: Path | None) -> None:
    sp = cfg.values["spectral"]
    kind, y1, y2, truth = _interpret_inputs(cfg, checkpoint)
    n = y1.shape[0]
    lap = build_laplacian(dg.load_edges(sp["graph"]), n=n, strict=False)
    N = lap.n
    p = int(sp["p"])
    s = int(sp["s"]) if sp["s"] else min(N, 1000)
    r = int(sp["r"]) if sp["r"] else max(1, min(s - p, 128))
    basis = nystrom_eig(lap, s, r, p, int(sp["q"]), sub_seed(cfg.seed, "spectral"), sp["spectrum_end"], sp["power"])
    band = parse_band(sp["band"], basis, float(sp["freq_above"]) if sp["freq_above"] else None)
    kept = lap.kept
    out = y1.copy() if sp["mode"] == "intra" else y2.copy()
    if sp["mode"] == "intra":
        out[kept] = intra_perturb(basis, y1[kept], band)
    else:
        out[kept] = inter_perturb(basis, y1[kept], y2[kept], band)
    base = y1 if sp["mode"] == "intra" else y2
    before, after = _metrics(kind, base, truth), _metrics(kind, out, truth)
    cfg.out.mkdir(parents=True, exist_ok=True)
    np.savetxt(cfg.out / "perturbed.csv", out, delimiter=",", fmt="%.17g")
    lines = ["metric,before,after,delta"]
    lines += [f"{k},{before[k]!r},{after[k]!r},{after[k] - before[k]!r}" for k in before]
    (cfg.out / "delta_metrics.csv").write_text("\n".join(lines) + "\n")
    e0, e1 = energy_profile(basis, base[kept]), energy_profile(basis, out[kept])
    rows = ["index,eigenvalue,energy_before,energy_after,in_band"]
    in_band = set(band.tolist())
    rows += [
        f"{i},{float(basis.eigenvalues[i])!r},{float(e0[i])!r},{float(e1[i])!r},{int(i in in_band)}" for i in range(basis.r)
    ]
    (cfg.out / "spectrum.csv").write_text("\n".join(rows) + "\n")
    basis.save(cfg.out / "basis.bin")


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ctgraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("ingest", "cluster", "train", "eval", "interpret"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "interpret" or False)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        if name in ("eval", "interpret"):
            p.add_argument("--checkpoint", required=name == "eval")
        if name == "interpret":
            p.add_argument("--band")
            p.add_argument("--freq-above", type=float)
            p.add_argument("--mode", choices=("intra", "inter"))
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides: dict[tuple[str, str], str] = {}
    if args.seed is not None:
        overrides[("run", "seed")] = str(args.seed)
    if args.out is not None:
        overrides[("run", "out")] = str(Path(args.out).resolve())
    if getattr(args, "band", None) is not None:
        overrides[("spectral", "band")] = args.band
    if getattr(args, "freq_above", None) is not None:
        overrides[("spectral", "freq_above")] = repr(args.freq_above)
    if getattr(args, "mode", None) is not None:
        overrides[("spectral", "mode")] = args.mode
    try:
        cfg = load_config(args.config, overrides)
        validate(cfg, args.command)
        checkpoint = Path(args.checkpoint) if getattr(args, "checkpoint", None) else None
        if checkpoint is not None and not checkpoint.is_file():
            raise ConfigError([f"--checkpoint: {checkpoint} does not exist"])
        cfg.out.mkdir(parents=True, exist_ok=True)
        cfg.write(cfg.out / f"{args.command}.resolved.ini")
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "cluster":
            cmd_cluster(cfg)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "eval":
            cmd_eval(cfg, checkpoint)
        else:
            if checkpoint is None and not cfg.get("spectral", "predictions"):
                raise ConfigError(["[spectral] predictions: required unless --checkpoint is given"])
            cmd_interpret(cfg, checkpoint)
    except (ConfigError, dg.GraphDataError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as err:  # noqa: BLE001 - report any runtime failure with its class
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0
