"""Synthetic-function benchmark: data generators with known interaction
structure, ROC-AUC scoring of pairwise strengths, the train-detect-score
experiment loop, weight perturbation, and Cartesian feature crossing.

Ten data-generating functions over d = 10 features mix pairwise and
higher-order interactions with univariate main effects. Ground-truth pairs
are the pairwise subsets of each non-additive term's variable set; purely
additive compositions (and F7's plain feature sum) contribute nothing.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import numpy as np

from .model_io import NetworkSpec
from .pid import detect, pairwise_strengths
from .serialize import write_csv, write_json
from .trainer import TrainConfig, TrainingDivergedError, train_mlp


class DomainError(ValueError):
    """A generated sample fell outside a function's domain."""


class DegenerateTruthError(ValueError):
    """Ground truth labels all pairs the same way; AUC is undefined."""


@dataclass(frozen=True)
class DatasetSpec:
    """Sample matrix, targets, per-column kinds and provenance."""

    X: np.ndarray
    y: np.ndarray
    kinds: tuple[str, ...]  # "dense" | "sparse" per column
    provenance: dict = field(default_factory=dict)
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or len(X) != len(y):
            raise ValueError(f"inconsistent dataset shapes {X.shape} / {y.shape}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite values")
        if len(self.kinds) != X.shape[1]:
            raise ValueError("need one kind per column")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    function: int
    pairs: frozenset[tuple[int, int]]


def _cols(x):
    return (x[:, i] for i in range(x.shape[1]))


def _f1(x):
    x0, x1, x2, x3, x4, _, x6, x7, x8, x9 = _cols(x)
    return (
        np.pi ** (x0 * x1) * np.sqrt(2.0 * x2)
        - np.arcsin(x3)
        + np.log(x2 + x4)
        - (x8 / x9) * np.sqrt(x6 / x7)
        - x1 * x6
    )


def _f2(x):
    x0, x1, x2, x3, x4, _, x6, x7, x8, x9 = _cols(x)
    return (
        np.pi ** (x0 * x1) * np.sqrt(2.0 * np.abs(x2))
        - np.arcsin(0.5 * x3)
        + np.log(np.abs(x2 + x4) + 1.0)
        + (x8 / (1.0 + np.abs(x9))) * np.sqrt(np.abs(x6) / (1.0 + np.abs(x7)))
        - x1 * x6
    )


def _f3(x):
    x0, x1, x2, x3, x4, _, x6, x7, x8, x9 = _cols(x)
    return (
        np.exp(np.abs(x0 - x1))
        + np.abs(x1 * x2)
        - (x2 * x2) ** np.abs(x3)  # even power of x2, so negative bases are fine
        + np.log(x3**2 + x4**2 + x6**2 + x7**2)
        + x8
        + 1.0 / (1.0 + x9**2)
    )


def _f4(x):
    x0, x3 = x[:, 0], x[:, 3]
    return _f3(x) + x0**2 * x3**2


def _f5(x):
    x0, x1, x2, x3, x4, x5, x6, x7, x8, x9 = _cols(x)
    return (
        1.0 / (1.0 + x0**2 + x1**2 + x2**2)
        + np.sqrt(np.exp(x3 + x4))
        + np.abs(x5 + x6)
        + x7 * x8 * x9
    )


def _f6(x):
    x0, x1, x2, x3, x4, x5, _, x7, x8, x9 = _cols(x)
    return (
        np.exp(np.abs(x0 * x1 + 1.0))
        - np.exp(np.abs(x2 + x3) + 1.0)
        + np.cos(x4 + x5 - x7)
        + np.sqrt(x7**2 + x8**2 + x9**2)
    )


def _f7(x):
    x0, x1, x2, x3, x4, x5, x6, x7, x8, _ = _cols(x)
    return (
        (np.arctan(x0) + np.arctan(x1)) ** 2
        + np.maximum(x2 * x3 + x5, 0.0)
        - 1.0 / (1.0 + (x3 * x4 * x5 * x6 * x7) ** 2)
        + (np.abs(x6) / (1.0 + np.abs(x8))) ** 5
        + x.sum(axis=1)
    )


def _f8(x):
    x0, x1, x2, x3, x4, x5, x6, x7, x8, x9 = _cols(x)
    return (
        x0 * x1
        + 2.0 ** (x2 + x4 + x5)
        + 2.0 ** (x2 + x3 + x4 + x6)
        + np.sin(x6 * np.sin(x7 + x8))
        + np.arccos(0.9 * x9)
    )


def _f9(x):
    x0, x1, x2, x3, x4, x5, x6, x7, x8, x9 = _cols(x)
    return (
        np.tanh(x0 * x1 + x2 * x3) * np.sqrt(np.abs(x4))
        + np.exp(x4 + x5)
        + np.log((x5 * x6 * x7) ** 2 + 1.0)
        + x8 * x9
        + 1.0 / (1.0 + np.abs(x9))
    )


def _f10(x):
    _, x1, x2, x3, x4, _, x6, _, x8, _ = _cols(x)
    return (
        np.sinh(x1 + x2)
        + np.arccos(np.tanh(x2 + x4 + x6))
        + np.cos(x3 + x4)
        + 1.0 / np.cos(x6 * x8)
    )


@dataclass(frozen=True)
class SyntheticFunction:
    fid: int
    evaluate: callable
    low: float
    high: float
    # variable sets of the non-additive terms; main effects and plain sums excluded
    terms: tuple[tuple[int, ...], ...]


FUNCTIONS: dict[int, SyntheticFunction] = {
    f.fid: f
    for f in (
        SyntheticFunction(1, _f1, 0.05, 1.0, ((0, 1, 2), (2, 4), (6, 7, 8, 9), (1, 6))),
        SyntheticFunction(2, _f2, -1.0, 1.0, ((0, 1, 2), (2, 4), (6, 7, 8, 9), (1, 6))),
        SyntheticFunction(3, _f3, -1.0, 1.0, ((0, 1), (1, 2), (2, 3), (3, 4, 6, 7))),
        SyntheticFunction(4, _f4, -1.0, 1.0, ((0, 1), (1, 2), (2, 3), (3, 4, 6, 7), (0, 3))),
        SyntheticFunction(5, _f5, -1.0, 1.0, ((0, 1, 2), (3, 4), (5, 6), (7, 8, 9))),
        SyntheticFunction(6, _f6, -1.0, 1.0, ((0, 1), (2, 3), (4, 5, 7), (7, 8, 9))),
        SyntheticFunction(7, _f7, -1.0, 1.0, ((0, 1), (2, 3, 5), (3, 4, 5, 6, 7), (6, 8))),
        SyntheticFunction(8, _f8, -1.0, 1.0, ((0, 1), (2, 4, 5), (2, 3, 4, 6), (6, 7, 8))),
        SyntheticFunction(9, _f9, -1.0, 1.0, ((0, 1, 2, 3, 4), (4, 5), (5, 6, 7), (8, 9))),
        SyntheticFunction(10, _f10, -1.0, 1.0, ((1, 2), (2, 4, 6), (3, 4), (6, 8))),
    )
}

N_FEATURES = 10


def parse_function_id(fid) -> int:
    """Accept 3, '3' or 'F3'."""
    if isinstance(fid, str):
        fid = fid.strip().upper().lstrip("F")
    try:
        num = int(fid)
    except (TypeError, ValueError):
        raise ValueError(f"bad function id {fid!r}") from None
    if num not in FUNCTIONS:
        raise ValueError(f"function id must be 1..10, got {num}")
    return num


def gen_synthetic(fid, n: int, seed: int) -> DatasetSpec:
    """Draw n samples for one synthetic function.

    Features are uniform on [-1, 1], except F1 which uses (0.05, 1) so its
    square roots, logarithms and denominators stay in-domain. Regenerating
    with the same seed reproduces the dataset bit for bit.
    """
    num = parse_function_id(fid)
    f = FUNCTIONS[num]
    if n < 1:
        raise ValueError(f"need at least one sample, got n={n}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(f.low, f.high, size=(n, N_FEATURES))
    y = f.evaluate(X)
    bad = np.flatnonzero(~np.isfinite(y))
    if len(bad):
        raise DomainError(f"F{num}: sample {bad[0]} evaluated to a non-finite value")
    return DatasetSpec(
        X=X,
        y=y,
        kinds=("dense",) * N_FEATURES,
        provenance={"function": f"F{num}", "n": n, "seed": seed, "low": f.low, "high": f.high},
    )


def ground_truth_pairs(fid) -> GroundTruth:
    """All feature pairs that co-occur in some non-additive term."""
    num = parse_function_id(fid)
    pairs = set()
    for term in FUNCTIONS[num].terms:
        pairs.update(combinations(sorted(term), 2))
    return GroundTruth(function=num, pairs=frozenset(pairs))


def _tie_ranks(vals: np.ndarray) -> np.ndarray:
    order = np.argsort(vals, kind="mergesort")
    sv = vals[order]
    ranks = np.empty(len(vals))
    i = 0
    while i < len(sv):
        j = i
        while j < len(sv) and sv[j] == sv[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j + 1)  # average of 1-based positions i+1..j
        i = j
    return ranks


def roc_auc(scores: np.ndarray, truth: GroundTruth) -> float:
    """Probability that a random true pair outscores a random false pair,
    counting ties as one half (rank-based AUC over the strict upper
    triangle)."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"scores must be square, got shape {s.shape}")
    if not np.allclose(s, s.T, rtol=1e-9, atol=1e-12):
        raise ValueError("scores must be symmetric")
    d = s.shape[0]
    all_pairs = list(combinations(range(d), 2))
    labels = np.array([pair in truth.pairs for pair in all_pairs])
    n_pos = int(labels.sum())
    n_neg = len(all_pairs) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTruthError(
            f"F{truth.function}: {n_pos} true pairs out of {len(all_pairs)}"
        )
    vals = np.array([s[i, j] for i, j in all_pairs])
    ranks = _tie_ranks(vals)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def perturb_network(net: NetworkSpec, delta: float, seed=None, rng=None) -> NetworkSpec:
    """Jitter every weight by uniform noise of size ``delta`` on the
    normalized-strength scale (the noise is scaled by max |weight|)."""
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if rng is None:
        rng = np.random.default_rng(seed)
    w_max = max(float(np.max(np.abs(w))) for w in net.layers)
    new = tuple(w + rng.uniform(-delta, delta, size=w.shape) * w_max for w in net.layers)
    return NetworkSpec(new, net.biases)


@dataclass(frozen=True)
class SuiteConfig:
    """One benchmark run: which functions, how many trials, and the trainer
    and detector settings shared by every trial."""

    functions: tuple[int, ...] = tuple(range(1, 11))
    trials: int = 5
    n: int = 10_000
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    layer: int = 1
    p: float = 2.0
    eta: float = 0.0
    threads: int = 1

    def snapshot(self) -> dict:
        return {
            "functions": [f"F{f}" for f in self.functions],
            "trials": self.trials,
            "n": self.n,
            "seed": self.seed,
            "arch": list(self.train.arch),
            "lr": self.train.lr,
            "l1": self.train.l1,
            "batch": self.train.batch,
            "max_epochs": self.train.max_epochs,
            "early_stop_rounds": self.train.early_stop_rounds,
            "layer": self.layer,
            "p": self.p,
            "eta": self.eta,
        }


@dataclass
class TrialResult:
    fid: int
    trial: int
    seed: int
    auc: float | None
    test_mse: float | None
    error: str | None = None
    pairwise: np.ndarray | None = None


@dataclass
class FunctionSummary:
    fid: int
    n_trials: int
    n_used: int
    mean_auc: float
    std_auc: float
    mean_test_mse: float


@dataclass
class ExperimentReport:
    config: dict
    trials: list[TrialResult]
    summaries: list[FunctionSummary]
    average_auc: float


def trial_seed(base: int, fid: int, trial: int) -> int:
    return base + 1009 * fid + trial


def _run_trial(args) -> TrialResult:
    fid, trial, cfg = args
    seed = trial_seed(cfg.seed, fid, trial)
    data = gen_synthetic(fid, cfg.n, seed)
    try:
        net, log = train_mlp(data, replace(cfg.train, seed=seed))
    except TrainingDivergedError as e:
        return TrialResult(fid=fid, trial=trial, seed=seed, auc=None, test_mse=None, error=str(e))
    ledger = detect(net, cfg.layer, cfg.p, cfg.eta)
    matrix = pairwise_strengths(ledger, data.d)
    auc = roc_auc(matrix, ground_truth_pairs(fid))
    return TrialResult(
        fid=fid, trial=trial, seed=seed, auc=auc, test_mse=log.test_mse, pairwise=matrix
    )


def trim_extremes(values: list[float]) -> list[float]:
    """Drop exactly one maximum and one minimum when four or more values."""
    if len(values) < 4:
        return list(values)
    vals = list(values)
    vals.remove(max(vals))
    vals.remove(min(vals))
    return vals


def run_experiment(cfg: SuiteConfig) -> ExperimentReport:
    """Generate, train, detect and score every (function, trial) cell.

    A diverged trial is recorded with its error and excluded from the
    aggregates. Per-function aggregates trim the best and worst trial before
    averaging.
    """
    jobs = [(fid, t, cfg) for fid in cfg.functions for t in range(cfg.trials)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    results.sort(key=lambda r: (r.fid, r.trial))

    summaries = []
    for fid in cfg.functions:
        rows = [r for r in results if r.fid == fid]
        aucs = [r.auc for r in rows if r.auc is not None]
        mses = [r.test_mse for r in rows if r.test_mse is not None]
        used = trim_extremes(aucs)
        summaries.append(
            FunctionSummary(
                fid=fid,
                n_trials=len(rows),
                n_used=len(used),
                mean_auc=float(np.mean(used)) if used else float("nan"),
                std_auc=float(np.std(used)) if used else float("nan"),
                mean_test_mse=float(np.mean(mses)) if mses else float("nan"),
            )
        )
    means = [s.mean_auc for s in summaries if np.isfinite(s.mean_auc)]
    return ExperimentReport(
        config=cfg.snapshot(),
        trials=results,
        summaries=summaries,
        average_auc=float(np.mean(means)) if means else float("nan"),
    )


def report_to_json_obj(report: ExperimentReport) -> dict:
    return {
        "config": report.config,
        "average_auc": report.average_auc,
        "summaries": [
            {
                "function": f"F{s.fid}",
                "n_trials": s.n_trials,
                "n_used": s.n_used,
                "mean_auc": s.mean_auc,
                "std_auc": s.std_auc,
                "mean_test_mse": s.mean_test_mse,
            }
            for s in report.summaries
        ],
        "trials": [
            {
                "function": f"F{t.fid}",
                "trial": t.trial,
                "seed": t.seed,
                "auc": t.auc,
                "test_mse": t.test_mse,
                "error": t.error,
            }
            for t in report.trials
        ],
    }


def write_report_json(report: ExperimentReport, path) -> None:
    write_json(report_to_json_obj(report), path)


def write_report_csv(report: ExperimentReport, path) -> None:
    rows = [
        (f"F{t.fid}", t.trial, "" if t.auc is None else t.auc,
         "" if t.test_mse is None else t.test_mse, t.seed)
        for t in report.trials
    ]
    write_csv(path, rows, header=("fid", "trial", "auc", "test_mse", "seed"))


def _bucketize(col: np.ndarray, buckets: int) -> np.ndarray:
    edges = np.quantile(col, np.arange(1, buckets) / buckets)
    return np.searchsorted(edges, col, side="right")


def cross_features(data: DatasetSpec, candidates, buckets: int = 100) -> DatasetSpec:
    """Append one integer-coded column per candidate feature set.

    Dense members are quantile-bucketized into ``buckets`` bins first; sparse
    members are used as-is. Each observed value tuple gets a dense integer
    code in first-appearance order, so identical inputs always produce
    identical codes. Crossing order is capped at 4.
    """
    if buckets < 2:
        raise ValueError(f"buckets must be >= 2, got {buckets}")
    cands = [tuple(sorted(set(int(i) for i in c))) for c in candidates]
    for c in cands:
        if not c:
            raise ValueError("empty crossing candidate")
        if len(c) > 4:
            raise ValueError(f"crossing order {len(c)} exceeds the cap of 4: {c}")
        if c[-1] >= data.d:
            raise ValueError(f"candidate {c} exceeds feature count {data.d}")
    coded = {}
    for i in range(data.d):
        if data.kinds[i] == "dense":
            coded[i] = _bucketize(data.X[:, i], buckets)
        else:
            coded[i] = data.X[:, i].astype(np.int64)
    new_cols = []
    for c in cands:
        seen: dict[tuple, int] = {}
        members = [coded[i] for i in c]
        col = np.array(
            [seen.setdefault(tup, len(seen)) for tup in zip(*(m.tolist() for m in members))],
            dtype=np.float64,
        )
        new_cols.append(col)
    base_names = data.names or tuple(f"x{i}" for i in range(data.d))
    new_names = tuple(f"cross_{'_'.join(str(i) for i in c)}" for c in cands)
    return DatasetSpec(
        X=np.hstack([data.X] + [c[:, None] for c in new_cols]),
        y=data.y,
        kinds=data.kinds + ("sparse",) * len(cands),
        provenance={**data.provenance, "crossed": [list(c) for c in cands], "buckets": buckets},
        names=base_names + new_names,
    )


def write_dataset_csv(data: DatasetSpec, path) -> None:
    names = data.names or tuple(f"x{i}" for i in range(data.d))
    header = tuple(names) + ("y",)
    rows = (tuple(x) + (t,) for x, t in zip(data.X.tolist(), data.y.tolist()))
    write_csv(path, rows, header=header)


def read_dataset_csv(path) -> DatasetSpec:
    """Read the dataset CSV format (feature columns then a final y column)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    if len(lines) < 2:
        raise ValueError(f"{path}: expected a header and at least one row")
    header = lines[0].split(",")
    if header[-1] != "y":
        raise ValueError(f"{path}: last column must be 'y', got {header[-1]!r}")
    names = tuple(header[:-1])
    body = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    kinds = tuple("sparse" if n.startswith("cross_") else "dense" for n in names)
    return DatasetSpec(
        X=body[:, :-1], y=body[:, -1], kinds=kinds, provenance={"path": str(path)}, names=names
    )
