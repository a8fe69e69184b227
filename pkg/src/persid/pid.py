"""Interaction detection from the persistence of feature-subset connectivity.

Every unit of one target layer is swept through the filtration's descending
thresholds. A unit's candidate feature set grows as features gain paths to
it; once the unit also reaches an output unit the current set is *born*, each
later feature arrival *kills* the live set and births the enlarged one, and
the killed set banks ``|birth - death| ** p``. The final live set dies at the
last threshold of the sweep. Per-candidate contributions are summed across
units into a ledger; sets that never live for a positive span (features
arriving together, or a set born at the very last threshold) are dropped, as
are singletons unless explicitly requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .filtration import Filtration, ReachabilitySweep, build_filtration, iter_bits
from .model_io import NetworkSpec
from .serialize import write_csv, write_json

TERMINAL_DEATHS = ("last-threshold", "zero")


@dataclass
class NeuronState:
    """Bookkeeping for one target-layer unit during a detection sweep."""

    feats: int = 0  # bitset of features currently reaching the unit
    joined: list = field(default_factory=list)  # (feature, threshold) in arrival order
    output_connected_at: float | None = None
    alive_birth: float | None = None
    alive_set: int = 0  # bitset of the live candidate


@dataclass(frozen=True)
class PersistenceLedger:
    """Interaction candidates and their accumulated strengths.

    Keys are sorted feature tuples; values are strictly positive sums of
    per-unit persistence contributions. ``p`` is the norm exponent, ``layer``
    the target layer, ``eta`` the pruning fraction the filtration used.
    """

    entries: dict[tuple[int, ...], float]
    p: float
    layer: int
    eta: float


def detect_filtration(
    filt: Filtration,
    layer: int = 1,
    p: float = 2.0,
    *,
    terminal_death: str = "last-threshold",
    include_singletons: bool = False,
) -> PersistenceLedger:
    """Run the event sweep over an already-built filtration."""
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    if terminal_death not in TERMINAL_DEATHS:
        raise ValueError(f"terminal_death must be one of {TERMINAL_DEATHS}")
    if len(filt.thresholds) == 0:
        raise ValueError("empty filtration")
    sweep = ReachabilitySweep(filt, layer)  # validates the layer index
    states = [NeuronState() for _ in range(filt.shape[layer])]
    raw: dict[int, list[float]] = {}

    for lam, changed in sweep.steps():
        for r in sorted(changed):
            st = states[r]
            feats = sweep.feature_mask(r)
            new = feats & ~st.feats
            if new:
                st.joined.extend((i, lam) for i in iter_bits(new))
                st.feats = feats
            if st.output_connected_at is None:
                if sweep.output_mask(r):
                    st.output_connected_at = lam
                    if feats:
                        st.alive_set, st.alive_birth = feats, lam
            elif st.alive_birth is None:
                if feats:
                    st.alive_set, st.alive_birth = feats, lam
            elif new:
                # the live candidate dies here; features arriving together
                # skip the intermediate sets entirely
                raw.setdefault(st.alive_set, []).append((st.alive_birth - lam) ** p)
                st.alive_set, st.alive_birth = feats, lam

    end = 0.0 if terminal_death == "zero" else float(filt.thresholds[-1])
    for st in states:
        if st.alive_birth is not None and st.alive_birth > end:
            raw.setdefault(st.alive_set, []).append((st.alive_birth - end) ** p)

    entries: dict[tuple[int, ...], float] = {}
    for mask, parts in raw.items():
        feats = tuple(iter_bits(mask))
        if len(feats) < 2 and not include_singletons:
            continue
        total = math.fsum(parts)  # exact, hence independent of unit order
        if total > 0.0:
            entries[feats] = total
    return PersistenceLedger(entries=entries, p=float(p), layer=layer, eta=filt.eta)


def detect(
    net: NetworkSpec,
    layer: int = 1,
    p: float = 2.0,
    eta: float = 0.0,
    *,
    terminal_death: str = "last-threshold",
    include_singletons: bool = False,
) -> PersistenceLedger:
    """Detect interaction candidates learned by a trained network.

    Defaults follow the benchmark setup: target layer 1 (the layer where a
    regularized MLP separates interactions), p = 2, no pruning.
    """
    filt = build_filtration(net, eta)
    return detect_filtration(
        filt, layer, p, terminal_death=terminal_death, include_singletons=include_singletons
    )


def rank(ledger: PersistenceLedger) -> list[tuple[int, ...]]:
    """Candidates by descending strength; ties broken by smaller cardinality,
    then lexicographic feature order."""
    return sorted(ledger.entries, key=lambda c: (-ledger.entries[c], len(c), c))


def pairwise_strengths(ledger: PersistenceLedger, d: int) -> np.ndarray:
    """Symmetric d x d matrix; entry (i, j) sums the strengths of every
    candidate containing both i and j. Diagonal is zero."""
    m = np.zeros((d, d))
    for feats, rho in sorted(ledger.entries.items()):
        if feats and feats[-1] >= d:
            raise ValueError(f"candidate {feats} exceeds feature count {d}")
        for i, j in combinations(feats, 2):
            m[i, j] += rho
            m[j, i] += rho
    return m


def saliency(ledger: PersistenceLedger, shape: tuple[int, int]) -> np.ndarray:
    """Per-pixel importance grid: pixel i sums the strengths of every
    candidate containing i, reshaped to (height, width). Raw scale; exporters
    max-normalize."""
    h, w = int(shape[0]), int(shape[1])
    if h < 1 or w < 1:
        raise ValueError(f"bad grid shape {shape}")
    flat = np.zeros(h * w)
    for feats, rho in sorted(ledger.entries.items()):
        if feats and feats[-1] >= h * w:
            raise ValueError(f"candidate {feats} does not fit a {h}x{w} grid")
        for i in feats:
            flat[i] += rho
    return flat.reshape(h, w)


@dataclass(frozen=True)
class CandidateDiff:
    features: tuple[int, ...]
    rho_f: float
    rho_g: float

    @property
    def diff(self) -> float:
        return abs(self.rho_f - self.rho_g)


@dataclass(frozen=True)
class StabilityReport:
    """Strength comparison between two same-architecture networks.

    ``delta`` is the largest edge-wise normalized-strength difference and
    ``bound = 6 * p * N * delta`` (N = units at the target layer) must
    dominate every common candidate's strength change.
    """

    delta: float
    bound: float
    layer: int
    p: float
    common: tuple[CandidateDiff, ...]
    only_in_f: tuple[tuple[int, ...], ...]
    only_in_g: tuple[tuple[int, ...], ...]

    @property
    def max_diff(self) -> float:
        return max((c.diff for c in self.common), default=0.0)

    @property
    def mean_diff(self) -> float:
        return float(np.mean([c.diff for c in self.common])) if self.common else 0.0

    @property
    def bound_satisfied(self) -> bool:
        return all(c.diff <= self.bound for c in self.common)


def _phi_tensors(net: NetworkSpec) -> list[np.ndarray]:
    w_max = max(float(np.max(np.abs(w))) for w in net.layers)
    if w_max == 0.0:
        raise ValueError("all weights are zero")
    return [np.abs(w) / w_max for w in net.layers]


def stability_check(
    net_f: NetworkSpec,
    net_g: NetworkSpec,
    layer: int = 1,
    p: float = 2.0,
    eta: float = 0.0,
) -> StabilityReport:
    """Detect on both networks and compare strengths of shared candidates."""
    if net_f.widths != net_g.widths:
        raise ValueError(f"architectures differ: {net_f.widths} vs {net_g.widths}")
    delta = max(
        float(np.max(np.abs(a - b)))
        for a, b in zip(_phi_tensors(net_f), _phi_tensors(net_g))
    )
    led_f = detect(net_f, layer, p, eta)
    led_g = detect(net_g, layer, p, eta)
    shared = sorted(set(led_f.entries) & set(led_g.entries))
    common = tuple(
        CandidateDiff(c, led_f.entries[c], led_g.entries[c]) for c in shared
    )
    n_units = net_f.widths[layer]
    return StabilityReport(
        delta=delta,
        bound=6.0 * p * n_units * delta,
        layer=layer,
        p=float(p),
        common=common,
        only_in_f=tuple(sorted(set(led_f.entries) - set(led_g.entries))),
        only_in_g=tuple(sorted(set(led_g.entries) - set(led_f.entries))),
    )


def ledger_records(ledger: PersistenceLedger) -> list[dict]:
    """Rank-ordered [{'features': [...], 'strength': ...}, ...]."""
    return [
        {"features": list(c), "strength": ledger.entries[c]} for c in rank(ledger)
    ]


def write_ledger_json(ledger: PersistenceLedger, path) -> None:
    write_json(ledger_records(ledger), path)


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    write_csv(path, np.asarray(matrix).tolist())


def write_saliency_pgm(grid: np.ndarray, path) -> None:
    """8-bit ASCII PGM of the max-normalized grid."""
    g = np.asarray(grid, dtype=np.float64)
    peak = g.max()
    norm = g / peak if peak > 0 else np.zeros_like(g)
    pix = np.rint(norm * 255).astype(int)
    lines = ["P2", f"{g.shape[1]} {g.shape[0]}", "255"]
    lines += [" ".join(str(v) for v in row) for row in pix.tolist()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def stability_records(report: StabilityReport) -> dict:
    """JSON-ready rendering of a stability report."""
    return {
        "delta": report.delta,
        "bound": report.bound,
        "layer": report.layer,
        "p": report.p,
        "bound_satisfied": report.bound_satisfied,
        "max_diff": report.max_diff,
        "mean_diff": report.mean_diff,
        "common": [
            {
                "features": list(c.features),
                "rho_f": c.rho_f,
                "rho_g": c.rho_g,
                "abs_diff": c.diff,
            }
            for c in report.common
        ],
        "only_in_f": [list(c) for c in report.only_in_f],
        "only_in_g": [list(c) for c in report.only_in_g],
    }
