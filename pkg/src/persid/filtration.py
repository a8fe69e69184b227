"""Descending-threshold filtration over normalized edge strengths, and the
boolean reachability machinery used to query it.

Every nonzero weight becomes an edge with strength ``phi = |w| / w_max`` in
(0, 1]; zero entries are absent connections. Sweeping a threshold ``lam``
downward from 1 activates edges in order of strength, and connectivity
questions reduce to two boolean matrices per target layer: ``down`` (which
input features reach each unit of the layer) and ``up`` (which output units
each unit of the layer reaches). Both are monotone in the threshold: lowering
``lam`` can only add True entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model_io import NetworkSpec


class AllZeroNetworkError(ValueError):
    """Every weight is zero, so edge strengths cannot be normalized."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Filtration:
    """Edges of a layered network ranked by normalized strength.

    Edges are sorted by descending ``phi`` (ties broken by layer, source,
    target) and ``thresholds`` holds the distinct ``phi`` values in the same
    order, so ``thresholds[0] == 1.0`` whenever ``eta < 1``. Pruning keeps
    only edges with ``phi >= eta``; equal strengths share one threshold and
    activate together.
    """

    shape: tuple[int, ...]  # unit counts per layer, inputs first
    edge_layer: np.ndarray  # 1-based layer index of each edge
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_phi: np.ndarray  # descending, in (0, 1]
    thresholds: np.ndarray  # distinct phi values, descending
    w_max: float
    eta: float

    @property
    def d(self) -> int:
        return self.shape[0]

    @property
    def depth(self) -> int:
        return len(self.shape) - 1

    @property
    def n_edges(self) -> int:
        return len(self.edge_phi)

    def edges(self) -> Iterator[tuple[int, int, int, float]]:
        """Yield (layer, source, target, phi) in activation order."""
        for k, i, j, v in zip(self.edge_layer, self.edge_src, self.edge_dst, self.edge_phi):
            yield int(k), int(i), int(j), float(v)


def build_filtration(net: NetworkSpec, eta: float = 0.0) -> Filtration:
    """Normalize edge strengths and sort them into a descending sweep order.

    Raises AllZeroNetworkError when no weight is nonzero. With ``eta > 0``,
    edges weaker than ``eta`` are dropped, shortening the threshold sweep.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    w_max = max(float(np.max(np.abs(w))) for w in net.layers)
    if w_max == 0.0:
        raise AllZeroNetworkError("all weights are zero")
    lay, src, dst, phi = [], [], [], []
    for k, w in enumerate(net.layers, start=1):
        a = np.abs(np.asarray(w)) / w_max
        keep = (a > 0.0) & (a >= eta)
        ii, jj = np.nonzero(keep)
        lay.append(np.full(len(ii), k, dtype=np.int32))
        src.append(ii.astype(np.int32))
        dst.append(jj.astype(np.int32))
        phi.append(a[keep])
    lay = np.concatenate(lay)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    phi = np.concatenate(phi)
    order = np.lexsort((dst, src, lay, -phi))
    thresholds = np.unique(phi)[::-1].copy()
    return Filtration(
        shape=net.widths,
        edge_layer=_frozen(lay[order]),
        edge_src=_frozen(src[order]),
        edge_dst=_frozen(dst[order]),
        edge_phi=_frozen(phi[order]),
        thresholds=_frozen(thresholds),
        w_max=w_max,
        eta=float(eta),
    )


@dataclass(frozen=True)
class ReachabilityView:
    """Boolean connectivity snapshot at one threshold for one target layer.

    ``down[r, i]`` is True when input feature ``i`` reaches unit ``r`` of the
    target layer through edges of strength >= ``lam``; ``up[o, r]`` is True
    when unit ``r`` reaches output unit ``o`` the same way.
    """

    layer: int
    lam: float
    up: np.ndarray  # (n_outputs, width_layer) bool
    down: np.ndarray  # (width_layer, d) bool


def _bitrow(mask: int, n: int) -> np.ndarray:
    row = np.zeros(n, dtype=bool)
    while mask:
        low = mask & -mask
        row[low.bit_length() - 1] = True
        mask ^= low
    return row


def iter_bits(mask: int) -> Iterator[int]:
    """Indices of set bits, ascending."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class ReachabilitySweep:
    """One descending pass over a filtration's thresholds for a target layer.

    Per unit the sweep keeps an integer bitset of input features that reach
    it (layers up to the target) and of output units it reaches (layers from
    the target up). Edges activate once, in descending strength order, and
    newly gained bits are pushed along already-active edges, which by
    monotonicity is equivalent to recomputing reachability from scratch at
    every threshold. One sweep is single-threaded; run independent sweeps for
    concurrent queries.
    """

    def __init__(self, filt: Filtration, layer: int):
        if not 1 <= layer <= filt.depth:
            raise ValueError(f"layer {layer} out of range 1..{filt.depth}")
        self.filt = filt
        self.layer = layer
        shape = filt.shape
        depth = filt.depth
        self._down = [[1 << i for i in range(shape[0])]]
        self._down += [[0] * shape[k] for k in range(1, layer + 1)]
        self._up = {k: [0] * shape[k] for k in range(layer, depth)}
        self._up[depth] = [1 << o for o in range(shape[depth])]
        # out-neighbors per unit for layers below the target (down propagation)
        self._out_adj = [[[] for _ in range(shape[k])] for k in range(layer)]
        # in-sources per unit for layers above the target (up propagation)
        self._in_adj = {k: [[] for _ in range(shape[k])] for k in range(layer + 1, depth + 1)}
        self._changed: set[int] = set()
        self._pos = 0

    def _push_down(self, k: int, u: int, add: int) -> None:
        down = self._down
        target = self.layer
        stack = [(k, u, add)]
        while stack:
            k, u, add = stack.pop()
            down[k][u] |= add
            if k == target:
                self._changed.add(u)
                continue
            for v in self._out_adj[k][u]:
                more = add & ~down[k + 1][v]
                if more:
                    stack.append((k + 1, v, more))

    def _push_up(self, k: int, u: int, add: int) -> None:
        up = self._up
        target = self.layer
        stack = [(k, u, add)]
        while stack:
            k, u, add = stack.pop()
            up[k][u] |= add
            if k == target:
                self._changed.add(u)
                continue
            for w in self._in_adj[k][u]:
                more = add & ~up[k - 1][w]
                if more:
                    stack.append((k - 1, w, more))

    def _activate(self, k: int, i: int, j: int) -> None:
        if k <= self.layer:
            self._out_adj[k - 1][i].append(j)
            add = self._down[k - 1][i] & ~self._down[k][j]
            if add:
                self._push_down(k, j, add)
        else:
            self._in_adj[k][j].append(i)
            add = self._up[k][j] & ~self._up[k - 1][i]
            if add:
                self._push_up(k - 1, i, add)

    def advance_to(self, lam: float) -> None:
        """Activate every not-yet-active edge with strength >= ``lam``."""
        phi = self.filt.edge_phi
        lay, src, dst = self.filt.edge_layer, self.filt.edge_src, self.filt.edge_dst
        n = len(phi)
        pos = self._pos
        while pos < n and phi[pos] >= lam:
            self._activate(int(lay[pos]), int(src[pos]), int(dst[pos]))
            pos += 1
        self._pos = pos

    def steps(self) -> Iterator[tuple[float, set[int]]]:
        """Yield (threshold, target-layer units whose state grew), descending."""
        phi = self.filt.edge_phi
        n = len(phi)
        while self._pos < n:
            lam = float(phi[self._pos])
            self.advance_to(lam)
            changed, self._changed = self._changed, set()
            yield lam, changed

    def feature_mask(self, r: int) -> int:
        """Bitset of input features reaching unit ``r`` of the target layer."""
        return self._down[self.layer][r]

    def output_mask(self, r: int) -> int:
        """Bitset of output units reachable from unit ``r``."""
        return self._up[self.layer][r]

    def down_matrix(self) -> np.ndarray:
        d = self.filt.d
        return np.array([_bitrow(m, d) for m in self._down[self.layer]], dtype=bool)

    def up_matrix(self) -> np.ndarray:
        n_out = self.filt.shape[-1]
        cols = np.array([_bitrow(m, n_out) for m in self._up[self.layer]], dtype=bool)
        return cols.T.copy()


def _layer_mask(filt: Filtration, k: int, lam: float) -> np.ndarray:
    m = np.zeros((filt.shape[k - 1], filt.shape[k]), dtype=bool)
    sel = (filt.edge_layer == k) & (filt.edge_phi >= lam)
    m[filt.edge_src[sel], filt.edge_dst[sel]] = True
    return m


def _bool_mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # per-step clipping keeps the product in the boolean semiring (no path counts)
    return (a.astype(np.uint8) @ b.astype(np.uint8)) > 0


def masks_at(filt: Filtration, lam: float, layer: int, recompute: bool = False) -> ReachabilityView:
    """Up/down connectivity at threshold ``lam`` for one target layer.

    The default path replays the incremental sweep down to ``lam``;
    ``recompute=True`` instead multiplies per-layer boolean masks directly.
    Both must agree entry for entry.
    """
    if not 1 <= layer <= filt.depth:
        raise ValueError(f"layer {layer} out of range 1..{filt.depth}")
    if recompute:
        down = _layer_mask(filt, layer, lam).T
        for k in range(layer - 1, 0, -1):
            down = _bool_mm(down, _layer_mask(filt, k, lam).T)
        up = np.eye(filt.shape[-1], dtype=bool)
        for k in range(filt.depth, layer, -1):
            up = _bool_mm(up, _layer_mask(filt, k, lam).T)
    else:
        sweep = ReachabilitySweep(filt, layer)
        sweep.advance_to(lam)
        down = sweep.down_matrix()
        up = sweep.up_matrix()
    return ReachabilityView(layer=layer, lam=float(lam), up=_frozen(up), down=_frozen(down))


def connected(filt: Filtration, lam: float, features, output_unit: int = 0) -> bool:
    """True when the features reaching ``output_unit`` at ``lam`` are exactly
    ``features``: all of them connected and no other input feature riding
    along."""
    feats = set(int(i) for i in features)
    if not feats <= set(range(filt.d)):
        raise ValueError(f"features {sorted(feats)} outside 0..{filt.d - 1}")
    if not 0 <= output_unit < filt.shape[-1]:
        raise ValueError(f"output unit {output_unit} out of range")
    row = masks_at(filt, lam, filt.depth).down[output_unit]
    return set(np.nonzero(row)[0].tolist()) == feats
