"""Context-process generators, cell partitions, process-class diagnostics and trace I/O.

The diagnostics are finite-horizon evidence (curves and tail-window maxima),
not certificates about limits.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import ContextPoint, SeededRng

TRACE_HEADER = ("t", "context_id")


# -- partitions ----------------------------------------------------------------

class Partition:
    """Explicit context -> cell map.

    kinds: ``identity`` (cell = id), ``modulo`` (id mod n), ``table`` (id -> cell
    lookup, optional default), ``grid`` (n equal bins of ``coords[0]`` on [0, 1)),
    ``single`` (everything in cell 0).
    """

    KINDS = ("identity", "modulo", "table", "grid", "single")

    def __init__(self, kind: str = "identity", n: Optional[int] = None,
                 table: Optional[Mapping[int, int]] = None, default: Optional[int] = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown partition kind {kind!r}")
        if kind in ("modulo", "grid") and (n is None or n < 1):
            raise ValueError(f"{kind} partition needs n >= 1")
        if kind == "table" and table is None:
            raise ValueError("table partition needs a table")
        self.kind = kind
        self.n = n
        self.table = {int(k): int(v) for k, v in (table or {}).items()}
        self.default = default

    @property
    def n_cells(self) -> Optional[int]:
        if self.kind in ("modulo", "grid"):
            return self.n
        if self.kind == "single":
            return 1
        if self.kind == "table":
            cells = set(self.table.values())
            if self.default is not None:
                cells.add(self.default)
            return max(cells) + 1 if cells else 1
        return self.n  # identity: caller may bound the id range

    def __call__(self, x: ContextPoint) -> int:
        kind = self.kind
        if kind == "identity":
            return x.id
        if kind == "modulo":
            return x.id % self.n
        if kind == "single":
            return 0
        if kind == "grid":
            if x.coords is None:
                raise ValueError(f"context {x.id} has no coordinates for a grid partition")
            return min(self.n - 1, max(0, int(x.coords[0] * self.n)))
        cell = self.table.get(x.id, self.default)
        if cell is None:
            raise KeyError(f"context {x.id} is not covered by the partition table")
        return cell

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.n is not None:
            out["n"] = self.n
        if self.kind == "table":
            out["table"] = {str(k): v for k, v in sorted(self.table.items())}
            if self.default is not None:
                out["default"] = self.default
        return out

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "Partition":
        if d is None:
            return cls("identity")
        table = d.get("table")
        if table is not None:
            table = {int(k): int(v) for k, v in table.items()}
        return cls(d.get("kind", "identity"), d.get("n"), table, d.get("default"))


# -- generators ------------------------------------------------------------------

def _check_distribution(w, what: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{what} must be a nonempty vector of nonnegative reals")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what} must sum to 1, got {w.sum()!r}")
    return w


class ProcessGenerator:
    kind = "base"

    def generate(self, horizon: int, rng: SeededRng) -> list[ContextPoint]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class IidFinite(ProcessGenerator):
    """I.i.d. draws from ``weights`` over context ids ``0..n-1``."""

    kind = "iid_finite"

    def __init__(self, weights: Optional[Sequence[float]] = None, n: Optional[int] = None):
        if weights is None:
            if n is None or n < 1:
                raise ValueError("iid_finite needs weights or n >= 1")
            weights = [1.0 / n] * n
        self.weights = _check_distribution(weights, "iid_finite weights")

    @property
    def n(self) -> int:
        return len(self.weights)

    def generate(self, horizon, rng):
        ids = rng.numpy().choice(self.n, size=horizon, p=self.weights)
        pts = [ContextPoint(i) for i in range(self.n)]
        return [pts[i] for i in ids.tolist()]

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.tolist()}


class IidFresh(ProcessGenerator):
    """Duplicate-free: round t brings context id ``t`` with uniform coordinates in [0, 1)^dim."""

    kind = "iid_fresh"

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def generate(self, horizon, rng):
        coords = rng.numpy().random((horizon, self.dim)).tolist()
        return [ContextPoint(t, tuple(c)) for t, c in enumerate(coords, start=1)]

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}


class MarkovChain(ProcessGenerator):
    """Finite-state Markov chain on ids ``0..n-1``."""

    kind = "markov_chain"

    def __init__(self, transition: Sequence[Sequence[float]], initial: Optional[Sequence[float]] = None):
        P = np.asarray(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        for row in P:
            _check_distribution(row, "transition row")
        self.transition = P
        n = P.shape[0]
        self.initial = _check_distribution(initial if initial is not None else [1.0 / n] * n,
                                           "initial distribution")
        if len(self.initial) != n:
            raise ValueError("initial distribution size differs from the state count")

    def generate(self, horizon, rng):
        gen = rng.numpy()
        n = len(self.initial)
        cdf = np.cumsum(self.transition, axis=1)
        u = gen.random(horizon)
        state = int(gen.choice(n, p=self.initial))
        pts = [ContextPoint(i) for i in range(n)]
        out = [pts[state]]
        for t in range(1, horizon):
            state = min(int(np.searchsorted(cdf[state], u[t], side="right")), n - 1)
            out.append(pts[state])
        return out

    def to_dict(self):
        return {"kind": self.kind, "transition": self.transition.tolist(),
                "initial": self.initial.tolist()}


class FiniteSupport(ProcessGenerator):
    """Any visiting law on a finite support: ``iid`` with weights, or a deterministic ``cycle``."""

    kind = "finite_support"

    def __init__(self, support: Sequence[int], law: str = "iid",
                 weights: Optional[Sequence[float]] = None):
        if len(support) == 0:
            raise ValueError("support must be nonempty")
        if law not in ("iid", "cycle"):
            raise ValueError(f"unknown visiting law {law!r}")
        self.support = [int(s) for s in support]
        self.law = law
        n = len(self.support)
        self.weights = _check_distribution(weights if weights is not None else [1.0 / n] * n,
                                           "finite_support weights")
        if len(self.weights) != n:
            raise ValueError("weights and support differ in length")

    def generate(self, horizon, rng):
        pts = [ContextPoint(s) for s in self.support]
        n = len(pts)
        if self.law == "cycle":
            return [pts[t % n] for t in range(horizon)]
        idx = rng.numpy().choice(n, size=horizon, p=self.weights)
        return [pts[i] for i in idx.tolist()]

    def to_dict(self):
        return {"kind": self.kind, "support": self.support, "law": self.law,
                "weights": self.weights.tolist()}


class DeterministicWalk(ProcessGenerator):
    """``X_t = t``."""

    kind = "deterministic_walk"

    def generate(self, horizon, rng=None):
        return [ContextPoint(t, (float(t),)) for t in range(1, horizon + 1)]

    def to_dict(self):
        return {"kind": self.kind}


_GENERATORS = {cls.kind: cls for cls in (IidFinite, IidFresh, MarkovChain, FiniteSupport,
                                         DeterministicWalk)}


def make_process(spec: dict) -> ProcessGenerator:
    spec = dict(spec)
    kind = spec.pop("kind")
    try:
        cls = _GENERATORS[kind]
    except KeyError:
        raise ValueError(f"unknown process kind {kind!r}") from None
    return cls(**spec)


# -- diagnostics -----------------------------------------------------------------

def _ids(trace: Sequence) -> list:
    return [x.id if isinstance(x, ContextPoint) else x for x in trace]


def dedup_times(trace: Sequence, max_dup: int) -> list[int]:
    """Rounds (1-based) whose context has appeared at most ``max_dup`` times up to and including them."""
    if max_dup < 1:
        raise ValueError("M must be >= 1")
    seen: dict = defaultdict(int)
    kept = []
    for t, cid in enumerate(_ids(trace), start=1):
        seen[cid] += 1
        if seen[cid] <= max_dup:
            kept.append(t)
    return kept


def max_multiplicity(trace: Sequence) -> int:
    counts: dict = defaultdict(int)
    for cid in _ids(trace):
        counts[cid] += 1
    return max(counts.values(), default=0)


def geometric_grid(horizon: int, base: int = 2) -> list[int]:
    grid = []
    g = 1
    while g < horizon:
        grid.append(g)
        g *= base
    grid.append(horizon)
    return grid


def distinct_cell_curve(trace: Sequence[ContextPoint], partition: Callable,
                        grid: Optional[Iterable[int]] = None) -> list[tuple[int, float]]:
    """``(T, #cells visited by X_1..X_T / T)`` at each grid point."""
    n = len(trace)
    pts = sorted(set(grid)) if grid is not None else geometric_grid(n)
    if pts and (pts[0] < 1 or pts[-1] > n):
        raise ValueError("grid points must lie in [1, T]")
    out = []
    cells = set()
    j = 0
    for t, x in enumerate(trace, start=1):
        cells.add(partition(x))
        while j < len(pts) and pts[j] == t:
            out.append((t, len(cells) / t))
            j += 1
    return out


def empirical_submeasure(trace: Sequence[ContextPoint], indicator: Callable,
                         window: Iterable[int]) -> float:
    """``max_{T' in window} (1/T') #{t <= T': X_t in A}``."""
    pts = sorted(set(window))
    if not pts:
        raise ValueError("empty window")
    if pts[0] < 1 or pts[-1] > len(trace):
        raise ValueError("window must lie in [1, T]")
    best = -math.inf
    hits = 0
    j = 0
    for t, x in enumerate(trace[:pts[-1]], start=1):
        if indicator(x):
            hits += 1
        if pts[j] == t:
            best = max(best, hits / t)
            j += 1
    return best


def infrequent_mass(trace: Sequence[ContextPoint], partition: Callable, thresholds) -> float:
    """Fraction of rounds whose cell held fewer than ``N_cell`` distinct earlier contexts.

    ``thresholds`` is a mapping ``cell -> N`` or a callable.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    lookup = thresholds if callable(thresholds) else thresholds.__getitem__
    members: dict = defaultdict(set)
    hits = 0
    for x in trace:
        cell = partition(x)
        try:
            need = lookup(cell)
        except (KeyError, IndexError):
            raise ValueError(f"no threshold for cell {cell!r}") from None
        prior = members[cell]
        if len(prior) < need:
            hits += 1
        prior.add(x.id)
    return hits / len(trace)


# -- trace I/O --------------------------------------------------------------------

def write_trace(trace: Sequence[ContextPoint], dest) -> None:
    """Tab-separated ``t<TAB>context_id`` with a header line; ``dest`` is a path or text stream."""
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "w", newline="") as fh:
            write_trace(trace, fh)
        return
    w = csv.writer(dest, delimiter="\t", lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for t, x in enumerate(trace, start=1):
        w.writerow((t, x.id))


def read_trace(src) -> list[ContextPoint]:
    """Inverse of :func:`write_trace`. Lines starting with ``#`` are comments."""
    if isinstance(src, (str, bytes)) or hasattr(src, "__fspath__"):
        with open(src, newline="") as fh:
            return read_trace(fh)
    rows = (line for line in src if line.strip() and not line.lstrip().startswith("#"))
    reader = csv.reader(rows, delimiter="\t")
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
        raise ValueError(f"trace header must be {TRACE_HEADER}, got {header}")
    pts: dict[int, ContextPoint] = {}
    out = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields, got {len(row)}")
        try:
            t, cid = int(row[0]), int(row[1])
        except ValueError:
            raise ValueError(f"line {lineno}: fields must be integers") from None
        if t != len(out) + 1:
            raise ValueError(f"line {lineno}: expected t={len(out) + 1}, got {t}")
        x = pts.get(cid)
        if x is None:
            x = pts[cid] = ContextPoint(cid)
        out.append(x)
    return out


def trace_to_text(trace: Sequence[ContextPoint]) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()
