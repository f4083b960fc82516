"""Boundary event chains and reactive-time bookkeeping.

A :class:`BoundaryChain` stores a run of crossing events column-wise
(times, side codes, set codes, positions, velocities).  The entry chain is
the subsequence of entrances; reactive indices mark the first entrance into
A after B (and vice versa), which cut the entry chain into transitions.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path as _Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UsageError
from .fields import PhasePoint
from .geometry import BoundarySide

CSV_FORMAT_VERSION = 1
_LABELS = ("A", "B")


def _label_codes(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "iub":
        codes = arr.astype(np.int64)
    else:
        codes = np.full(arr.shape, -1, dtype=np.int64)
        codes[arr == "A"] = 0
        codes[arr == "B"] = 1
    if codes.ndim != 1 or np.any((codes != 0) & (codes != 1)):
        raise UsageError("labels must be a 1D sequence of 'A'/'B' (or 0/1)")
    return codes


def _as_rows(x, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if n == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 1)
    return arr.reshape(n, -1)


class BoundaryChain:
    """Ordered crossing events.

    Parameters
    ----------
    times, sides, labels, q, p : array_like
        Event times, side codes (``-1`` entry, ``+1`` exit), set codes
        (``0`` = A, ``1`` = B), positions ``(n, d)`` and velocities ``(n, d)``.
    g_segment : array_like, optional
        ``g_segment[i]`` is the observable integral from event ``i`` to event
        ``i + 1``; the last entry is ``nan`` when the chain stops there.
    """

    def __init__(self, times, sides, labels, q, p, g_segment=None, meta=None, validate=True):
        self.times = np.asarray(times, dtype=float).reshape(-1)
        self.sides = np.asarray(sides, dtype=np.int64).reshape(-1)
        self.labels = _label_codes(labels) if len(self.times) else np.empty(0, np.int64)
        n = self.times.size
        self.q = _as_rows(q, n)
        self.p = _as_rows(p, n)
        self.g_segment = None if g_segment is None else np.asarray(g_segment, dtype=float).reshape(-1)
        self.meta = dict(meta or {})
        if validate:
            self._validate()

    from_arrays = classmethod(lambda cls, *a, **k: cls(*a, **k))

    @classmethod
    def from_events(cls, events: Sequence, accumulators=None) -> "BoundaryChain":
        if not events:
            return cls.empty(1)
        d = events[0].x.dimension
        return cls([e.time for e in events], [e.side.code for e in events],
                   [e.set_label for e in events],
                   np.array([e.x.q for e in events]).reshape(-1, d),
                   np.array([e.x.p for e in events]).reshape(-1, d), accumulators)

    @classmethod
    def empty(cls, dimension: int = 1) -> "BoundaryChain":
        return cls(np.empty(0), np.empty(0), np.empty(0, np.int64),
                   np.empty((0, dimension)), np.empty((0, dimension)))

    def _validate(self):
        n = self.times.size
        if not (self.sides.size == self.labels.size == n == self.q.shape[0] == self.p.shape[0]):
            raise InvalidInputError("event columns have different lengths")
        if self.g_segment is not None and self.g_segment.size != n:
            raise InvalidInputError("g_segment length differs from the number of events")
        if np.any((self.sides != 1) & (self.sides != -1)):
            raise InvalidInputError("side codes must be +1 or -1")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InvalidInputError("event times must be strictly increasing")
        if self.is_sigma and n > 1 and np.any(self.sides[1:] == self.sides[:-1]):
            raise InvalidInputError("boundary chain sides must alternate")

    # -- views
    @property
    def is_sigma(self) -> bool:
        """True when the chain mixes entrances and exits."""
        return bool(np.any(self.sides == 1) and np.any(self.sides == -1))

    @property
    def dimension(self) -> int:
        return self.q.shape[1]

    def __len__(self):
        return self.times.size

    def __getitem__(self, i):
        return self.event(i)

    @property
    def set_labels(self) -> list:
        return [_LABELS[c] for c in self.labels]

    @property
    def events(self) -> list:
        return [self.event(i) for i in range(len(self))]

    def event(self, i: int):
        from .integrator import CrossingEvent
        return CrossingEvent(PhasePoint(self.q[i], self.p[i]), float(self.times[i]),
                             BoundarySide.from_code(int(self.sides[i])), _LABELS[int(self.labels[i])])

    def normal_speed(self, centers) -> np.ndarray:
        """``|p . n|`` at each event for ball regions with the given centers."""
        c = np.asarray(centers, dtype=float)[self.labels]
        u = self.q - c
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return np.abs(np.sum(self.p * u, axis=1))

    def subset(self, mask) -> "BoundaryChain":
        idx = np.nonzero(mask)[0] if np.asarray(mask).dtype == bool else np.asarray(mask)
        g = None if self.g_segment is None else self.g_segment[idx]
        return BoundaryChain(self.times[idx], self.sides[idx], self.labels[idx], self.q[idx],
                             self.p[idx], g, self.meta, validate=False)

    # -- CSV
    def to_csv(self, path) -> None:
        d = self.dimension
        header = (["index", "time", "side", "set"] + [f"q{i}" for i in range(d)]
                  + [f"p{i}" for i in range(d)] + ["g_segment"])
        with open(path, "w", newline="") as fh:
            fh.write(f"# format_version={CSV_FORMAT_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(header)
            side_names = {1: BoundarySide.GAMMA_PLUS.value, -1: BoundarySide.GAMMA_MINUS.value}
            for i in range(len(self)):
                g = "" if self.g_segment is None or np.isnan(self.g_segment[i]) else repr(float(self.g_segment[i]))
                w.writerow([i, repr(float(self.times[i])), side_names[int(self.sides[i])],
                            _LABELS[int(self.labels[i])]]
                           + [repr(float(v)) for v in self.q[i]] + [repr(float(v)) for v in self.p[i]] + [g])

    @classmethod
    def from_csv(cls, path) -> "BoundaryChain":
        text = _Path(path).read_text().splitlines()
        rows = [r for r in csv.reader(line for line in text if not line.startswith("#"))]
        header, body = rows[0], rows[1:]
        d = sum(1 for h in header if h.startswith("q"))
        codes = {BoundarySide.GAMMA_PLUS.value: 1, BoundarySide.GAMMA_MINUS.value: -1}
        n = len(body)
        q = np.array([[float(v) for v in r[4:4 + d]] for r in body]).reshape(n, d)
        p = np.array([[float(v) for v in r[4 + d:4 + 2 * d]] for r in body]).reshape(n, d)
        g_raw = [r[4 + 2 * d] for r in body]
        g = None if all(v == "" for v in g_raw) else np.array([float(v) if v else np.nan for v in g_raw])
        return cls([float(r[1]) for r in body], [codes[r[2]] for r in body], [r[3] for r in body],
                   q, p, g)


@dataclass(frozen=True)
class ReactiveIndexing:
    """Reactive entrance indices and the matching exit indices."""

    eta_re_A: tuple
    eta_re_B: tuple
    eta_ex_A: tuple
    eta_ex_B: tuple


@dataclass(frozen=True)
class TransitionSample:
    """One A-to-B transition: duration and, optionally, the integral of ``G``."""

    duration: float
    g_integral: float | None = None


@dataclass
class ReactiveSample:
    """Uniformly weighted events picked out of a chain by reactive indices."""

    indices: np.ndarray
    q: np.ndarray
    p: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.weights is None:
            n = len(self.indices)
            self.weights = np.full(n, 1.0 / n) if n else np.empty(0)

    def __len__(self):
        return len(self.indices)


def entry_subchain(chain: BoundaryChain) -> BoundaryChain:
    """Entrances only, with observable integrals summed between entrances."""
    return _side_subchain(chain, -1)


def exit_subchain(chain: BoundaryChain) -> BoundaryChain:
    """Exits only, with observable integrals summed between exits."""
    return _side_subchain(chain, 1)


def _side_subchain(chain: BoundaryChain, code: int) -> BoundaryChain:
    idx = np.nonzero(chain.sides == code)[0]
    sub = chain.subset(idx)
    if chain.g_segment is not None and idx.size:
        g = np.add.reduceat(np.nan_to_num(chain.g_segment, nan=0.0), idx) if idx.size else np.empty(0)
        # the last entry runs to the end of the chain, which is incomplete
        g[-1] = np.nan
        sub.g_segment = g
    return sub


def reactive_indexing(labels) -> ReactiveIndexing:
    """First entrances into A after B (and into B after A), from the first A."""
    codes = _label_codes(labels)
    if codes.size == 0:
        raise UsageError("labels must be nonempty")
    starts = np.nonzero(np.r_[True, codes[1:] != codes[:-1]])[0]
    run_labels = codes[starts]
    first_a = np.nonzero(run_labels == 0)[0]
    if first_a.size == 0:
        return ReactiveIndexing((), (), (), ())
    starts = starts[first_a[0]:]
    run_labels = run_labels[first_a[0]:]
    re_a = starts[run_labels == 0]
    re_b = starts[run_labels == 1]
    return ReactiveIndexing(tuple(int(i) for i in re_a), tuple(int(i) for i in re_b),
                            tuple(int(i) - 1 for i in re_b), tuple(int(i) - 1 for i in re_a[1:]))


def transition_samples(entry_chain: BoundaryChain) -> list:
    """Durations (and ``G`` integrals) of the completed A-to-B transitions."""
    if len(entry_chain) == 0:
        return []
    ri = reactive_indexing(entry_chain.labels)
    g = entry_chain.g_segment
    csum = None if g is None else np.r_[0.0, np.cumsum(np.nan_to_num(g, nan=0.0))]
    out = []
    for a, b in zip(ri.eta_re_A, ri.eta_re_B):
        gi = None if csum is None else float(csum[b] - csum[a])
        out.append(TransitionSample(float(entry_chain.times[b] - entry_chain.times[a]), gi))
    return out


def _pick(chain: BoundaryChain, indices) -> ReactiveSample:
    idx = np.asarray(indices, dtype=np.int64)
    return ReactiveSample(idx, chain.q[idx], chain.p[idx])


def empirical_reactive_entrance(entry_chain: BoundaryChain, target: str) -> ReactiveSample:
    """Events at the reactive entrance indices of ``target``."""
    ri = reactive_indexing(entry_chain.labels) if len(entry_chain) else ReactiveIndexing((), (), (), ())
    return _pick(entry_chain, ri.eta_re_A if target == "A" else ri.eta_re_B)


def empirical_reactive_exit(entry_chain: BoundaryChain, target: str) -> ReactiveSample:
    """Events at the reactive exit indices of ``target``."""
    ri = reactive_indexing(entry_chain.labels) if len(entry_chain) else ReactiveIndexing((), (), (), ())
    return _pick(entry_chain, ri.eta_ex_A if target == "A" else ri.eta_ex_B)
