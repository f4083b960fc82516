"""Exact finite-state counterparts of the Hill relation and its ingredients.

Everything here is dense linear algebra on small row-stochastic matrices.
The module is the ground truth against which the Monte Carlo estimators are
checked: a finite chain can be simulated through the same chain and
estimator code as the Langevin event streams.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .chains import BoundaryChain
from .errors import HillgateError, InvalidInputError, UsageError

ROW_TOL = 1e-12


def _irreducible(P: np.ndarray) -> bool:
    n_comp, _ = connected_components(P > 0, directed=True, connection="strong")
    return n_comp == 1


class FiniteChain:
    """Row-stochastic matrix ``P`` with an optional A/B partition of the states."""

    def __init__(self, P, partition=None, states=None, check_irreducible: bool = True):
        P = np.array(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidInputError("P must be a square matrix")
        if np.any(P < 0):
            raise InvalidInputError("P has negative entries")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_TOL:
            raise InvalidInputError("rows of P must sum to 1")
        self.P = P
        self.n = P.shape[0]
        self.states = list(range(self.n)) if states is None else list(states)
        if len(self.states) != self.n:
            raise InvalidInputError("states and P have different sizes")
        if partition is None:
            self.partition = None
        else:
            part = np.array([0 if x in ("A", 0) else 1 if x in ("B", 1) else -1 for x in partition])
            if part.size != self.n or np.any(part < 0):
                raise InvalidInputError("partition must assign 'A' or 'B' to every state")
            if not (np.any(part == 0) and np.any(part == 1)):
                raise InvalidInputError("both A and B must be nonempty")
            self.partition = part
        if check_irreducible and not _irreducible(P):
            raise InvalidInputError("chain is not irreducible")

    @property
    def irreducible(self) -> bool:
        return _irreducible(self.P)

    @property
    def A(self) -> np.ndarray:
        self._need_partition()
        return np.nonzero(self.partition == 0)[0]

    @property
    def B(self) -> np.ndarray:
        self._need_partition()
        return np.nonzero(self.partition == 1)[0]

    def _need_partition(self):
        if self.partition is None:
            raise UsageError("this chain has no A/B partition")

    @classmethod
    def from_json(cls, path) -> "FiniteChain":
        with open(path) as fh:
            data = json.load(fh)
        try:
            return cls(data["P"], data.get("partition"), data.get("states"))
        except KeyError as exc:
            raise InvalidInputError(f"missing key {exc} in chain file") from None

    def to_json(self, path) -> None:
        data = {"P": self.P.tolist(), "states": self.states}
        if self.partition is not None:
            data["partition"] = ["AB"[i] for i in self.partition]
        with open(path, "w") as fh:
            json.dump(data, fh)


@dataclass(frozen=True)
class FiniteMeasure:
    weights: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -1e-15):
            raise InvalidInputError("measure weights must be nonnegative")
        if self.normalized and abs(w.sum() - 1.0) > 1e-12:
            raise InvalidInputError("normalized measure must sum to 1")
        object.__setattr__(self, "weights", w)

    def __call__(self, f) -> float:
        return float(self.weights @ np.asarray(f, dtype=float))

    def __getitem__(self, i):
        return self.weights[i]


def random_chain(n: int, rng: np.random.Generator, max_tries: int = 1000) -> FiniteChain:
    """Dirichlet(1, ..., 1) rows and a random A/B partition, redrawn until irreducible."""
    if n < 2:
        raise UsageError("need at least two states")
    for _ in range(max_tries):
        P = rng.dirichlet(np.ones(n), size=n)
        if not _irreducible(P):
            continue
        k = int(rng.integers(1, n))
        part = np.array([0] * k + [1] * (n - k))
        rng.shuffle(part)
        return FiniteChain(P, part)
    raise HillgateError("could not draw an irreducible chain")


def stationary(chain: FiniteChain) -> FiniteMeasure:
    """Solve ``pi P = pi``, ``sum(pi) = 1``, with one step of iterative refinement."""
    if not chain.irreducible:
        raise InvalidInputError("stationary law is not unique for a reducible chain")
    n = chain.n
    M = chain.P.T - np.eye(n)
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(M, b)
    pi = pi + np.linalg.solve(M, b - M @ pi)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    res = float(np.max(np.abs(pi @ chain.P - pi)))
    if res > 1e-12:
        raise HillgateError(f"stationary residual {res:.2e} exceeds 1e-12")
    return FiniteMeasure(pi)


def _pi(chain, pi):
    return stationary(chain).weights if pi is None else np.asarray(getattr(pi, "weights", pi), float)


def _flux(chain: FiniteChain, pi: np.ndarray, src, dst) -> np.ndarray:
    """``sum_{x in src} pi(x) P(x, y)`` for ``y`` in ``dst``."""
    return pi[src] @ chain.P[np.ix_(src, dst)]


def capacities(chain: FiniteChain, pi=None) -> tuple:
    """``(Pr_pi(Y0 in A, Y1 in B), Pr_pi(Y0 in B, Y1 in A))``."""
    pi = _pi(chain, pi)
    return float(_flux(chain, pi, chain.A, chain.B).sum()), float(_flux(chain, pi, chain.B, chain.A).sum())


def reactive_distributions(chain: FiniteChain, pi=None) -> tuple:
    """``(nu_re_A, nu_ex_A, nu_re_B, nu_ex_B)`` as measures on all states."""
    pi = _pi(chain, pi)
    A, B, P = chain.A, chain.B, chain.P
    out = []
    for own, other in ((A, B), (B, A)):
        re = np.zeros(chain.n)
        re[own] = _flux(chain, pi, other, own)
        ex = np.zeros(chain.n)
        ex[own] = pi[own] * P[np.ix_(own, other)].sum(axis=1)
        for w in (re, ex):
            if w.sum() <= 0:
                raise InvalidInputError("no flux between A and B")
            out.append(FiniteMeasure(w / w.sum()))
    return tuple(out)


def _g_on(chain: FiniteChain, g, idx) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.size == chain.n:
        return g[idx]
    if g.size == idx.size:
        return g
    raise UsageError("g must be given on all states or on the set only")


def dirichlet_solution(chain: FiniteChain, g) -> np.ndarray:
    """``f`` with ``(I - P) f = g`` on A and ``f = 0`` on B."""
    A = chain.A
    gA = _g_on(chain, g, A)
    M = np.eye(A.size) - chain.P[np.ix_(A, A)]
    try:
        fA = np.linalg.solve(M, gA)
    except np.linalg.LinAlgError:
        raise HillgateError("singular Dirichlet system") from None
    f = np.zeros(chain.n)
    f[A] = fA
    return f


def hill_lhs(chain: FiniteChain, g) -> float:
    """Mean of ``sum g(Y_n)`` over one A sojourn started from the reactive entrance law."""
    nu_re_a = reactive_distributions(chain)[0]
    return nu_re_a(dirichlet_solution(chain, g))


def hill_rhs(chain: FiniteChain, pi, g) -> float:
    """``pi_A(g) / Pr_{pi_A}(Y_1 in B)``."""
    pi = _pi(chain, pi)
    A, B = chain.A, chain.B
    gA = _g_on(chain, g, A)
    piA = pi[A] / pi[A].sum()
    to_b = chain.P[np.ix_(A, B)].sum(axis=1)
    denom = float(piA @ to_b)
    if denom <= 0:
        raise InvalidInputError("no flux from A to B")
    return float(piA @ gA) / denom


def representation_check(chain: FiniteChain, pi, C, g) -> tuple:
    """``(E_{pi_C}[sum_{n < eta_1} g(Y_n)], pi(g) / pi(C))`` with ``eta_1`` the return time to C."""
    pi = _pi(chain, pi)
    C = np.unique(np.asarray(C, dtype=int))
    if C.size == 0:
        raise UsageError("C must be nonempty")
    N = np.setdiff1d(np.arange(chain.n), C)
    g = np.asarray(g, dtype=float)
    if g.size != chain.n:
        raise UsageError("g must be given on all states")
    piC = pi[C].sum()
    if piC <= 0:
        raise InvalidInputError("pi(C) must be positive")
    h = np.zeros(chain.n)
    if N.size:
        M = np.eye(N.size) - chain.P[np.ix_(N, N)]
        h[N] = np.linalg.solve(M, g[N])
    occ = g[C] + chain.P[np.ix_(C, N)] @ h[N] if N.size else g[C]
    lhs = float((pi[C] / piC) @ occ)
    rhs = float(pi @ g) / piC
    return lhs, rhs


def pair_chain(chain: FiniteChain) -> tuple:
    """Chain of consecutive pairs ``(Y_n, Y_{n+1})`` on the support of ``P``.

    Returns ``(FiniteChain, pairs)``; ``pairs[k] = (i, j)`` labels state k and
    the partition follows the second coordinate.
    """
    pairs = [(i, j) for i in range(chain.n) for j in range(chain.n) if chain.P[i, j] > 0]
    index = {pq: k for k, pq in enumerate(pairs)}
    m = len(pairs)
    Q = np.zeros((m, m))
    for k, (i, j) in enumerate(pairs):
        for l in range(chain.n):
            if chain.P[j, l] > 0:
                Q[k, index[(j, l)]] = chain.P[j, l]
    part = None if chain.partition is None else [chain.partition[j] for _, j in pairs]
    return FiniteChain(Q, part, states=pairs), pairs


def trace_chain(chain: FiniteChain, C) -> FiniteChain:
    """Chain watched only on ``C``: ``Q = P_CC + P_CN (I - P_NN)^-1 P_NC``."""
    C = np.asarray(C, dtype=int)
    if C.size == 0:
        raise UsageError("C must be nonempty")
    N = np.setdiff1d(np.arange(chain.n), C)
    P = chain.P
    Q = P[np.ix_(C, C)].copy()
    if N.size:
        Q += P[np.ix_(C, N)] @ np.linalg.solve(np.eye(N.size) - P[np.ix_(N, N)], P[np.ix_(N, C)])
    Q /= Q.sum(axis=1, keepdims=True)
    part = None
    if chain.partition is not None:
        sub = chain.partition[C]
        part = sub if (np.any(sub == 0) and np.any(sub == 1)) else None
    return FiniteChain(Q, part, states=[chain.states[i] for i in C])


# ------------------------------------------------------------- renewal check

@dataclass(frozen=True)
class RenewalCheck:
    """Outcome of :func:`renewal_pair_check`.

    ``score_tv``: largest total variation between the law of the next
    excursion score given the next entrance point and the previous score,
    and the law of a fresh excursion score from that entrance point.
    ``kernel_tv``: largest total variation between the law of the next
    entrance point given the current entrance point and score, and its law
    given the entrance point only.  ``tail`` bounds the probability mass not
    resolved by the enumeration.
    """

    score_independent: bool
    kernel_independent: bool
    score_tv: float
    kernel_tv: float
    tail: float
    inconclusive: bool


def _sojourn(P_in, P_out, g_in, start, z_cap, horizon):
    """Enumerate a sojourn inside a set.

    ``start`` has shape ``(n_in, K)`` (K independent columns).  Returns the
    absorbed mass ``out[z, exit_state, K]`` and the unresolved mass per column.
    """
    n_in, K = start.shape
    n_out = P_out.shape[1]
    D = np.zeros((n_in, z_cap + 1, K))
    D[:, 0, :] = start
    out = np.zeros((z_cap + 1, n_out, K))
    lost = np.zeros(K)
    for _ in range(horizon):
        S = np.zeros_like(D)
        for a in range(n_in):
            s = int(g_in[a])
            if s:
                S[a, s:] = D[a, :-s]
                lost += D[a, -s:].sum(axis=0)
            else:
                S[a] = D[a]
        out += np.einsum("azk,ab->zbk", S, P_out)
        D = np.einsum("azk,ab->bzk", S, P_in)
        if D.sum() < 1e-300:
            break
    lost += D.sum(axis=(0, 1))
    return out, lost


def renewal_pair_check(chain: FiniteChain, g, z_cap: int = 64, horizon: int = 400,
                       tol: float = 1e-10) -> RenewalCheck:
    """Exact check of the conditional structure of (entrance point, excursion score).

    Scores are sums of ``g`` over the A sojourn following a reactive
    entrance; ``g`` must take nonnegative integer values so that scores
    live on a finite lattice.  Two successive excursions are enumerated
    jointly (A sojourn, B sojourn, A sojourn) up to ``horizon`` steps per
    sojourn and scores up to ``z_cap``.
    """
    if chain.n > 8:
        raise UsageError("renewal_pair_check is meant for chains with at most 8 states")
    g = np.asarray(g)
    if g.size != chain.n or np.any(g < 0) or np.any(g != np.round(g)):
        raise UsageError("g must be a nonnegative integer vector on all states")
    A, B, P = chain.A, chain.B, chain.P
    gA = g[A].astype(int)
    PAA, PAB = P[np.ix_(A, A)], P[np.ix_(A, B)]
    PBB, PBA = P[np.ix_(B, B)], P[np.ix_(B, A)]
    nA, nB = A.size, B.size
    # fresh excursion score from each entrance point: Q[y, z]
    fresh, lost_f = _sojourn(PAA, PAB, gA, np.eye(nA), z_cap, horizon)
    Q = fresh.sum(axis=1).T  # (y, z)
    # B sojourn: exit distribution to A from each B state
    HB = np.linalg.solve(np.eye(nB) - PBB, PBA) if nB else np.zeros((0, nA))
    tail = float(lost_f.max())
    score_tv, kernel_tv = 0.0, 0.0
    for y0 in range(nA):
        start = np.zeros((nA, 1))
        start[y0, 0] = 1.0
        first, lost0 = _sojourn(PAA, PAB, gA, start, z_cap, horizon)
        J = first[:, :, 0]  # (z0, b)
        tail = max(tail, float(lost0[0]))
        joint_y1 = J @ HB  # (z0, y1)
        p_re = joint_y1.sum(axis=0)
        p_re = p_re / p_re.sum()
        # second sojourn, each (z0, y1) column separately
        cols = joint_y1.reshape(-1)
        z0_idx, y1_idx = np.divmod(np.arange(cols.size), nA)
        start2 = np.zeros((nA, cols.size))
        start2[y1_idx, np.arange(cols.size)] = cols
        second, lost2 = _sojourn(PAA, PAB, gA, start2, z_cap, horizon)
        law_z1 = second.sum(axis=1)  # (z1, column)
        mass = cols
        tail = max(tail, float(np.max(np.where(mass > 0, lost2 / np.where(mass > 0, mass, 1), 0))))
        for c in np.nonzero(mass > 1e-9)[0]:
            cond = law_z1[:, c] / mass[c]
            score_tv = max(score_tv, 0.5 * float(np.abs(cond - Q[y1_idx[c]]).sum()))
        pz0 = joint_y1.sum(axis=1)
        for z0 in np.nonzero(pz0 > 1e-9)[0]:
            cond = joint_y1[z0] / pz0[z0]
            kernel_tv = max(kernel_tv, 0.5 * float(np.abs(cond - p_re).sum()))
    inconclusive = tail > tol
    return RenewalCheck(score_tv <= tol + 2 * tail, kernel_tv <= tol + 2 * tail,
                        score_tv, kernel_tv, tail, inconclusive)


def excursion_score_mean(chain: FiniteChain, g) -> float:
    """Exact mean score of one A sojourn under the reactive entrance law."""
    return hill_lhs(chain, g)


# --------------------------------------------------------------- simulation

def simulate(chain: FiniteChain, n_steps: int, rng: np.random.Generator, g=None,
             x0: int | None = None) -> BoundaryChain:
    """Sample path as an entry-style :class:`BoundaryChain` with ``time = n``.

    ``g_segment[n] = g(Y_n)``, so transition scores computed by
    :func:`hillgate.chains.transition_samples` are sums of ``g`` over A sojourns.
    """
    chain._need_partition()
    cum = np.cumsum(chain.P, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(n_steps)
    x = int(rng.integers(chain.n)) if x0 is None else int(x0)
    path = np.empty(n_steps, dtype=np.int64)
    for t in range(n_steps):
        path[t] = x
        x = int(np.searchsorted(cum[x], u[t], side="right"))
    labels = chain.partition[path]
    gs = None if g is None else np.asarray(g, dtype=float)[path]
    q = path.astype(float)[:, None]
    return BoundaryChain(np.arange(n_steps, dtype=float), -np.ones(n_steps), labels, q,
                         np.zeros_like(q), gs, validate=False)


def finite_excursions(chain: FiniteChain, g, n: int, rng: np.random.Generator, pi=None):
    """One-step returns from ``pi_A``: ``tau1 = 1``, score ``g(Y_0)``, hit if ``Y_1`` in B."""
    from .estimators import ExcursionSet
    pi = _pi(chain, pi)
    A = chain.A
    piA = pi[A] / pi[A].sum()
    x0 = A[rng.choice(A.size, size=n, p=piA)]
    cum = np.cumsum(chain.P[x0], axis=1)
    x1 = (rng.random(n)[:, None] > cum).sum(axis=1).clip(max=chain.n - 1)
    g = np.asarray(g, dtype=float)
    return ExcursionSet(np.ones(n), chain.partition[x1] == 1, g[x0])
