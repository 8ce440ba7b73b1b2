"""Standard-form linear programs and a bounded revised simplex solver.

Problems have the shape ``min c @ x  s.t.  A x <= b`` where rows flagged in
``is_eq`` hold with equality. Variables are free; sign restrictions are
ordinary rows (``-x <= 0``). Rows with a single nonzero entry are folded into
variable bounds before pivoting, and their duals are recovered from reduced
costs afterwards, so bound rows do not enlarge the basis.

Duals follow the Lagrangian ``c @ x + lam @ (A x - b)``: ``lam >= 0`` on
inequality rows, free on equality rows, and ``c @ x* == -b @ lam*``.
"""

from __future__ import annotations

import enum
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import blas

#: Instrumentation; ``lp_solves`` counts calls to :func:`solve`,
#: ``factorizations`` counts sparse LU factorizations of an optimal basis.
COUNTERS: Counter = Counter()

TOL_FEAS = 1e-7
TOL_DUAL = 1e-7
TOL_ACTIVE = 1e-9


def reset_counters() -> None:
    COUNTERS.clear()


class NumericalFailure(RuntimeError):
    """Pivoting did not terminate within the iteration cap."""


class SingularBasis(np.linalg.LinAlgError):
    """The optimal basis cannot carry the requested perturbation."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class StandardFormLP:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    is_eq: np.ndarray
    row_tags: list
    col_tags: list

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.is_eq = np.asarray(self.is_eq, dtype=bool)
        m, n = self.A.shape
        if not (len(self.b) == len(self.is_eq) == len(self.row_tags) == m):
            raise ValueError("row dimensions disagree")
        if not (len(self.c) == len(self.col_tags) == n):
            raise ValueError("column dimensions disagree")
        self._row_lookup = None
        self._col_lookup = None

    @classmethod
    def from_dense(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> "StandardFormLP":
        c = np.asarray(c, dtype=float)
        blocks, rhs, eq = [], [], []
        if A_ub is not None and len(A_ub):
            blocks.append(np.atleast_2d(A_ub))
            rhs.append(np.asarray(b_ub, dtype=float))
            eq.append(np.zeros(len(b_ub), bool))
        if A_eq is not None and len(A_eq):
            blocks.append(np.atleast_2d(A_eq))
            rhs.append(np.asarray(b_eq, dtype=float))
            eq.append(np.ones(len(b_eq), bool))
        A = np.vstack(blocks) if blocks else np.zeros((0, len(c)))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        is_eq = np.concatenate(eq) if eq else np.zeros(0, bool)
        tags = [("eq" if e else "ub", i) for i, e in enumerate(is_eq)]
        return cls(c, A, b, is_eq, tags, [("x", j) for j in range(len(c))])

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def row(self, tag: Hashable) -> int:
        if self._row_lookup is None:
            self._row_lookup = {t: i for i, t in enumerate(self.row_tags)}
        return self._row_lookup[tag]

    def col(self, tag: Hashable) -> int:
        if self._col_lookup is None:
            self._col_lookup = {t: j for j, t in enumerate(self.col_tags)}
        return self._col_lookup[tag]


class LPBuilder:
    """Incremental assembly of a :class:`StandardFormLP` with semantic tags."""

    def __init__(self):
        self._c: list[float] = []
        self._col_tags: list = []
        self._cols: dict = {}
        self._rows: list[int] = []
        self._cidx: list[int] = []
        self._vals: list[float] = []
        self._b: list[float] = []
        self._eq: list[bool] = []
        self._row_tags: list = []

    def add_col(self, tag: Hashable, cost: float = 0.0) -> int:
        j = len(self._c)
        self._c.append(float(cost))
        self._col_tags.append(tag)
        self._cols[tag] = j
        return j

    def col(self, tag: Hashable) -> int:
        return self._cols[tag]

    def add_cost(self, j: int, cost: float) -> None:
        self._c[j] += cost

    def add_row(self, tag: Hashable, coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
                rhs: float = 0.0, eq: bool = False) -> int:
        i = len(self._b)
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for j, a in items:
            if a != 0.0:
                self._rows.append(i)
                self._cidx.append(j)
                self._vals.append(float(a))
        self._b.append(float(rhs))
        self._eq.append(bool(eq))
        self._row_tags.append(tag)
        return i

    def build(self) -> StandardFormLP:
        m, n = len(self._b), len(self._c)
        A = sp.coo_matrix((self._vals, (self._rows, self._cidx)), shape=(m, n)).tocsr()
        return StandardFormLP(np.array(self._c), A, np.array(self._b), np.array(self._eq, bool),
                              list(self._row_tags), list(self._col_tags))


# Variable states inside the simplex.
_BASIC, _LOWER, _UPPER, _FREE, _FIXED = 0, 1, 2, 3, 4


@dataclass
class _Presolved:
    kept: np.ndarray          # original indices of rows that stay rows
    A: np.ndarray             # dense (m x n) kept block
    b: np.ndarray
    is_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    lo_row: np.ndarray        # original row defining the lower bound, or -1
    hi_row: np.ndarray
    lo_coef: np.ndarray
    hi_coef: np.ndarray
    singleton: dict           # original row -> (column, coefficient)
    m: int                    # number of original rows


@dataclass
class _Basis:
    pre: _Presolved
    M: np.ndarray             # [A | slacks | artificials], dense
    basis: np.ndarray
    state: np.ndarray
    x: np.ndarray             # values of all internal columns
    n: int


@dataclass
class LPSolution:
    status: Status
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = float("nan")
    basis: tuple[int, ...] = ()
    iterations: int = 0
    certificate: np.ndarray | None = None
    _internal: _Basis | None = field(default=None, repr=False)
    _factor: "BasisFactor | None" = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def dual_objective(self, lp: StandardFormLP) -> float:
        return float(-lp.b @ self.duals)

    def factor(self) -> "BasisFactor":
        """Sparse LU of the optimal basis, built once and shared."""
        with self._lock:
            if self._factor is None:
                if self._internal is None:
                    raise SingularBasis("no optimal basis available")
                self._factor = BasisFactor(self._internal)
            return self._factor


def _presolve(lp: StandardFormLP) -> _Presolved | Status:
    A = lp.A.tocsr()
    m, n = A.shape
    nnz = np.diff(A.indptr)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    lo_row = np.full(n, -1)
    hi_row = np.full(n, -1)
    lo_coef = np.zeros(n)
    hi_coef = np.zeros(n)
    singleton = {}
    scale = max(1.0, float(np.max(np.abs(lp.b), initial=0.0)))
    for i in np.flatnonzero(nnz == 0):
        if lp.b[i] < -TOL_FEAS * scale or (lp.is_eq[i] and abs(lp.b[i]) > TOL_FEAS * scale):
            return Status.INFEASIBLE
    for i in np.flatnonzero(nnz == 1):
        j = A.indices[A.indptr[i]]
        a = A.data[A.indptr[i]]
        v = lp.b[i] / a
        singleton[i] = (j, a)
        if lp.is_eq[i] or a > 0:
            if v < hi[j]:
                hi[j], hi_row[j], hi_coef[j] = v, i, a
        if lp.is_eq[i] or a < 0:
            if v > lo[j]:
                lo[j], lo_row[j], lo_coef[j] = v, i, a
    if np.any(lo > hi + TOL_FEAS * np.maximum(1.0, np.abs(lo))):
        return Status.INFEASIBLE
    hi = np.maximum(hi, lo)
    kept = np.flatnonzero(nnz > 1)
    return _Presolved(kept, A[kept].toarray(), lp.b[kept].copy(), lp.is_eq[kept].copy(),
                      lo, hi, lo_row, hi_row, lo_coef, hi_coef, singleton, m)


class _Simplex:
    """Bounded-variable primal simplex on ``M z = b`` with an explicit inverse."""

    REINVERT = 64

    def __init__(self, M, b, lo, hi, basis, state, x, max_iter, bland_after):
        self.M, self.b, self.lo, self.hi = M, b, lo, hi
        self.basis, self.state, self.x = basis, state, x
        self.max_iter = max_iter
        self.bland_after = bland_after
        self.iterations = 0
        self.ray = None
        # sparse copies for pricing and column extraction; M itself stays fixed
        self.Mc = sp.csc_matrix(M)
        self.MT = self.Mc.T.tocsr()
        self.reinvert()

    def column(self, q: int) -> np.ndarray:
        """``Binv @ M[:, q]`` using the sparsity of the column."""
        lo, hi = self.Mc.indptr[q], self.Mc.indptr[q + 1]
        return self.Binv[:, self.Mc.indices[lo:hi]] @ self.Mc.data[lo:hi]

    def reinvert(self):
        m = len(self.basis)
        try:
            lu = spla.splu(self.Mc[:, self.basis].tocsc())
        except RuntimeError as exc:
            raise NumericalFailure(f"basis became singular: {exc}") from exc
        self.Binv = np.asfortranarray(lu.solve(np.eye(m)))
        nonbasic = self.state != _BASIC
        r = self.b - self.Mc[:, np.flatnonzero(nonbasic)] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ r

    def run(self, cost, tol_d, tol_p) -> str:
        lo, hi, x = self.lo, self.hi, self.x
        degenerate_run = 0
        since_reinvert = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex exceeded {self.max_iter} iterations")
            y = cost[self.basis] @ self.Binv
            d = cost - self.MT @ y
            st = self.state
            up = ((st == _LOWER) | (st == _FREE)) & (d < -tol_d)
            down = ((st == _UPPER) | (st == _FREE)) & (d > tol_d)
            eligible = np.flatnonzero(up | down)
            if eligible.size == 0:
                self.y = y
                self.d = d
                return "optimal"
            bland = degenerate_run >= self.bland_after
            if bland:
                q = int(eligible[0])
            else:
                q = int(eligible[np.argmax(np.abs(d[eligible]))])
            direction = 1.0 if up[q] else -1.0

            alpha = self.column(q)
            delta = -direction * alpha          # change of basic values per unit step
            xb = x[self.basis]
            lob = lo[self.basis]
            hib = hi[self.basis]
            ratios = np.full(len(delta), np.inf)
            piv = 1e-9
            dec = delta < -piv
            inc = delta > piv
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
                ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
            ratios = np.maximum(ratios, 0.0)
            theta = ratios.min() if ratios.size else np.inf
            flip = hi[q] - lo[q]
            if flip <= theta:
                # entering variable reaches its opposite bound first
                if not np.isfinite(flip):
                    self.ray = (q, direction, alpha)
                    return "unbounded"
                x[q] += direction * flip
                x[self.basis] += delta * flip
                self.state[q] = _UPPER if direction > 0 else _LOWER
                self.iterations += 1
                degenerate_run = 0
                continue
            if not np.isfinite(theta):
                self.ray = (q, direction, alpha)
                return "unbounded"
            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]) + 1e-15 * -self.basis[ties])])
            leaving = self.basis[r]
            x[q] += direction * theta
            x[self.basis] += delta * theta
            if delta[r] < 0:
                x[leaving] = lo[leaving]
                self.state[leaving] = _LOWER if lo[leaving] < hi[leaving] else _FIXED
            else:
                x[leaving] = hi[leaving]
                self.state[leaving] = _UPPER if lo[leaving] < hi[leaving] else _FIXED
            self.basis[r] = q
            self.state[q] = _BASIC
            self.iterations += 1
            degenerate_run = degenerate_run + 1 if theta <= tol_p else 0

            since_reinvert += 1
            if since_reinvert >= self.REINVERT:
                self.reinvert()
                since_reinvert = 0
            else:
                row = self.Binv[r] / alpha[r]
                self.Binv = blas.dger(-1.0, alpha, row, a=self.Binv, overwrite_a=True)
                self.Binv[r] = row


def solve(lp: StandardFormLP, *, max_iter: int | None = None, bland_after: int = 50,
          rhs_tilt: np.ndarray | None = None) -> LPSolution:
    """Solve ``lp`` to optimality, or certify infeasibility or unboundedness.

    Pivoting uses Dantzig pricing; after ``bland_after`` consecutive
    degenerate pivots it switches to Bland's rule until progress resumes.
    Ties are always broken by lowest index, so results are deterministic.

    ``rhs_tilt`` selects among the bases of a degenerate optimal vertex: the
    simplex runs on ``b + rhs_tilt`` and the final basis is evaluated at the
    original ``b``. The result is a basis that stays feasible when ``b`` moves
    along the tilt. Should that basis be infeasible for ``b`` (tilt too large),
    the problem is solved again without tilt.
    """
    COUNTERS["lp_solves"] += 1
    original = lp
    if rhs_tilt is not None:
        lp = StandardFormLP(lp.c, lp.A, lp.b + np.asarray(rhs_tilt, dtype=float), lp.is_eq,
                            lp.row_tags, lp.col_tags)
    pre = _presolve(lp)
    if isinstance(pre, Status):
        if rhs_tilt is not None and pre is Status.INFEASIBLE:
            return solve(original, max_iter=max_iter, bland_after=bland_after)
        return LPSolution(pre)

    m, n = pre.A.shape
    ineq = np.flatnonzero(~pre.is_eq)
    n_slack = len(ineq)
    N = n + n_slack + m
    M = np.zeros((m, N), order="F")
    M[:, :n] = pre.A
    M[ineq, n + np.arange(n_slack)] = 1.0

    lo = np.concatenate([pre.lo, np.zeros(n_slack), np.zeros(m)])
    hi = np.concatenate([pre.hi, np.full(n_slack, np.inf), np.zeros(m)])
    x = np.zeros(N)
    state = np.empty(N, dtype=int)
    for j in range(n):
        if pre.lo[j] == pre.hi[j]:
            x[j], state[j] = pre.lo[j], _FIXED
        elif np.isfinite(pre.lo[j]):
            x[j], state[j] = pre.lo[j], _LOWER
        elif np.isfinite(pre.hi[j]):
            x[j], state[j] = pre.hi[j], _UPPER
        else:
            x[j], state[j] = 0.0, _FREE
    state[n:] = _LOWER
    state[n + n_slack:] = _FIXED

    resid = pre.b - pre.A @ x[:n]
    basis = np.empty(m, dtype=int)
    slack_of = {int(i): n + k for k, i in enumerate(ineq)}
    phase1_cost = np.zeros(N)
    needs_phase1 = False
    for i in range(m):
        art = n + n_slack + i
        if i in slack_of and resid[i] >= 0:
            s = slack_of[i]
            basis[i], state[s], x[s] = s, _BASIC, resid[i]
            continue
        sign = 1.0 if resid[i] >= 0 else -1.0
        M[i, art] = sign
        hi[art] = np.inf
        basis[i], state[art], x[art] = art, _BASIC, abs(resid[i])
        phase1_cost[art] = 1.0
        needs_phase1 = True
    for i in range(m):
        art = n + n_slack + i
        if M[i, art] == 0.0:
            M[i, art] = 1.0   # unused artificial, fixed at zero

    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    b_scale = max(1.0, float(np.max(np.abs(pre.b), initial=0.0)),
                  float(np.max(np.abs(np.where(np.isfinite(pre.lo), pre.lo, 0.0)), initial=0.0)),
                  float(np.max(np.abs(np.where(np.isfinite(pre.hi), pre.hi, 0.0)), initial=0.0)))
    c_scale = max(1.0, float(np.max(np.abs(lp.c), initial=0.0)))
    tol_p = 1e-9 * b_scale

    simplex = _Simplex(M, pre.b, lo, hi, basis, state, x, max_iter, bland_after)
    if needs_phase1:
        simplex.run(phase1_cost, 1e-11, tol_p)
        infeas = float(phase1_cost @ simplex.x)
        if infeas > TOL_FEAS * b_scale:
            if rhs_tilt is not None:   # the tilt itself may cut off a tight problem
                return solve(original, max_iter=max_iter, bland_after=bland_after)
            return LPSolution(Status.INFEASIBLE, iterations=simplex.iterations,
                              certificate=_full_row_vector(lp, pre, -simplex.y))
    arts = np.arange(n + n_slack, N)
    hi[arts] = 0.0
    for a in arts:
        if state[a] != _BASIC:
            state[a], x[a] = _FIXED, 0.0

    cost = np.concatenate([lp.c, np.zeros(n_slack + m)])
    outcome = simplex.run(cost, 1e-12 * c_scale, tol_p)
    simplex.reinvert()
    if outcome == "unbounded":
        q, direction, alpha = simplex.ray
        ray = np.zeros(N)
        ray[q] = direction
        ray[simplex.basis] = -direction * alpha
        return LPSolution(Status.UNBOUNDED, iterations=simplex.iterations, certificate=ray[:n])

    if rhs_tilt is not None:
        pre = _retarget(simplex, original, n, tol_p)
        if pre is None:
            return solve(original, max_iter=max_iter, bland_after=bland_after)
        lp = original

    y = cost[simplex.basis] @ simplex.Binv
    d = lp.c - y @ pre.A
    xs = x[:n].copy()
    duals = _full_row_vector(lp, pre, -y)
    for j in range(n):
        if state[j] == _BASIC:
            continue
        if state[j] == _FIXED and pre.lo_row[j] == pre.hi_row[j] >= 0:
            duals[pre.lo_row[j]] = -d[j] / pre.lo_coef[j]
        elif state[j] in (_LOWER, _FIXED) and d[j] >= 0 and pre.lo_row[j] >= 0:
            duals[pre.lo_row[j]] = -d[j] / pre.lo_coef[j]
        elif state[j] in (_UPPER, _FIXED) and d[j] <= 0 and pre.hi_row[j] >= 0:
            duals[pre.hi_row[j]] = -d[j] / pre.hi_coef[j]
    internal = _Basis(pre, M, simplex.basis.copy(), state.copy(), x.copy(), n)
    return LPSolution(Status.OPTIMAL, xs, duals, float(lp.c @ xs),
                      tuple(int(k) for k in simplex.basis if k < n),
                      simplex.iterations, None, internal)


def _retarget(simplex: _Simplex, lp: StandardFormLP, n: int, tol: float) -> _Presolved | None:
    """Re-evaluate the final basis at the right-hand side of ``lp``."""
    pre = _presolve(lp)
    if isinstance(pre, Status):
        return None
    lo, hi, x, st = simplex.lo, simplex.hi, simplex.x, simplex.state
    lo[:n], hi[:n] = pre.lo, pre.hi
    for j in np.flatnonzero(st[:n] != _BASIC):
        if st[j] in (_LOWER, _FIXED):
            x[j] = pre.lo[j]
        elif st[j] == _UPPER:
            x[j] = pre.hi[j]
    simplex.b = pre.b
    simplex.reinvert()
    k = simplex.basis
    if np.any(x[k] < lo[k] - tol) or np.any(x[k] > hi[k] + tol):
        return None
    x[k] = np.clip(x[k], lo[k], hi[k])
    return pre


def _full_row_vector(lp, pre, kept_values):
    out = np.zeros(lp.n_rows)
    out[pre.kept] = kept_values
    return out


@dataclass(frozen=True)
class ActiveSet:
    rows: frozenset
    tight_zero_dual: frozenset

    def __contains__(self, i) -> bool:
        return i in self.rows

    def __iter__(self):
        return iter(sorted(self.rows))

    def __len__(self) -> int:
        return len(self.rows)


def active_set(lp: StandardFormLP, sol: LPSolution, tol: float = TOL_ACTIVE) -> ActiveSet:
    """Rows with positive dual plus all equality rows.

    Inequality rows that are tight but carry a zero dual are reported
    separately in ``tight_zero_dual`` and excluded from the set.
    """
    if not sol.optimal:
        raise ValueError("active set requires an optimal solution")
    slack = lp.b - lp.A @ sol.x
    scale = max(1.0, float(np.max(np.abs(lp.b), initial=0.0)))
    tight = np.abs(slack) <= 1e-9 * scale
    positive = sol.duals > tol
    rows = set(np.flatnonzero(lp.is_eq | (positive & ~lp.is_eq)).tolist())
    zero_dual = set(np.flatnonzero(tight & ~positive & ~lp.is_eq).tolist())
    return ActiveSet(frozenset(rows), frozenset(zero_dual))


class BasisFactor:
    """Sparse LU of an optimal simplex basis, reused across right-hand sides.

    :meth:`direction` maps a right-hand-side change ``db`` to the primal
    change of the solution when the basis is kept, together with the largest
    step along ``db`` for which the basis stays primal feasible (and hence
    optimal). A step of zero means the derivative along ``db`` is not
    delivered by this basis.
    """

    def __init__(self, internal: _Basis):
        self._b = internal
        B = sp.csc_matrix(internal.M[:, internal.basis])
        try:
            self._lu = spla.splu(B)
        except RuntimeError as exc:  # exactly singular
            raise SingularBasis(str(exc)) from exc
        COUNTERS["factorizations"] += 1
        pre = internal.pre
        self._n_kept = len(pre.kept)
        self._kept_pos = {int(r): k for k, r in enumerate(pre.kept)}
        n_total = internal.M.shape[1]
        self._artificial = internal.basis >= n_total - self._n_kept

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``B z = rhs`` for one or many (column-stacked) right-hand sides."""
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def direction(self, db) -> tuple[np.ndarray, float]:
        ib = self._b
        pre = ib.pre
        n = ib.n
        db = _as_dense(db, pre.m)
        dlo = np.zeros(n)
        dhi = np.zeros(n)
        rhs = np.zeros(self._n_kept)
        for i in np.flatnonzero(db):
            i = int(i)
            k = self._kept_pos.get(i)
            if k is not None:
                rhs[k] = db[i]
            elif i in pre.singleton:
                j, a = pre.singleton[i]
                if pre.lo_row[j] == i:
                    dlo[j] = db[i] / a
                if pre.hi_row[j] == i:
                    dhi[j] = db[i] / a

        dz = np.zeros(ib.M.shape[1])
        st = ib.state[:n]
        moving = (st == _LOWER) & (dlo != 0)
        dz[:n][moving] = dlo[moving]
        moving = (st == _UPPER) & (dhi != 0)
        dz[:n][moving] = dhi[moving]
        for j in np.flatnonzero((st == _FIXED) & ((dlo != 0) | (dhi != 0))):
            if pre.lo_row[j] == pre.hi_row[j]:
                dz[j] = dlo[j]
            elif dlo[j] > 0:
                dz[j] = dlo[j]
            elif dhi[j] < 0:
                dz[j] = dhi[j]
        nb = np.flatnonzero(dz)
        if nb.size:
            rhs = rhs - ib.M[:, nb] @ dz[nb]
        dxb = self._lu.solve(rhs)
        dz[ib.basis] = dxb
        scale = max(1.0, float(np.max(np.abs(dxb), initial=0.0)))
        if np.any(np.abs(dxb[self._artificial]) > 1e-9 * scale):
            raise SingularBasis("perturbation leaves the span of the active constraints")

        theta = np.inf
        lo_all = np.concatenate([pre.lo, np.zeros(len(ib.x) - n)])
        hi_all = np.concatenate([pre.hi, np.full(len(ib.x) - n, np.inf)])
        dlo_all = np.concatenate([dlo, np.zeros(len(ib.x) - n)])
        dhi_all = np.concatenate([dhi, np.zeros(len(ib.x) - n)])
        basic = ib.basis[~self._artificial]
        gap_tol = 1e-9 * max(1.0, float(np.max(np.abs(ib.x[basic]), initial=0.0)))
        for lim, dlim, sign in ((lo_all, dlo_all, 1.0), (hi_all, dhi_all, -1.0)):
            finite = np.isfinite(lim[basic])
            k = basic[finite]
            gap = sign * (ib.x[k] - lim[k])
            slope = sign * (dz[k] - dlim[k])
            shrinking = slope < -1e-12 * scale
            if np.any(shrinking):
                g = np.maximum(gap[shrinking], 0.0)
                g[g <= gap_tol] = 0.0
                theta = min(theta, float(np.min(g / -slope[shrinking])))
        # nonbasic variables follow one bound; the other must not overtake it
        nonbasic = np.flatnonzero(ib.state[:n] != _BASIC)
        width = pre.hi[nonbasic] - pre.lo[nonbasic]
        closing = (dhi[nonbasic] - dlo[nonbasic]) < -1e-12 * scale
        if np.any(closing):
            w = width[closing]
            rate = -(dhi[nonbasic] - dlo[nonbasic])[closing]
            with np.errstate(invalid="ignore"):
                theta = min(theta, float(np.min(np.where(np.isfinite(w), w / rate, np.inf))))
        return dz[:n], theta


def _as_dense(db, m: int) -> np.ndarray:
    if sp.issparse(db):
        return np.asarray(db.toarray()).ravel()
    if isinstance(db, Mapping):
        out = np.zeros(m)
        for i, v in db.items():
            out[i] = v
        return out
    return np.asarray(db, dtype=float)


def basis_solve(lp: StandardFormLP, sol: LPSolution, db) -> np.ndarray:
    """Primal change ``dx`` that keeps the optimal active constraints tight.

    ``db`` is a change of the right-hand side (dense vector, sparse vector,
    or ``{row: value}`` mapping). The basis factorization is computed on the
    first call and reused afterwards.
    """
    if not sol.optimal:
        raise ValueError("basis_solve requires an optimal solution")
    dx, _ = sol.factor().direction(db)
    return dx
