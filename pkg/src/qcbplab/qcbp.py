"""Quadratically constrained basis pursuit: problem type, exact oracle, solver.

The problem is min ||x||_1 subject to ||Ax - y||_2 <= eps for A with more
columns than rows.  Three solution paths live here:

* a closed-form exact solution set for single-row instances with positive real
  row, unit measurement and eps in [0,1) -- the oracle everything else is
  checked against;
* a generic float primal-dual solver whose results are re-certified a
  posteriori in exact rational arithmetic (residual bound, duality sandwich);
* a brute-force dyadic grid search, deliberately independent of both, used to
  cross-validate the oracle on tiny instances.

The single-valued selection rule is fixed once and for all: weight 1 on the
smallest active index.  Every downstream experiment inherits its determinism
from this choice.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction as Q
from math import ceil, lcm

import numpy as np

from qcbplab import _kernels
from qcbplab.rationals import (
    CZERO,
    CONE,
    ComplexQ,
    RationalMatrix,
    RationalVector,
    dyadic_sqrt_upper,
    fmt_rational,
    l1_norm_real,
    l2_norm_sq,
    matrix_from_json,
    matrix_to_json,
    operator_norm_sq_upper,
    parse_rational,
    rat_cmp,
    row_rank,
    vector_from_json,
    vector_to_json,
)


class OracleDomainError(ValueError):
    """A closed-form-oracle precondition failed; message names the condition."""


class RankDeficientError(ValueError):
    """solve_numeric requires full row rank so the constraint set is nonempty."""


class GridTooLargeError(ValueError):
    """brute_force_min rejected the requested grid size."""


@dataclass(frozen=True)
class Instance:
    """A QCBP problem (A, y, eps) with exact entries."""

    A: RationalMatrix
    y: RationalVector
    eps: Q

    def __post_init__(self):
        if self.A.m < 1:
            raise ValueError("need at least one row")
        if self.A.n < 2:
            raise ValueError("need at least two columns")
        if self.A.m >= self.A.n:
            raise ValueError(f"need m < N, got m={self.A.m}, N={self.A.n}")
        if self.y.n != self.A.m:
            raise ValueError("measurement length must equal row count")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    @property
    def m(self) -> int:
        return self.A.m

    @property
    def n(self) -> int:
        return self.A.n

    @staticmethod
    def single_row(row, y=1, eps: Q = Q(0)) -> "Instance":
        return Instance(
            A=RationalMatrix.from_rows([row]),
            y=RationalVector.from_items([y]),
            eps=Q(eps),
        )

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "N": self.n,
            "A": matrix_to_json(self.A),
            "y": vector_to_json(self.y),
            "eps": fmt_rational(self.eps),
        }

    @staticmethod
    def from_json(obj: dict) -> "Instance":
        return Instance(
            A=matrix_from_json(obj["A"]),
            y=vector_from_json(obj["y"]),
            eps=parse_rational(obj["eps"]),
        )


@dataclass(frozen=True)
class SolutionSimplex:
    """Closed-form solution set of a single-row instance.

    Every solution is sum_j t_j * scale * inv_coeff_j * e_j over the active
    indices, with barycentric weights t (t_j in [0,1], sum 1).  ``active``
    holds 0-based indices of the maximal row entries, ``inv_coeff`` their
    exact reciprocals, ``scale`` equals 1 - eps.
    """

    dimension: int
    scale: Q
    active: tuple[int, ...]
    inv_coeff: tuple[Q, ...]

    def __post_init__(self):
        if not self.active:
            raise ValueError("active set must be nonempty")
        if any(c <= 0 for c in self.inv_coeff):
            raise ValueError("inverse coefficients must be positive")

    def vertex(self, which: int) -> RationalVector:
        """The solution with full weight on active[which]."""
        j = self.active[which]
        entries = [CZERO] * self.dimension
        entries[j] = ComplexQ(self.scale * self.inv_coeff[which], Q(0))
        return RationalVector(tuple(entries))

    def point(self, weights: list[Q]) -> RationalVector:
        if len(weights) != len(self.active):
            raise ValueError("one weight per active index")
        if any(w < 0 for w in weights) or sum(weights) != 1:
            raise ValueError("weights must be nonnegative and sum to 1")
        entries = [CZERO] * self.dimension
        for w, j, inv in zip(weights, self.active, self.inv_coeff):
            entries[j] = ComplexQ(w * self.scale * inv, Q(0))
        return RationalVector(tuple(entries))

    def l1_value(self) -> Q:
        """Shared exact l1 norm of every point of the simplex."""
        return self.scale * self.inv_coeff[0]


def exact_solution_set(inst: Instance) -> SolutionSimplex:
    """Closed-form solution set for m=1, y=1, positive real row, eps in [0,1).

    Active indices are the maximizers of the row; each contributes the vertex
    (1-eps)/a_j * e_j, and the set is their convex hull.  Everything is exact.
    """
    if inst.m != 1:
        raise OracleDomainError(f"oracle requires a single row, got m={inst.m}")
    y0 = inst.y.entries[0]
    if not (y0.re == 1 and y0.im == 0):
        raise OracleDomainError("oracle requires y = 1")
    if not (0 <= inst.eps < 1):
        raise OracleDomainError(f"oracle requires eps in [0,1), got {inst.eps}")
    row = inst.A.rows[0]
    for j, e in enumerate(row):
        if e.im != 0:
            raise OracleDomainError(f"oracle requires a real row; entry {j} is complex")
        if e.re <= 0:
            raise OracleDomainError(f"oracle requires positive entries; entry {j} is {e.re}")
    amax = max(e.re for e in row)
    active = tuple(j for j, e in enumerate(row) if e.re == amax)
    inv = tuple(1 / row[j].re for j in active)
    return SolutionSimplex(dimension=inst.n, scale=1 - inst.eps, active=active, inv_coeff=inv)


def select(simplex: SolutionSimplex) -> RationalVector:
    """Single-valued selection: full weight on the smallest active index."""
    return simplex.vertex(0)


def enumerate_solutions(simplex: SolutionSimplex, count: int, seed: int) -> list[RationalVector]:
    """``count`` exact points of the simplex: the selection first, then
    rational barycentric combinations drawn deterministically from the seed.
    All returned points share the same exact l1 norm."""
    if count < 1:
        raise ValueError("count must be >= 1")
    points = [select(simplex)]
    if len(simplex.active) == 1:
        return [points[0]] * count
    rng = random.Random(seed)
    while len(points) < count:
        raw = [rng.randint(0, 1024) for _ in simplex.active]
        total = sum(raw)
        if total == 0:
            continue
        weights = [Q(r, total) for r in raw]
        points.append(simplex.point(weights))
    return points


def feasible(inst: Instance, x: RationalVector) -> bool:
    """Exact feasibility: compares squared residual against eps^2."""
    if x.n != inst.n:
        raise ValueError(f"candidate has length {x.n}, instance needs {inst.n}")
    residual = inst.A.matvec(x) - inst.y
    return rat_cmp(l2_norm_sq(residual), inst.eps * inst.eps) <= 0


# --- embedding of single-row instances into m > 1 ------------------------------

def embed(inst1: Instance, target_m: int, target_n: int) -> Instance:
    """Block-embed an m=1 instance: A' = [[A, 0], [0, I]], y' = (y, 0, ..., 0).

    The reduced width must satisfy N' = target_n + 1 - target_m, and solutions
    correspond exactly via zero-padding of the trailing target_m - 1 slots.
    """
    if inst1.m != 1:
        raise ValueError("embedding starts from a single-row instance")
    if target_m >= target_n:
        raise ValueError("embedding needs target_m < target_n")
    n_reduced = target_n + 1 - target_m
    if n_reduced != inst1.n:
        raise ValueError(
            f"dimension mismatch: embedding to ({target_m},{target_n}) needs a "
            f"width-{n_reduced} instance, got {inst1.n}"
        )
    if target_m == 1:
        return inst1
    rows = [tuple(inst1.A.rows[0]) + (CZERO,) * (target_m - 1)]
    for i in range(target_m - 1):
        row = [CZERO] * target_n
        row[n_reduced + i] = CONE
        rows.append(tuple(row))
    y = (inst1.y.entries[0],) + (CZERO,) * (target_m - 1)
    return Instance(A=RationalMatrix(tuple(rows)), y=RationalVector(y), eps=inst1.eps)


def split_embedded(inst: Instance) -> Instance:
    """Recover the reduced single-row instance from an embedded one.

    Verifies the exact block structure (identity tail rows, zero-padded
    measurement) before peeling; anything else is rejected.
    """
    if inst.m == 1:
        return inst
    n_reduced = inst.n + 1 - inst.m
    for j in range(n_reduced, inst.n):
        if inst.A.entry(0, j) != CZERO:
            raise ValueError("row 0 is not zero on the identity block columns")
    for i in range(1, inst.m):
        for j in range(inst.n):
            expected = CONE if j == n_reduced + i - 1 else CZERO
            if inst.A.entry(i, j) != expected:
                raise ValueError(f"row {i} is not an identity-block row")
        if inst.y.entries[i] != CZERO:
            raise ValueError("embedded measurement tail must be zero")
    return Instance(
        A=RationalMatrix((inst.A.rows[0][:n_reduced],)),
        y=RationalVector((inst.y.entries[0],)),
        eps=inst.eps,
    )


def restrict(x: RationalVector, target_m: int) -> RationalVector:
    """Drop the trailing target_m - 1 padding coordinates."""
    if target_m == 1:
        return x
    return RationalVector(x.entries[: x.n + 1 - target_m])


def select_embedded(inst: Instance) -> RationalVector:
    """Exact selected solution of an embedded instance, zero-padded.

    The tail coordinates enter the residual additively as x_i^2, so any
    minimum-l1 solution zeroes them and the problem reduces exactly to the
    single-row block; the oracle then applies to the reduced instance.
    """
    reduced = split_embedded(inst)
    x = select(exact_solution_set(reduced))
    if inst.m == 1:
        return x
    return RationalVector(x.entries + (CZERO,) * (inst.m - 1))


# --- generic numerical solver ---------------------------------------------------

@dataclass
class SolveReport:
    """Float solve plus exact a posteriori certificates.

    ``x`` holds the solution with exact dyadic entries (floats are dyadic);
    ``residual_ub`` is a dyadic upper bound on the true residual of that exact
    vector; ``objective_ub`` an exact upper bound on its l1 value; and
    ``lower_bound`` a weak-duality lower bound on the true optimum, so
    objective_ub - lower_bound brackets the suboptimality.
    """

    x: RationalVector
    x_float: np.ndarray
    objective_ub: Q
    lower_bound: Q
    residual_sq: Q
    residual_ub: Q
    iterations: int
    converged: bool
    op_norm_sq_bounds: tuple[Q, Q]

    def to_json(self) -> dict:
        return {
            "x": vector_to_json(self.x),
            "objective_ub": fmt_rational(self.objective_ub),
            "objective_float": float(self.objective_ub),
            "lower_bound": fmt_rational(self.lower_bound),
            "residual_sq": fmt_rational(self.residual_sq),
            "residual_ub": fmt_rational(self.residual_ub),
            "residual_float": float(self.residual_ub),
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _realified(inst: Instance) -> tuple[np.ndarray, np.ndarray, list[list[Q]], list[Q]]:
    """Real 2m x 2N operator [[Re A, -Im A], [Im A, Re A]] as floats and exact rows."""
    m, n = inst.m, inst.n
    exact = [[Q(0)] * (2 * n) for _ in range(2 * m)]
    for i in range(m):
        for j in range(n):
            e = inst.A.entry(i, j)
            exact[i][j] = e.re
            exact[i][n + j] = -e.im
            exact[m + i][j] = e.im
            exact[m + i][n + j] = e.re
    y_exact = [e.re for e in inst.y.entries] + [e.im for e in inst.y.entries]
    K = np.array([[float(v) for v in row] for row in exact], dtype=np.float64)
    yv = np.array([float(v) for v in y_exact], dtype=np.float64)
    return K, yv, exact, y_exact


def _rayleigh_lower_bound(inst: Instance) -> Q:
    """Certified rational lower bound on ||A||^2 via one exact Rayleigh quotient
    evaluated at a float power-iteration vector."""
    m, n = inst.m, inst.n
    A = np.array(
        [[complex(float(inst.A.entry(i, j).re), float(inst.A.entry(i, j).im)) for j in range(n)] for i in range(m)]
    )
    v = np.ones(n, dtype=np.complex128)
    for _ in range(50):
        w = A.conj().T @ (A @ v)
        norm = np.linalg.norm(w)
        if norm == 0:
            break
        v = w / norm
    v_exact = RationalVector.from_items(
        [ComplexQ(Q(float(c.real)), Q(float(c.imag))) for c in v]
    )
    denom = l2_norm_sq(v_exact)
    if denom == 0:
        return Q(0)
    return l2_norm_sq(inst.A.matvec(v_exact)) / denom


def _pair_l1_upper(entries: list[Q], n: int) -> Q:
    """Exact upper bound on sum_i |(re_i, im_i)|; exact when all im are zero."""
    total = Q(0)
    for i in range(n):
        total += dyadic_sqrt_upper(entries[i] ** 2 + entries[n + i] ** 2)
    return total


def _dual_lower_bound(z: np.ndarray, exact_k: list[list[Q]], y_exact: list[Q], eps: Q, n: int) -> Q:
    """Weak-duality lower bound from an exactified dual iterate.

    Scales z down by a certified bound on the pair-infinity norm of K^T z so
    the scaled vector is dual feasible, then evaluates the dual objective with
    an upper bound on ||z||, erring downward throughout.
    """
    zq = [Q(float(v)) for v in z]
    two_m = len(zq)
    kt_z = [sum(exact_k[i][j] * zq[i] for i in range(two_m)) for j in range(2 * n)]
    cmax_sq = max(kt_z[j] ** 2 + kt_z[n + j] ** 2 for j in range(n))
    c_ub = dyadic_sqrt_upper(cmax_sq) if cmax_sq > 1 else Q(1)
    ip = sum(y_exact[i] * zq[i] for i in range(two_m))
    z_norm_ub = dyadic_sqrt_upper(sum(v * v for v in zq))
    return (-ip - eps * z_norm_ub) / c_ub


def solve_numeric(inst: Instance, tol=Q(1, 10**6), max_iter: int = 200_000) -> SolveReport:
    """Primal-dual first-order solve with exact a posteriori certification.

    Iterates Chambolle-Pock in float64 with step sizes 1/L for a certified
    rational upper bound L on the operator norm, checking every batch whether
    the exactified iterate satisfies residual <= eps + tol and sits within tol
    of the best weak-duality lower bound.  Never trusts a float: all reported
    bounds are recomputed over the rationals.
    """
    tol = Q(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rank = row_rank(inst.A)
    if rank < inst.m:
        raise RankDeficientError(f"row rank {rank} < m={inst.m}")

    norm_sq_ub = operator_norm_sq_upper(inst.A)
    norm_sq_lb = _rayleigh_lower_bound(inst)
    L = float(dyadic_sqrt_upper(norm_sq_ub))
    step = 1.0 / L if L > 0 else 1.0

    K, yv, exact_k, y_exact = _realified(inst)
    n = inst.n
    x = np.zeros(2 * n)
    z = np.zeros(2 * inst.m)
    xbar = x.copy()
    eps_f = float(inst.eps)

    batch = 250
    iterations = 0
    best_lower = Q(0)  # x=0 shows the optimum is >= 0
    best_feasible: tuple[Q, Q, Q, RationalVector, np.ndarray] | None = None
    last: tuple[Q, Q, Q, RationalVector, np.ndarray] | None = None
    converged = False
    while iterations < max_iter:
        todo = min(batch, max_iter - iterations)
        x, z, xbar = _kernels.pd_iterate(K, yv, eps_f, step, step, x, z, xbar, todo, n)
        iterations += todo

        lower = _dual_lower_bound(z, exact_k, y_exact, inst.eps, n)
        if lower > best_lower:
            best_lower = lower
        xq = [Q(float(v)) for v in x]
        x_exact = RationalVector.from_items(
            [ComplexQ(xq[j], xq[n + j]) for j in range(n)]
        )
        residual_sq = l2_norm_sq(inst.A.matvec(x_exact) - inst.y)
        residual_ub = dyadic_sqrt_upper(residual_sq)
        objective_ub = _pair_l1_upper(xq, n)
        last = (objective_ub, residual_sq, residual_ub, x_exact, x.copy())
        if residual_ub <= inst.eps + tol and (
            best_feasible is None or objective_ub < best_feasible[0]
        ):
            best_feasible = last
        if best_feasible is not None and best_feasible[0] - best_lower <= tol:
            converged = True
            break

    objective_ub, residual_sq, residual_ub, x_exact, x_float = best_feasible or last
    return SolveReport(
        x=x_exact,
        x_float=x_float,
        objective_ub=objective_ub,
        lower_bound=best_lower,
        residual_sq=residual_sq,
        residual_ub=residual_ub,
        iterations=iterations,
        converged=converged,
        op_norm_sq_bounds=(norm_sq_lb, norm_sq_ub),
    )


# --- brute force ----------------------------------------------------------------

@dataclass
class BruteForceReport:
    """Best point of the relaxed dyadic grid search.

    The constraint is relaxed to eps + relaxation, where relaxation covers the
    worst-case feasibility loss from rounding any feasible point to the grid;
    this makes a near-optimal grid point always exist (exact-equality
    feasibility on a grid is generally empty, e.g. for eps = 0).  For
    single-row instances ``stated_tol`` is a proven two-sided bound on
    |value - true optimum|.
    """

    value: Q
    argmin: RationalVector
    grid_step: Q
    relaxation: Q
    stated_tol: Q | None
    box_radius: int


def _exact_particular_solution(inst: Instance) -> RationalVector:
    """Some exact real solution of Ax = y via Gaussian elimination (free vars 0).

    For a single row the largest entry gives the smallest search box, so pick
    it directly.
    """
    m, n = inst.m, inst.n
    if m == 1:
        best = max(range(n), key=lambda j: abs(inst.A.entry(0, j).re))
        a = inst.A.entry(0, best).re
        if a == 0:
            raise RankDeficientError("zero row cannot meet a nonzero measurement")
        x = [Q(0)] * n
        x[best] = inst.y.entries[0].re / a
        return RationalVector.from_items(x)
    work = [[inst.A.entry(i, j).re for j in range(n)] + [inst.y.entries[i].re] for i in range(m)]
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        pr = next((i for i in range(r, m) if work[i][c] != 0), None)
        if pr is None:
            continue
        work[r], work[pr] = work[pr], work[r]
        pv = work[r][c]
        work[r] = [v / pv for v in work[r]]
        for i in range(m):
            if i != r and work[i][c] != 0:
                f = work[i][c]
                work[i] = [a - f * b for a, b in zip(work[i], work[r])]
        pivots.append(c)
        r += 1
    if r < m:
        raise RankDeficientError("Ax = y has no solution path: rank-deficient rows")
    x = [Q(0)] * n
    for i, c in enumerate(pivots):
        x[c] = work[i][n]
    return RationalVector.from_items(x)


def brute_force_min(inst: Instance, grid_exp: int, work_cap: int = 300_000_000) -> BruteForceReport:
    """Exhaustive search over the dyadic grid of step 2**-grid_exp.

    Independent of the closed-form oracle and of the iterative solver: pure
    integer feasibility tests over a box sized by the l1 norm of one exact
    feasible point.  N <= 4, grid_exp <= 8, real instances only.
    """
    if inst.n > 4:
        raise GridTooLargeError(f"brute force supports N <= 4, got {inst.n}")
    if grid_exp > 8 or grid_exp < 0:
        raise GridTooLargeError(f"grid_exp must be in [0, 8], got {grid_exp}")
    if not (inst.A.is_real() and inst.y.is_real()):
        raise ValueError("brute force handles real instances only")

    h = Q(1, 2**grid_exp)
    norm_sq_ub = operator_norm_sq_upper(inst.A)
    op_ub = dyadic_sqrt_upper(norm_sq_ub, 20)
    sqrt_n_ub = dyadic_sqrt_upper(Q(inst.n), 20)
    relaxation = op_ub * sqrt_n_ub * h / 2

    if rat_cmp(l2_norm_sq(inst.y), inst.eps * inst.eps) <= 0:
        radius = Q(0)  # x = 0 is feasible, so it is the optimum
    else:
        radius = l1_norm_real(_exact_particular_solution(inst))
    k = ceil(radius / h)
    if (2 * k + 1) ** inst.n > work_cap:
        raise GridTooLargeError(
            f"grid has {(2 * k + 1) ** inst.n} points, cap is {work_cap}"
        )

    # integer form: with D = lcm-denominator * 2**grid_exp, row residuals are
    # s_i / D for integers s_i, and feasibility is sum s_i^2 <= floor(((eps+relax)*D)^2)
    dens = [inst.A.entry(i, j).re.denominator for i in range(inst.m) for j in range(inst.n)]
    dens += [e.re.denominator for e in inst.y.entries]
    common = lcm(*dens)
    coeffs = np.array(
        [[int(inst.A.entry(i, j).re * common) for j in range(inst.n)] for i in range(inst.m)],
        dtype=object,
    )
    scale = common * 2**grid_exp
    shift = np.array([int(e.re * scale) for e in inst.y.entries], dtype=object)
    rhs_q = ((inst.eps + relaxation) * scale) ** 2
    rhs = rhs_q.numerator // rhs_q.denominator

    max_row = [
        sum(abs(int(c)) for c in coeffs[i]) * k + abs(int(shift[i])) for i in range(inst.m)
    ]
    worst_sum = sum(s * s for s in max_row)
    exact_fallback = worst_sum >= 2**62 or rhs >= 2**62

    obj, p = _kernels.grid_scan(coeffs, shift, rhs, k, exact_fallback)
    if obj < 0:
        raise RuntimeError("relaxed grid search found no feasible point; relaxation bug")

    value = Q(obj) * h
    argmin = RationalVector.from_items([Q(int(v)) * h for v in p])

    stated_tol = None
    if inst.m == 1:
        amax = max(abs(e.re) for e in inst.A.rows[0])
        if amax > 0:
            # two-sided: grid rounding costs <= N*h/2 in l1; relaxing eps by
            # delta moves the single-row optimum max(0,|y|-eps)/amax by <= delta/amax
            stated_tol = Q(inst.n) * h / 2 + relaxation / amax
    return BruteForceReport(
        value=value,
        argmin=argmin,
        grid_step=h,
        relaxation=relaxation,
        stated_tol=stated_tol,
        box_radius=k,
    )
