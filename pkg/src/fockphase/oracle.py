"""Independent numerical verification of the optimal-state values.

Two searches confirm the closed forms without reusing their derivation:

* ``brute_force_reduced`` maximizes the reduced linear objective that
  remains after restricting to mirror-symmetric boundary kets (variables
  indexed by the total photon number s).  With two equality constraints
  every vertex of the feasible polytope has at most three active
  variables, so exhaustive small-support enumeration is a complete
  oracle; projected ascent from random feasible points cross-checks it.

* ``brute_force_full`` maximizes the raw variance objective over all
  occupation probabilities P_ij.  The objective is concave with rank-one
  curvature, so it only sees the two scalars (linear part, mean).  The
  search runs conditional-gradient ascent from random feasible mixtures,
  then takes the exact maximum of the resulting scalar quadratic over
  every segment between polytope vertices, which is where a concave
  objective over a polytope must peak.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .fock import PhaseEncoding
from .probes import ProbeSpec, closed_form_qfi

FEAS_TOL = 1e-10


@dataclass(frozen=True)
class ReducedProblem:
    """Boundary-ket optimization: variables x_s for s = 0..2N, where x_s is
    the per-member weight of the mirror pair at total photon number s
    (unpaired for s = 0 and s = 2N)."""

    N: int
    nbar: float
    encoding: PhaseEncoding

    def __post_init__(self):
        if not (0.0 < self.nbar < 2.0 * self.N):
            raise ValidationError("nbar outside (0, 2N)")

    @property
    def n_vars(self) -> int:
        return 2 * self.N + 1

    def objective_weights(self) -> np.ndarray:
        s = np.arange(self.n_vars, dtype=float)
        low = s <= self.N
        if self.encoding is PhaseEncoding.LINEAR:
            w = np.where(low, s**2, (2 * self.N - s) ** 2)
        else:
            w = np.where(low, s**4, s**2 * (2 * self.N - s) ** 2)
        return 2.0 * w

    def upper_bounds(self) -> np.ndarray:
        ub = np.full(self.n_vars, 0.5)
        ub[0] = ub[-1] = 1.0
        return ub

    def equality_system(self) -> tuple:
        """A x = b for the mass and photon-number constraints."""
        n = self.n_vars
        a = np.zeros((2, n))
        a[0, :] = 1.0
        a[0, 0] = a[0, -1] = 0.5
        a[1, :] = np.arange(n)
        a[1, -1] = self.N  # 2N - N from the self-referential photon term
        b = np.array([0.5, self.nbar / 2.0])
        return a, b

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        a, b = self.equality_system()
        if x.min() < -tol or (x - self.upper_bounds()).max() > tol:
            return False
        return bool(np.max(np.abs(a @ x - b)) <= tol)


@dataclass
class OracleReport:
    best_value: float
    best_distribution: list
    theorem_value: float
    gap: float
    starts: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {
                "best_value": self.best_value,
                "best_distribution": self.best_distribution,
                "theorem_value": self.theorem_value,
                "gap": self.gap,
                "starts": self.starts,
                "details": self.details,
            },
            indent=1,
        )


def _theorem_value(N: int, nbar: float, encoding: PhaseEncoding) -> float:
    return closed_form_qfi(ProbeSpec(N=N, nbar=nbar, encoding=encoding))


def _enumerate_supports(problem: ReducedProblem):
    """Best objective over all vertex candidates with support size <= 3.

    Size-1 and size-2 supports are solved exactly from the two equalities;
    size-3 supports form a line segment whose endpoints (where some box
    bound activates) carry the linear optimum.
    """
    a, b = problem.equality_system()
    ub = problem.upper_bounds()
    w = problem.objective_weights()
    n = problem.n_vars
    best_val, best_x = -np.inf, None

    def consider(support, values):
        nonlocal best_val, best_x
        x = np.zeros(n)
        x[list(support)] = values
        if problem.is_feasible(x):
            val = float(w @ x)
            if val > best_val:
                best_val, best_x = val, x

    for u in range(n):
        au0, au1 = a[0, u], a[1, u]
        if abs(au0) > 1e-15 and abs(au1) > 1e-15:
            x1, x2 = b[0] / au0, b[1] / au1
            if abs(x1 - x2) < 1e-9:
                consider((u,), [x1])
        for v in range(u + 1, n):
            det = a[0, u] * a[1, v] - a[0, v] * a[1, u]
            if abs(det) > 1e-12:
                xu = (b[0] * a[1, v] - b[1] * a[0, v]) / det
                xv = (a[0, u] * b[1] - a[1, u] * b[0]) / det
                consider((u, v), [xu, xv])
                rhs0 = np.array([xu, xv])
                inv = (
                    np.array([[a[1, v], -a[0, v]], [-a[1, u], a[0, u]]]) / det
                )
                for t in range(v + 1, n):
                    rhs1 = -inv @ a[:, t]
                    s_lo, s_hi = 0.0, ub[t]
                    for comp in range(2):
                        c0, c1 = rhs0[comp], rhs1[comp]
                        col = (u, v)[comp]
                        if abs(c1) < 1e-15:
                            continue
                        at_zero = -c0 / c1
                        at_ub = (ub[col] - c0) / c1
                        lo_c, hi_c = min(at_zero, at_ub), max(at_zero, at_ub)
                        s_lo, s_hi = max(s_lo, lo_c), min(s_hi, hi_c)
                    if s_lo > s_hi + 1e-12:
                        continue
                    for s_val in (s_lo, s_hi):
                        sol = rhs0 + rhs1 * s_val
                        consider((u, v, t), [sol[0], sol[1], s_val])
    return best_val, best_x


def _project_affine_box(x, a, b, ub, at=None, rounds: int = 40):
    """Alternating projections onto {Ax=b} and the box [0, ub]."""
    if at is None:
        at = a.T @ np.linalg.inv(a @ a.T)
    for _ in range(rounds):
        x = x + at @ (b - a @ x)
        x = np.clip(x, 0.0, ub)
    return x + at @ (b - a @ x)


def _ascend_linear(problem, x0, a, b, ub, at, iters: int = 100):
    w = problem.objective_weights()
    x = _project_affine_box(x0, a, b, ub, at)
    step = 0.5 / (np.abs(w).max() + 1.0)
    for _ in range(iters):
        x = _project_affine_box(x + step * w, a, b, ub, at, rounds=12)
        step *= 0.97
    return np.clip(x, 0.0, ub)


def brute_force_reduced(
    problem: ReducedProblem, starts: int = 200, tol: float = 1e-9, seed: int = 0
) -> OracleReport:
    """Maximize the reduced objective; report the gap to the closed form."""
    if problem.N > 8:
        raise ValidationError("reduced oracle is desk-scale: N <= 8")
    enum_val, enum_x = _enumerate_supports(problem)
    best_val, best_x = enum_val, enum_x
    rng = np.random.default_rng(seed)
    w = problem.objective_weights()
    a, b = problem.equality_system()
    ub = problem.upper_bounds()
    at = a.T @ np.linalg.inv(a @ a.T)
    search_best = -np.inf
    for _ in range(starts):
        x0 = rng.random(problem.n_vars) * ub
        x = _ascend_linear(problem, x0, a, b, ub, at)
        if problem.is_feasible(x, tol=1e-8):
            val = float(w @ x)
            search_best = max(search_best, val)
            if val > best_val:
                best_val, best_x = val, x
    theorem = _theorem_value(problem.N, problem.nbar, problem.encoding)
    dist = [
        {"s": int(s), "weight": float(v)}
        for s, v in enumerate(best_x)
        if v > 1e-9
    ]
    return OracleReport(
        best_value=float(best_val),
        best_distribution=dist,
        theorem_value=theorem,
        gap=theorem - float(best_val),
        starts=starts,
        details={"enumeration_value": float(enum_val), "search_value": float(search_best)},
    )


def _full_matrices(N: int, nbar: float, encoding: PhaseEncoding):
    dim = N + 1
    idx = np.arange(dim, dtype=float)
    i = np.repeat(idx, dim)
    j = np.tile(idx, dim)
    v = (i - j) if encoding is PhaseEncoding.LINEAR else (i**2 - j**2)
    a = np.vstack([np.ones(dim * dim), i + j])
    b = np.array([1.0, nbar])
    return v, a, b


def _full_vertices(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All basic feasible points: with two equality constraints and the
    simplex-like bounds, each vertex has at most two positive coordinates."""
    n = a.shape[1]
    out = []
    for u in range(n):
        if abs(a[1, u]) > 1e-15:
            x1, x2 = b[0] / a[0, u], b[1] / a[1, u]
            if abs(x1 - x2) < 1e-12 and x1 >= 0:
                x = np.zeros(n)
                x[u] = x1
                out.append(x)
        for w in range(u + 1, n):
            det = a[0, u] * a[1, w] - a[0, w] * a[1, u]
            if abs(det) < 1e-12:
                continue
            xu = (b[0] * a[1, w] - b[1] * a[0, w]) / det
            xw = (a[0, u] * b[1] - a[1, u] * b[0]) / det
            if xu >= -1e-15 and xw >= -1e-15:
                x = np.zeros(n)
                x[u], x[w] = max(xu, 0.0), max(xw, 0.0)
                out.append(x)
    return np.array(out)


def _segment_quadratic_max(w0, v0, w1, v1):
    """max over t in [0,1] of w(t) - v(t)^2 along the segment between two
    (linear part, mean) pairs; returns (value, t)."""
    dw, dv = w1 - w0, v1 - v0
    best = (w0 - v0 * v0, 0.0)
    end = (w1 - v1 * v1, 1.0)
    if end[0] > best[0]:
        best = end
    if abs(dv) > 1e-15:
        t = (dw - 2.0 * v0 * dv) / (2.0 * dv * dv)
        if 0.0 < t < 1.0:
            val = w0 + t * dw - (v0 + t * dv) ** 2
            if val > best[0]:
                best = (val, t)
    return best


def brute_force_full(
    N: int,
    nbar: float,
    encoding: PhaseEncoding,
    starts: int = 60,
    tol: float = 1e-6,
    seed: int = 0,
) -> OracleReport:
    """Maximize sum P v^2 - (sum P v)^2 over all P_ij with the normalization
    and photon-number constraints.

    Conditional-gradient ascent keeps every iterate exactly feasible; the
    exact segment maximization over all vertex pairs then removes the
    first-order method's zigzag tail (the concave objective peaks on the
    upper boundary of the polytope's 2D image, which those segments cover).
    """
    if N > 4:
        raise ValidationError("full oracle is desk-scale: N <= 4")
    encoding = PhaseEncoding(encoding)
    v, a, b = _full_matrices(N, nbar, encoding)
    verts = _full_vertices(a, b)
    if verts.size == 0:
        raise ValidationError("infeasible constraints")
    w2 = v * v
    vert_w = verts @ w2
    vert_v = verts @ v
    rng = np.random.default_rng(seed)

    def objective(p):
        mean = float(v @ p)
        return float(w2 @ p) - mean * mean

    search_best, best_p = -np.inf, None
    for _ in range(starts):
        mix = rng.random(verts.shape[0])
        p = (mix / mix.sum()) @ verts
        for _ in range(200):
            grad = w2 - 2.0 * float(v @ p) * v
            s_idx = int(np.argmax(verts @ grad))
            d = verts[s_idx] - p
            gd = float(grad @ d)
            if gd <= 1e-14:
                break
            dv = float(v @ d)
            gamma = gd / (2.0 * dv * dv) if abs(dv) > 1e-15 else 1.0
            gamma = min(max(gamma, 0.0), 1.0)
            p = p + gamma * d
        val = objective(p)
        if val > search_best:
            search_best, best_p = val, p

    pair_best, pair_p = -np.inf, None
    m = verts.shape[0]
    for i in range(m):
        for j in range(i, m):
            val, t = _segment_quadratic_max(
                vert_w[i], vert_v[i], vert_w[j], vert_v[j]
            )
            if val > pair_best:
                pair_best = val
                pair_p = (1.0 - t) * verts[i] + t * verts[j]

    if pair_best > search_best:
        best_val, best_p = pair_best, pair_p
    else:
        best_val = search_best
    theorem = _theorem_value(N, nbar, encoding)
    dim = N + 1
    dist = [
        {"i": int(k // dim), "j": int(k % dim), "weight": float(x)}
        for k, x in enumerate(best_p)
        if x > 1e-6
    ]
    return OracleReport(
        best_value=float(best_val),
        best_distribution=dist,
        theorem_value=theorem,
        gap=theorem - float(best_val),
        starts=starts,
        details={"search_value": float(search_best), "segment_value": float(pair_best)},
    )


def locate_breakpoint(N: int, tol: float = 1e-9) -> int:
    """Largest integer nbar whose nonlinear optimum is a single mirror pair
    (two-ket state); beyond it the optimum needs the |NN> admixture."""
    last_single = N
    for nbar in range(N, 2 * N):
        problem = ReducedProblem(N=N, nbar=float(nbar), encoding=PhaseEncoding.NONLINEAR)
        w = problem.objective_weights()
        enum_val, _ = _enumerate_supports(problem)
        single = w[nbar] * 0.5  # all weight on the pair at s = nbar
        if abs(single - enum_val) <= tol * max(1.0, abs(enum_val)):
            last_single = nbar
    return last_single
