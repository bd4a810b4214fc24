"""Pseudo-arclength continuation of steady branches in the (a, A = ||u||_1) plane.

The unknowns are the nodal values u_0..u_N together with a and A.  The node
count is fixed, so the mesh stretches with a (dx = a/N) and every Newton
iterate rebuilds the convolution operator for its current a.  Two rows are
appended to the steady equations:

    l1(u; a) - A = 0,        (a - a0)^2 + (A - A0)^2 - ds^2 = 0.

Newton corrections are obtained by bordering: two banded solves with the
steady Jacobian and a 2x2 system for (da, dA).  When the banded factorisation
breaks down the full augmented matrix is solved densely.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy import optimize

from .core import BC, DEFAULT_N, Params, Profile, as_values, bands_to_dense, build_grid
from .errors import ConvergenceError, DegenerateTangentError, DomainError, SingularJacobianError, StallError
from .linalg import BandedLU
from .steady import (
    NewtonOptions,
    SteadyProblem,
    closed_form_dirichlet,
    count_peaks,
    jacobian_bands,
    l1_norm,
    newton_solve,
    residual,
    residual_da,
    residual_floor,
)

__all__ = [
    "ContinuationOptions",
    "BranchPoint",
    "Branch",
    "augmented_residual",
    "predict",
    "TraceState",
    "step",
    "trace",
    "detect_folds",
    "refine_folds",
    "branch_tangent",
    "annotate_stability",
    "seed_point",
    "natural_continuation",
    "cusp_restart",
    "trace_with_restarts",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationOptions:
    ds_init: float = 1e-3
    ds_min: float = 1e-6
    ds_max: float = 5e-3
    grow: float = 1.5
    shrink: float = 0.5
    a_stop: float = 3.0
    a_min: float = 1e-3
    max_points: int = 100_000
    direction: int = 1
    newton_tol: float = 1e-10
    newton_max_iter: int = 8
    # reject a step whose chord turns back on the previous one by more than this
    min_cos: float = -0.5
    peak_threshold: float = 0.1
    refine_folds: bool = True

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds_init <= ds_max")
        if not (self.grow >= 1 and 0 < self.shrink < 1):
            raise ValueError("need grow >= 1 and 0 < shrink < 1")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if self.max_points < 1:
            raise ValueError("max_points must be >= 1")


@dataclass(eq=False)
class BranchPoint:
    a: float
    A: float
    values: np.ndarray = field(repr=False)
    N: int
    peaks: int = 0
    sigma_max: float | None = None
    stable: bool | None = None
    is_fold: bool = False
    ds: float = 0.0
    residual_norm: float = 0.0

    @property
    def profile(self) -> Profile:
        return Profile(self.values, build_grid(self.a, self.N))

    def state(self) -> np.ndarray:
        return np.r_[self.values, self.a, self.A]


@dataclass
class Branch:
    points: list[BranchPoint]
    D: float
    bc: BC
    N: int
    options: ContinuationOptions
    stall_reason: str | None = None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def a(self) -> np.ndarray:
        return np.array([p.a for p in self.points])

    @property
    def A(self) -> np.ndarray:
        return np.array([p.A for p in self.points])

    @property
    def sigma(self) -> np.ndarray:
        return np.array([np.nan if p.sigma_max is None else p.sigma_max for p in self.points])

    @property
    def folds(self) -> list[int]:
        return [i for i, p in enumerate(self.points) if p.is_fold]

    def arclength(self) -> np.ndarray:
        return np.r_[0.0, np.cumsum(np.hypot(np.diff(self.a), np.diff(self.A)))]

    def metadata(self) -> dict:
        return {
            "D": self.D,
            "bc": self.bc.value,
            "N": self.N,
            "options": {k: getattr(self.options, k) for k in self.options.__dataclass_fields__},
            "stall_reason": self.stall_reason,
            "n_points": len(self.points),
            "folds": self.folds,
        }


# -- augmented system -------------------------------------------------------------


def _problem(base: SteadyProblem, a: float) -> SteadyProblem:
    return base.at(a)


def augmented_residual(p: SteadyProblem, u, a: float, A: float, prev: BranchPoint, ds: float) -> np.ndarray:
    """N + 3 rows: steady equations at ``a``, area consistency, arclength constraint."""
    q = _problem(p, a)
    v = as_values(u, q.grid)
    return np.r_[residual(q, v), l1_norm(q.grid, v) - A, (a - prev.a) ** 2 + (A - prev.A) ** 2 - ds**2]


def _dense_augmented(J, b, Ra, w, l1a, a, A, prev, rhs):
    n = J.shape[0]
    M = np.zeros((n + 2, n + 2))
    M[:n, :n] = bands_to_dense(J, b)
    M[:n, n] = Ra
    M[n, :n] = w
    M[n, n] = l1a
    M[n, n + 1] = -1.0
    M[n + 1, n] = 2.0 * (a - prev.a)
    M[n + 1, n + 1] = 2.0 * (A - prev.A)
    try:
        return sla.solve(M, rhs, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularJacobianError(f"augmented system is singular: {exc}") from exc


def _corrector(base, u, a, A, prev, ds, opts: ContinuationOptions):
    """Newton on the augmented system from the guess (u, a, A)."""
    u = np.array(u, dtype=float)
    n = u.size
    for it in range(opts.newton_max_iter + 1):
        if not a > opts.a_min:
            raise ConvergenceError(f"corrector left the admissible range (a = {a:.4g})", iterations=it)
        q = _problem(base, a)
        R = residual(q, u)
        w = q.grid.trapezium_weights()
        l1 = float(w @ u)
        g = l1 - A
        rn = float(np.max(np.abs(R)))
        chord = math.hypot(a - prev.a, A - prev.A)
        if not np.isfinite(rn):
            raise ConvergenceError("corrector produced non-finite residual", iterations=it)
        if rn <= max(opts.newton_tol, residual_floor(q, u)) and abs(g) <= opts.newton_tol and abs(chord - ds) <= opts.newton_tol:
            return u, a, A, rn
        if it == opts.newton_max_iter:
            break
        J, b = jacobian_bands(q, u)
        Ra = residual_da(q, u)
        h = chord**2 - ds**2
        try:
            lu = BandedLU(J, b)
            y = lu.solve(np.column_stack([-R, Ra]))
            y1, y2 = y[:, 0], y[:, 1]
            M2 = np.array([[l1 / a - w @ y2, -1.0], [2.0 * (a - prev.a), 2.0 * (A - prev.A)]])
            rhs2 = np.array([-g - w @ y1, -h])
            da, dA = np.linalg.solve(M2, rhs2)
            du = y1 - y2 * da
        except (SingularJacobianError, np.linalg.LinAlgError):
            z = _dense_augmented(J, b, Ra, w, l1 / a, a, A, prev, -np.r_[R, g, h])
            du, da, dA = z[:n], z[n], z[n + 1]
        u, a, A = u + du, a + da, A + dA
    raise ConvergenceError(f"corrector did not converge (|R| = {rn:.3e})", residual_norm=rn, iterations=opts.newton_max_iter)


# -- predictor and stepping -----------------------------------------------------------


def predict(prev2: BranchPoint | None, prev: BranchPoint, ds: float, direction: int = 1):
    """Secant extrapolation of (u, a, A) to distance ``ds`` in the (a, A) plane.

    Without history the guess keeps u and A and moves a by ``direction * ds``.
    """
    if prev2 is None:
        return prev.values.copy(), prev.a + direction * ds, prev.A
    da, dA = prev.a - prev2.a, prev.A - prev2.A
    chord = math.hypot(da, dA)
    if chord == 0.0 or not np.isfinite(chord):
        raise DegenerateTangentError("previous two branch points coincide")
    s = ds / chord
    return prev.values + s * (prev.values - prev2.values), prev.a + s * da, prev.A + s * dA


@dataclass
class TraceState:
    base: SteadyProblem
    prev: BranchPoint
    prev2: BranchPoint | None = None
    ds: float = 1e-3
    direction: int = 1


def _make_point(base, u, a, A, rn, ds, opts) -> BranchPoint:
    bc = base.bc
    return BranchPoint(a=a, A=A, values=u, N=base.N, peaks=count_peaks(u, opts.peak_threshold, bc), ds=ds, residual_norm=rn)


def step(state: TraceState, opts: ContinuationOptions) -> BranchPoint:
    """One accepted continuation step; shrinks ds on failure and grows it on success.

    Raises :class:`StallError` once ds would drop below ``opts.ds_min``.
    """
    ds = min(max(state.ds, opts.ds_min), opts.ds_max)
    while True:
        try:
            u, a, A = predict(state.prev2, state.prev, ds, state.direction)
            u, a, A, rn = _corrector(state.base, u, a, A, state.prev, ds, opts)
            if state.prev2 is not None:
                t0 = np.array([state.prev.a - state.prev2.a, state.prev.A - state.prev2.A])
                t1 = np.array([a - state.prev.a, A - state.prev.A])
                cos = float(t0 @ t1) / (np.linalg.norm(t0) * np.linalg.norm(t1))
                if cos < opts.min_cos:
                    raise ConvergenceError(f"corrector turned back on the branch (cos = {cos:.3f})")
            break
        except ConvergenceError as exc:
            log.debug("step failed at a=%.6f ds=%.3e: %s", state.prev.a, ds, exc)
            ds *= opts.shrink
            if ds < opts.ds_min:
                raise StallError(f"step size fell below ds_min at a = {state.prev.a:.6g} ({exc})", state.prev.a, ds) from exc
    point = _make_point(state.base, u, a, A, rn, ds, opts)
    state.prev2, state.prev = state.prev, point
    state.ds = min(ds * opts.grow, opts.ds_max)
    return point


def trace(
    problem: SteadyProblem,
    seed: BranchPoint,
    opts: ContinuationOptions | None = None,
    prev2: BranchPoint | None = None,
    stop_near: tuple[float, float] | None = None,
    stop_radius: float = 0.02,
) -> Branch:
    """Follow the branch from ``seed`` until ``a_stop``, ``max_points`` or a stall.

    A stall terminates the trace and is recorded in ``Branch.stall_reason``.
    Tracing also ends if the branch returns to the trivial state (A <= 0)
    or, when ``stop_near`` is given, once it comes within ``stop_radius`` of
    that (a, A) location.
    """
    opts = opts or ContinuationOptions()
    base = problem.at(seed.a)
    state = TraceState(base=base, prev=seed, prev2=prev2, ds=opts.ds_init, direction=opts.direction)
    points = [seed]
    branch = Branch(points, problem.params.D, problem.bc, problem.N, opts)
    stop_hi = opts.a_stop if opts.direction > 0 else math.inf
    stop_lo = opts.a_stop if opts.direction < 0 else opts.a_min
    while len(points) < opts.max_points:
        try:
            pt = step(state, opts)
        except StallError as exc:
            branch.stall_reason = str(exc)
            log.info("trace stalled: %s", exc)
            break
        except DegenerateTangentError as exc:
            branch.stall_reason = f"degenerate tangent: {exc}"
            break
        points.append(pt)
        if pt.A <= 0.0:
            branch.stall_reason = "branch reached the trivial state"
            break
        if pt.a >= stop_hi or pt.a <= stop_lo:
            break
        if stop_near is not None and math.hypot(pt.a - stop_near[0], pt.A - stop_near[1]) < stop_radius:
            break
    if opts.refine_folds:
        refine_folds(problem, branch)
    return branch


# -- folds ------------------------------------------------------------------------------


def detect_folds(branch: Branch | list[BranchPoint]) -> list[int]:
    """Indices i where a(s) turns, i.e. sign(a_i - a_{i-1}) != sign(a_{i+1} - a_i)."""
    a = np.array([p.a for p in branch])
    if a.size < 3:
        return []
    d = np.sign(np.diff(a))
    return [i + 1 for i in range(d.size - 1) if d[i] != 0 and d[i + 1] != 0 and d[i] != d[i + 1]]


def branch_tangent(base: SteadyProblem, pt: BranchPoint, ref: np.ndarray) -> np.ndarray:
    """Unit tangent (da, dA) of the branch at ``pt``, oriented so its dot product with ``ref`` is positive.

    Solves the linearised augmented system with the normalisation
    ref . (da, dA) = 1; the dense solve stays well posed at folds where the
    steady Jacobian alone is singular.
    """
    q = _problem(base, pt.a)
    J, b = jacobian_bands(q, pt.values)
    n = J.shape[0]
    M = np.zeros((n + 2, n + 2))
    M[:n, :n] = bands_to_dense(J, b)
    M[:n, n] = residual_da(q, pt.values)
    M[n, :n] = q.grid.trapezium_weights()
    M[n, n] = l1_norm(q.grid, pt.values) / pt.a
    M[n, n + 1] = -1.0
    M[n + 1, n : n + 2] = ref
    rhs = np.zeros(n + 2)
    rhs[-1] = 1.0
    z = sla.solve(M, rhs, check_finite=False)
    t = z[n : n + 2]
    return t / np.linalg.norm(t)


def _fold_in_interval(base, q0: BranchPoint, q1: BranchPoint, opts, xtol: float) -> BranchPoint | None:
    """Converged fold between consecutive points, or None if the interval does not bracket one.

    Points are parametrised by their chord distance d from q0 (monotone for
    a single step) and oriented along q1 - q0; Brent's method finds the d at
    which the tangent's a-component vanishes.
    """
    ref = np.array([q1.a - q0.a, q1.A - q0.A])
    span = float(np.linalg.norm(ref))
    ref /= span
    known = {0.0: q0, span: q1}

    def on_chord(d):
        if d in known:
            return known[d]
        ds = sorted(known)
        j = next(k for k in range(1, len(ds)) if ds[k] > d)
        d0, d1 = ds[j - 1], ds[j]
        a0, a1 = known[d0], known[d1]
        f = (d - d0) / (d1 - d0)
        guess = (a0.values + f * (a1.values - a0.values), a0.a + f * (a1.a - a0.a), a0.A + f * (a1.A - a0.A))
        u, a, A, rn = _corrector(base, *guess, q0, d, opts)
        known[d] = _make_point(base, u, a, A, rn, d, opts)
        return known[d]

    def slope(d):
        return float(branch_tangent(base, on_chord(d), ref)[0])

    f0, f1 = slope(0.0), slope(span)
    if f0 * f1 > 0:
        return None
    d_star = optimize.brentq(slope, 0.0, span, xtol=xtol, maxiter=80)
    pt = on_chord(d_star)
    return None if pt is q0 or pt is q1 else pt


def refine_folds(problem: SteadyProblem, branch: Branch, xtol: float = 1e-11) -> list[int]:
    """Locate each fold where the a-component of the branch tangent vanishes and insert a converged point.

    For a turning triple (p0, p1, p2) each of the two step intervals is
    searched in turn.  When neither brackets the sign change (tight turns
    where the orientation of a whole step is ambiguous), the stretch is
    re-traced with steps eight times smaller and searched again.
    Returns the fold indices after insertion.
    """
    base = problem.at(branch.points[0].a)
    opts = replace(branch.options, newton_max_iter=12)
    for i in reversed(detect_folds(branch)):
        p0, p1, p2 = branch.points[i - 1 : i + 2]
        fold, slot = None, None
        try:
            for k, (q0, q1) in enumerate(((p0, p1), (p1, p2))):
                fold = _fold_in_interval(base, q0, q1, opts, xtol)
                if fold is not None:
                    slot = i + k
                    break
            if fold is None:
                fold = _fold_by_subdivision(base, branch, i, opts, xtol)
                slot = i if fold is not None and _before(p0, p1, fold) else i + 1
        except (ConvergenceError, ValueError, sla.LinAlgError, StallError, DegenerateTangentError) as exc:
            log.warning("fold refinement failed near a = %.6f: %s", p1.a, exc)
            fold = None
        if fold is None:
            p1.is_fold = True
            continue
        fold.is_fold = True
        branch.points.insert(slot, fold)
    return branch.folds


def _before(p0, p1, q) -> bool:
    return math.hypot(q.a - p0.a, q.A - p0.A) < math.hypot(p1.a - p0.a, p1.A - p0.A)


def _fold_by_subdivision(base, branch: Branch, i: int, opts, xtol: float, factor: int = 8):
    p_prev = branch.points[i - 2] if i >= 2 else None
    p0, p2 = branch.points[i - 1], branch.points[i + 1]
    ds_small = max(p2.ds, branch.points[i].ds) / factor
    small = replace(opts, ds_init=ds_small, ds_max=ds_small, ds_min=min(opts.ds_min / factor, ds_small))
    state = TraceState(base=base, prev=p0, prev2=p_prev, ds=small.ds_max, direction=1)
    path = [p0]
    for _ in range(4 * factor):
        path.append(step(state, small))
        if len(path) >= 3:
            q0, q1, q2 = path[-3:]
            if np.sign(q1.a - q0.a) != np.sign(q2.a - q1.a):
                for a_, b_ in ((q0, q1), (q1, q2)):
                    fold = _fold_in_interval(base, a_, b_, opts, xtol)
                    if fold is not None:
                        return fold
                return None
    return None


# -- stability annotation -------------------------------------------------------------


def _sigma_job(args):
    from .stability import analyse

    a, D, bc, N, values, mode = args
    p = SteadyProblem.build(Params(a, D, bc), N)
    res = analyse(p, values, mode=mode)
    return res.sigma_max


def annotate_stability(branch: Branch, stride: int = 10, mode: str = "iterative", jobs: int = 1, indices=None) -> Branch:
    """Fill ``sigma_max``/``stable`` on a subset of points.

    Always includes the ends, fold points and their neighbours, and points
    where the peak count changes; otherwise every ``stride``-th point.
    """
    n = len(branch)
    if indices is None:
        idx = set(range(0, n, max(1, stride))) | {n - 1}
        for i in branch.folds:
            idx |= {j for j in range(i - 2, i + 3) if 0 <= j < n}
        for i in range(1, n):
            if branch[i].peaks != branch[i - 1].peaks:
                idx |= {i - 1, i}
        indices = sorted(idx)
    jobs_args = [(branch[i].a, branch.D, branch.bc, branch.N, branch[i].values, mode) for i in indices]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            sig = list(ex.map(_sigma_job, jobs_args, chunksize=8))
    else:
        sig = [_sigma_job(j) for j in jobs_args]
    from .stability import classify, Classification

    for i, s in zip(indices, sig):
        pt = branch[i]
        pt.sigma_max = float(s)
        pt.stable = classify(s, max(1.0, float(np.max(np.abs(pt.values))))) is Classification.STABLE
    return branch


# -- seeds and restarts -------------------------------------------------------------------


def _galerkin_sine(problem: SteadyProblem) -> np.ndarray:
    """Best single-sine guess c sin(pi x/a) for the Dirichlet branch near onset."""
    x = problem.grid.nodes
    a, D = problem.params.a, problem.params.D
    s = np.sin(math.pi * x / a)
    w = problem.grid.trapezium_weights()
    ks = problem.conv.apply(s)
    c = (1.0 - math.pi**2 * D / a**2) * (w @ (s * s)) / (w @ (s * s * ks))
    return c * s


def seed_point(params: Params | SteadyProblem, N: int = DEFAULT_N, a0: float | None = None, opts: ContinuationOptions | None = None) -> BranchPoint:
    """Converged starting point on the primary branch.

    Dirichlet: the exact single arch at a0 in (pi sqrt D, 1/2) when that
    interval is non-empty, otherwise a Newton-polished sine just past the
    onset a = pi sqrt D.  Neumann: the constant state 1/a at a0 <= 1/2, or
    Newton from the core level a/(a - 1/4) beyond.
    """
    if isinstance(params, SteadyProblem):
        N = params.N
        params = params.params
    opts = opts or ContinuationOptions()
    D = params.D
    onset = math.pi * math.sqrt(D)
    if params.bc is BC.DIRICHLET:
        if a0 is None:
            a0 = 0.5 * (onset + 0.5) if onset < 0.5 else onset * 1.05
        if a0 <= onset:
            raise DomainError(f"no nontrivial Dirichlet state at a = {a0} <= pi sqrt(D) = {onset:.6g}")
        p = SteadyProblem.build(params.with_a(a0), N)
        if a0 <= 0.5:
            guess = closed_form_dirichlet(p.params, p.grid).values
        else:
            guess = _galerkin_sine(p)
    else:
        a0 = 0.4 if a0 is None else a0
        p = SteadyProblem.build(params.with_a(a0), N)
        level = 1.0 / a0 if a0 <= 0.5 else a0 / (a0 - 0.25)
        guess = np.full(N + 1, level)
    u = newton_solve(p, guess, NewtonOptions(tol_residual=opts.newton_tol)).values
    rn = float(np.max(np.abs(residual(p, u))))
    return _make_point(p, u, a0, l1_norm(p.grid, u), rn, 0.0, opts)


def natural_continuation(problem: SteadyProblem, start: BranchPoint, target_a: float, da: float = 0.01, opts: ContinuationOptions | None = None) -> BranchPoint:
    """Step a directly from ``start`` to ``target_a`` with fixed-a Newton at each stop.

    The step is halved on failure; raises :class:`StallError` when it drops below 1e-6.
    """
    opts = opts or ContinuationOptions()
    nopts = NewtonOptions(tol_residual=opts.newton_tol, max_iter=30)
    u, a = start.values.copy(), start.a
    h = abs(da)
    while a != target_a:
        nxt = target_a if abs(target_a - a) <= h else a + math.copysign(h, target_a - a)
        try:
            u = newton_solve(problem.at(nxt), u, nopts).values
            a = nxt
            h = min(2.0 * h, abs(da))
        except ConvergenceError as exc:
            h *= 0.5
            if h < 1e-6:
                raise StallError(f"natural continuation stalled at a = {a:.6g}", a, h) from exc
    p = problem.at(a)
    rn = float(np.max(np.abs(residual(p, u))))
    return _make_point(p, u, a, l1_norm(p.grid, u), rn, 0.0, opts)


def cusp_restart(problem: SteadyProblem, target_a: float, opts: ContinuationOptions | None = None, r: int | None = None, start: BranchPoint | None = None) -> BranchPoint:
    """Converged point at ``target_a`` on the r-peak echelon, for tracing back into a cusp.

    With ``start`` the point is reached by natural continuation from it.
    Otherwise the small-D r-peak construction is solved by fixed-a Newton at
    the centre of its existence window (or at ``target_a`` if that works
    directly) and continued naturally to ``target_a``.
    """
    from .oracles import small_D_profile

    opts = opts or ContinuationOptions()
    if start is None:
        if r is None:
            raise ValueError("need a peak count r or a start point")
        D, bc, N = problem.params.D, problem.bc, problem.N
        nopts = NewtonOptions(tol_residual=opts.newton_tol, max_iter=50)
        lo, hi = (0.5 * (r - 1), r - 0.5) if bc is BC.DIRICHLET else (0.5 * (r - 1), r - 0.5 * (3 - math.sqrt(2)))
        tries = [target_a] if lo < target_a < hi else []
        tries.append(0.5 * (lo + hi))
        last_exc = None
        for a_try in tries:
            p = problem.at(a_try)
            try:
                u = newton_solve(p, small_D_profile(a_try, D, r, bc, p.grid), nopts).values
            except (ConvergenceError, DomainError) as exc:
                last_exc = exc
                continue
            rn = float(np.max(np.abs(residual(p, u))))
            start = _make_point(p, u, a_try, l1_norm(p.grid, u), rn, 0.0, opts)
            break
        else:
            raise StallError(f"could not converge an {r}-peak seed ({last_exc})", target_a)
    return natural_continuation(problem, start, target_a, opts=opts)


def trace_with_restarts(
    problem: SteadyProblem,
    seed: BranchPoint,
    opts: ContinuationOptions | None = None,
    max_restarts: int = 20,
    margin: float = 0.1,
) -> list[Branch]:
    """Forward trace that restarts past each cusp it cannot turn.

    After a forward stall at (a_s, A_s) among r-peak states, the
    (r+1)-peak echelon is seeded at a_s + ``margin`` by natural continuation
    and traced backwards, through its lower fold and along the loop, until
    it stalls at or reaches the same cusp from the other side; a forward
    trace then resumes from the seed.  Returns the segments in that order
    (backward segments are stored in increasing-arclength order, i.e.
    ending at the restart seed).
    """
    opts = opts or ContinuationOptions()
    fwd = replace(opts, direction=1)
    segments = [trace(problem, seed, fwd)]
    restarts = 0
    while segments[-1].stall_reason and segments[-1][-1].a < opts.a_stop and restarts < max_restarts:
        last = segments[-1][-1]
        r = max(p.peaks for p in segments[-1].points[-20:]) + 1
        target = last.a + margin
        try:
            start = cusp_restart(problem, target, fwd, r=r)
        except StallError as exc:
            log.warning("cusp restart failed: %s", exc)
            segments[-1].stall_reason += f"; restart failed: {exc}"
            break
        back_opts = replace(opts, direction=-1, a_stop=max(0.5 * (r - 1) - 0.25, opts.a_min))
        back = trace(problem, start, back_opts, stop_near=(last.a, last.A))
        back.points.reverse()
        segments.append(back)
        segments.append(trace(problem, start, fwd))
        restarts += 1
    return segments
