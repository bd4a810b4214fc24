"""Linear stability of steady states.

Perturbing u = u_s + e^{sigma t} v gives

    D v'' + (1 - K u_s) v - u_s K v = sigma v

with v = 0 (Dirichlet) or v' = 0 (Neumann) at both ends.  The discrete
operator is the interior block of the steady Jacobian; Neumann boundary
values are eliminated through the three-point closure
v_0 = (4 v_1 - v_2) / 3, so the matrix acts on the N - 1 interior nodes and
matches the linearisation of the time stepper in :mod:`nonlocal_kpp.evolve`.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import BC, Grid, Profile, as_values, bands_to_csr
from .steady import SteadyProblem, jacobian_bands

__all__ = [
    "Classification",
    "StabilityResult",
    "stability_matrix",
    "largest_eigenvalue",
    "classify",
    "analyse",
    "lift",
    "interior_weights",
    "weighted_symmetry_defect",
]

log = logging.getLogger(__name__)

DENSE_MAX_N = 1200
CLASSIFY_TOL = 1e-6


class Classification(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass
class StabilityResult:
    sigma_max: float
    eigenvector: Profile | np.ndarray
    spectrum_head: np.ndarray
    classification: Classification | None = None
    max_imag: float = 0.0
    mode: str = "dense"
    symmetric_defect: float = float("nan")
    warnings: list[str] = field(default_factory=list)


def _reduced_bands(p: SteadyProblem, u_s) -> tuple[np.ndarray, int]:
    J, b = jacobian_bands(p, u_s)
    M = J[1:-1].copy()
    if p.bc is BC.NEUMANN:
        # columns of node 0 / node N, seen from interior rows 1..N-1
        n = M.shape[0]
        rows = np.arange(n)
        k0 = b - (rows + 1)  # offset index of column 0 in row i = rows + 1
        kN = b + (p.N - (rows + 1))
        for kcol, step in ((k0, 1), (kN, -1)):
            ok = (kcol >= 0) & (kcol < 2 * b + 1)
            r = rows[ok]
            c0 = M[r, kcol[ok]]
            M[r, kcol[ok]] = 0.0
            M[r, kcol[ok] + step] += 4.0 / 3.0 * c0
            M[r, kcol[ok] + 2 * step] -= 1.0 / 3.0 * c0
    return M, b


def stability_matrix(p: SteadyProblem, u_s) -> sp.csr_matrix:
    """Discrete stability operator on the interior nodes (size (N-1) x (N-1))."""
    M, b = _reduced_bands(p, u_s)
    # rows of M correspond to nodes 1..N-1; shifting the band origin by one
    # node keeps column offsets relative to the row.
    return bands_to_csr(M, b)


def lift(p: SteadyProblem, v_interior: np.ndarray) -> Profile:
    """Extend an interior vector to the full grid using the boundary conditions."""
    v = np.zeros(p.N + 1)
    v[1:-1] = v_interior
    if p.bc is BC.NEUMANN:
        v[0] = (4.0 * v[1] - v[2]) / 3.0
        v[-1] = (4.0 * v[-2] - v[-3]) / 3.0
    return Profile(v, p.grid)


def interior_weights(grid: Grid, bc: BC | str) -> np.ndarray:
    """Quadrature weights of the interior nodes in the reduced inner product."""
    w = np.full(grid.N - 1, grid.dx)
    if BC.parse(bc) is BC.NEUMANN:
        w[0] = w[-1] = 1.5 * grid.dx
    return w


def weighted_symmetry_defect(M, weights: np.ndarray) -> float:
    """||W M - (W M)^T||_F / ||W M||_F."""
    A = sp.csr_matrix(M).multiply(weights[:, None]).tocsr()
    num = spla.norm(A - A.T)
    den = spla.norm(A)
    return float(num / den) if den > 0 else 0.0


def _normalise(vec: np.ndarray) -> np.ndarray:
    v = np.real(vec)
    i = int(np.argmax(np.abs(v)))
    if v[i] == 0:
        return v
    return v / v[i]


def _dense(M, k: int):
    A = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    w, V = sla.eig(A, check_finite=False)
    order = np.argsort(-w.real)
    return w[order][:k], V[:, order[:k]]


def _iterative(M, k: int, shift: float):
    A = sp.csc_matrix(M)
    n = A.shape[0]
    k_eff = min(k, n - 2)
    # fixed start vector: ARPACK's own random one makes results run-dependent
    v0 = np.cos(np.linspace(0.0, 3.0, n)) + 1.5
    w, V = spla.eigs(A, k=k_eff, sigma=shift, which="LM", tol=1e-10, maxiter=10_000, v0=v0)
    order = np.argsort(-w.real)
    return w[order], V[:, order]


def largest_eigenvalue(M, mode: str = "auto", k: int = 6, shift: float | None = None) -> StabilityResult:
    """Algebraically largest eigenvalue of ``M`` with the next ``k - 1``.

    ``dense`` solves the full (nonsymmetric) eigenproblem.  ``iterative``
    uses shift-invert Arnoldi about a real shift placed above the spectrum
    (default 1.05), so the eigenvalue nearest the shift is the rightmost
    one; it falls back to ``dense`` when Arnoldi does not converge.
    """
    n = M.shape[0]
    if mode == "auto":
        mode = "dense" if n <= DENSE_MAX_N else "iterative"
    notes: list[str] = []
    if mode == "iterative":
        s = 1.05 if shift is None else float(shift)
        try:
            for _ in range(6):
                w, V = _iterative(M, k, s)
                if w.real.max() < s - 1e-3:
                    break
                s = w.real.max() + 0.5
            else:
                raise spla.ArpackNoConvergence("shift never cleared the spectrum", [], [])
        except (spla.ArpackNoConvergence, spla.ArpackError, RuntimeError) as exc:
            notes.append(f"iterative eigensolve failed ({exc}); fell back to dense")
            log.warning(notes[-1])
            mode = "dense"
    elif mode != "dense":
        raise ValueError(f"unknown eigensolver mode {mode!r}")
    if mode == "dense":
        w, V = _dense(M, k)
    return StabilityResult(
        sigma_max=float(w[0].real),
        eigenvector=_normalise(V[:, 0]),
        spectrum_head=w.real.copy(),
        max_imag=float(np.abs(w.imag).max()) if w.size else 0.0,
        mode=mode,
        warnings=notes,
    )


def classify(sigma_max: float, scale: float = 1.0, tol: float = CLASSIFY_TOL) -> Classification:
    if sigma_max < -tol * scale:
        return Classification.STABLE
    if sigma_max > tol * scale:
        return Classification.UNSTABLE
    return Classification.MARGINAL


def analyse(p: SteadyProblem, u_s, mode: str = "auto", k: int = 6, shift: float | None = None) -> StabilityResult:
    """Stability matrix, leading eigenpairs and classification for one steady state."""
    v = as_values(u_s, p.grid)
    M = stability_matrix(p, v)
    res = largest_eigenvalue(M, mode=mode, k=k, shift=shift)
    res.eigenvector = lift(p, res.eigenvector)
    res.symmetric_defect = weighted_symmetry_defect(M, interior_weights(p.grid, p.bc))
    res.classification = classify(res.sigma_max, max(1.0, float(np.max(np.abs(v)))))
    return res
