"""Eigenvalue curves of the discretized Birman-Schwinger operator and the
root-finding that turns them into bound-state energies.

For fixed arm geometry the top eigenvalues lambda_j(kappa) are strictly
decreasing in kappa, so each level that starts above the coupling alpha at
the kappa floor crosses it exactly once; the crossing gives the energy
E_j = -kappa_j^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .discretization import Mesh, StarAssembler, build_mesh
from .errors import (
    BracketFailure,
    EigensolveFailure,
    NoCrossing,
    NotConverged,
)
from .geometry import StarConfig

DEFAULT_PANELS = 8
DEFAULT_ORDER = 12
DEFAULT_GRADING = 2.0
DEFAULT_KAPPA_FLOOR = 1e-4
DEFAULT_KAPPA_TOL = 1e-10

#: above this dimension the top eigenvalue comes from ARPACK instead of LAPACK
_DENSE_MAX = 1000

_POSITIVITY_TOL = 1e-10


def default_mesh(L: float) -> Mesh:
    return build_mesh(L, DEFAULT_PANELS, DEFAULT_ORDER, DEFAULT_GRADING)


def default_ladder(L: float) -> list[Mesh]:
    return [build_mesh(L, p, DEFAULT_ORDER, DEFAULT_GRADING) for p in (8, 16, 32)]


@dataclass(frozen=True)
class Level:
    """One bound-state level: index, crossing kappa, energy -kappa^2."""

    index: int
    kappa: float
    energy: float


@dataclass(frozen=True)
class SpectralResult:
    levels: tuple[Level, ...]
    ground_vector_positivity: bool
    arm_symmetry_residual: float
    parity: str | None
    mesh_metadata: dict
    residual: float

    @property
    def ground_energy(self) -> float:
        return self.levels[0].energy


class _CurveSolver:
    """Caches assembly geometry and eigen warm starts across kappa sweeps."""

    def __init__(self, config: StarConfig, mesh: Mesh, diag=None,
                 offdiag_corrections: bool = True):
        self.assembler = StarAssembler(
            config, mesh, diag=diag, offdiag_corrections=offdiag_corrections
        )
        self._warm: np.ndarray | None = None

    def lam(self, kappa: float, j: int = 1) -> float:
        """j-th largest eigenvalue of Q_kappa (j = 1 is the top)."""
        A = self.assembler.matrix(kappa)
        n = A.shape[0]
        try:
            if n <= _DENSE_MAX or j > 1:
                vals = sla.eigh(
                    A,
                    eigvals_only=True,
                    subset_by_index=[n - j, n - j],
                    overwrite_a=True,
                    check_finite=False,
                )
                return float(vals[0])
            v0 = self._warm if self._warm is not None and self._warm.size == n else None
            vals, vecs = spla.eigsh(A, k=1, which="LA", v0=v0, tol=1e-12)
            self._warm = vecs[:, 0]
            return float(vals[0])
        except (sla.LinAlgError, spla.ArpackError) as exc:
            raise EigensolveFailure(str(exc)) from exc

    def top_pair(self, kappa: float) -> tuple[float, np.ndarray]:
        A = self.assembler.matrix(kappa)
        n = A.shape[0]
        try:
            if n <= _DENSE_MAX:
                vals, vecs = sla.eigh(
                    A, subset_by_index=[n - 1, n - 1], check_finite=False
                )
            else:
                v0 = self._warm if self._warm is not None and self._warm.size == n else None
                vals, vecs = spla.eigsh(A, k=1, which="LA", v0=v0, tol=1e-12)
        except (sla.LinAlgError, spla.ArpackError) as exc:
            raise EigensolveFailure(str(exc)) from exc
        return float(vals[0]), vecs[:, 0]

    def spectrum(self, kappa: float) -> np.ndarray:
        A = self.assembler.matrix(kappa)
        try:
            return sla.eigvalsh(A, overwrite_a=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise EigensolveFailure(str(exc)) from exc


def lambda_curve(
    config: StarConfig, mesh: Mesh, kappa: float, count: int = 1
) -> np.ndarray:
    """Top ``count`` eigenvalues of the assembled operator, descending."""
    solver = _CurveSolver(config, mesh)
    A = solver.assembler.matrix(kappa)
    n = A.shape[0]
    try:
        vals = sla.eigh(
            A,
            eigvals_only=True,
            subset_by_index=[n - count, n - 1],
            overwrite_a=True,
            check_finite=False,
        )
    except sla.LinAlgError as exc:
        raise EigensolveFailure(str(exc)) from exc
    return vals[::-1]


def count_bound_states(
    config: StarConfig,
    mesh: Mesh,
    alpha: float,
    kappa_floor: float = DEFAULT_KAPPA_FLOOR,
) -> int:
    """Number of eigenvalues of Q at the kappa floor that exceed alpha.

    Every such curve is strictly decreasing and crosses alpha at some
    kappa > kappa_floor, so this is a lower-bound estimator of the number
    of bound states, accurate up to states within the floor of threshold.
    """
    solver = _CurveSolver(config, mesh)
    return int(np.sum(solver.spectrum(kappa_floor) > alpha))


def _solve_level(
    solver: _CurveSolver,
    alpha: float,
    j: int,
    kappa_floor: float,
    kappa_tol: float,
    hint: float | None = None,
) -> tuple[float, float, float]:
    """Root of lambda_j(kappa) = alpha: returns (kappa_j, E_j, residual)."""
    f = lambda k: solver.lam(k, j) - alpha

    lo = None
    if hint is not None and hint > kappa_floor:
        k0 = 0.8 * hint
        f0 = f(k0)
        while f0 <= 0.0 and k0 > kappa_floor:
            k0 = max(kappa_floor, 0.25 * k0)
            f0 = f(k0)
        if f0 > 0.0:
            lo, f_lo = k0, f0
    if lo is None:
        lo = kappa_floor
        f_lo = f(lo)
        if f_lo <= 0.0:
            raise NoCrossing(
                f"level {j} does not cross alpha={alpha} at this discretization"
            )
    hi = 2.0 * lo
    f_hi = f(hi)
    expansions = 0
    while f_hi > 0.0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        expansions += 1
        if expansions > 60:
            raise BracketFailure("eigenvalue curve did not fall below alpha")
        f_hi = f(hi)
    # the curve is monotone, so the bracket is certain; Brent interleaves
    # bisection steps with secant/inverse-quadratic polish inside it
    kappa_j = brentq(
        f, lo, hi, xtol=1e-14 * hi, rtol=max(kappa_tol, 1e-15), disp=False
    )
    residual = abs(f(kappa_j))
    return kappa_j, -kappa_j * kappa_j, residual


def solve_energy(
    config: StarConfig,
    mesh: Mesh,
    alpha: float,
    j: int = 1,
    kappa_floor: float = DEFAULT_KAPPA_FLOOR,
    kappa_tol: float = DEFAULT_KAPPA_TOL,
) -> tuple[float, float]:
    """Solve lambda_j(kappa) = alpha for level j; returns (kappa_j, E_j)."""
    solver = _CurveSolver(config, mesh)
    kappa_j, energy, _ = _solve_level(solver, alpha, j, kappa_floor, kappa_tol)
    return kappa_j, energy


def _diagnostics(config: StarConfig, vec: np.ndarray):
    M = vec.size // config.n_arms
    v = vec.copy()
    v *= np.sign(v[np.argmax(np.abs(v))]) or 1.0
    vmax = np.abs(v).max()
    positivity = bool(v.min() >= -_POSITIVITY_TOL * vmax)
    slices = v.reshape(config.n_arms, M)
    mean = slices.mean(axis=0)
    mnorm = np.linalg.norm(mean)
    if mnorm == 0.0:
        symmetry = np.inf
    else:
        symmetry = float(
            max(np.linalg.norm(s - mean) for s in slices) / mnorm
        )
    parity = None
    if config.n_arms == 2:
        a, b = slices
        parity = (
            "symmetric"
            if np.linalg.norm(a - b) <= np.linalg.norm(a + b)
            else "antisymmetric"
        )
    return positivity, symmetry, parity


def principal_eigenvalue(
    config: StarConfig,
    mesh: Mesh,
    alpha: float | None = None,
    kappa_floor: float = DEFAULT_KAPPA_FLOOR,
    kappa_tol: float = DEFAULT_KAPPA_TOL,
    _hint: float | None = None,
) -> SpectralResult:
    """Ground-state energy with eigenvector diagnostics.

    ``alpha`` defaults to the star's own coupling.  Diagnostics: positivity
    of the sign-fixed ground eigenvector, the maximum relative deviation of
    per-arm eigenvector slices from their mean, and (for N = 2) the parity
    of the ground state under arm exchange.
    """
    if alpha is None:
        alpha = config.coupling
    solver = _CurveSolver(config, mesh)
    kappa_1, energy, residual = _solve_level(
        solver, alpha, 1, kappa_floor, kappa_tol, hint=_hint
    )
    _, vec = solver.top_pair(kappa_1)
    positivity, symmetry, parity = _diagnostics(config, vec)
    return SpectralResult(
        levels=(Level(index=1, kappa=kappa_1, energy=energy),),
        ground_vector_positivity=positivity,
        arm_symmetry_residual=symmetry,
        parity=parity,
        mesh_metadata=mesh.metadata(),
        residual=residual,
    )


def refine_until(
    config: StarConfig,
    alpha: float,
    e_tol: float,
    mesh_ladder: list[Mesh] | None = None,
) -> SpectralResult:
    """Repeat the ground-state solve on successively refined meshes.

    Stops when the energy change between consecutive meshes is at most
    ``e_tol``.  The returned result's mesh metadata carries the ladder
    energies, their deltas, and the observed convergence order
    log2(|delta_prev| / |delta_last|).
    """
    if mesh_ladder is None:
        mesh_ladder = default_ladder(config.arm_length)
    if len(mesh_ladder) == 0:
        raise NotConverged("empty mesh ladder")

    energies: list[float] = []
    results: list[SpectralResult] = []
    hint = None
    converged = False
    for mesh in mesh_ladder:
        res = principal_eigenvalue(
            config, mesh, alpha, _hint=hint
        )
        hint = res.levels[0].kappa
        energies.append(res.ground_energy)
        results.append(res)
        if len(energies) >= 2 and abs(energies[-1] - energies[-2]) <= e_tol:
            converged = True
            break

    deltas = list(np.diff(energies))
    order = None
    if len(deltas) >= 2 and deltas[-1] != 0.0:
        order = float(np.log2(abs(deltas[-2] / deltas[-1])))
    meta = dict(results[-1].mesh_metadata)
    meta.update(
        ladder_energies=energies,
        ladder_deltas=deltas,
        observed_order=order,
        converged=converged,
    )
    final = SpectralResult(
        levels=results[-1].levels,
        ground_vector_positivity=results[-1].ground_vector_positivity,
        arm_symmetry_residual=results[-1].arm_symmetry_residual,
        parity=results[-1].parity,
        mesh_metadata=meta,
        residual=results[-1].residual,
    )
    if converged:
        return final
    if len(mesh_ladder) == 1:
        warnings.warn(
            "mesh ladder has a single level; reporting the unconverged value",
            stacklevel=2,
        )
        return final
    raise NotConverged(
        f"ladder exhausted: last delta {deltas[-1]:.3e} > e_tol {e_tol:.3e} "
        f"(energies {energies})"
    )
