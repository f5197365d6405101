"""Fisher-information computations: pure-state QFI, mixed-state QFI via the
symmetric logarithmic derivative, the classical Fisher information of an
outcome distribution, and error-propagation variances."""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalError, SingularOutcomeError, ValidationError
from .fock import PhaseEncoding, TwoModeState

PROB_FLOOR = 1e-14
SLOPE_TOL = 1e-10


def _generator_values(cutoff: int, encoding: PhaseEncoding) -> np.ndarray:
    idx = np.arange(cutoff + 1, dtype=float)
    i, j = idx[:, None], idx[None, :]
    if encoding is PhaseEncoding.LINEAR:
        return i - j
    return i**2 - j**2


def qfi_pure(state: TwoModeState, encoding: PhaseEncoding) -> float:
    """4 Var(G) for G = Jz (linear) or nJz (nonlinear).

    Both generators are diagonal in the Fock grid, so this reduces to the
    variance of (i-j) resp. (i^2-j^2) under |c_ij|^2.
    """
    p = state.probability_grid()
    norm = float(p.sum())
    if abs(norm - 1.0) > 1e-8:
        raise ValidationError(f"state not normalized: norm^2 = {norm}")
    v = _generator_values(state.cutoff, encoding)
    mean = float(np.sum(p * v))
    second = float(np.sum(p * v * v))
    return second - mean * mean


def qfi_mixed(rho, encoding: PhaseEncoding, pair_cutoff: float = 1e-12) -> float:
    """Mixed-state QFI of the covariant family e^{i phi G} rho e^{-i phi G}.

    Spectral form: with rho = sum_k lam_k |k><k| and G the (diagonal) phase
    generator, F = sum over eigenpairs with lam_k + lam_l > pair_cutoff of
    2 (lam_k - lam_l)^2 |<k|G|l>|^2 / (lam_k + lam_l).  Independent of phi,
    so it is evaluated once at phi = 0.

    ``rho`` may be a DensityMatrix or a raw Hermitian matrix over the same
    row-major grid.  ``pair_cutoff`` is relative to the unit trace and
    controls which near-null eigenpairs are dropped on rank-deficient input.
    """
    matrix, cutoff = _coerce_density(rho)
    lam, vecs = np.linalg.eigh(matrix)
    if lam.min() < -1e-10:
        raise NumericalError(f"density matrix has eigenvalue {lam.min():.3e} < -1e-10")
    lam = np.clip(lam, 0.0, None)
    g = _generator_values(cutoff, encoding).reshape(-1) / 2.0
    w = vecs.conj().T @ (g[:, None] * vecs)
    lsum = lam[:, None] + lam[None, :]
    ldiff = lam[:, None] - lam[None, :]
    mask = lsum > pair_cutoff
    terms = np.zeros_like(lsum)
    np.divide(2.0 * ldiff**2 * np.abs(w) ** 2, lsum, out=terms, where=mask)
    return float(terms.sum())


def _coerce_density(rho):
    from .loss import DensityMatrix  # local import to avoid a cycle

    if isinstance(rho, DensityMatrix):
        return rho.matrix, rho.cutoff
    matrix = np.asarray(rho, dtype=complex)
    dim = matrix.shape[0]
    cutoff = int(round(math.sqrt(dim))) - 1
    if (cutoff + 1) ** 2 != dim or matrix.shape != (dim, dim):
        raise ValidationError(f"density matrix shape {matrix.shape} is not a Fock grid")
    return matrix, cutoff


def cfi(probabilities, derivatives, prob_floor: float = PROB_FLOOR) -> float:
    """sum_i (dP_i)^2 / P_i over outcomes with P_i above the floor.

    Outcomes with P_i <= prob_floor and |dP_i| <= 1e-10 contribute nothing
    (structural zeros or smooth minima).  A vanishing probability with a
    nonvanishing slope means the distribution is evaluated exactly at a
    probability zero and the generic quotient is meaningless; callers that
    know the curvature should take the limit themselves.
    """
    p = np.asarray(probabilities, dtype=float)
    dp = np.asarray(derivatives, dtype=float)
    if p.shape != dp.shape:
        raise ValidationError("probability and derivative lists differ in length")
    if p.min() < -1e-12:
        raise ValidationError(f"negative probability {p.min():.3e}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"probabilities sum to {p.sum()}, not 1")
    live = p > prob_floor
    dead_sloped = ~live & (np.abs(dp) > SLOPE_TOL)
    if dead_sloped.any():
        k = int(np.argmax(dead_sloped))
        raise SingularOutcomeError(
            f"outcome {k} has P={p[k]:.3e} but slope {dp[k]:.3e}; "
            "evaluate the curvature-based limit instead"
        )
    return float(np.sum(dp[live] ** 2 / p[live]))


def error_propagation_variance(
    mean: float, second_moment: float, dmean_dphi: float
) -> float:
    """(⟨A^2⟩ - ⟨A⟩^2) / |d⟨A⟩/dphi|^2; infinite when the signal slope is zero."""
    var = second_moment - mean * mean
    if var < -1e-12:
        raise ValidationError("second moment below squared mean")
    var = max(var, 0.0)
    if dmean_dphi == 0.0:
        return math.inf
    return var / (dmean_dphi * dmean_dphi)
