"""Constructors for the optimal probe states, baselines, and their
closed-form quantum Fisher information.

For a per-mode cutoff N and mean photon number nbar the optimal probe is a
two- or three-ket superposition whose composition switches between five
branches: linear low/high (nbar below/above N) and nonlinear low/mid/high,
with the nonlinear mid/high breakpoint at floor(4N/3) plus one when
N mod 3 == 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .fock import PhaseEncoding, TwoModeState

TWO_PI = 2.0 * math.pi


class Regime(Enum):
    LIN_LOW = "lin_low"
    LIN_HIGH = "lin_high"
    NON_LOW = "non_low"
    NON_MID = "non_mid"
    NON_HIGH = "non_high"


@dataclass(frozen=True)
class RegimeTag:
    branch: Regime
    zeta: int | None = None


@dataclass(frozen=True)
class ProbeSpec:
    """Probe-state selector: cutoff, mean photon number, encoding, phases.

    Relative phases are reduced mod 2*pi; they never change the QFI but do
    shift the interference fringes of parity and photon counting.
    """

    N: int
    nbar: float
    encoding: PhaseEncoding
    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be an integer >= 1, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not (0.0 < self.nbar < 2.0 * self.N):
            raise ValidationError(
                f"nbar must lie in the open interval (0, 2N) = (0, {2 * self.N}), "
                f"got {self.nbar}"
            )
        if not isinstance(self.encoding, PhaseEncoding):
            object.__setattr__(self, "encoding", PhaseEncoding(self.encoding))
        for name in ("theta1", "theta2", "theta3", "theta"):
            object.__setattr__(self, name, float(getattr(self, name)) % TWO_PI)

    def nbar_is_integer(self, tol: float = 1e-12) -> bool:
        return abs(self.nbar - round(self.nbar)) <= tol


def mid_high_boundary(N: int) -> int:
    """Largest mean photon number still served by the nonlinear mid branch."""
    return (4 * N) // 3 + (1 if N % 3 == 2 else 0)


def zeta_value(N: int) -> int:
    return mid_high_boundary(N) - N


def classify_regime(spec: ProbeSpec) -> RegimeTag:
    """Pick the constructor branch; the boundary nbar == N goes low (the
    formulas coincide there)."""
    if spec.encoding is PhaseEncoding.LINEAR:
        branch = Regime.LIN_LOW if spec.nbar <= spec.N else Regime.LIN_HIGH
        return RegimeTag(branch)
    if spec.nbar <= spec.N:
        return RegimeTag(Regime.NON_LOW)
    if spec.nbar <= mid_high_boundary(spec.N):
        return RegimeTag(Regime.NON_MID)
    return RegimeTag(Regime.NON_HIGH, zeta=zeta_value(spec.N))


def _low_state(spec: ProbeSpec) -> dict:
    N, nbar = spec.N, spec.nbar
    kets = {
        (0, N): math.sqrt(nbar / (2.0 * N)) * _phase(spec.theta1),
        (N, 0): math.sqrt(nbar / (2.0 * N)) * _phase(spec.theta2),
    }
    w0 = 1.0 - nbar / N
    if w0 > 0.0:
        kets[(0, 0)] = math.sqrt(w0)
    return kets


def _phase(theta: float) -> complex:
    return complex(math.cos(theta), math.sin(theta))


def optimal_state(spec: ProbeSpec) -> TwoModeState:
    """The branch-optimal probe state, normalized, on the cutoff-N grid."""
    tag = classify_regime(spec)
    N, nbar = spec.N, spec.nbar
    if tag.branch in (Regime.LIN_LOW, Regime.NON_LOW):
        kets = _low_state(spec)
    elif tag.branch is Regime.LIN_HIGH:
        w_pair = (2.0 * N - nbar) / (2.0 * N)
        kets = {
            (0, N): math.sqrt(w_pair) * _phase(spec.theta1),
            (N, 0): math.sqrt(w_pair) * _phase(spec.theta2),
        }
        w_nn = nbar / N - 1.0
        if w_nn > 0.0:
            kets[(N, N)] = math.sqrt(w_nn)
    elif tag.branch is Regime.NON_MID:
        if spec.nbar_is_integer():
            # two-ket collapse; relative phase theta, matching the fringe
            # formulas and the lossy closed form for this branch
            lo = int(round(nbar)) - N
            kets = {
                (lo, N): math.sqrt(0.5),
                (N, lo): math.sqrt(0.5) * _phase(spec.theta),
            }
        else:
            floor_n = math.floor(spec.nbar)
            frac = spec.nbar - floor_n
            hi = floor_n + 1 - N
            lo = floor_n - N
            kets = {
                (hi, N): math.sqrt(frac / 2.0),
                (N, hi): math.sqrt(frac / 2.0) * _phase(spec.theta1),
                (lo, N): math.sqrt((1.0 - frac) / 2.0) * _phase(spec.theta2),
                (N, lo): math.sqrt((1.0 - frac) / 2.0) * _phase(spec.theta3),
            }
    else:
        zeta = tag.zeta
        w_pair = (2.0 * N - nbar) / (2.0 * (N - zeta))
        kets = {
            (zeta, N): math.sqrt(w_pair) * _phase(spec.theta1),
            (N, zeta): math.sqrt(w_pair) * _phase(spec.theta2),
        }
        w_nn = (nbar - N - zeta) / (N - zeta)
        if w_nn > 0.0:
            kets[(N, N)] = math.sqrt(w_nn)
    return TwoModeState.from_kets(N, kets)


def noon_state(n: int, theta: float = 0.0, cutoff: int | None = None) -> TwoModeState:
    """(|0 n> + e^{i theta} |n 0>)/sqrt(2) embedded at the given cutoff."""
    if cutoff is None:
        cutoff = n
    if not 1 <= n <= cutoff:
        raise ValidationError(f"need 1 <= n <= cutoff, got n={n}, cutoff={cutoff}")
    amp = 1.0 / math.sqrt(2.0)
    return TwoModeState.from_kets(
        cutoff, {(0, n): amp, (n, 0): amp * _phase(theta)}
    )


def closed_form_qfi(spec: ProbeSpec) -> float:
    """Branch-dispatched QFI of the optimal probe state."""
    tag = classify_regime(spec)
    N, nbar = spec.N, spec.nbar
    if tag.branch is Regime.LIN_LOW:
        return nbar * N
    if tag.branch is Regime.LIN_HIGH:
        return N * (2.0 * N - nbar)
    if tag.branch is Regime.NON_LOW:
        return nbar * N**3
    if tag.branch is Regime.NON_MID:
        floor_n = math.floor(nbar)
        frac = nbar - floor_n
        return frac * (floor_n + 1) ** 2 * (2 * N - floor_n - 1) ** 2 + (
            1.0 - frac
        ) * floor_n**2 * (2 * N - floor_n) ** 2
    s_star = mid_high_boundary(N)
    return (2.0 * N - nbar) * s_star**2 * (2 * N - s_star)


def _alpha_squared_from_nbar(nbar: float, tol: float = 1e-12) -> float:
    """Invert nbar = x / (1 + e^{-x}) for x = |alpha|^2 by bisection."""
    lo, hi = 0.0, max(4.0 * nbar, 50.0)

    def resid(x: float) -> float:
        return x / (1.0 + math.exp(-x)) - nbar if x > 0 else -nbar

    if resid(hi) < 0:
        raise ValidationError(f"bisection bracket failed for nbar={nbar}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if abs(resid(mid)) < tol:
            return mid
    return 0.5 * (lo + hi)


def entangled_coherent_qfi(nbar: float, encoding: PhaseEncoding) -> float:
    """QFI of the two-mode entangled coherent state with mean photon nbar."""
    if nbar <= 0:
        raise ValidationError("nbar must be positive")
    if not isinstance(encoding, PhaseEncoding):
        encoding = PhaseEncoding(encoding)
    x = _alpha_squared_from_nbar(nbar)
    c2 = 1.0 / (2.0 * (1.0 + math.exp(-x)))
    if encoding is PhaseEncoding.LINEAR:
        return 2.0 * c2 * x * (1.0 + x)
    return 2.0 * c2 * x * (x**3 + 6.0 * x**2 + 7.0 * x + 1.0)
