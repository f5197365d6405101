"""Two-mode Fock-space states, mode operators, phase encodings, and the
50:50 beam splitter.

Basis layout is fixed package-wide: for a per-mode cutoff ``N`` the basis
ket |i j> (i photons in mode a, j in mode b) lives at the row-major flat
index ``k = i*(N+1) + j``.  Serialized states rely on this ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-12
AMPLITUDE_PRUNE = 1e-15


class PhaseEncoding(Enum):
    """Which generator accumulates the phase difference."""

    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class OperatorLabel(Enum):
    JX = "Jx"
    JY = "Jy"
    JZ = "Jz"
    NUMBER = "n"
    NJZ = "nJz"


class BeamSplitterDirection(Enum):
    """Sign of the half-angle in the 50:50 splitter unitary exp(∓i π/2 Jx)."""

    FORWARD = "forward"   # exp(-i pi/2 Jx)
    INVERSE = "inverse"   # exp(+i pi/2 Jx)


@dataclass(frozen=True)
class TwoModeState:
    """Normalized pure state on a (cutoff+1)^2 two-mode Fock grid.

    ``amplitudes[i, j]`` multiplies |i j>.  Instances are immutable; all
    operations return new states, so values can be shared freely between
    concurrent workers.
    """

    cutoff: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValidationError(f"cutoff must be an integer >= 1, got {self.cutoff}")
        amp = np.ascontiguousarray(self.amplitudes, dtype=complex)
        dim = self.cutoff + 1
        if amp.shape != (dim, dim):
            raise ValidationError(
                f"amplitude grid must be {(dim, dim)}, got {amp.shape}"
            )
        norm = float(np.sum(np.abs(amp) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"state norm^2 deviates from 1 by {norm - 1.0:.3e}")
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def from_kets(cls, cutoff: int, kets: dict) -> "TwoModeState":
        """Build a state from a sparse {(i, j): amplitude} map."""
        amp = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        for (i, j), c in kets.items():
            if not (0 <= i <= cutoff and 0 <= j <= cutoff):
                raise ValidationError(f"ket ({i},{j}) outside cutoff {cutoff}")
            amp[i, j] = c
        return cls(cutoff, amp)

    @property
    def vector(self) -> np.ndarray:
        """Flat row-major copy of the amplitude grid."""
        return self.amplitudes.reshape(-1).copy()

    def probability_grid(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def mean_photon_number(self) -> float:
        i = np.arange(self.cutoff + 1)
        total = i[:, None] + i[None, :]
        return float(np.sum(self.probability_grid() * total))

    def max_total_photons(self) -> int:
        """Largest i+j carrying amplitude above the pruning threshold."""
        i = np.arange(self.cutoff + 1)
        mask = np.abs(self.amplitudes) > AMPLITUDE_PRUNE
        if not mask.any():
            return 0
        totals = (i[:, None] + i[None, :])[mask]
        return int(totals.max())

    def embed(self, cutoff: int) -> "TwoModeState":
        """Copy the state onto a grid with a larger per-mode cutoff."""
        if cutoff < self.cutoff:
            raise ValidationError("cannot embed into a smaller cutoff")
        if cutoff == self.cutoff:
            return self
        amp = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
        amp[: self.cutoff + 1, : self.cutoff + 1] = self.amplitudes
        return TwoModeState(cutoff, amp)

    def overlap(self, other: "TwoModeState") -> complex:
        n = min(self.cutoff, other.cutoff) + 1
        a, b = self.amplitudes, other.amplitudes
        if self.cutoff != other.cutoff:
            if self.max_total_photons() > n - 1 or other.max_total_photons() > n - 1:
                raise ValidationError("states populate incompatible grids")
        return complex(np.vdot(a[:n, :n], b[:n, :n]))

    def to_json(self) -> str:
        entries = []
        for i in range(self.cutoff + 1):
            for j in range(self.cutoff + 1):
                c = self.amplitudes[i, j]
                if abs(c) > AMPLITUDE_PRUNE:
                    entries.append({"i": i, "j": j, "re": c.real, "im": c.imag})
        return json.dumps({"N": self.cutoff, "amplitudes": entries}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TwoModeState":
        data = json.loads(text)
        kets = {
            (e["i"], e["j"]): e["re"] + 1j * e["im"] for e in data["amplitudes"]
        }
        return cls.from_kets(data["N"], kets)


def _check_label(label) -> OperatorLabel:
    if isinstance(label, OperatorLabel):
        return label
    try:
        return OperatorLabel(label)
    except ValueError:
        raise ValidationError(f"unknown operator label {label!r}") from None


def build_operator(cutoff: int, label) -> np.ndarray:
    """Dense matrix of a Schwinger/number operator in the |i j> basis.

    Jz and n are diagonal with entries (i-j)/2 and i+j; Jx, Jy couple
    |i j> to |i±1 j∓1> with the usual ladder amplitudes; nJz is the
    diagonal product with entries (i^2 - j^2)/2.
    """
    label = _check_label(label)
    if cutoff < 1:
        raise ValidationError("cutoff must be >= 1")
    dim = cutoff + 1
    idx = np.arange(dim)
    i = np.repeat(idx, dim).astype(float)
    j = np.tile(idx, dim).astype(float)
    if label is OperatorLabel.JZ:
        return np.diag((i - j) / 2.0).astype(complex)
    if label is OperatorLabel.NUMBER:
        return np.diag(i + j).astype(complex)
    if label is OperatorLabel.NJZ:
        return np.diag((i**2 - j**2) / 2.0).astype(complex)

    # a†b |i j> = sqrt((i+1) j) |i+1, j-1>, ab† |i j> = sqrt(i (j+1)) |i-1, j+1>
    adag_b = np.zeros((dim * dim, dim * dim), dtype=complex)
    for ii in range(dim):
        for jj in range(dim):
            col = ii * dim + jj
            if ii + 1 <= cutoff and jj - 1 >= 0:
                row = (ii + 1) * dim + (jj - 1)
                adag_b[row, col] = math.sqrt((ii + 1) * jj)
    a_bdag = adag_b.conj().T
    if label is OperatorLabel.JX:
        return (adag_b + a_bdag) / 2.0
    return (adag_b - a_bdag) / (2.0j)


def phase_generator_diagonal(cutoff: int, encoding: PhaseEncoding) -> np.ndarray:
    """Diagonal of the phase generator (Jz or nJz) as a flat real vector."""
    idx = np.arange(cutoff + 1, dtype=float)
    i = idx[:, None]
    j = idx[None, :]
    if encoding is PhaseEncoding.LINEAR:
        g = (i - j) / 2.0
    else:
        g = (i**2 - j**2) / 2.0
    return g.reshape(-1)


def apply_linear_phase(state: TwoModeState, phi: float) -> TwoModeState:
    """c_ij -> exp(i phi (i-j)/2) c_ij."""
    idx = np.arange(state.cutoff + 1)
    phase = np.exp(1j * phi * (idx[:, None] - idx[None, :]) / 2.0)
    return TwoModeState(state.cutoff, state.amplitudes * phase)


def apply_nonlinear_phase(state: TwoModeState, phi: float) -> TwoModeState:
    """c_ij -> exp(i phi (i^2-j^2)/2) c_ij."""
    idx = np.arange(state.cutoff + 1)
    phase = np.exp(1j * phi * (idx[:, None] ** 2 - idx[None, :] ** 2) / 2.0)
    return TwoModeState(state.cutoff, state.amplitudes * phase)


def encode_phase(state: TwoModeState, encoding: PhaseEncoding, phi: float) -> TwoModeState:
    if encoding is PhaseEncoding.LINEAR:
        return apply_linear_phase(state, phi)
    return apply_nonlinear_phase(state, phi)


@lru_cache(maxsize=32)
def _bs_inverse_unitary(cutoff: int) -> np.ndarray:
    """exp(+i pi/2 Jx) via eigendecomposition of the Hermitian generator."""
    jx = build_operator(cutoff, OperatorLabel.JX)
    evals, evecs = np.linalg.eigh(jx)
    u = (evecs * np.exp(1j * (math.pi / 2.0) * evals)) @ evecs.conj().T
    return u


def beam_splitter_unitary(cutoff: int, direction: BeamSplitterDirection) -> np.ndarray:
    u = _bs_inverse_unitary(cutoff)
    if direction is BeamSplitterDirection.FORWARD:
        return u.conj().T
    return u


def beam_splitter_50_50(
    state: TwoModeState, direction: BeamSplitterDirection = BeamSplitterDirection.INVERSE
) -> TwoModeState:
    """Apply the 50:50 beam splitter exp(∓i pi/2 Jx).

    The rotation conserves i+j per ket, so the working grid is enlarged to
    the largest populated total photon number before rotating; kets like
    |N+k, l> produced from |N N> then stay representable.
    """
    if not isinstance(direction, BeamSplitterDirection):
        direction = BeamSplitterDirection(direction)
    work = max(state.cutoff, state.max_total_photons())
    embedded = state.embed(work)
    u = beam_splitter_unitary(work, direction)
    out = u @ embedded.vector
    return TwoModeState(work, out.reshape(work + 1, work + 1))
