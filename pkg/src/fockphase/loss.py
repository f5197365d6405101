"""Photon loss on the two arms, modeled as independent damping channels
with transmissions T1 (mode a) and T2 (mode b).

The channel acts on the probe before the phase is encoded.  For the linear
generator the order is irrelevant; for the nonlinear generator it matters
on coherences between kets of unequal photon number, and loss-first is the
convention every closed form here is written in.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .fock import TwoModeState
from .probes import ProbeSpec, Regime, classify_regime, mid_high_boundary

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = -1e-10


@dataclass(frozen=True)
class LossChannel:
    """Transmissions of the two fictitious splitters; R = 1 - T leaks out."""

    T1: float
    T2: float

    def __post_init__(self):
        for name, t in (("T1", self.T1), ("T2", self.T2)):
            if not 0.0 <= t <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {t}")

    @property
    def R1(self) -> float:
        return 1.0 - self.T1

    @property
    def R2(self) -> float:
        return 1.0 - self.T2

    @property
    def eta1(self) -> float:
        """Mixing angle with T1 = cos^2(eta1/2)."""
        return 2.0 * math.acos(math.sqrt(self.T1))

    @property
    def eta2(self) -> float:
        return 2.0 * math.acos(math.sqrt(self.T2))

    def is_identity(self) -> bool:
        return self.T1 == 1.0 and self.T2 == 1.0


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace operator on the (cutoff+1)^2 Fock grid."""

    cutoff: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=complex)
        dim = (self.cutoff + 1) ** 2
        if m.shape != (dim, dim):
            raise ValidationError(f"matrix must be {dim}x{dim}, got {m.shape}")
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > HERMITICITY_TOL:
            raise NumericalError(f"matrix deviates from Hermitian by {herm:.3e}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise NumericalError(f"trace = {tr}, not 1")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_pure(cls, state: TwoModeState) -> "DensityMatrix":
        v = state.vector
        return cls(state.cutoff, np.outer(v, v.conj()))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def validate_psd(self) -> None:
        lo = float(self.eigenvalues().min())
        if lo < PSD_TOL:
            raise NumericalError(f"eigenvalue {lo:.3e} below PSD tolerance")

    def element(self, ket: tuple, bra: tuple) -> complex:
        dim = self.cutoff + 1
        return complex(self.matrix[ket[0] * dim + ket[1], bra[0] * dim + bra[1]])

    def to_json(self) -> str:
        pairs = [[z.real, z.imag] for z in self.matrix.reshape(-1)]
        return json.dumps({"N": self.cutoff, "entries": pairs})

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        data = json.loads(text)
        dim = (data["N"] + 1) ** 2
        flat = np.array([complex(re, im) for re, im in data["entries"]])
        return cls(data["N"], flat.reshape(dim, dim))


def _kraus_weights(cutoff: int, T: float, R: float) -> np.ndarray:
    """w[n, k] = sqrt(C(n,k) T^(n-k) R^k): amplitude for losing k of n photons."""
    w = np.zeros((cutoff + 1, cutoff + 1))
    for n in range(cutoff + 1):
        for k in range(n + 1):
            w[n, k] = math.sqrt(math.comb(n, k) * T ** (n - k) * R**k)
    return w


def apply_loss(state: TwoModeState, channel: LossChannel) -> DensityMatrix:
    """Trace over both leakage modes, written as a per-mode Kraus sum.

    The environment picks up i^k phases from the splitters, but they cancel
    in the traced-out weights, leaving real binomial amplitudes
    sqrt(C(n,k)) T^((n-k)/2) R^(k/2) per mode.  Trace preservation is exact
    because sum_k C(n,k) T^(n-k) R^k = 1.
    """
    n = state.cutoff
    dim = n + 1
    w1 = _kraus_weights(n, channel.T1, channel.R1)
    w2 = _kraus_weights(n, channel.T2, channel.R2)
    c = state.amplitudes
    rho = np.zeros((dim * dim, dim * dim), dtype=complex)
    for k in range(dim):
        for l in range(dim):
            d = np.zeros((dim, dim), dtype=complex)
            d[: dim - k, : dim - l] = (
                c[k:, l:] * w1[k:, k][:, None] * w2[l:, l][None, :]
            )
            v = d.reshape(-1)
            rho += np.outer(v, v.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(n, rho)


class _Builder:
    """Accumulates |ket><bra| terms on a fixed grid."""

    def __init__(self, cutoff: int):
        self.cutoff = cutoff
        self.dim = cutoff + 1
        self.m = np.zeros((self.dim**2, self.dim**2), dtype=complex)

    def add(self, weight: complex, ket: tuple, bra: tuple) -> None:
        row = ket[0] * self.dim + ket[1]
        col = bra[0] * self.dim + bra[1]
        self.m[row, col] += weight

    def dyad_pair(self, weight: complex, ket: tuple, bra: tuple) -> None:
        """weight*|ket><bra| plus its Hermitian partner."""
        self.add(weight, ket, bra)
        self.add(np.conj(weight), bra, ket)

    def build(self) -> DensityMatrix:
        return DensityMatrix(self.cutoff, self.m)


def _exp(theta: float) -> complex:
    return complex(math.cos(theta), math.sin(theta))


def closed_form_rho_linear_low(spec: ProbeSpec, channel: LossChannel) -> DensityMatrix:
    """Lossy state of the low-branch probe sqrt(1-nbar/N)|00> + pair(0N, N0).

    Shared by both encodings since the probe is the same for nbar <= N.
    """
    if spec.nbar > spec.N:
        raise ValidationError("low-branch constructor needs nbar <= N")
    N, nbar = spec.N, spec.nbar
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    b = _Builder(N)
    b.add((N - nbar) / N, (0, 0), (0, 0))
    # cross terms between |00> and the surviving pair kets
    amp1 = math.sqrt(nbar * (N - nbar) / (2.0 * N**2))
    b.dyad_pair(amp1 * T1 ** (N / 2.0) * _exp(spec.theta2), (N, 0), (0, 0))
    b.dyad_pair(amp1 * T2 ** (N / 2.0) * _exp(spec.theta1), (0, N), (0, 0))
    # populations of the partially leaked pair kets
    for k in range(N + 1):
        w = (nbar / (2.0 * N)) * math.comb(N, k)
        b.add(w * T1 ** (N - k) * R1**k, (N - k, 0), (N - k, 0))
        b.add(w * T2 ** (N - k) * R2**k, (0, N - k), (0, N - k))
    # coherence between the two pair kets, damped by both transmissions
    b.dyad_pair(
        (nbar / (2.0 * N))
        * (T1 * T2) ** (N / 2.0)
        * _exp(spec.theta1 - spec.theta2),
        (0, N),
        (N, 0),
    )
    return b.build()


def closed_form_rho_linear_high(spec: ProbeSpec, channel: LossChannel) -> DensityMatrix:
    """Lossy state of the linear high-branch probe pair(0N, N0) + |NN>."""
    if spec.encoding.value != "linear":
        raise ValidationError("high-branch constructor is linear-encoding only")
    if spec.nbar < spec.N:
        raise ValidationError("high-branch constructor needs nbar >= N")
    N, nbar = spec.N, spec.nbar
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    b = _Builder(N)
    w_pair = (2.0 * N - nbar) / (2.0 * N)
    for k in range(N + 1):
        w = w_pair * math.comb(N, k)
        b.add(w * T1 ** (N - k) * R1**k, (N - k, 0), (N - k, 0))
        b.add(w * T2 ** (N - k) * R2**k, (0, N - k), (0, N - k))
    b.dyad_pair(
        w_pair * (T1 * T2) ** (N / 2.0) * _exp(spec.theta1 - spec.theta2),
        (0, N),
        (N, 0),
    )
    cross = math.sqrt((2.0 * N - nbar) * (nbar - N) / (2.0 * N**2))
    for k in range(N + 1):
        ck = math.comb(N, k)
        b.dyad_pair(
            cross * ck * T2 ** (N - k) * R2**k * T1 ** (N / 2.0) * _exp(spec.theta1),
            (0, N - k),
            (N, N - k),
        )
        b.dyad_pair(
            cross * ck * T1 ** (N - k) * R1**k * T2 ** (N / 2.0) * _exp(spec.theta2),
            (N - k, 0),
            (N - k, N),
        )
    w_nn = (nbar - N) / N
    for k in range(N + 1):
        for l in range(N + 1):
            b.add(
                w_nn
                * math.comb(N, k)
                * math.comb(N, l)
                * T1 ** (N - k)
                * R1**k
                * T2 ** (N - l)
                * R2**l,
                (N - k, N - l),
                (N - k, N - l),
            )
    return b.build()


def closed_form_rho_nonlinear_mid(
    spec: ProbeSpec, channel: LossChannel
) -> DensityMatrix:
    """Lossy state of the two-ket probe (|nbar-N, N> + e^{i theta}|N, nbar-N>)/sqrt(2);
    integer nbar in the nonlinear mid regime only."""
    if not spec.nbar_is_integer():
        raise ValidationError("mid-branch constructor needs an integer nbar")
    nbar = int(round(spec.nbar))
    N = spec.N
    if not (N <= nbar <= mid_high_boundary(N)):
        raise ValidationError(
            f"nbar={nbar} outside the mid regime [N, {mid_high_boundary(N)}]"
        )
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    d = nbar - N
    b = _Builder(N)
    for k in range(d + 1):
        for l in range(N + 1):
            w = 0.5 * math.comb(d, k) * math.comb(N, l)
            b.add(
                w * T1 ** (d - k) * R1**k * T2 ** (N - l) * R2**l,
                (d - k, N - l),
                (d - k, N - l),
            )
            b.add(
                w * T1 ** (N - l) * R1**l * T2 ** (d - k) * R2**k,
                (N - l, d - k),
                (N - l, d - k),
            )
    for k in range(d + 1):
        for l in range(d + 1):
            w = 0.5 * math.sqrt(
                math.comb(d, k) * math.comb(N, k) * math.comb(d, l) * math.comb(N, l)
            )
            damp = T1 ** (nbar / 2.0 - k) * R1**k * T2 ** (nbar / 2.0 - l) * R2**l
            b.dyad_pair(
                w * damp * _exp(spec.theta),
                (N - k, d - l),
                (d - k, N - l),
            )
    return b.build()


def closed_form_rho(spec: ProbeSpec, channel: LossChannel) -> DensityMatrix:
    """Dispatch to whichever printed constructor covers the regime."""
    tag = classify_regime(spec)
    if tag.branch in (Regime.LIN_LOW, Regime.NON_LOW):
        return closed_form_rho_linear_low(spec, channel)
    if tag.branch is Regime.LIN_HIGH:
        return closed_form_rho_linear_high(spec, channel)
    if tag.branch is Regime.NON_MID and spec.nbar_is_integer():
        return closed_form_rho_nonlinear_mid(spec, channel)
    raise ValidationError(
        "no closed-form lossy state for this branch; use apply_loss"
    )
