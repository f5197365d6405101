"""Outcome probability models for parity and photon-counting detection on
mode a after the analysis beam splitter, with and without photon loss.

Every closed-form family here is a finite harmonic series in the total
phase psi = phi + phi_u:

    P_y(psi) = A_y + Re( sum_q C[y, q] exp(i f_q psi) )

which gives probabilities, analytic phi-derivatives, fringe periods, and
the Fisher-information limits from one table.  ``generic_probs`` evaluates
the same distributions from first principles (encode, lose, rotate,
project) and is the reference every table is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np

from .errors import UnsupportedBranchError, ValidationError
from .fock import (
    BeamSplitterDirection,
    PhaseEncoding,
    TwoModeState,
    beam_splitter_unitary,
    encode_phase,
    phase_generator_diagonal,
)
from .loss import DensityMatrix, LossChannel, apply_loss
from .probes import ProbeSpec, Regime, classify_regime

PROB_FLOOR = 1e-14
CURVATURE_TOL = 1e-10


class MeasurementKind(Enum):
    PARITY = "parity"
    PHOTON_COUNTING = "photon_counting"


@dataclass(frozen=True)
class MeasurementModel:
    """A detection scheme bound to a probe spec and an optional loss channel.

    Parity has two outcomes ordered (+1, -1); photon counting has 2N+1
    outcomes m = 0..2N with structural zeros outside the reachable support.
    """

    kind: MeasurementKind
    spec: ProbeSpec
    channel: LossChannel | None = None

    def __post_init__(self):
        if not isinstance(self.kind, MeasurementKind):
            object.__setattr__(self, "kind", MeasurementKind(self.kind))

    @property
    def lossy(self) -> bool:
        return self.channel is not None

    @property
    def outcome_count(self) -> int:
        if self.kind is MeasurementKind.PARITY:
            return 2
        return 2 * self.spec.N + 1

    @property
    def outcome_values(self) -> np.ndarray:
        if self.kind is MeasurementKind.PARITY:
            return np.array([1, -1])
        return np.arange(2 * self.spec.N + 1)

    def probs(self, phi: float, phi_u: float = 0.0) -> np.ndarray:
        return harmonic_table(self).probs(phi + phi_u)

    @property
    def period(self) -> float:
        return harmonic_table(self).period


@dataclass(frozen=True)
class InterferencePhases:
    """Fringe arguments at a given probe phase."""

    beta1: float
    beta2: float
    gamma: float
    _gamma_k_step: float

    def gamma_k(self, k: int) -> float:
        return self.gamma - k * self._gamma_k_step


def interference_phases(spec: ProbeSpec, phi: float) -> InterferencePhases:
    N, nbar = spec.N, spec.nbar
    base = spec.theta2 - spec.theta1 + math.pi * N / 2.0
    return InterferencePhases(
        beta1=base + phi * N,
        beta2=base + phi * N**2,
        gamma=spec.theta + math.pi * (2 * N - nbar) / 2.0 + phi * nbar * (2 * N - nbar),
        _gamma_k_step=2.0 * (2 * N - nbar) * phi,
    )


def _fact_ratio(numer: list, denom: list) -> float:
    """Product of factorials ratio, exact integers when small, log-space
    (lgamma) above 20 to avoid overflow."""
    if all(n <= 20 for n in numer) and all(d <= 20 for d in denom):
        frac = Fraction(1)
        for n in numer:
            frac *= math.factorial(n)
        for d in denom:
            frac /= math.factorial(d)
        return float(frac)
    log = sum(math.lgamma(n + 1) for n in numer) - sum(
        math.lgamma(d + 1) for d in denom
    )
    return math.exp(log)


def chi1(N: int, m: int) -> float:
    """Alternating binomial convolution of two N-photon arms at outcome m."""
    lo, hi = max(0, m - N), min(N, m)
    return float(
        sum((-1) ** k * math.comb(N, k) * math.comb(N, m - k) for k in range(lo, hi + 1))
    )


def chi2(N: int, nbar: int, m: int) -> float:
    """As chi1 but for arms holding N and nbar-N photons."""
    d = nbar - N
    lo, hi = max(0, N + m - nbar), min(N, m)
    return float(
        sum((-1) ** k * math.comb(N, k) * math.comb(d, m - k) for k in range(lo, hi + 1))
    )


def omega_factor(channel: LossChannel, N: int) -> float:
    return 1.0 - 0.5 * (channel.R1**N + channel.R2**N)


def kappa_factor(spec: ProbeSpec, channel: LossChannel) -> float:
    N, nbar = spec.N, spec.nbar
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    acc = sum(
        math.comb(N, k) ** 2 * (T1 * T2) ** (N - k) * (R1 * R2) ** k
        for k in range(N + 1)
    )
    return (nbar - N) / N * acc + (2.0 * N - nbar) / N * (1.0 - omega_factor(channel, N))


def lambda_factor(channel: LossChannel, N: int, m: int) -> float:
    """Weight of detecting m photons from a single fully leaky N-photon arm."""
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    total = 0.0
    for k in range(0, N - m + 1):
        total += (
            2.0 ** (k - N - 1)
            * math.comb(N, k)
            * math.comb(N - k, m)
            * (T1 ** (N - k) * R1**k + T2 ** (N - k) * R2**k)
        )
    return total


@dataclass(frozen=True)
class LossyCoefficients:
    """All loss-dressed scalars of the printed probability families."""

    Omega: float
    kappa: float
    Lambda: np.ndarray
    chi1: np.ndarray
    chi2: np.ndarray | None


def lossy_coefficients(spec: ProbeSpec, channel: LossChannel) -> LossyCoefficients:
    N = spec.N
    ms = range(2 * N + 1)
    chi2_arr = None
    if spec.nbar_is_integer() and spec.nbar >= N:
        nbar = int(round(spec.nbar))
        chi2_arr = np.array([chi2(N, nbar, m) for m in ms])
    return LossyCoefficients(
        Omega=omega_factor(channel, N),
        kappa=kappa_factor(spec, channel),
        Lambda=np.array([lambda_factor(channel, N, m) for m in ms]),
        chi1=np.array([chi1(N, m) for m in ms]),
        chi2=chi2_arr,
    )


@dataclass(frozen=True)
class HarmonicTable:
    """P_y(psi) = base[y] + Re(sum_q coeffs[y, q] e^{i freqs[q] psi})."""

    base: np.ndarray
    freqs: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=int))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    def probs(self, psi) -> np.ndarray:
        phases = np.exp(1j * np.multiply.outer(np.asarray(psi, dtype=float), self.freqs))
        p = self.base + np.real(phases @ self.coeffs.T)
        return np.clip(p, 0.0, None)

    def dprobs(self, psi) -> np.ndarray:
        phases = np.exp(1j * np.multiply.outer(np.asarray(psi, dtype=float), self.freqs))
        return np.real(phases @ (1j * self.freqs * self.coeffs).T)

    def d2probs(self, psi) -> np.ndarray:
        phases = np.exp(1j * np.multiply.outer(np.asarray(psi, dtype=float), self.freqs))
        return np.real(phases @ (-(self.freqs**2.0) * self.coeffs).T)

    @property
    def period(self) -> float:
        g = reduce(math.gcd, (int(f) for f in self.freqs))
        return 2.0 * math.pi / g

    def residuals(self) -> tuple:
        """(|sum_y base - 1|, max_q |sum_y coeffs|): both vanish for a
        correctly transcribed family."""
        return (
            abs(float(self.base.sum()) - 1.0),
            float(np.max(np.abs(self.coeffs.sum(axis=0)))) if self.coeffs.size else 0.0,
        )


def _beta_offset(spec: ProbeSpec) -> float:
    return spec.theta2 - spec.theta1 + math.pi * spec.N / 2.0


def _gamma_offset(spec: ProbeSpec) -> float:
    return spec.theta + math.pi * (2 * spec.N - spec.nbar) / 2.0


def _require_mid_integer(spec: ProbeSpec, what: str) -> int:
    if not spec.nbar_is_integer():
        raise UnsupportedBranchError(
            f"no closed-form {what} for a non-integer mean photon number in the "
            "nonlinear mid branch; use generic_probs"
        )
    return int(round(spec.nbar))


def _parity_table(spec: ProbeSpec, channel: LossChannel | None) -> HarmonicTable:
    N, nbar = spec.N, spec.nbar
    tag = classify_regime(spec)
    b0 = np.exp(1j * _beta_offset(spec))

    if tag.branch in (Regime.LIN_LOW, Regime.NON_LOW):
        f = N if tag.branch is Regime.LIN_LOW else N**2
        q = nbar / (2.0 * N)
        if channel is None:
            base = [1.0 - q, q]
            coeff = q * b0
        else:
            om = omega_factor(channel, N)
            tau = (channel.T1 * channel.T2) ** (N / 2.0)
            base = [1.0 - q * om, q * om]
            coeff = q * tau * b0
        return HarmonicTable(base, [f], [[coeff], [-coeff]])

    if tag.branch is Regime.LIN_HIGH:
        q = (2.0 * N - nbar) / (2.0 * N)
        if channel is None:
            base = [1.0 - q, q]
            coeff = q * b0
        else:
            kap = kappa_factor(spec, channel)
            tau = (channel.T1 * channel.T2) ** (N / 2.0)
            base = [(1.0 + kap) / 2.0, (1.0 - kap) / 2.0]
            coeff = q * tau * b0
        return HarmonicTable(base, [N], [[coeff], [-coeff]])

    if tag.branch is Regime.NON_MID:
        nbar_i = _require_mid_integer(spec, "parity probability")
        g0 = np.exp(1j * _gamma_offset(spec))
        d = nbar_i - N
        if channel is None:
            return HarmonicTable(
                [0.5, 0.5], [nbar_i * (2 * N - nbar_i)], [[0.5 * g0], [-0.5 * g0]]
            )
        T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
        freqs = [(nbar_i - 2 * k) * (2 * N - nbar_i) for k in range(d + 1)]
        amps = [
            math.comb(d, k)
            * math.comb(N, k)
            * (T1 * T2) ** (nbar_i / 2.0 - k)
            * (R1 * R2) ** k
            for k in range(d + 1)
        ]
        const = 0.5 * sum(
            math.comb(d, k)
            * math.comb(N, d - k)
            * (T1 * T2) ** (d - k)
            * (R1 * R2) ** k
            * (R1 ** (2 * N - nbar_i) + R2 ** (2 * N - nbar_i))
            for k in range(d + 1)
        )
        row_plus = [0.5 * a * g0 for a in amps]
        return HarmonicTable(
            [(1.0 + const) / 2.0, (1.0 - const) / 2.0],
            freqs,
            [row_plus, [-c for c in row_plus]],
        )

    raise UnsupportedBranchError(
        "no closed-form parity probability for the nonlinear high branch; "
        "use generic_probs"
    )


def _counting_low(spec: ProbeSpec, channel, f: int) -> HarmonicTable:
    N, nbar = spec.N, spec.nbar
    b0 = np.exp(1j * _beta_offset(spec))
    size = 2 * N + 1
    base = np.zeros(size)
    coeffs = np.zeros((size, 1), dtype=complex)
    tau = 1.0 if channel is None else (channel.T1 * channel.T2) ** (N / 2.0)
    for m in range(N + 1):
        osc = (-1) ** m * 2.0 ** (-N) * (nbar / N) * math.comb(N, m) * tau
        coeffs[m, 0] = osc * b0
        if channel is None:
            base[m] = 2.0 ** (-N) * (nbar / N) * math.comb(N, m)
        else:
            base[m] = (nbar / N) * lambda_factor(channel, N, m)
    base[0] += 1.0 - nbar / N
    return HarmonicTable(base, [f], coeffs)


def _counting_linear_high(spec: ProbeSpec, channel) -> HarmonicTable:
    N, nbar = spec.N, spec.nbar
    T = None if channel is None else channel
    b0 = np.exp(1j * _beta_offset(spec))
    size = 2 * N + 1
    base = np.zeros(size)
    coeffs = np.zeros((size, 1), dtype=complex)
    w_pair = 2.0 - nbar / N
    w_nn = nbar / N - 1.0
    tau = 1.0 if T is None else (T.T1 * T.T2) ** (N / 2.0)
    for m in range(size):
        if m <= N:
            osc = (-1) ** m * 2.0 ** (-N) * w_pair * math.comb(N, m) * tau
            coeffs[m, 0] = osc * b0
            base[m] += (
                w_pair * (2.0 ** (-N)) * math.comb(N, m)
                if T is None
                else w_pair * lambda_factor(T, N, m)
            )
        if T is None:
            base[m] += (
                2.0 ** (-2 * N)
                * w_nn
                * _fact_ratio([m, 2 * N - m], [N, N])
                * chi1(N, m) ** 2
            )
        else:
            base[m] += 2.0 ** (-2 * N) * w_nn * _xi_leaky_nn(N, T, m)
    return HarmonicTable(base, [N], coeffs)


def _xi_leaky_nn(N: int, channel: LossChannel, m: int) -> float:
    """Photon-count weight of the doubly occupied |N N> component after loss."""
    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    total = 0.0
    for k in range(N + 1):
        for l in range(N + 1):
            lo, hi = max(0, m - N + l), min(N - k, m)
            if lo > hi:
                continue
            inner = sum(
                (-1) ** s * math.comb(N - k, s) * math.comb(N - l, m - s)
                for s in range(lo, hi + 1)
            )
            if inner == 0:
                continue
            total += (
                2.0 ** (k + l)
                * _fact_ratio([m, 2 * N - m - k - l], [N - k, N - l])
                * T1 ** (N - k)
                * R1**k
                * T2 ** (N - l)
                * R2**l
                * math.comb(N, k)
                * math.comb(N, l)
                * inner**2
            )
    return total


def _counting_nonlinear_mid(spec: ProbeSpec, channel) -> HarmonicTable:
    N = spec.N
    nbar = _require_mid_integer(spec, "photon-counting probability")
    d = nbar - N
    g0 = np.exp(1j * _gamma_offset(spec))
    size = 2 * N + 1
    if channel is None:
        base = np.zeros(size)
        coeffs = np.zeros((size, 1), dtype=complex)
        for m in range(nbar + 1):
            w = 2.0 ** (-nbar) * _fact_ratio([m, nbar - m], [d, N]) * chi2(N, nbar, m) ** 2
            base[m] = w
            coeffs[m, 0] = (-1) ** m * w * g0
        return HarmonicTable(base, [nbar * (2 * N - nbar)], coeffs)

    T1, T2, R1, R2 = channel.T1, channel.T2, channel.R1, channel.R2
    base = np.zeros(size)
    freqs = [(nbar - j) * (2 * N - nbar) for j in range(2 * d + 1)]
    coeffs = np.zeros((size, len(freqs)), dtype=complex)
    for m in range(nbar + 1):
        for k in range(d + 1):
            for l in range(N + 1):
                lo, hi = max(0, N + m - nbar + k), min(N - l, m)
                if lo > hi or m + k + l > nbar:
                    continue
                inner = sum(
                    (-1) ** s * math.comb(N - l, s) * math.comb(d - k, m - s)
                    for s in range(lo, hi + 1)
                )
                if inner == 0:
                    continue
                base[m] += (
                    2.0 ** (k + l - nbar - 1)
                    * _fact_ratio([m, nbar - m - k - l], [d - k, N - l])
                    * math.comb(d, k)
                    * math.comb(N, l)
                    * inner**2
                    * (
                        T1 ** (d - k) * R1**k * T2 ** (N - l) * R2**l
                        + T1 ** (N - l) * R1**l * T2 ** (d - k) * R2**k
                    )
                )
        for k in range(d + 1):
            for l in range(d + 1):
                if m + k + l > nbar:
                    continue
                s_lo, s_hi = max(0, m - N + k), min(d - l, m)
                t_lo, t_hi = max(0, N + m - nbar + k), min(N - l, m)
                if s_lo > s_hi or t_lo > t_hi:
                    continue
                s_sum = sum(
                    (-1) ** s * math.comb(d - l, s) * math.comb(N - k, m - s)
                    for s in range(s_lo, s_hi + 1)
                )
                t_sum = sum(
                    (-1) ** t * math.comb(d - k, m - t) * math.comb(N - l, t)
                    for t in range(t_lo, t_hi + 1)
                )
                if s_sum == 0 or t_sum == 0:
                    continue
                weight = (
                    2.0 ** (k + l - nbar)
                    * _fact_ratio([m, nbar - m - k - l, k, l], [d, N])
                    * math.comb(d, k)
                    * math.comb(N, k)
                    * math.comb(d, l)
                    * math.comb(N, l)
                    * T1 ** (nbar / 2.0 - k)
                    * R1**k
                    * T2 ** (nbar / 2.0 - l)
                    * R2**l
                    * s_sum
                    * t_sum
                )
                coeffs[m, k + l] += weight * g0
    return HarmonicTable(base, freqs, coeffs)


def _counting_table(spec: ProbeSpec, channel) -> HarmonicTable:
    tag = classify_regime(spec)
    if tag.branch is Regime.LIN_LOW:
        return _counting_low(spec, channel, spec.N)
    if tag.branch is Regime.NON_LOW:
        return _counting_low(spec, channel, spec.N**2)
    if tag.branch is Regime.LIN_HIGH:
        return _counting_linear_high(spec, channel)
    if tag.branch is Regime.NON_MID:
        return _counting_nonlinear_mid(spec, channel)
    raise UnsupportedBranchError(
        "no closed-form photon-counting probability for the nonlinear high "
        "branch; use generic_probs"
    )


@lru_cache(maxsize=256)
def harmonic_table(model: MeasurementModel) -> HarmonicTable:
    """Closed-form outcome distribution of the model as a harmonic series.

    Raises UnsupportedBranchError on the branches with no printed formula
    (nonlinear high branch, and any nonlinear mid branch with non-integer
    mean photon number).
    """
    if model.kind is MeasurementKind.PARITY:
        return _parity_table(model.spec, model.channel)
    return _counting_table(model.spec, model.channel)


def parity_probs(model: MeasurementModel, phi: float, phi_u: float = 0.0) -> tuple:
    """(P_plus, P_minus) at total phase phi + phi_u."""
    if model.kind is not MeasurementKind.PARITY:
        raise ValidationError("model is not a parity model")
    p = harmonic_table(model).probs(phi + phi_u)
    return float(p[0]), float(p[1])


def photon_counting_probs(
    model: MeasurementModel, phi: float, phi_u: float = 0.0
) -> np.ndarray:
    """Full outcome vector over m = 0..2N (structural zeros kept)."""
    if model.kind is not MeasurementKind.PHOTON_COUNTING:
        raise ValidationError("model is not a photon-counting model")
    return harmonic_table(model).probs(phi + phi_u)


def _embed_density(rho: DensityMatrix, cutoff: int) -> np.ndarray:
    if cutoff == rho.cutoff:
        return rho.matrix
    small, big = rho.cutoff + 1, cutoff + 1
    idx = np.array([i * big + j for i in range(small) for j in range(small)])
    out = np.zeros((big * big, big * big), dtype=complex)
    out[np.ix_(idx, idx)] = rho.matrix
    return out


def generic_probs(
    state_or_rho,
    channel: LossChannel | None,
    encoding: PhaseEncoding,
    phi: float,
    phi_u: float,
    kind: MeasurementKind,
) -> np.ndarray:
    """Born-rule outcome probabilities from first principles.

    Pipeline: loss channel (if any) on the probe, phase encoding at the
    total phase, analysis beam splitter exp(+i pi/2 Jx), projection onto
    photon number m of mode a (parity = even/odd sums).  Works on every
    branch and is the oracle for all closed forms.
    """
    kind = MeasurementKind(kind)
    psi = phi + phi_u
    if isinstance(state_or_rho, TwoModeState):
        n_spec = state_or_rho.cutoff
        if channel is None or channel.is_identity():
            work = max(n_spec, state_or_rho.max_total_photons())
            st = encode_phase(state_or_rho.embed(work), encoding, psi)
            u = beam_splitter_unitary(work, BeamSplitterDirection.INVERSE)
            amp = (u @ st.vector).reshape(work + 1, work + 1)
            per_mode_a = np.sum(np.abs(amp) ** 2, axis=1)
        else:
            rho = apply_loss(state_or_rho, channel)
            per_mode_a = _mode_a_distribution(rho, encoding, psi)
    elif isinstance(state_or_rho, DensityMatrix):
        n_spec = state_or_rho.cutoff
        if channel is not None and not channel.is_identity():
            raise ValidationError("pass either a pre-lossy density matrix or a channel")
        per_mode_a = _mode_a_distribution(state_or_rho, encoding, psi)
    else:
        raise ValidationError(f"unsupported input {type(state_or_rho)!r}")

    counts = np.zeros(2 * n_spec + 1)
    take = min(len(per_mode_a), len(counts))
    counts[:take] = np.clip(per_mode_a[:take], 0.0, None)
    if kind is MeasurementKind.PHOTON_COUNTING:
        return counts
    return np.array([counts[0::2].sum(), counts[1::2].sum()])


def _mode_a_distribution(rho: DensityMatrix, encoding, psi) -> np.ndarray:
    work = _density_max_total(rho)
    mat = _embed_density(rho, work)
    g = phase_generator_diagonal(work, encoding)
    d = np.exp(1j * psi * g)
    mat = mat * d[:, None] * d.conj()[None, :]
    u = beam_splitter_unitary(work, BeamSplitterDirection.INVERSE)
    diag = np.einsum("ij,jk,ik->i", u, mat, u.conj(), optimize=True).real
    return diag.reshape(work + 1, work + 1).sum(axis=1)


def _density_max_total(rho: DensityMatrix) -> int:
    dim = rho.cutoff + 1
    pop = np.abs(np.diag(rho.matrix)).reshape(dim, dim)
    idx = np.arange(dim)
    mask = pop > 1e-18
    if not mask.any():
        return rho.cutoff
    totals = (idx[:, None] + idx[None, :])[mask]
    return max(rho.cutoff, int(totals.max()))


def cfi_at(model: MeasurementModel, phi: float, phi_u: float = 0.0) -> float:
    """Classical Fisher information of the outcome distribution.

    Uses analytic derivatives from the harmonic table.  At fringe zeros
    (P -> 0 with vanishing slope but positive curvature) the quotient
    limit equals twice the second derivative, which keeps the CFI finite
    and continuous through the optimal phases.
    """
    table = harmonic_table(model)
    psi = phi + phi_u
    p = table.probs(psi)
    dp = table.dprobs(psi)
    total = 0.0
    curvature = None
    for k in range(len(p)):
        if p[k] > PROB_FLOOR:
            total += dp[k] ** 2 / p[k]
        else:
            if curvature is None:
                curvature = table.d2probs(psi)
            if curvature[k] > CURVATURE_TOL:
                total += 2.0 * curvature[k]
    return float(total)


@dataclass(frozen=True)
class OptimalPhaseSet:
    """Arithmetic progression offset + k*step of optimal true phases, or
    every phase at once (all_phases)."""

    all_phases: bool = False
    offset: float | None = None
    step: float | None = None

    def values(self, k_lo: int = -2, k_hi: int = 3) -> np.ndarray:
        if self.all_phases:
            raise ValidationError("every phase is optimal; no discrete set")
        return np.array([self.offset + k * self.step for k in range(k_lo, k_hi)])


def optimal_true_values(model: MeasurementModel) -> OptimalPhaseSet:
    """Phases where parity/counting reach the QFI without adaptive control."""
    if model.lossy:
        raise UnsupportedBranchError(
            "optimal true-value sets are only available without loss"
        )
    spec = model.spec
    tag = classify_regime(spec)
    if tag.branch in (Regime.LIN_LOW, Regime.LIN_HIGH):
        return OptimalPhaseSet(
            offset=(spec.theta1 - spec.theta2) / spec.N - math.pi / 2.0,
            step=2.0 * math.pi / spec.N,
        )
    if tag.branch is Regime.NON_LOW:
        return OptimalPhaseSet(
            offset=(spec.theta1 - spec.theta2) / spec.N**2 - math.pi / (2.0 * spec.N),
            step=2.0 * math.pi / spec.N**2,
        )
    if tag.branch is Regime.NON_MID and spec.nbar_is_integer():
        return OptimalPhaseSet(all_phases=True)
    raise UnsupportedBranchError("no printed optimal-phase set for this branch")


def max_cfi_parity_lossy(model: MeasurementModel) -> tuple:
    """(I_max, cos beta at the maximum) for the lossy parity families.

    Covers the low branch (linear and nonlinear, which share the fringe
    structure up to an N^2 scale) and the linear high branch.  The extremal
    cos beta degenerates to 0 when the fringe visibility term cancels
    (N = nbar*Omega low, kappa = 0 high).
    """
    if model.kind is not MeasurementKind.PARITY or not model.lossy:
        raise UnsupportedBranchError("closed-form maxima exist for lossy parity only")
    spec, channel = model.spec, model.channel
    N, nbar = spec.N, spec.nbar
    tag = classify_regime(spec)
    t = (channel.T1 * channel.T2) ** N
    sqrt_t = (channel.T1 * channel.T2) ** (N / 2.0)

    if tag.branch in (Regime.LIN_LOW, Regime.NON_LOW):
        om = omega_factor(channel, N)
        gap = max(om**2 - t, 0.0)
        inner = max((2.0 * N - nbar * om) ** 2 - t * nbar**2, 0.0)
        brace = nbar * gap + math.sqrt(inner * gap)
        if tag.branch is Regime.LIN_LOW:
            imax = nbar * N * om - 0.5 * nbar * brace
        else:
            imax = nbar * N**3 * om - 0.5 * nbar * N**2 * brace
        denom = 2.0 * sqrt_t * (N - nbar * om)
        if abs(denom) < 1e-14:
            cos_b = 0.0
        else:
            disc = max(gap * nbar**2 - 4.0 * nbar * N * om + 4.0 * N**2, 0.0)
            cos_b = (
                2.0 * N * om - (t + om**2) * nbar - math.sqrt(disc) * math.sqrt(gap)
            ) / denom
        return imax, float(np.clip(cos_b, -1.0, 1.0))

    if tag.branch is Regime.LIN_HIGH:
        kap = kappa_factor(spec, channel)
        u = (2.0 * N - nbar) ** 2 * t
        disc = max((u - N**2 * (1.0 + kap**2)) ** 2 - 4.0 * N**4 * kap**2, 0.0)
        imax = 0.5 * (N**2 * (1.0 - kap**2) + u - math.sqrt(disc))
        if abs(kap) < 1e-14:
            cos_b = 0.0
        else:
            cos_b = (N**2 * (1.0 - kap**2) - math.sqrt(disc)) / (
                2.0 * sqrt_t * N * (2.0 * N - nbar) * kap
            ) - (2.0 * N - nbar) * sqrt_t / (2.0 * N * kap)
        return imax, float(np.clip(cos_b, -1.0, 1.0))

    raise UnsupportedBranchError(
        "no closed-form maximum CFI for the lossy nonlinear branch with "
        "nbar above N; maximize cfi_at on a grid instead"
    )
