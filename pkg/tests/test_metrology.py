import math

import numpy as np
import pytest

from fockphase import (
    LossChannel,
    PhaseEncoding,
    ProbeSpec,
    SingularOutcomeError,
    TwoModeState,
    ValidationError,
    apply_loss,
    cfi,
    closed_form_qfi,
    error_propagation_variance,
    noon_state,
    optimal_state,
    qfi_mixed,
    qfi_pure,
)
from fockphase.fock import encode_phase, phase_generator_diagonal

LIN = PhaseEncoding.LINEAR
NON = PhaseEncoding.NONLINEAR

PINNED_LOSSY_QFI = 6.377292  # N=6, nbar=2, linear, T1=T2=0.9 (oracles below)


def random_state(cutoff, rng):
    amp = rng.normal(size=(cutoff + 1, cutoff + 1)) + 1j * rng.normal(
        size=(cutoff + 1, cutoff + 1)
    )
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2))
    return TwoModeState(cutoff, amp)


def test_qfi_pure_examples():
    assert qfi_pure(noon_state(5, 0.0, 5), LIN) == pytest.approx(25.0)
    assert qfi_pure(optimal_state(ProbeSpec(10, 8, LIN)), LIN) == pytest.approx(80.0)
    vac = TwoModeState.from_kets(2, {(0, 0): 1.0})
    assert qfi_pure(vac, LIN) == pytest.approx(0.0)
    assert qfi_pure(vac, NON) == pytest.approx(0.0)


def test_qfi_pure_matches_finite_difference_definition():
    rng = np.random.default_rng(8)
    for enc in (LIN, NON):
        for _ in range(5):
            st = random_state(4, rng)
            h = 1e-5
            plus = encode_phase(st, enc, h).vector
            minus = encode_phase(st, enc, -h).vector
            dpsi = (plus - minus) / (2 * h)
            fd = 4 * (np.vdot(dpsi, dpsi).real - abs(np.vdot(st.vector, dpsi)) ** 2)
            exact = qfi_pure(st, enc)
            assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_qfi_mixed_pure_state_limit():
    rng = np.random.default_rng(3)
    for enc in (LIN, NON):
        st = random_state(3, rng)
        rho = np.outer(st.vector, st.vector.conj())
        assert qfi_mixed(rho, enc) == pytest.approx(qfi_pure(st, enc), abs=1e-9)


def test_qfi_mixed_identity_channel():
    spec = ProbeSpec(6, 8.0, LIN)
    st = optimal_state(spec)
    rho = apply_loss(st, LossChannel(1.0, 1.0))
    assert qfi_mixed(rho, LIN) == pytest.approx(closed_form_qfi(spec), abs=1e-9)


def _psd_sqrt(m, floor=1e-13):
    w, v = np.linalg.eigh(m)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _fidelity(rho, sigma):
    s = _psd_sqrt(rho)
    w = np.clip(np.linalg.eigvalsh(s @ sigma @ s), 0, None)
    return float(np.sum(np.sqrt(w))) ** 2


def test_qfi_mixed_pinned_by_independent_oracles():
    """The lossy value is pinned by two routes that never touch the spectral
    formula: a Bures fidelity finite difference (Richardson extrapolated)
    and a dense least-squares solve of the defining operator equation."""
    spec = ProbeSpec(6, 2.0, LIN)
    rho = apply_loss(optimal_state(spec), LossChannel(0.9, 0.9)).matrix
    assert qfi_mixed(rho, LIN) == pytest.approx(PINNED_LOSSY_QFI, abs=1e-9)

    g = phase_generator_diagonal(6, LIN)

    def rho_at(phi):
        d = np.exp(1j * phi * g)
        return rho * d[:, None] * d.conj()[None, :]

    def bures(h):
        return 8.0 * (1.0 - math.sqrt(_fidelity(rho_at(0.0), rho_at(h)))) / h**2

    q = {h: bures(h) for h in (0.2, 0.1, 0.05)}
    r1 = (4 * q[0.1] - q[0.2]) / 3
    r2 = (4 * q[0.05] - q[0.1]) / 3
    extrapolated = (16 * r2 - r1) / 15
    assert extrapolated == pytest.approx(PINNED_LOSSY_QFI, rel=1e-4)

    drho = 1j * (np.diag(g) @ rho - rho @ np.diag(g))
    dim = rho.shape[0]
    eye = np.eye(dim)
    sylvester = np.kron(eye, rho) + np.kron(rho.T, eye)
    l_vec = np.linalg.lstsq(sylvester, 2.0 * drho.reshape(-1), rcond=1e-10)[0]
    l_mat = l_vec.reshape(dim, dim)
    lyapunov = float(np.real(np.trace(rho @ l_mat @ l_mat)))
    assert lyapunov == pytest.approx(PINNED_LOSSY_QFI, abs=1e-6)


def test_qfi_mixed_monotone_in_loss():
    spec = ProbeSpec(4, 3.0, LIN)
    st = optimal_state(spec)
    ts = np.linspace(0.2, 1.0, 6)
    values = {
        (a, b): qfi_mixed(apply_loss(st, LossChannel(t1, t2)), LIN)
        for a, t1 in enumerate(ts)
        for b, t2 in enumerate(ts)
    }
    for a in range(6):
        for b in range(6):
            for a2 in range(a, 6):
                for b2 in range(b, 6):
                    assert values[(a, b)] <= values[(a2, b2)] + 1e-8


def test_qfi_mixed_phase_covariant():
    spec = ProbeSpec(5, 4.0, NON)
    rho0 = apply_loss(optimal_state(spec), LossChannel(0.85, 0.7)).matrix
    g = phase_generator_diagonal(5, NON)
    d = np.exp(1j * 0.7 * g)
    rho_rot = rho0 * d[:, None] * d.conj()[None, :]
    assert qfi_mixed(rho0, NON) == pytest.approx(qfi_mixed(rho_rot, NON), abs=1e-8)


def test_cfi_two_outcome_formula():
    assert cfi([0.5, 0.5], [0.3, -0.3]) == pytest.approx(4 * 0.3**2)
    assert cfi([0.2, 0.8], [0.0, 0.0]) == 0.0


def test_cfi_structural_zero_ok_singular_rejected():
    assert cfi([0.5, 0.5, 0.0], [0.1, -0.1, 0.0]) == pytest.approx(0.04)
    with pytest.raises(SingularOutcomeError):
        cfi([1.0, 0.0], [0.5, -0.5])
    with pytest.raises(ValidationError):
        cfi([0.7, 0.7], [0.0, 0.0])


def test_error_propagation():
    assert error_propagation_variance(0.3, 0.3**2, 2.0) == 0.0
    assert math.isinf(error_propagation_variance(0.1, 0.5, 0.0))


def test_parity_error_propagation_limit_linear_low():
    """Fringe-top limit of the exact expectation slope gives 1/(nbar N)."""
    n, nbar = 10, 8.0
    delta = 1e-4
    beta = 2 * math.pi + delta
    mean = 1.0 - (nbar / n) * (1.0 - math.cos(beta))
    dmean = -(nbar / n) * math.sin(beta) * n
    var = error_propagation_variance(mean, 1.0, dmean)
    assert var == pytest.approx(1.0 / (nbar * n), rel=1e-4)


def test_nonlinear_mid_variance_phase_independent():
    n, nbar = 10, 12.0
    for gamma in (0.1, 1.0, 2.5):
        mean = math.cos(gamma)
        dmean = -math.sin(gamma) * nbar * (2 * n - nbar)
        if abs(math.sin(gamma)) < 1e-12:
            continue
        var = error_propagation_variance(mean, 1.0, dmean)
        assert var == pytest.approx(1.0 / (nbar * (2 * n - nbar)) ** 2, rel=1e-12)
