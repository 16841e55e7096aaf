"""Reference estimators: least squares, oracle LMMSE, and greedy OMP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayConfig, steering_far


@dataclass(frozen=True)
class BaselineResult:
    est_channel: np.ndarray = field(repr=False)
    method: str
    support: tuple[int, ...] | None = None


def ls_estimate(pilot_matrix: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares channel estimate B^+ y."""
    h, *_ = np.linalg.lstsq(pilot_matrix, y, rcond=None)
    return h


def mmse_estimate(pilot_matrix: np.ndarray, y: np.ndarray,
                  channel_cov: np.ndarray, noise_var: float) -> np.ndarray:
    """LMMSE estimate R B^H (B R B^H + mu^2 I)^{-1} y."""
    herm_err = np.max(np.abs(channel_cov - channel_cov.conj().T))
    if herm_err > 1e-8 * max(1.0, np.max(np.abs(channel_cov))):
        raise ValueError("non-PSD covariance: channel_cov is not Hermitian")
    eigvals = np.linalg.eigvalsh(0.5 * (channel_cov + channel_cov.conj().T))
    if eigvals[0] < -1e-8 * max(1.0, eigvals[-1]):
        raise ValueError("non-PSD covariance: negative eigenvalue")
    cross = channel_cov @ pilot_matrix.conj().T
    gram = pilot_matrix @ cross + noise_var * np.eye(pilot_matrix.shape[0])
    return cross @ np.linalg.solve(gram, y)


def oracle_covariance(config: ArrayConfig, freq_hz: float,
                      n_draws: int = 10_000, rng_seed=0) -> np.ndarray:
    """Monte-Carlo channel covariance under the uniform direction prior.

    For a single unit-power path, R = N_T * E{a'(theta) a'^H(theta)} with the
    physical angle uniform over [-pi/2, pi/2] and the steering evaluated at
    the subcarrier frequency (so the prior already carries the split).
    """
    rng = np.random.default_rng(rng_seed)
    angles = rng.uniform(-np.pi / 2, np.pi / 2, size=n_draws)
    idx = np.arange(config.n_antennas)
    phase = 2.0 * np.pi * config.element_spacing_m * freq_hz / 299_792_458.0
    atoms = np.exp(1j * phase * np.outer(idx, np.sin(angles)))
    atoms /= np.sqrt(config.n_antennas)
    return config.n_antennas * (atoms @ atoms.conj().T) / n_draws


def omp_estimate(pilot_matrix: np.ndarray, atoms: np.ndarray, y: np.ndarray,
                 sparsity: int):
    """Greedy per-subcarrier OMP over the sensed dictionary B D.

    Returns the selected grid indices and the channel estimate D x_hat.
    """
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    sensed = pilot_matrix @ atoms
    col_norms = np.linalg.norm(sensed, axis=0)
    residual = y.copy()
    support: list[int] = []
    coeffs = np.zeros(0, dtype=complex)
    for _ in range(sparsity):
        corr = np.abs(sensed.conj().T @ residual) / col_norms
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = sensed[:, support]
        coeffs, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ coeffs
    x = np.zeros(atoms.shape[1], dtype=complex)
    x[support] = coeffs
    return tuple(support), atoms @ x


def omp_estimate_joint(pilot_matrix: np.ndarray, atoms: np.ndarray,
                       received: np.ndarray, sparsity: int):
    """OMP with a single support shared by every subcarrier.

    Atom selection maximizes the correlation energy summed over subcarriers;
    per-subcarrier gains are then refit by least squares on the common
    support.  This is the split-blind wideband baseline: it presumes the
    beamspace support does not move with frequency.
    """
    if sparsity < 1:
        raise ValueError("sparsity must be >= 1")
    sensed = pilot_matrix @ atoms
    col_norms = np.linalg.norm(sensed, axis=0)
    residual = received.copy()
    support: list[int] = []
    for _ in range(sparsity):
        corr = np.sum(np.abs(sensed.conj().T @ residual) ** 2, axis=1) / col_norms ** 2
        corr[support] = -1.0
        support.append(int(np.argmax(corr)))
        sub = sensed[:, support]
        coeffs, *_ = np.linalg.lstsq(sub, received, rcond=None)
        residual = received - sub @ coeffs
    est = atoms[:, support] @ coeffs
    return tuple(support), est
