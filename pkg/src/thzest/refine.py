"""Off-grid direction refinement by a covariance-decomposition search.

After the grid-based EM has converged, the dominant atom is removed from the
model covariance and the residual sample covariance is scanned over a fine
sine-space interval around the coarse estimate.  The refined direction is
the grid point where the stationarity expression of the concentrated
likelihood crosses zero.
"""

from __future__ import annotations

import numpy as np

from .arrays import ArrayConfig, steering_far
from .sbce import SingularCovarianceError, _solve_hermitian


def covariance_excluding(effective_matrix: np.ndarray, sigma: np.ndarray,
                         noise_var: float, excluded_index: int) -> np.ndarray:
    """Model covariance with the excluded atom's prior variance zeroed."""
    if not 0 <= excluded_index < sigma.shape[0]:
        raise ValueError("excluded_index out of range")
    trimmed = sigma.copy()
    trimmed[excluded_index] = 0.0
    weighted = effective_matrix * trimmed[np.newaxis, :]
    cov = weighted @ effective_matrix.conj().T
    cov = 0.5 * (cov + cov.conj().T)
    return cov + noise_var * np.eye(effective_matrix.shape[0])


def _perturbed_atom(config: ArrayConfig, sine_dir: float, c: np.ndarray,
                    pilot_matrix: np.ndarray) -> np.ndarray:
    """g'(dir) = B C a(dir) through the observed aperture."""
    return pilot_matrix @ (c * steering_far(config, sine_dir,
                                            config.carrier_freq_hz))


def signal_power_at(direction: float, cov_excl: np.ndarray,
                    sample_cov: np.ndarray, c: np.ndarray,
                    pilot_matrix: np.ndarray, config: ArrayConfig) -> float:
    """Excess power explained by one atom at the candidate direction.

    eta = g^H W (R_y - Pi) W g / (g^H W g)^2 with W the inverse of the
    atom-excluded covariance Pi.
    """
    g = _perturbed_atom(config, direction, c, pilot_matrix)
    wg = _solve_hermitian(cov_excl, g)
    excess = sample_cov - cov_excl
    numer = float(np.real(np.vdot(wg, excess @ wg)))
    denom = float(np.real(np.vdot(g, wg)))
    if denom <= 0.0:
        raise SingularCovarianceError("non-positive atom power normalization")
    return numer / denom ** 2


def _stationarity(g: np.ndarray, g_dot: np.ndarray, wg: np.ndarray,
                  w_gdot: np.ndarray, sample_cov: np.ndarray) -> float:
    """Re{g^H W [g g^H W R - R W g g^H] W g_dot} for the current candidate."""
    r_wg = sample_cov @ wg
    r_wgdot = sample_cov @ w_gdot
    t1 = np.vdot(g, wg) * np.vdot(wg, r_wgdot)
    t2 = np.vdot(wg, r_wg) * np.vdot(g, w_gdot)
    return float(np.real(t1 - t2))


def refine_direction(coarse_dir: float, observation_cols: np.ndarray,
                     pilot_matrix: np.ndarray, c: np.ndarray,
                     effective_matrix: np.ndarray, sigma: np.ndarray,
                     noise_var: float, excluded_index: int,
                     config: ArrayConfig, half_width: float = None,
                     n_points: int = 201) -> float:
    """Fine-grid search for the zero of the likelihood stationarity expression.

    Falls back to coarse_dir when the expression never changes sign over the
    interval, which covers intervals that contain no signal energy.
    """
    if abs(coarse_dir) > 1.0:
        raise ValueError("invalid direction: |coarse_dir| > 1")
    if half_width is None:
        half_width = 1.0 / sigma.shape[0]
    cols = np.atleast_2d(observation_cols.T).T
    sample_cov = cols @ cols.conj().T / cols.shape[1]
    cov_excl = covariance_excluding(effective_matrix, sigma, noise_var,
                                    excluded_index)

    grid = np.linspace(coarse_dir - half_width, coarse_dir + half_width, n_points)
    grid = grid[np.abs(grid) <= 1.0]
    if grid.size == 0:
        return coarse_dir

    idx = np.arange(config.n_antennas)
    values = np.empty(grid.size)
    for k, cand in enumerate(grid):
        atom = steering_far(config, float(cand), config.carrier_freq_hz)
        g = pilot_matrix @ (c * atom)
        g_dot = pilot_matrix @ (c * (1j * np.pi * idx * atom))
        wg = _solve_hermitian(cov_excl, g)
        w_gdot = _solve_hermitian(cov_excl, g_dot)
        values[k] = _stationarity(g, g_dot, wg, w_gdot, sample_cov)

    signs = np.sign(values)
    if np.all(signs >= 0) or np.all(signs <= 0):
        return float(coarse_dir)
    return float(grid[int(np.argmin(np.abs(values)))])
