"""Fisher information and Cramér-Rao bounds for direction, split, and range.

The unknown vector stacks, per path, the physical angle, a beam-split
offset, and (near field) the range.  The split parameter is expressed as a
phase-slope offset on top of the frequency-induced split, so ground-truth
channels correspond to offset 0 and the bound on the offset equals the
bound on the split itself.

Bounds are computed in the observed domain by default: the steering columns
and their derivatives are passed through the pilot beamformer before the
projection, which is the bound the estimator's RMSE can actually track.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import SPEED_OF_LIGHT, ArrayConfig


class SingularFimError(RuntimeError):
    """Raised when a full FIM inversion is requested but the FIM is singular."""


@dataclass(frozen=True)
class ParamVector:
    """Per-path signal parameters; ranges present only in the near field."""

    directions: np.ndarray   # physical angles, radians
    splits: np.ndarray       # split offsets (0 for a physical channel)
    ranges: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "directions", np.atleast_1d(
            np.asarray(self.directions, dtype=float)))
        object.__setattr__(self, "splits", np.atleast_1d(
            np.asarray(self.splits, dtype=float)))
        if self.ranges is not None:
            object.__setattr__(self, "ranges", np.atleast_1d(
                np.asarray(self.ranges, dtype=float)))
            if self.ranges.shape != self.directions.shape:
                raise ValueError("ranges length must match directions")
        if self.splits.shape != self.directions.shape:
            raise ValueError("splits length must match directions")

    @property
    def n_paths(self) -> int:
        return self.directions.shape[0]

    @property
    def is_near_field(self) -> bool:
        return self.ranges is not None


@dataclass(frozen=True)
class CrbReport:
    fim: np.ndarray
    crb_diag: np.ndarray
    snr_db: float
    subcarrier_index: int


def perturbed_steering(config: ArrayConfig, angle_rad: float, split: float,
                       freq_hz: float, range_m: float | None = None) -> np.ndarray:
    """Subcarrier steering vector with an explicit split offset parameter."""
    idx = np.arange(config.n_antennas)
    d = config.element_spacing_m
    kappa = 2.0 * np.pi * freq_hz / SPEED_OF_LIGHT
    sine = np.sin(angle_rad)
    phase = kappa * d * idx * sine + np.pi * idx * split
    if range_m is not None:
        if range_m <= 0.0:
            raise ValueError("invalid range: range_m must be positive")
        phase = phase - kappa * (d * idx * np.cos(angle_rad)) ** 2 / (2.0 * range_m)
    return np.exp(1j * phase) / np.sqrt(config.n_antennas)


def steering_derivatives_far(config: ArrayConfig, angle_rad: float, split: float,
                             freq_hz: float):
    """Analytic (d/d angle, d/d split) of the far-field perturbed steering."""
    a = perturbed_steering(config, angle_rad, split, freq_hz)
    idx = np.arange(config.n_antennas)
    kappa = 2.0 * np.pi * freq_hz / SPEED_OF_LIGHT
    d_angle = 1j * kappa * config.element_spacing_m * idx * np.cos(angle_rad) * a
    d_split = 1j * np.pi * idx * a
    return d_angle, d_split


def steering_derivatives_near(config: ArrayConfig, angle_rad: float,
                              range_m: float, split: float, freq_hz: float):
    """Analytic (d/d angle, d/d range, d/d split) in the near field."""
    if range_m <= 0.0:
        raise ValueError("invalid range: range_m must be positive")
    a = perturbed_steering(config, angle_rad, split, freq_hz, range_m)
    idx = np.arange(config.n_antennas)
    d = config.element_spacing_m
    kappa = 2.0 * np.pi * freq_hz / SPEED_OF_LIGHT
    cos_a = np.cos(angle_rad)
    sin_a = np.sin(angle_rad)
    d_angle = 1j * kappa * d * idx * cos_a * (
        1.0 + d * idx * sin_a / range_m) * a
    d_range = 1j * kappa * (d * idx * cos_a) ** 2 / (2.0 * range_m ** 2) * a
    d_split = 1j * np.pi * idx * a
    return d_angle, d_range, d_split


def _steering_and_derivs(config: ArrayConfig, params: ParamVector,
                         freq_hz: float):
    """Columns of A' and the per-parameter derivative columns.

    Parameter ordering: all angles, then all splits, then all ranges.
    Returns (A', list of (param_index, path_index, derivative_vector)).
    """
    n_paths = params.n_paths
    cols = []
    derivs = []
    for l in range(n_paths):
        angle = float(params.directions[l])
        split = float(params.splits[l])
        if params.is_near_field:
            r = float(params.ranges[l])
            cols.append(perturbed_steering(config, angle, split, freq_hz, r))
            d_angle, d_range, d_split = steering_derivatives_near(
                config, angle, r, split, freq_hz)
            derivs.append((l, l, d_angle))
            derivs.append((n_paths + l, l, d_split))
            derivs.append((2 * n_paths + l, l, d_range))
        else:
            cols.append(perturbed_steering(config, angle, split, freq_hz))
            d_angle, d_split = steering_derivatives_far(
                config, angle, split, freq_hz)
            derivs.append((l, l, d_angle))
            derivs.append((n_paths + l, l, d_split))
    a_mat = np.stack(cols, axis=1)
    derivs.sort(key=lambda t: t[0])
    return a_mat, derivs


def crb(config: ArrayConfig, params: ParamVector, pilot_matrix: np.ndarray | None,
        signal_powers, noise_var: float, freq_hz: float,
        aperture: str = "observed", inversion: str = "auto",
        snr_db: float = float("nan"), subcarrier_index: int = -1) -> CrbReport:
    """Closed-form FIM and CRB diagonal for the stacked signal parameters.

    F_ij = (2/mu^2) Re Tr{M K_ij} with M = S A'^H Pi_y^{-1} A' S and
    K_ij = dA_i^H (I - A' A'^+) dA_j, evaluated through the pilot
    beamformer when aperture="observed".

    inversion: "full" inverts the FIM (raises on singularity), "per_entry"
    uses the reciprocal diagonal 1/F_ii, "auto" inverts when well
    conditioned and otherwise falls back to the per-entry form.  The
    fallback matters for a single far-field path at one subcarrier, where
    the angle and split derivatives are collinear and the joint FIM is
    exactly singular.
    """
    a_mat, derivs = _steering_and_derivs(config, params, freq_hz)
    if aperture == "observed":
        if pilot_matrix is None:
            raise ValueError("observed aperture requires a pilot matrix")
        a_obs = pilot_matrix @ a_mat
        d_obs = [(i, l, pilot_matrix @ v) for i, l, v in derivs]
    elif aperture == "full":
        a_obs = a_mat
        d_obs = derivs
    else:
        raise ValueError(f"unknown aperture {aperture!r}")

    powers = np.atleast_1d(np.asarray(signal_powers, dtype=float))
    if powers.shape[0] != params.n_paths:
        raise ValueError("signal_powers length must match path count")
    p_dim = a_obs.shape[0]
    cov_y = (a_obs * powers[np.newaxis, :]) @ a_obs.conj().T + \
        noise_var * np.eye(p_dim)
    m_mat = np.diag(powers) @ a_obs.conj().T @ np.linalg.solve(cov_y, a_obs) \
        @ np.diag(powers)

    proj = np.eye(p_dim) - a_obs @ np.linalg.pinv(a_obs)
    n_params = len(d_obs)
    fim = np.zeros((n_params, n_params))
    for i, l_i, d_i in d_obs:
        pd_i = proj @ d_i
        for j, l_j, d_j in d_obs:
            k_ij = np.vdot(pd_i, proj @ d_j)
            fim[i, j] = (2.0 / noise_var) * float(np.real(m_mat[l_j, l_i] * k_ij))
    fim = 0.5 * (fim + fim.T)

    crb_diag = _invert_fim(fim, inversion)
    return CrbReport(fim, crb_diag, snr_db, subcarrier_index)


def _invert_fim(fim: np.ndarray, inversion: str) -> np.ndarray:
    with np.errstate(divide="ignore"):
        per_entry = np.where(np.diag(fim) > 0.0, 1.0 / np.diag(fim), np.inf)
    if inversion == "per_entry":
        return per_entry
    cond = np.linalg.cond(fim)
    if inversion == "full":
        if not np.isfinite(cond) or cond > 1e10:
            raise SingularFimError("FIM is numerically singular")
        return np.diag(np.linalg.inv(fim)).copy()
    if inversion == "auto":
        if np.isfinite(cond) and cond < 1e10:
            return np.diag(np.linalg.inv(fim)).copy()
        return per_entry
    raise ValueError(f"unknown inversion mode {inversion!r}")


def numeric_fim(config: ArrayConfig, params: ParamVector,
                pilot_matrix: np.ndarray | None, signal_powers,
                noise_var: float, freq_hz: float,
                aperture: str = "observed") -> np.ndarray:
    """Signal-parameter FIM from second differences of the log-likelihood.

    Builds the full FIM over (signal parameters, signal powers, noise
    variance) by numerically differentiating ln|Pi_y(w)| + Tr{Pi_y(w)^{-1}
    Pi_y(w0)}, then removes the nuisance block by Schur complement.  Serves
    as the independent oracle for the closed form.
    """
    powers = np.atleast_1d(np.asarray(signal_powers, dtype=float))
    n_paths = params.n_paths
    n_sig = (3 if params.is_near_field else 2) * n_paths

    def unpack(w):
        directions = w[:n_paths]
        splits = w[n_paths:2 * n_paths]
        if params.is_near_field:
            ranges = w[2 * n_paths:3 * n_paths]
            p = ParamVector(directions, splits, ranges)
        else:
            p = ParamVector(directions, splits)
        pw = w[n_sig:n_sig + n_paths]
        nv = w[n_sig + n_paths]
        return p, pw, nv

    def cov_of(w):
        p, pw, nv = unpack(w)
        a_mat, _ = _steering_and_derivs(config, p, freq_hz)
        if aperture == "observed":
            a_mat = pilot_matrix @ a_mat
        return (a_mat * pw[np.newaxis, :]) @ a_mat.conj().T + \
            nv * np.eye(a_mat.shape[0])

    w0 = np.concatenate([
        params.directions, params.splits,
        params.ranges if params.is_near_field else np.zeros(0),
        powers, [noise_var]])
    cov0 = cov_of(w0)

    def nll(w):
        cov = cov_of(w)
        sign, logdet = np.linalg.slogdet(cov)
        return float(logdet + np.real(np.trace(np.linalg.solve(cov, cov0))))

    steps = np.full(w0.shape, 1e-4)
    if params.is_near_field:
        steps[2 * n_paths:3 * n_paths] = 1e-4 * np.abs(params.ranges)
    steps[n_sig:n_sig + n_paths] = 1e-4 * np.maximum(powers, 1e-12)
    steps[n_sig + n_paths] = 1e-4 * noise_var

    n_all = w0.shape[0]
    hess = np.zeros((n_all, n_all))
    f0 = nll(w0)
    for i in range(n_all):
        e_i = np.zeros(n_all)
        e_i[i] = steps[i]
        hess[i, i] = (nll(w0 + e_i) - 2.0 * f0 + nll(w0 - e_i)) / steps[i] ** 2
        for j in range(i + 1, n_all):
            e_j = np.zeros(n_all)
            e_j[j] = steps[j]
            val = (nll(w0 + e_i + e_j) - nll(w0 + e_i - e_j)
                   - nll(w0 - e_i + e_j) + nll(w0 - e_i - e_j)) / \
                (4.0 * steps[i] * steps[j])
            hess[i, j] = val
            hess[j, i] = val

    f_vv = hess[:n_sig, :n_sig]
    f_vn = hess[:n_sig, n_sig:]
    f_nn = hess[n_sig:, n_sig:]
    return f_vv - f_vn @ np.linalg.solve(f_nn, f_vn.T)
