"""Uniform linear array geometry: steering vectors, beam-split maps, dictionaries.

Sine-space directions are dimensionless (sin of the physical angle), all
frequencies are in Hz and distances in metres.  Antenna 1 is the phase
reference, so formulas written with a 1-based antenna index i carry a
factor (i - 1) that becomes ``numpy.arange(n_antennas)`` in storage order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayConfig:
    """Geometry of a ULA transmitter."""

    n_antennas: int
    carrier_freq_hz: float
    element_spacing_m: float

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ValueError("n_antennas must be >= 2")
        if self.carrier_freq_hz <= 0.0:
            raise ValueError("carrier_freq_hz must be positive")
        if self.element_spacing_m <= 0.0:
            raise ValueError("element_spacing_m must be positive")

    @classmethod
    def half_wavelength(cls, n_antennas: int, carrier_freq_hz: float) -> "ArrayConfig":
        """Standard build with half-wavelength spacing at the carrier."""
        spacing = SPEED_OF_LIGHT / (2.0 * carrier_freq_hz)
        return cls(n_antennas, carrier_freq_hz, spacing)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def aperture_m(self) -> float:
        """Physical aperture between the first and last element."""
        return (self.n_antennas - 1) * self.element_spacing_m


@dataclass(frozen=True)
class SubcarrierGrid:
    """Symmetric subcarrier frequencies around the carrier."""

    n_subcarriers: int
    bandwidth_hz: float
    carrier_freq_hz: float
    frequencies: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n_subcarriers: int, bandwidth_hz: float,
              carrier_freq_hz: float) -> "SubcarrierGrid":
        if n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        m = np.arange(1, n_subcarriers + 1, dtype=float)
        freqs = carrier_freq_hz + (bandwidth_hz / n_subcarriers) * (
            m - 1.0 - (n_subcarriers - 1.0) / 2.0)
        freqs.setflags(write=False)
        return cls(n_subcarriers, bandwidth_hz, carrier_freq_hz, freqs)

    @property
    def center_index(self) -> int:
        """Index of the subcarrier closest to the carrier frequency."""
        return int(np.argmin(np.abs(self.frequencies - self.carrier_freq_hz)))


@dataclass(frozen=True)
class Direction:
    """A physical direction kept in both angle and sine form."""

    angle_rad: float
    sine: float

    @classmethod
    def from_angle(cls, angle_rad: float) -> "Direction":
        if not -np.pi / 2 <= angle_rad <= np.pi / 2:
            raise ValueError("angle must lie in [-pi/2, pi/2]")
        return cls(float(angle_rad), float(np.sin(angle_rad)))

    @classmethod
    def from_sine(cls, sine: float) -> "Direction":
        if abs(sine) > 1.0:
            raise ValueError("sine-space direction must lie in [-1, 1]")
        return cls(float(np.arcsin(sine)), float(sine))


def _check_sine(sine_dir: float) -> None:
    if abs(sine_dir) > 1.0:
        raise ValueError(f"invalid direction: |{sine_dir}| > 1")


def steering_far(config: ArrayConfig, sine_dir: float, freq_hz: float) -> np.ndarray:
    """Far-field steering vector at the given frequency.

    Entry i (1-based) is exp(j*pi*(i-1)*(f/f_c)*sine)/sqrt(N) for
    half-wavelength spacing; spacing enters through 2*d*f/c0 in general.
    """
    _check_sine(sine_dir)
    if freq_hz <= 0.0:
        raise ValueError("freq_hz must be positive")
    idx = np.arange(config.n_antennas)
    phase = 2.0 * np.pi * config.element_spacing_m * freq_hz / SPEED_OF_LIGHT
    return np.exp(1j * phase * idx * sine_dir) / np.sqrt(config.n_antennas)


def spatial_direction(sine_dir: float, freq_hz: float, carrier_hz: float) -> float:
    """Beamspace direction the array actually points at for this subcarrier."""
    _check_sine(sine_dir)
    return (freq_hz / carrier_hz) * sine_dir


def beam_split_far(sine_dir: float, freq_hz: float, carrier_hz: float) -> float:
    """Sine-space gap between spatial and physical direction."""
    _check_sine(sine_dir)
    return (freq_hz / carrier_hz - 1.0) * sine_dir


def dirichlet(a: float, n: int) -> float:
    """Normalized Dirichlet kernel sin(N*pi*a)/(N*sin(pi*a)).

    The removable singularities at integer a return the analytic limit +-1.
    """
    frac = a - np.round(a)
    if abs(frac) < 1e-12:
        # At even integers the limit is +1, at odd integers (-1)^(N-1) * ...;
        # only the magnitude matters for gains, but return the exact limit.
        k = int(np.round(a))
        return float((-1.0) ** (k * (n - 1)))
    return float(np.sin(n * np.pi * a) / (n * np.sin(np.pi * a)))


def array_gain(config: ArrayConfig, phys_sine: float, spatial_sine: float,
               freq_hz: float) -> float:
    """Power gain of a beam aimed at spatial_sine on a source at phys_sine."""
    _check_sine(phys_sine)
    _check_sine(spatial_sine)
    a = config.element_spacing_m * (
        config.carrier_freq_hz * spatial_sine - freq_hz * phys_sine) / SPEED_OF_LIGHT
    return dirichlet(a, config.n_antennas) ** 2


def steering_near(config: ArrayConfig, sine_dir: float, range_m: float,
                  freq_hz: float, mode: str = "taylor") -> np.ndarray:
    """Near-field steering vector, exact spherical or second-order Taylor.

    Phases follow the per-element path-length excess r_i - r relative to
    antenna 1, giving entry i = exp(-j*2*pi*(f/c0)*(r_i - r))/sqrt(N).
    """
    _check_sine(sine_dir)
    if range_m <= 0.0:
        raise ValueError("invalid range: range_m must be positive")
    d = config.element_spacing_m
    idx = np.arange(config.n_antennas)
    offs = idx * d
    if mode == "exact":
        r_i = range_m * np.sqrt(
            1.0 + (offs / range_m) ** 2 - 2.0 * offs * sine_dir / range_m)
    elif mode == "taylor":
        cos_dir = np.sqrt(1.0 - sine_dir ** 2)
        r_i = range_m - offs * sine_dir + (offs * cos_dir) ** 2 / (2.0 * range_m)
    else:
        raise ValueError(f"unknown near-field mode {mode!r}")
    phase = -2.0 * np.pi * (freq_hz / SPEED_OF_LIGHT) * (r_i - range_m)
    return np.exp(1j * phase) / np.sqrt(config.n_antennas)


def near_field_spatial_direction(sine_dir: float, angle_rad: float, range_m: float,
                                 freq_hz: float, carrier_hz: float,
                                 antenna_index: int) -> float:
    """Antenna-dependent spatial direction seen by element i in the near field."""
    _check_sine(sine_dir)
    if range_m <= 0.0:
        raise ValueError("invalid range: range_m must be positive")
    eta = freq_hz / carrier_hz
    correction = freq_hz * SPEED_OF_LIGHT * (antenna_index - 1) * \
        np.cos(angle_rad) ** 2 / (4.0 * carrier_hz ** 2 * range_m)
    return eta * sine_dir - correction


def beam_split_near(sine_dir: float, angle_rad: float, range_m: float,
                    freq_hz: float, carrier_hz: float, antenna_index: int) -> float:
    """Near-field beam-split for element i: far-field split plus range term."""
    return near_field_spatial_direction(
        sine_dir, angle_rad, range_m, freq_hz, carrier_hz, antenna_index) - sine_dir


def fraunhofer_distance(aperture_m: float, carrier_hz: float) -> float:
    """Far-field boundary 2*G^2*f_c/c0 for an aperture G."""
    if aperture_m <= 0.0:
        raise ValueError("aperture_m must be positive")
    return 2.0 * aperture_m ** 2 * carrier_hz / SPEED_OF_LIGHT


def ula_fraunhofer_distance(config: ArrayConfig) -> float:
    """Fraunhofer distance of the configured ULA."""
    return fraunhofer_distance(config.aperture_m, config.carrier_freq_hz)


@dataclass(frozen=True)
class Dictionary:
    """Overcomplete sine-space grid of carrier-frequency steering vectors."""

    grid_size: int
    grid_points: np.ndarray = field(repr=False)
    atoms: np.ndarray = field(repr=False)


def build_dictionary(config: ArrayConfig, grid_size: int) -> Dictionary:
    """Steering dictionary over the equispaced grid (2n - N - 1)/N, n = 1..N."""
    if grid_size < config.n_antennas:
        raise ValueError("grid too small: grid_size must be >= n_antennas")
    n = np.arange(1, grid_size + 1)
    grid = (2.0 * n - grid_size - 1.0) / grid_size
    idx = np.arange(config.n_antennas)
    phase = 2.0 * np.pi * config.element_spacing_m * config.carrier_freq_hz / SPEED_OF_LIGHT
    atoms = np.exp(1j * phase * np.outer(idx, grid)) / np.sqrt(config.n_antennas)
    grid.setflags(write=False)
    atoms.setflags(write=False)
    return Dictionary(grid_size, grid, atoms)
