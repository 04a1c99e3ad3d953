"""
Difference co-array model
Physical array geometry, steering vectors, co-array lags and DoF accounting
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import GeometryError


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Linear array with sensors on an integer grid

    Positions are integer multiples of the unit spacing d, and d is given in
    half wavelengths (1 means d = lambda/2). Keeping positions integral makes
    the lag set exact; the wavelength only enters the steering phases.
    """
    positions: Tuple[int, ...]
    unit_spacing_halves_lambda: float = 1.0
    wavelength: float = 1.0

    def __post_init__(self):
        if any(p != int(p) for p in self.positions):
            raise GeometryError(f"positions must be integers: {tuple(self.positions)}")
        positions = tuple(int(p) for p in self.positions)
        if len(positions) < 1:
            raise GeometryError("array needs at least one sensor")
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise GeometryError(f"positions must be strictly increasing: {positions}")
        if self.unit_spacing_halves_lambda <= 0 or self.wavelength <= 0:
            raise GeometryError("unit spacing and wavelength must be positive")
        object.__setattr__(self, 'positions', positions)

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def unit_spacing(self) -> float:
        """Unit spacing d in length units"""
        return self.unit_spacing_halves_lambda * self.wavelength / 2.0

    def locations(self) -> np.ndarray:
        """Sensor locations d_i in length units"""
        return np.asarray(self.positions, dtype=float) * self.unit_spacing

    def to_document(self) -> "GeometryDocument":
        return GeometryDocument(
            unit_spacing_halves_lambda=self.unit_spacing_halves_lambda,
            positions=list(self.positions),
        )


class GeometryDocument(BaseModel):
    """JSON record of a geometry"""
    model_config = ConfigDict(extra='forbid')

    unit_spacing_halves_lambda: float = Field(1.0, gt=0)
    positions: list[int]

    def to_geometry(self) -> ArrayGeometry:
        return ArrayGeometry(tuple(self.positions), self.unit_spacing_halves_lambda)


@dataclass(frozen=True)
class CoArray:
    """Difference co-array: sorted distinct lags and the hole-free aperture"""
    lags: Tuple[int, ...]
    contiguous_aperture: int

    @property
    def size(self) -> int:
        return len(self.lags)

    def as_geometry(self, unit_spacing_halves_lambda: float = 1.0,
                    wavelength: float = 1.0) -> ArrayGeometry:
        """Virtual array with one sensor per distinct lag"""
        return ArrayGeometry(self.lags, unit_spacing_halves_lambda, wavelength)


@dataclass(frozen=True)
class SourceEnsemble:
    """Far-field narrowband sources seen by an array"""
    directions: Tuple[float, ...] = ()
    powers: Tuple[float, ...] = ()
    noise_power: float = 0.0

    def __post_init__(self):
        directions = tuple(float(t) for t in self.directions)
        powers = tuple(float(p) for p in self.powers)
        if len(directions) != len(powers):
            raise ValueError("directions and powers must have the same length")
        if any(p < 0 for p in powers) or self.noise_power < 0:
            raise ValueError("powers must be non-negative")
        if len(set(directions)) != len(directions):
            raise ValueError("source directions must be pairwise distinct")
        if any(not -np.pi / 2 < t < np.pi / 2 for t in directions):
            raise ValueError("directions must lie in (-pi/2, pi/2)")
        object.__setattr__(self, 'directions', directions)
        object.__setattr__(self, 'powers', powers)

    @property
    def size(self) -> int:
        return len(self.directions)


def nested_positions(n1: int, n2: int) -> ArrayGeometry:
    """
    Two-level nested array

    Inner ULA at 1..n1, outer ULA at (n1+1)*m for m = 1..n2, both in units
    of the unit spacing.

    Args:
        n1: inner (dense) sensor count
        n2: outer (sparse) sensor count

    Returns:
        ArrayGeometry with n1 + n2 sensors
    """
    if n1 < 1 or n2 < 1:
        raise GeometryError(f"nested array needs n1 >= 1 and n2 >= 1, got ({n1}, {n2})")
    inner = list(range(1, n1 + 1))
    outer = [(n1 + 1) * m for m in range(1, n2 + 1)]
    # outer[0] == n1 + 1 never collides with the inner ULA
    return ArrayGeometry(tuple(inner + outer))


def difference_coarray(geometry: ArrayGeometry) -> CoArray:
    """
    Difference co-array of a geometry

    Args:
        geometry: physical array

    Returns:
        CoArray with the distinct values of d_i - d_j over all ordered pairs
    """
    pos = np.asarray(geometry.positions, dtype=np.int64)
    lags = np.unique(np.subtract.outer(pos, pos))
    present = set(int(l) for l in lags)
    aperture = 0
    while aperture + 1 in present:
        aperture += 1
    return CoArray(tuple(int(l) for l in lags), aperture)


def max_dof(n_sensors: int) -> int:
    """Largest DoF a difference co-array of n_sensors can offer: N(N-1)"""
    if n_sensors < 1:
        raise ValueError("n_sensors must be >= 1")
    return n_sensors * (n_sensors - 1)


def steering_vector(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """
    Steering vector a(theta)

    Element i is exp(j * 2*pi/lambda * d_i * sin(theta)).
    """
    phase = (2.0 * np.pi / geometry.wavelength) * geometry.locations() * np.sin(theta)
    return np.exp(1j * phase)


def steering_matrix(geometry: ArrayGeometry, thetas: Sequence[float]) -> np.ndarray:
    """Array manifold F, one steering vector per column (N x D)"""
    thetas = np.asarray(thetas, dtype=float).reshape(-1)
    phase = (2.0 * np.pi / geometry.wavelength) * np.outer(geometry.locations(), np.sin(thetas))
    return np.exp(1j * phase)


def coarray_manifold_column(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """
    Co-array manifold column conj(a) kron a (length N^2)

    Flattened entry (i, j) carries phase 2*pi/lambda * (d_j - d_i) * sin(theta).
    """
    a = steering_vector(geometry, theta)
    return np.kron(a.conj(), a)


def identity_indicator(n_sensors: int) -> np.ndarray:
    """Flattened identity [e_1; e_2; ...; e_N] (length N^2)"""
    return np.eye(n_sensors).reshape(-1, order='F')


def ideal_autocorrelation(geometry: ArrayGeometry, ensemble: SourceEnsemble) -> np.ndarray:
    """F diag(sigma^2) F^H + sigma_n^2 I"""
    n = geometry.size
    if ensemble.size == 0:
        return ensemble.noise_power * np.eye(n, dtype=complex)
    F = steering_matrix(geometry, ensemble.directions)
    p = np.asarray(ensemble.powers)
    return (F * p) @ F.conj().T + ensemble.noise_power * np.eye(n)


def sample_autocorrelation(geometry: ArrayGeometry, ensemble: SourceEnsemble,
                           snapshots: int = 1, rng_seed: Optional[int] = None,
                           ideal: bool = False) -> np.ndarray:
    """
    Autocorrelation matrix of the received signal

    Args:
        geometry: physical array
        ensemble: sources and noise level
        snapshots: number of snapshots averaged
        rng_seed: seed for the source/noise draws
        ideal: return the analytic (infinite-snapshot) matrix instead

    Returns:
        N x N Hermitian matrix
    """
    if ideal:
        return ideal_autocorrelation(geometry, ensemble)
    if snapshots < 1:
        raise ValueError("snapshots must be >= 1")

    rng = np.random.default_rng(rng_seed)
    n = geometry.size

    def circular(shape, power):
        # CN(0, power): independent real/imag parts with variance power/2
        return np.sqrt(np.asarray(power) / 2.0) * (
            rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    received = circular((n, snapshots), ensemble.noise_power)
    if ensemble.size:
        F = steering_matrix(geometry, ensemble.directions)
        p = np.asarray(ensemble.powers).reshape(-1, 1)
        received = received + F @ circular((ensemble.size, snapshots), p)

    omega = received @ received.conj().T / snapshots
    return (omega + omega.conj().T) / 2.0


def vectorize_autocorrelation(omega: np.ndarray) -> np.ndarray:
    """Column-stacked vec(Omega) (length N^2)"""
    omega = np.asarray(omega)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {omega.shape}")
    return omega.reshape(-1, order='F')
