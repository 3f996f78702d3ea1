"""Ion-chain equilibrium geometry and normal-mode structure in a linear Paul trap.

A chain of N ions in a harmonic trap supports N collective modes along each of
the three principal axes (two radial, one axial).  This module solves the
classical equilibrium positions, diagonalizes the small-oscillation Hessian
per axis, and attaches the Lamb-Dicke couplings that enter the spin-motion
Hamiltonian of the gate modules.

Internally everything is dimensionless: lengths in the Coulomb length
l = (e^2 / (4 pi eps0 M w_z^2))^(1/3) and frequencies in units of the axial
trap frequency w_z.  SI values appear only at the API boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ChainInstabilityError, SolverError, ValidationError

# CODATA 2018
ELEMENTARY_CHARGE = 1.602176634e-19  # C
EPSILON_0 = 8.8541878128e-12  # F/m
HBAR = 1.054571817e-34  # J s
ATOMIC_MASS = 1.66053906660e-27  # kg

YB171_MASS = 170.9363302 * ATOMIC_MASS

# Counter-propagating 355 nm Raman pair oriented at 45 degrees to the radial
# principal axes: |dk| projected on one axis.
DEFAULT_WAVEVECTOR = np.sqrt(2.0) * 2.0 * np.pi / 355e-9  # 1/m


class Axis(str, Enum):
    X = "X"
    Y = "Y"
    Z = "Z"


@dataclass(frozen=True)
class TrapConfig:
    """Static trap parameters.

    Frequencies are angular (rad/s).  The two radial frequencies must differ:
    the scheme needs spectrally distinguishable mode sets with well-defined
    principal axes.  Both radial frequencies must exceed the axial one so the
    ions form a linear chain.
    """

    ion_count: int
    axial_freq: float
    radial_freq_x: float
    radial_freq_y: float
    ion_mass: float = YB171_MASS
    wavevector_magnitude: float = DEFAULT_WAVEVECTOR

    def __post_init__(self):
        if self.ion_count < 1:
            raise ValidationError("ion_count must be >= 1")
        for name in ("axial_freq", "radial_freq_x", "radial_freq_y", "ion_mass",
                     "wavevector_magnitude"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be strictly positive")
        if self.radial_freq_x == self.radial_freq_y:
            raise ValidationError(
                "degenerate radial axes (w_x == w_y) are rejected: mode sets "
                "must be spectrally distinguishable")
        if not (self.radial_freq_x > self.axial_freq
                and self.radial_freq_y > self.axial_freq):
            raise ValidationError(
                "need w_x > w_z and w_y > w_z for a stable linear chain")

    def radial_freq(self, axis: Axis) -> float:
        axis = Axis(axis)
        if axis == Axis.X:
            return self.radial_freq_x
        if axis == Axis.Y:
            return self.radial_freq_y
        raise ValidationError("Z has no radial frequency")

    @property
    def length_scale(self) -> float:
        """Coulomb length l (meters); the unit of the dimensionless positions."""
        return (ELEMENTARY_CHARGE**2
                / (4.0 * np.pi * EPSILON_0 * self.ion_mass * self.axial_freq**2)
                ) ** (1.0 / 3.0)


def default_config(ion_count: int = 7) -> TrapConfig:
    """Desk-scale default: 171Yb+ chain, w_z/2pi = 0.4 MHz, radial 3.0/2.9 MHz."""
    return TrapConfig(
        ion_count=ion_count,
        axial_freq=2 * np.pi * 0.4e6,
        radial_freq_x=2 * np.pi * 3.0e6,
        radial_freq_y=2 * np.pi * 2.9e6,
    )


@dataclass(frozen=True)
class EquilibriumPositions:
    """Axial equilibrium coordinates in units of the Coulomb length."""

    positions: np.ndarray
    residual_norm: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 1:
            raise ValidationError("positions must be a 1-D sequence")
        if pos.size > 1 and not np.all(np.diff(pos) > 0):
            raise ValidationError("positions must be strictly increasing")
        if abs(pos.sum()) > 1e-12 * max(1.0, np.abs(pos).max()):
            raise ValidationError("positions must be symmetric about the origin")

    def positions_si(self, config: TrapConfig) -> np.ndarray:
        return self.positions * config.length_scale


def _potential_gradient(u: np.ndarray) -> np.ndarray:
    # V = sum u_i^2/2 + sum_{i<j} 1/|u_i-u_j|
    d = u[:, None] - u[None, :]
    absd = np.abs(d)
    np.fill_diagonal(absd, 1.0)
    f = d / absd**3
    np.fill_diagonal(f, 0.0)
    return u - f.sum(axis=1)


def _coulomb_curvature(u: np.ndarray) -> np.ndarray:
    """Matrix K with K_ii = sum_j 1/|u_i-u_j|^3, K_ij = -1/|u_i-u_j|^3."""
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    inv3 = d ** -3
    k = -inv3
    np.fill_diagonal(k, inv3.sum(axis=1))
    return k


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    return np.eye(u.size) + 2.0 * _coulomb_curvature(u)


def solve_equilibrium(config: TrapConfig, max_iter: int = 200,
                      tol: float = 1e-13) -> EquilibriumPositions:
    """Solve the axial equilibrium of the chain.

    Newton iteration with the analytic Jacobian, started from quasi-uniform
    spacing.  Deterministic for a given ion count.

    Raises
    ------
    SolverError
        If the force residual does not drop below ``tol`` within ``max_iter``
        iterations; carries the last residual.
    """
    n = config.ion_count
    if n == 1:
        return EquilibriumPositions(np.zeros(1), 0.0)

    # Empirical minimum-spacing estimate for the uniform starting lattice.
    spacing = 2.018 / n ** 0.559
    u = (np.arange(n) - 0.5 * (n - 1)) * spacing

    residual = np.inf
    for _ in range(max_iter):
        g = _potential_gradient(u)
        residual = np.max(np.abs(g))
        if residual < tol:
            break
        step = np.linalg.solve(_axial_hessian(u), g)
        # Damped Newton: halve the step until the residual decreases and the
        # ordering is preserved.
        scale = 1.0
        for _ in range(40):
            trial = u - scale * step
            if np.all(np.diff(trial) > 0):
                trial_res = np.max(np.abs(_potential_gradient(trial)))
                if trial_res < residual:
                    break
            scale *= 0.5
        u = u - scale * step
    else:
        raise SolverError(
            f"equilibrium solve did not converge for N={n}", residual=residual)

    u = u - u.mean()  # remove numerical drift of the symmetric solution
    return EquilibriumPositions(u, float(np.max(np.abs(_potential_gradient(u)))))


@dataclass(frozen=True)
class ModeSet:
    """Normal modes of one principal axis.

    ``frequencies`` are angular (rad/s), sorted descending.  ``mode_vectors``
    is orthonormal with columns as modes (entry [i, k] is the participation of
    ion i in mode k).  ``lamb_dicke[k, i]`` couples ion i to mode k.
    """

    axis: Axis
    frequencies: np.ndarray
    mode_vectors: np.ndarray
    lamb_dicke: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        vecs = np.asarray(self.mode_vectors, dtype=float)
        eta = np.asarray(self.lamb_dicke, dtype=float)
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "mode_vectors", vecs)
        object.__setattr__(self, "lamb_dicke", eta)
        n = freqs.size
        if vecs.shape != (n, n) or eta.shape != (n, n):
            raise ValidationError("mode matrices must be N x N")
        if np.any(freqs <= 0) or not np.all(np.isfinite(freqs)):
            raise ChainInstabilityError("mode frequencies must be real positive")
        if np.any(np.diff(freqs) > 0):
            raise ValidationError("frequencies must be sorted descending")
        if not np.allclose(vecs.T @ vecs, np.eye(n), atol=1e-10):
            raise ValidationError("mode-vector matrix must be orthonormal")
        if not np.all(np.isfinite(eta)):
            raise ValidationError("Lamb-Dicke entries must be finite")

    @property
    def ion_count(self) -> int:
        return self.frequencies.size

    def mode_vector(self, k: int) -> np.ndarray:
        return self.mode_vectors[:, k]


def _fix_eigenvector_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for k in range(out.shape[1]):
        imax = int(np.argmax(np.abs(out[:, k])))
        if out[imax, k] < 0:
            out[:, k] = -out[:, k]
    return out


def normal_modes(config: TrapConfig, eq: EquilibriumPositions,
                 axis: Axis) -> ModeSet:
    """Diagonalize the dimensionless Hessian of one axis.

    Axial Hessian: identity plus twice the Coulomb curvature.  Radial Hessian:
    (w_r/w_z)^2 on the diagonal minus the Coulomb curvature.  Frequencies come
    back in rad/s, descending, so the radial center-of-mass mode (uniform
    participation at w_r) is first.

    Raises
    ------
    ChainInstabilityError
        If any eigenvalue is non-positive (radial confinement too weak for
        this chain length).
    """
    axis = Axis(axis)
    u = eq.positions
    if u.size != config.ion_count:
        raise ValidationError("equilibrium inconsistent with config")
    if axis == Axis.Z:
        hess = _axial_hessian(u)
    else:
        ratio = config.radial_freq(axis) / config.axial_freq
        hess = ratio**2 * np.eye(u.size) - _coulomb_curvature(u)

    evals, evecs = np.linalg.eigh(hess)
    if np.any(evals <= 0):
        raise ChainInstabilityError(
            f"axis {axis.value}: non-positive mode eigenvalue "
            f"(min {evals.min():.3e}); chain is unstable at this confinement")

    order = np.argsort(evals)[::-1]  # descending frequency
    evals = evals[order]
    evecs = _fix_eigenvector_signs(evecs[:, order])
    freqs = config.axial_freq * np.sqrt(evals)

    eta = _lamb_dicke_from_vectors(config, freqs, evecs)
    return ModeSet(axis=axis, frequencies=freqs, mode_vectors=evecs,
                   lamb_dicke=eta)


def _lamb_dicke_from_vectors(config: TrapConfig, freqs: np.ndarray,
                             vecs: np.ndarray) -> np.ndarray:
    scale = config.wavevector_magnitude * np.sqrt(
        HBAR / (2.0 * config.ion_mass * freqs))
    return scale[:, None] * vecs.T


def lamb_dicke_matrix(config: TrapConfig, modes: ModeSet) -> np.ndarray:
    """eta[k, i] = dk * b_k^i * sqrt(hbar / (2 M w_k))."""
    return _lamb_dicke_from_vectors(config, modes.frequencies,
                                    modes.mode_vectors)


@dataclass(frozen=True)
class ModeSubset:
    """A retained selection of modes from one axis.

    Carries the same frequency/coupling views as a full ModeSet (frequencies
    shape (m,), lamb_dicke shape (m, N_ions)) but drops the orthonormality
    contract; used where only some modes are kept in a model.
    """

    axis: Axis
    frequencies: np.ndarray
    lamb_dicke: np.ndarray
    indices: tuple

    @property
    def mode_count(self) -> int:
        return self.frequencies.size


def retain_modes(modes: ModeSet, indices) -> ModeSubset:
    """Select modes by index (into the descending-frequency ordering)."""
    idx = tuple(int(k) for k in indices)
    if len(set(idx)) != len(idx) or not idx:
        raise ValidationError("mode indices must be non-empty and unique")
    if not all(0 <= k < modes.ion_count for k in idx):
        raise ValidationError("mode index out of range")
    sel = list(idx)
    return ModeSubset(axis=modes.axis,
                      frequencies=modes.frequencies[sel],
                      lamb_dicke=modes.lamb_dicke[sel, :],
                      indices=idx)


@dataclass(frozen=True)
class SeparationReport:
    """Spectral relation between the X and Y mode bands."""

    x_band: tuple
    y_band: tuple
    gap: float
    disjoint: bool


def mode_separation_report(modes_x: ModeSet, modes_y: ModeSet) -> SeparationReport:
    """Check (not assume) that the two radial spectra occupy disjoint bands."""
    bx = (float(modes_x.frequencies.min()), float(modes_x.frequencies.max()))
    by = (float(modes_y.frequencies.min()), float(modes_y.frequencies.max()))
    if bx[0] > by[1]:
        gap = bx[0] - by[1]
    elif by[0] > bx[1]:
        gap = by[0] - bx[1]
    else:
        gap = -min(bx[1], by[1]) + max(bx[0], by[0])  # negative overlap
    return SeparationReport(x_band=bx, y_band=by, gap=float(gap),
                            disjoint=gap > 0)


# -- file formats -------------------------------------------------------------

def load_trap_config(path) -> TrapConfig:
    """Read a TrapConfig from a JSON or TOML file with explicit SI units.

    Keys: ion_count, axial_freq_hz, radial_freq_x_hz, radial_freq_y_hz,
    optional ion_mass_kg and wavevector_per_m.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        raw = tomllib.loads(text)
    else:
        raw = json.loads(text)
    if "trap" in raw:
        raw = raw["trap"]
    try:
        kwargs = dict(
            ion_count=int(raw["ion_count"]),
            axial_freq=2 * np.pi * float(raw["axial_freq_hz"]),
            radial_freq_x=2 * np.pi * float(raw["radial_freq_x_hz"]),
            radial_freq_y=2 * np.pi * float(raw["radial_freq_y_hz"]),
        )
    except KeyError as exc:
        raise ValidationError(f"trap config missing key: {exc}") from exc
    if "ion_mass_kg" in raw:
        kwargs["ion_mass"] = float(raw["ion_mass_kg"])
    if "wavevector_per_m" in raw:
        kwargs["wavevector_magnitude"] = float(raw["wavevector_per_m"])
    return TrapConfig(**kwargs)


def trap_config_to_dict(config: TrapConfig) -> dict:
    return {
        "ion_count": config.ion_count,
        "axial_freq_hz": config.axial_freq / (2 * np.pi),
        "radial_freq_x_hz": config.radial_freq_x / (2 * np.pi),
        "radial_freq_y_hz": config.radial_freq_y / (2 * np.pi),
        "ion_mass_kg": config.ion_mass,
        "wavevector_per_m": config.wavevector_magnitude,
    }


def mode_set_to_dict(modes: ModeSet) -> dict:
    """JSON form: frequencies in Hz, matrices row-major."""
    return {
        "axis": modes.axis.value,
        "frequencies_hz": (modes.frequencies / (2 * np.pi)).tolist(),
        "mode_vectors": modes.mode_vectors.tolist(),
        "lamb_dicke": modes.lamb_dicke.tolist(),
    }


def mode_set_from_dict(raw: dict) -> ModeSet:
    return ModeSet(
        axis=Axis(raw["axis"]),
        frequencies=2 * np.pi * np.asarray(raw["frequencies_hz"], dtype=float),
        mode_vectors=np.asarray(raw["mode_vectors"], dtype=float),
        lamb_dicke=np.asarray(raw["lamb_dicke"], dtype=float),
    )
