"""Segmented amplitude-modulated pulses for bichromatic two-qubit gates.

A pulse addresses one qubit pair through the motional modes of one principal
axis.  The drive at beat-note detuning mu displaces every mode along a
phase-space trajectory alpha_{i,k}(t); the pulse is shaped so that every
trajectory closes (alpha(tau) = 0, spin and motion disentangle) while the
accumulated two-qubit phase chi hits its target.

All per-segment integrals are evaluated in closed form, counter-rotating
terms included.  The only approximations live in the trap model, not here.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .chain import Axis, ModeSet
from .errors import (AlignmentError, DesignError, PowerLimitError,
                     ValidationError)

_TWO_PI = 2.0 * np.pi


# -- closed-form oscillatory integrals ----------------------------------------

def _h(nu: float, dt: float) -> complex:
    """int_0^dt e^{i nu u} du, exact for every nu including 0."""
    return dt * np.exp(0.5j * nu * dt) * np.sinc(nu * dt / _TWO_PI)


def _eint(nu: float, t0: float, t1: float) -> complex:
    """int_{t0}^{t1} e^{i nu t} dt."""
    return np.exp(1j * nu * t0) * _h(nu, t1 - t0)


def _gtri_series(a: float, b: float, dt: float) -> complex:
    # G = sum_{j,m>=0} (ia)^j (ib)^m dt^{j+m+2} / (j! (m+1)! (j+m+2))
    ia, ib = 1j * a, 1j * b
    total = 0j
    cj = 1.0 + 0j  # (ia)^j / j!
    for j in range(22):
        cm = 1.0 + 0j  # (ib)^m / (m+1)!
        for m in range(22 - j):
            total += cj * cm * dt ** (j + m + 2) / (j + m + 2)
            cm *= ib / (m + 2)
        cj *= ia / (j + 1)
    return total


def _gtri(a: float, b: float, dt: float) -> complex:
    """G(a, b, dt) = int_0^dt du2 e^{i a u2} int_0^{u2} du1 e^{i b u1}.

    Branches keep the evaluation stable for small or vanishing frequencies
    (the co-rotating terms of a nearly resonant drive, and the exact
    resonance mu = +-omega_k).
    """
    x, y = a * dt, b * dt
    if abs(x) < 0.25 and abs(y) < 0.25:
        return _gtri_series(a, b, dt)
    if abs(y) >= abs(x):
        return (_h(a + b, dt) - _h(a, dt)) / (1j * b)
    # |a| dominates: swap the integration order to divide by the big one
    return _h(a, dt) * _h(b, dt) - (_h(a + b, dt) - _h(b, dt)) / (1j * a)


def _cos_exp_integral(mu: float, phi: float, omega: float,
                      t0: float, t1: float) -> complex:
    """int_{t0}^{t1} cos(mu t - phi) e^{i omega t} dt."""
    return 0.5 * (np.exp(-1j * phi) * _eint(omega + mu, t0, t1)
                  + np.exp(1j * phi) * _eint(omega - mu, t0, t1))


def _tri_cos_cos_sin(mu: float, phi2: float, phi1: float, omega: float,
                     t0: float, t1: float) -> float:
    """Triangle integral of cos(mu t2 - phi2) cos(mu t1 - phi1) sin(w (t2-t1)).

    Over t0 <= t1 <= t2 <= t1seg, expanded into eight exponential triangle
    primitives.  The result is real by construction; the residual imaginary
    part is discarded.
    """
    dt = t1 - t0
    total = 0j
    for s2 in (1.0, -1.0):
        for s1 in (1.0, -1.0):
            for sw in (1.0, -1.0):
                a = s2 * mu + sw * omega
                b = s1 * mu - sw * omega
                pref = sw / 8j * np.exp(-1j * (s2 * phi2 + s1 * phi1))
                total += pref * np.exp(1j * (a + b) * t0) * _gtri(a, b, dt)
    return total.real


# -- gate request ---------------------------------------------------------------

@dataclass(frozen=True)
class GateSpec:
    """A requested XX gate: pair, motional bus, and target angle."""

    qubit_pair: tuple
    axis: Axis
    target_angle: float

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "qubit_pair",
                           tuple(int(i) for i in self.qubit_pair))
        if self.qubit_pair[0] == self.qubit_pair[1]:
            raise ValidationError("gate pair must be two distinct qubits")
        if abs(self.target_angle) > np.pi / 2 + 1e-12:
            raise ValidationError("fold target angles to |chi| <= pi/2")


# -- schedule data type --------------------------------------------------------

class Segment(NamedTuple):
    duration: float
    amplitude_p: float
    amplitude_q: float


@dataclass(frozen=True)
class PulseSchedule:
    """Piecewise-constant two-ion drive at one bichromatic beat note.

    Amplitudes are Rabi frequencies in rad/s and may be negative (a sign
    flip encodes a pi phase flip of that ion's drive).
    """

    qubit_pair: tuple
    axis: Axis
    detuning: float
    duration: float
    segment_durations: np.ndarray
    amplitudes_p: np.ndarray
    amplitudes_q: np.ndarray
    motional_phase: tuple = (0.0, 0.0)
    lamb_dicke_metric: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        object.__setattr__(self, "qubit_pair", tuple(int(i) for i in self.qubit_pair))
        for name in ("segment_durations", "amplitudes_p", "amplitudes_q"):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float))
        if len(self.qubit_pair) != 2 or self.qubit_pair[0] == self.qubit_pair[1]:
            raise ValidationError("qubit_pair must be two distinct indices")
        n = self.segment_durations.size
        if self.amplitudes_p.size != n or self.amplitudes_q.size != n:
            raise ValidationError("per-segment arrays must have equal length")
        if np.any(self.segment_durations <= 0):
            raise ValidationError("segment durations must be positive")
        if abs(self.segment_durations.sum() - self.duration) > 1e-12 * self.duration:
            raise ValidationError("segment durations must sum to the duration")

    @classmethod
    def from_segments(cls, qubit_pair, axis, detuning, segments,
                      motional_phase=(0.0, 0.0)):
        segs = [Segment(*s) for s in segments]
        durations = np.array([s.duration for s in segs])
        return cls(qubit_pair=qubit_pair, axis=axis, detuning=detuning,
                   duration=float(durations.sum()),
                   segment_durations=durations,
                   amplitudes_p=np.array([s.amplitude_p for s in segs]),
                   amplitudes_q=np.array([s.amplitude_q for s in segs]),
                   motional_phase=motional_phase)

    @property
    def segments(self) -> list:
        return [Segment(d, p, q) for d, p, q in
                zip(self.segment_durations, self.amplitudes_p, self.amplitudes_q)]

    @property
    def boundaries(self) -> np.ndarray:
        """Segment edge times, starting at 0 and ending at the duration."""
        return np.concatenate([[0.0], np.cumsum(self.segment_durations)])

    def amplitudes_for(self, ion: int) -> np.ndarray:
        if ion == self.qubit_pair[0]:
            return self.amplitudes_p
        if ion == self.qubit_pair[1]:
            return self.amplitudes_q
        raise ValidationError(f"ion {ion} is not addressed by this schedule")

    def phase_for(self, ion: int) -> float:
        return self.motional_phase[self.qubit_pair.index(ion)]

    @property
    def max_amplitude(self) -> float:
        return float(max(np.abs(self.amplitudes_p).max(initial=0.0),
                         np.abs(self.amplitudes_q).max(initial=0.0)))


def zero_schedule(qubit_pair, axis, detuning, tau, n_segments) -> PulseSchedule:
    durations = np.full(n_segments, tau / n_segments)
    zeros = np.zeros(n_segments)
    return PulseSchedule(qubit_pair=qubit_pair, axis=axis, detuning=detuning,
                         duration=tau, segment_durations=durations,
                         amplitudes_p=zeros, amplitudes_q=zeros.copy())


# -- displacement trajectories -------------------------------------------------

@dataclass(frozen=True)
class DisplacementTrajectory:
    """Phase-space trajectory of one (ion, mode) pair at segment boundaries."""

    ion: int
    mode: int
    times: np.ndarray
    alphas: np.ndarray

    @property
    def final(self) -> complex:
        return complex(self.alphas[-1])


def _segment_alpha_increments(schedule: PulseSchedule, modes: ModeSet,
                              ion: int) -> np.ndarray:
    """Per-segment increments of alpha for every mode; shape (N, n_seg)."""
    amps = schedule.amplitudes_for(ion)
    phi = schedule.phase_for(ion)
    eta = modes.lamb_dicke[:, ion]
    bounds = schedule.boundaries
    out = np.empty((modes.frequencies.size, amps.size), dtype=complex)
    for k, omega in enumerate(modes.frequencies):
        for s in range(amps.size):
            out[k, s] = -eta[k] * amps[s] * _cos_exp_integral(
                schedule.detuning, phi, omega, bounds[s], bounds[s + 1])
    return out


def alpha_trajectory(schedule: PulseSchedule, modes: ModeSet, ion: int,
                     mode: int) -> DisplacementTrajectory:
    """alpha_{i,k}(t) at segment boundaries, alpha(0) = 0."""
    if schedule.axis != modes.axis:
        raise ValidationError("schedule and mode set address different axes")
    inc = _segment_alpha_increments(schedule, modes, ion)[mode]
    alphas = np.concatenate([[0.0 + 0j], np.cumsum(inc)])
    return DisplacementTrajectory(ion=ion, mode=mode,
                                  times=schedule.boundaries, alphas=alphas)


def alpha_final(schedule: PulseSchedule, modes: ModeSet, ion: int,
                mode: int) -> complex:
    """Closed-form alpha_{i,k}(tau): two exponential integrals per segment."""
    return alpha_trajectory(schedule, modes, ion, mode).final


def closure_residuals(schedule: PulseSchedule, modes: ModeSet) -> np.ndarray:
    """|alpha_{i,k}(tau)| for both driven ions, shape (2, N)."""
    out = np.empty((2, modes.frequencies.size))
    for row, ion in enumerate(schedule.qubit_pair):
        inc = _segment_alpha_increments(schedule, modes, ion)
        out[row] = np.abs(inc.sum(axis=1))
    return out


def normalized_closure(schedule: PulseSchedule, modes: ModeSet) -> float:
    """max |alpha(tau)| over ions and modes, in design units.

    The design unit is max_k |eta_k| * Omega_max * tau, the natural scale of
    an unclosed trajectory.
    """
    scale = (np.abs(modes.lamb_dicke[:, list(schedule.qubit_pair)]).max()
             * schedule.max_amplitude * schedule.duration)
    if scale == 0.0:
        return 0.0
    return float(closure_residuals(schedule, modes).max() / scale)


# -- gate angle -----------------------------------------------------------------

def chi_angle(schedule: PulseSchedule, modes: ModeSet) -> float:
    """Accumulated two-qubit phase chi_pq of the schedule.

    Second-order Magnus double integral, both orderings of the pair, all
    modes of the driven axis, closed form per segment pair.
    """
    if schedule.axis != modes.axis:
        raise ValidationError("schedule and mode set address different axes")
    p, q = schedule.qubit_pair
    mu = schedule.detuning
    bounds = schedule.boundaries
    amps = {p: schedule.amplitudes_for(p), q: schedule.amplitudes_for(q)}
    phis = {p: schedule.phase_for(p), q: schedule.phase_for(q)}
    n_seg = schedule.segment_durations.size

    total = 0.0
    for k, omega in enumerate(modes.frequencies):
        eta_p = modes.lamb_dicke[k, p]
        eta_q = modes.lamb_dicke[k, q]
        if eta_p == 0.0 and eta_q == 0.0:
            continue
        # unit-amplitude segment integrals of cos(mu t - phi) e^{i w t}
        pseg = {
            ion: np.array([_cos_exp_integral(mu, phis[ion], omega,
                                             bounds[s], bounds[s + 1])
                           for s in range(n_seg)])
            for ion in (p, q)
        }
        for outer, inner in ((p, q), (q, p)):
            # strictly earlier segments: rectangle factorization
            prefix = np.concatenate(
                [[0j], np.cumsum(amps[inner] * pseg[inner])[:-1]])
            total += eta_p * eta_q * float(
                np.sum(amps[outer] * (pseg[outer] * np.conj(prefix)).imag))
            # same segment: triangle primitive
            for s in range(n_seg):
                tri = _tri_cos_cos_sin(mu, phis[outer], phis[inner], omega,
                                       bounds[s], bounds[s + 1])
                total += eta_p * eta_q * amps[outer][s] * amps[inner][s] * tri
    return total


def lamb_dicke_validity(schedule: PulseSchedule, modes: ModeSet) -> float:
    """max_k |eta_k Omega_max / (mu - omega_k)| over the driven pair."""
    eta = np.abs(modes.lamb_dicke[:, list(schedule.qubit_pair)]).max(axis=1)
    det = np.abs(schedule.detuning - modes.frequencies)
    det = np.where(det == 0.0, np.inf, det)
    return float(np.max(eta * schedule.max_amplitude / det))


# -- amplitude-modulated design --------------------------------------------------

def default_detuning(modes: ModeSet, offset: float = _TWO_PI * 3e3) -> float:
    """Beat-note default: a fixed offset beyond the highest sideband."""
    return float(modes.frequencies.max() + offset)


def design_amplitude_modulated(pair, modes: ModeSet, tau: float,
                               n_segments: int, mu: float,
                               chi_target: float,
                               omega_max: float = np.inf) -> PulseSchedule:
    """Shape a shared-envelope pulse that closes every mode and hits chi.

    Equal-duration segments carry one amplitude vector applied to both ions
    (the second ion's sign may flip globally to reach the requested sign of
    chi).  The vector is the null-space direction of the closure constraints
    that maximizes |chi| per unit power, then scaled to chi_target.

    Raises
    ------
    DesignError
        Empty null space or a null space that generates no gate angle; in
        both cases more segments or a different detuning will help.
    PowerLimitError
        The scaled amplitude exceeds omega_max.
    """
    p, q = pair
    n_modes = modes.frequencies.size
    n_ions = modes.lamb_dicke.shape[1]
    if p == q:
        raise ValidationError("pair must be two distinct ions")
    if not (0 <= p < n_ions and 0 <= q < n_ions):
        raise ValidationError("pair indices outside the chain")
    if abs(chi_target) > np.pi / 2 + 1e-12:
        raise ValidationError("target angles are folded to |chi| <= pi/2 "
                              "by the caller")
    if n_segments < n_modes + 1:
        raise ValidationError(
            f"need at least {n_modes + 1} segments to null {n_modes} "
            "mode closures with the shared-envelope ansatz")
    if tau <= 0:
        raise ValidationError("duration must be positive")
    w_lo, w_hi = modes.frequencies.min(), modes.frequencies.max()
    band = max(w_hi - w_lo, 0.05 * w_hi)
    if not (w_lo - 2 * band <= mu <= w_hi + 2 * band):
        raise ValidationError(
            "detuning lies far outside the sideband region of this axis")

    if chi_target == 0.0:
        return zero_schedule(pair, modes.axis, mu, tau, n_segments)

    bounds = np.linspace(0.0, tau, n_segments + 1)
    constraints = np.empty((n_modes, n_segments), dtype=complex)
    for k, omega in enumerate(modes.frequencies):
        for s in range(n_segments):
            constraints[k, s] = _cos_exp_integral(mu, 0.0, omega,
                                                  bounds[s], bounds[s + 1])
    # scale rows to O(1) before rank decisions
    row_scale = np.abs(constraints).max(axis=1, keepdims=True)
    a_real = np.vstack([(constraints / row_scale).real,
                        (constraints / row_scale).imag])

    _, svals, vt = np.linalg.svd(a_real)
    tol = max(a_real.shape) * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
    rank = int(np.sum(svals > max(tol, 1e-12)))
    null_dim = n_segments - rank
    if null_dim == 0:
        raise DesignError(
            "closure constraints admit only the zero pulse; use more "
            "segments or a different detuning")
    null_basis = vt[rank:].T  # (n_segments, null_dim)

    def chi_of(weights):
        sched = _shared_schedule(pair, modes.axis, mu, tau, weights, weights)
        return chi_angle(sched, modes)

    # quadratic form of chi restricted to the null space, via polarization
    y = np.empty((null_dim, null_dim))
    for i in range(null_dim):
        y[i, i] = chi_of(null_basis[:, i])
        for j in range(i):
            plus = chi_of(null_basis[:, i] + null_basis[:, j])
            y[i, j] = y[j, i] = 0.5 * (plus - y[i, i] - y[j, j])
    evals, evecs = np.linalg.eigh(y)
    best = int(np.argmax(np.abs(evals)))
    chi_unit = evals[best]
    if abs(chi_unit) < 1e-18:
        raise DesignError(
            "null-space pulses generate no gate angle at this detuning; "
            "use more segments or a different detuning")

    w = null_basis @ evecs[:, best]
    imax = int(np.argmax(np.abs(w)))
    if w[imax] < 0:
        w = -w
    scale = np.sqrt(abs(chi_target) / abs(chi_unit))
    sign_q = 1.0 if chi_target * chi_unit > 0 else -1.0
    amp_p = scale * w
    amp_q = sign_q * amp_p

    if np.abs(amp_p).max() > omega_max:
        raise PowerLimitError(
            f"designed amplitude {np.abs(amp_p).max():.3e} rad/s exceeds "
            f"the power budget {omega_max:.3e} rad/s")

    schedule = _shared_schedule(pair, modes.axis, mu, tau, amp_p, amp_q)
    metric = lamb_dicke_validity(schedule, modes)
    if metric > 0.3:
        warnings.warn(
            f"Lamb-Dicke validity metric {metric:.2f} exceeds 0.3; the "
            "linear spin-motion model is marginal at this power",
            stacklevel=2)
    return replace(schedule, lamb_dicke_metric=metric)


def _shared_schedule(pair, axis, mu, tau, amp_p, amp_q) -> PulseSchedule:
    n = len(amp_p)
    return PulseSchedule(qubit_pair=pair, axis=axis, detuning=mu, duration=tau,
                         segment_durations=np.full(n, tau / n),
                         amplitudes_p=np.asarray(amp_p, dtype=float),
                         amplitudes_q=np.asarray(amp_q, dtype=float))


# -- summed drive ---------------------------------------------------------------

@dataclass(frozen=True)
class SummedDrive:
    """Total |amplitude| addressed to one ion across simultaneous schedules."""

    ion: int
    times: np.ndarray       # piece boundaries on the union grid
    totals: np.ndarray      # per-piece summed |amplitude|
    maximum: float


def union_boundaries(schedules) -> np.ndarray:
    taus = {round(s.duration, 15) for s in schedules}
    if len(taus) != 1:
        raise AlignmentError("schedules must share a common duration")
    edges = np.unique(np.concatenate([s.boundaries for s in schedules]))
    # collapse numerically coincident edges
    keep = [edges[0]]
    tol = 1e-12 * edges[-1]
    for e in edges[1:]:
        if e - keep[-1] > tol:
            keep.append(e)
    return np.asarray(keep)


def _amplitude_on_grid(schedule: PulseSchedule, ion: int,
                       edges: np.ndarray) -> np.ndarray:
    amps = schedule.amplitudes_for(ion)
    idx = np.searchsorted(schedule.boundaries, 0.5 * (edges[:-1] + edges[1:]),
                          side="right") - 1
    return amps[np.clip(idx, 0, amps.size - 1)]


def summed_drive(schedules, ion: int) -> SummedDrive:
    """Power-budget view: per-segment sum of |amplitudes| hitting one ion."""
    if not schedules:
        raise ValidationError("need at least one schedule")
    edges = union_boundaries(schedules)
    totals = np.zeros(edges.size - 1)
    for sched in schedules:
        if ion in sched.qubit_pair:
            totals += np.abs(_amplitude_on_grid(sched, ion, edges))
    return SummedDrive(ion=ion, times=edges, totals=totals,
                       maximum=float(totals.max(initial=0.0)))


def overlapping_ions(schedules) -> set:
    """Ions addressed by more than one schedule."""
    seen, shared = set(), set()
    for sched in schedules:
        for ion in sched.qubit_pair:
            if ion in seen:
                shared.add(ion)
            seen.add(ion)
    return shared


# -- file format ------------------------------------------------------------------

def schedule_to_dict(schedule: PulseSchedule) -> dict:
    out = {
        "pair": list(schedule.qubit_pair),
        "axis": schedule.axis.value,
        "detuning_hz": schedule.detuning / _TWO_PI,
        "tau_s": schedule.duration,
        "segments": [
            {"dt_s": float(d), "omega_p_rad_s": float(p), "omega_q_rad_s": float(q)}
            for d, p, q in zip(schedule.segment_durations,
                               schedule.amplitudes_p, schedule.amplitudes_q)
        ],
    }
    if any(schedule.motional_phase):
        out["motional_phase_rad"] = list(schedule.motional_phase)
    return out


def schedule_from_dict(raw: dict) -> PulseSchedule:
    segments = [(s["dt_s"], s["omega_p_rad_s"], s["omega_q_rad_s"])
                for s in raw["segments"]]
    return PulseSchedule.from_segments(
        qubit_pair=tuple(raw["pair"]),
        axis=Axis(raw["axis"]),
        detuning=_TWO_PI * raw["detuning_hz"],
        segments=segments,
        motional_phase=tuple(raw.get("motional_phase_rad", (0.0, 0.0))),
    )


def save_schedule(schedule: PulseSchedule, path) -> None:
    with open(path, "w") as fh:
        json.dump(schedule_to_dict(schedule), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_schedule(path) -> PulseSchedule:
    with open(path) as fh:
        return schedule_from_dict(json.load(fh))
