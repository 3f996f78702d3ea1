"""Spin-level circuit engine for the parallel-gate experiments.

Circuits are lists of moments; a moment is a set of simultaneous operations
with one wall-clock duration (z rotations are free: the controller advances
phases classically).  Noiseless circuits run as statevectors; with noise the
engine switches to the density matrix and applies per-qubit dephasing each
moment plus optional two-qubit depolarizing after entangling gates.

Qubit indices are 0-based throughout, qubit 0 being the most significant
bit of basis-state labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import Axis
from .errors import ValidationError

_SQ2 = 1.0 / math.sqrt(2.0)

_SINGLE_QUBIT_GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "S": np.array([[1.0, 0.0], [0.0, 1.0j]], dtype=complex),
    "SDG": np.array([[1.0, 0.0], [0.0, -1.0j]], dtype=complex),
}


def _rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def _ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(theta):
    return np.array([[np.exp(-0.5j * theta), 0.0],
                     [0.0, np.exp(0.5j * theta)]], dtype=complex)


def _rphi(phi):
    """pi/2 rotation about the equatorial axis (cos phi, sin phi, 0)."""
    c, s = math.cos(np.pi / 4), math.sin(np.pi / 4)
    return np.array([[c, -1j * s * np.exp(-1j * phi)],
                     [-1j * s * np.exp(1j * phi), c]], dtype=complex)


@dataclass(frozen=True)
class Op:
    """One gate instance: MS(p, q, chi, axis) or a single-qubit rotation."""

    kind: str
    qubits: tuple
    angle: float | None = None
    axis: Axis | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind == "MS":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValidationError("MS needs two distinct qubits")
            if self.angle is None or self.axis is None:
                raise ValidationError("MS needs an angle and a mode axis")
            object.__setattr__(self, "axis", Axis(self.axis))
        elif self.kind in ("RX", "RY", "RZ", "RPHI"):
            if len(self.qubits) != 1 or self.angle is None:
                raise ValidationError(f"{self.kind} needs one qubit and an angle")
        elif self.kind in ("H", "S", "SDG"):
            if len(self.qubits) != 1:
                raise ValidationError(f"{self.kind} acts on one qubit")
        else:
            raise ValidationError(f"unknown gate kind {self.kind!r}")


def ms(p, q, chi, axis=Axis.X):
    return Op("MS", (p, q), chi, Axis(axis))


def rx(q, theta):
    return Op("RX", (q,), theta)


def ry(q, theta):
    return Op("RY", (q,), theta)


def rz(q, theta):
    return Op("RZ", (q,), theta)


def h(q):
    return Op("H", (q,))


def s(q):
    return Op("S", (q,))


def sdg(q):
    return Op("SDG", (q,))


@dataclass(frozen=True)
class GateTimes:
    """Wall-clock durations per gate family (seconds)."""

    ms: float = 200e-6
    single_qubit: float = 10e-6
    rz: float = 0.0

    def op_duration(self, op: Op) -> float:
        if op.kind == "MS":
            return self.ms
        if op.kind == "RZ":
            return self.rz
        return self.single_qubit


DEFAULT_TIMES = GateTimes()


@dataclass(frozen=True)
class Moment:
    """Simultaneous operations sharing one wall-clock duration."""

    ops: tuple
    duration: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        ms_ops = [op for op in self.ops if op.kind == "MS"]
        axes = [op.axis for op in ms_ops]
        if len(set(axes)) != len(axes):
            raise ValidationError("at most one MS gate per mode axis "
                                  "in a moment")
        ms_qubits = [q for op in ms_ops for q in op.qubits]
        seen = set()
        for op in self.ops:
            if op.kind == "MS":
                continue
            for q in op.qubits:
                if q in ms_qubits:
                    raise ValidationError(
                        "single-qubit gate collides with an MS gate "
                        f"on qubit {q}")
                if q in seen:
                    raise ValidationError(f"qubit {q} addressed twice")
                seen.add(q)

    def resolved_duration(self, times: GateTimes) -> float:
        if self.duration is not None:
            return self.duration
        if not self.ops:
            return 0.0
        return max(times.op_duration(op) for op in self.ops)


@dataclass(frozen=True)
class Circuit:
    qubit_count: int
    moments: tuple

    def __post_init__(self):
        object.__setattr__(self, "moments", tuple(self.moments))
        for moment in self.moments:
            for op in moment.ops:
                for q in op.qubits:
                    if not 0 <= q < self.qubit_count:
                        raise ValidationError(
                            f"qubit index {q} out of range for "
                            f"{self.qubit_count} qubits")

    def appended(self, *moments) -> "Circuit":
        return Circuit(self.qubit_count, self.moments + tuple(moments))

    def wall_time(self, times: GateTimes = DEFAULT_TIMES) -> float:
        return sum(m.resolved_duration(times) for m in self.moments)


def circuit(qubit_count, *moment_ops) -> Circuit:
    """Convenience constructor: each argument is a list of ops = one moment."""
    return Circuit(qubit_count,
                   tuple(Moment(tuple(ops)) for ops in moment_ops))


@dataclass(frozen=True)
class NoiseModel:
    """Phase damping with time constant t2, optional depolarizing per MS.

    Dephasing multiplies each qubit's off-diagonal coherence by
    exp(-duration / t2) per moment (damping parameter 1 - e^{-t/T2});
    ``t2`` is one time constant for the whole register or a per-qubit
    sequence.  Depolarizing mixes the MS pair toward the maximally mixed
    state with probability ``depolarizing_per_ms``.
    """

    t2: float | tuple = math.inf
    depolarizing_per_ms: float = 0.0

    def __post_init__(self):
        if np.ndim(self.t2) > 0:
            object.__setattr__(self, "t2", tuple(float(t) for t in self.t2))
        t2s = self.t2 if isinstance(self.t2, tuple) else (self.t2,)
        if any(t <= 0 for t in t2s):
            raise ValidationError("t2 must be positive")
        if not 0.0 <= self.depolarizing_per_ms <= 1.0:
            raise ValidationError("depolarizing rate must be in [0, 1]")

    def t2_for(self, n: int) -> tuple:
        if isinstance(self.t2, tuple):
            if len(self.t2) != n:
                raise ValidationError(f"need one t2 per qubit ({n})")
            return self.t2
        return (self.t2,) * n

    @property
    def is_noiseless(self) -> bool:
        t2s = self.t2 if isinstance(self.t2, tuple) else (self.t2,)
        return all(math.isinf(t) for t in t2s) \
            and self.depolarizing_per_ms == 0.0


NOISELESS = NoiseModel()


# -- simulation --------------------------------------------------------------------

def _op_unitary(op: Op) -> np.ndarray:
    if op.kind == "MS":
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        xx = np.kron(x, x)
        return math.cos(op.angle) * np.eye(4) + 1j * math.sin(op.angle) * xx
    if op.kind == "RX":
        return _rx(op.angle)
    if op.kind == "RY":
        return _ry(op.angle)
    if op.kind == "RZ":
        return _rz(op.angle)
    if op.kind == "RPHI":
        return _rphi(op.angle)
    return _SINGLE_QUBIT_GATES[op.kind]


def _apply_unitary_state(psi, u, qubits, n):
    psi = psi.reshape([2] * n)
    k = len(qubits)
    src = list(qubits)
    psi = np.moveaxis(psi, src, range(k))
    shape = psi.shape
    psi = u.reshape([2] * (2 * k)).reshape(2**k, 2**k) @ \
        psi.reshape(2**k, -1)
    psi = np.moveaxis(psi.reshape(shape), range(k), src)
    return psi.ravel()


def apply_moment_state(psi, moment: Moment, n: int) -> np.ndarray:
    for op in moment.ops:
        psi = _apply_unitary_state(psi, _op_unitary(op), op.qubits, n)
    return psi


def simulate_state(circ: Circuit, initial=None) -> np.ndarray:
    """Pure statevector evolution (noiseless only)."""
    n = circ.qubit_count
    if initial is None:
        psi = np.zeros(2**n, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.asarray(initial, dtype=complex).copy()
    for moment in circ.moments:
        psi = apply_moment_state(psi, moment, n)
    return psi


def _apply_unitary_rho(rho, u, qubits, n):
    # U rho U^dag: act on the row indices, then conjugate on the columns,
    # treating rho as a 2n-qubit vector
    dim = 2**n
    flat = rho.reshape(-1)
    flat = _apply_unitary_state(flat, u, qubits, 2 * n)
    flat = _apply_unitary_state(flat, u.conj(), [n + q for q in qubits],
                                2 * n)
    return flat.reshape(dim, dim)


def _dephase(rho, n, factors):
    idx = np.arange(2**n)
    weight = np.ones((2**n, 2**n))
    for q, f in enumerate(factors):
        if f >= 1.0:
            continue
        bit = (idx >> (n - 1 - q)) & 1
        differs = bit[:, None] != bit[None, :]
        weight *= np.where(differs, f, 1.0)
    return rho * weight


def _depolarize_pair(rho, qubits, n, rate):
    if rate == 0.0:
        return rho
    t = rho.reshape([2] * (2 * n))
    p, q = qubits
    # partial trace over the pair, re-embedded as I/4
    traced = np.trace(np.trace(
        np.moveaxis(t, (p, n + p, q, n + q), (0, 1, 2, 3)),
        axis1=0, axis2=1), axis1=0, axis2=1)
    rest_dim = 2 ** (n - 2)
    traced = traced.reshape(rest_dim, rest_dim)
    mixed = np.zeros_like(t)
    mt = np.moveaxis(mixed, (p, n + p, q, n + q), (0, 1, 2, 3))
    for i in range(2):
        for j in range(2):
            mt[i, i, j, j] = 0.25 * traced.reshape(
                [2] * (2 * (n - 2)))
    return (1.0 - rate) * rho + rate * mixed.reshape(rho.shape)


def simulate_density(circ: Circuit, noise: NoiseModel = NOISELESS,
                     times: GateTimes = DEFAULT_TIMES,
                     initial=None) -> np.ndarray:
    """Density-matrix evolution with the moment-wise noise channels."""
    n = circ.qubit_count
    dim = 2**n
    if initial is None:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
    elif np.asarray(initial).ndim == 1:
        v = np.asarray(initial, dtype=complex)
        rho = np.outer(v, v.conj())
    else:
        rho = np.asarray(initial, dtype=complex).copy()
    for moment in circ.moments:
        for op in moment.ops:
            rho = _apply_unitary_rho(rho, _op_unitary(op), op.qubits, n)
            if op.kind == "MS" and noise.depolarizing_per_ms > 0.0:
                rho = _depolarize_pair(rho, op.qubits, n,
                                       noise.depolarizing_per_ms)
        duration = moment.resolved_duration(times)
        if duration > 0.0:
            t2s = noise.t2_for(n)
            if any(not math.isinf(t) for t in t2s):
                rho = _dephase(rho, n,
                               [math.exp(-duration / t) for t in t2s])
    return rho


@dataclass
class RunResult:
    probabilities: np.ndarray
    histogram: dict | None
    state: np.ndarray  # statevector (pure path) or density matrix

    def bitstring_probability(self, bits: str) -> float:
        return float(self.probabilities[int(bits, 2)])


def run(circ: Circuit, noise: NoiseModel = NOISELESS, shots: int | None = None,
        seed: int | None = None, times: GateTimes = DEFAULT_TIMES,
        initial=None) -> RunResult:
    """Execute a circuit; ``shots=None`` returns exact probabilities."""
    if noise.is_noiseless and (initial is None
                               or np.asarray(initial).ndim == 1):
        state = simulate_state(circ, initial)
        probs = np.abs(state) ** 2
    else:
        state = simulate_density(circ, noise, times, initial)
        probs = np.clip(np.diag(state).real, 0.0, None)
    probs = probs / probs.sum()
    histogram = None
    if shots is not None:
        if shots <= 0:
            raise ValidationError("shots must be positive")
        rng = np.random.default_rng(seed)
        counts = rng.multinomial(shots, probs)
        width = circ.qubit_count
        histogram = {format(i, f"0{width}b"): int(c)
                     for i, c in enumerate(counts) if c > 0}
    return RunResult(probabilities=probs, histogram=histogram, state=state)


# -- parity scans and fidelity --------------------------------------------------------

@dataclass
class ParityScan:
    phases: np.ndarray
    parities: np.ndarray
    stderr: np.ndarray | None
    qubits: tuple


def _parity_values(probs: np.ndarray, qubits, n) -> float:
    idx = np.arange(probs.size)
    signs = np.ones(probs.size)
    for q in qubits:
        signs *= 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1)
    return float(np.dot(probs, signs))


def parity_scan(state_prep: Circuit, qubits, phases, noise=NOISELESS,
                shots: int | None = None, seed: int | None = None,
                times: GateTimes = DEFAULT_TIMES) -> ParityScan:
    """Append pi/2 analysis rotations at each phase and measure the parity.

    Parity is <prod sigma_z> over ``qubits`` after rotating each of them
    about the equatorial axis at angle phi.  shots=None gives the exact
    expectation; otherwise seeded sampling with binomial standard errors.
    """
    qubits = tuple(qubits)
    phases = np.asarray(phases, dtype=float)
    n = state_prep.qubit_count
    parities = np.empty(phases.size)
    errors = np.empty(phases.size) if shots is not None else None
    rng = np.random.default_rng(seed)
    for i, phi in enumerate(phases):
        ops = tuple(Op("RPHI", (q,), float(phi)) for q in qubits)
        circ = state_prep.appended(Moment(ops))
        result = run(circ, noise, shots=None, times=times)
        value = _parity_values(result.probabilities, qubits, n)
        if shots is None:
            parities[i] = value
        else:
            p_even = 0.5 * (1.0 + value)
            draws = rng.binomial(shots, np.clip(p_even, 0.0, 1.0))
            est = 2.0 * draws / shots - 1.0
            parities[i] = est
            errors[i] = math.sqrt(max(1.0 - est**2, 1.0 / shots) / shots)
    return ParityScan(phases=phases, parities=parities, stderr=errors,
                      qubits=qubits)


@dataclass
class FidelityReport:
    """GHZ-class fidelity from populations and parity contrast."""

    even_parity_population: float
    parity_contrast: float
    fidelity: float
    fit_covariance: np.ndarray
    contrast_stderr: float
    phase_offset: float

    def to_dict(self) -> dict:
        return {
            "even_parity_population": self.even_parity_population,
            "parity_contrast": self.parity_contrast,
            "fidelity": self.fidelity,
            "contrast_stderr": self.contrast_stderr,
            "phase_offset": self.phase_offset,
            "fit_covariance": np.asarray(self.fit_covariance).tolist(),
        }


def estimate_fidelity(populations: float, scan: ParityScan,
                      n_qubits: int | None = None) -> FidelityReport:
    """Least-squares cosine fit at the known frequency; F = (P + C) / 2.

    ``populations`` is the summed population of the two GHZ-class basis
    states.  The fit frequency is fixed at one oscillation per 2 pi / n of
    analysis phase; only amplitude and phase are free, so a flat scan just
    returns contrast 0 with its uncertainty.
    """
    n = n_qubits if n_qubits is not None else len(scan.qubits)
    phases, values = scan.phases, scan.parities
    if phases.size < 8:
        raise ValidationError("need at least 8 phase points")
    span = (phases.max() - phases.min()) * n
    if span < 2 * np.pi * (1 - 1e-9):
        raise ValidationError("scan must cover a full oscillation period")
    design = np.column_stack([np.cos(n * phases), np.sin(n * phases)])
    if scan.stderr is not None:
        w = 1.0 / np.clip(scan.stderr, 1e-12, None)
        coef, *_ = np.linalg.lstsq(design * w[:, None], values * w,
                                   rcond=None)
        resid = (values - design @ coef) * w
        base = np.linalg.inv(design.T @ (design * w[:, None]**2))
    else:
        coef, *_ = np.linalg.lstsq(design, values, rcond=None)
        resid = values - design @ coef
        base = np.linalg.inv(design.T @ design)
    dof = max(values.size - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = base * sigma2
    a, b = coef
    contrast = float(np.hypot(a, b))
    if contrast > 1e-12:
        grad = np.array([a, b]) / contrast
        contrast_err = float(np.sqrt(grad @ cov @ grad))
    else:
        contrast_err = float(np.sqrt(np.trace(cov)))
    return FidelityReport(
        even_parity_population=float(populations),
        parity_contrast=contrast,
        fidelity=0.5 * (float(populations) + contrast),
        fit_covariance=cov,
        contrast_stderr=contrast_err,
        phase_offset=float(np.arctan2(-b, a)),
    )


def ghz_populations(probs: np.ndarray, qubits, n) -> float:
    """P(all zeros) + P(all ones) on the listed qubits (marginal)."""
    idx = np.arange(probs.size)
    bits = [(idx >> (n - 1 - q)) & 1 for q in qubits]
    all0 = np.ones(probs.size, dtype=bool)
    all1 = np.ones(probs.size, dtype=bool)
    for b in bits:
        all0 &= b == 0
        all1 &= b == 1
    return float(probs[all0].sum() + probs[all1].sum())


# -- text format -----------------------------------------------------------------------

def circuit_to_text(circ: Circuit) -> str:
    """One moment per line, ops joined by '|': ``MS 3 5 0.785398 X | RZ 1 1.57``."""
    lines = []
    for moment in circ.moments:
        parts = []
        for op in moment.ops:
            if op.kind == "MS":
                parts.append(f"MS {op.qubits[0]} {op.qubits[1]} "
                             f"{op.angle:.12g} {op.axis.value}")
            elif op.kind in ("RX", "RY", "RZ"):
                parts.append(f"{op.kind} {op.qubits[0]} {op.angle:.12g}")
            else:
                parts.append(f"{op.kind} {op.qubits[0]}")
        lines.append(" | ".join(parts))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str, qubit_count: int | None = None) -> Circuit:
    moments = []
    max_q = -1
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        ops = []
        for chunk in line.split("|"):
            fields = chunk.split()
            if not fields:
                continue
            kind = fields[0].upper()
            try:
                if kind == "MS":
                    op = ms(int(fields[1]), int(fields[2]), float(fields[3]),
                            Axis(fields[4].upper()))
                elif kind in ("RX", "RY", "RZ"):
                    op = Op(kind, (int(fields[1]),), float(fields[2]))
                elif kind in ("H", "S", "SDG"):
                    op = Op(kind, (int(fields[1]),))
                else:
                    raise ValidationError(f"unknown gate {kind!r}")
            except (IndexError, ValueError) as exc:
                raise ValidationError(f"malformed line: {raw!r}") from exc
            ops.append(op)
            max_q = max(max_q, *op.qubits)
        moments.append(Moment(tuple(ops)))
    count = qubit_count if qubit_count is not None else max_q + 1
    return Circuit(count, tuple(moments))
