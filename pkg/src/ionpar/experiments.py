"""Simulated reproductions of the three parallel-gate demonstrations:
per-pair fidelity scans, the one-step GHZ circuit, and Trotterized
transverse-field Ising dynamics run with parallel versus sequential
entangling layers.

Register convention: a chain of ``ion_count`` ions hosts qubits on its
middle five ions; qubit labels here are 0-based register indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import circuit as ci
from . import scheduler as sch
from .chain import Axis
from .errors import ValidationError

GHZ_TRIPLE = (2, 4, 1)  # (a, b, c): MS(a,b) || MS(b,c), shared middle qubit b


def calibrate_depolarizing(target_fidelity: float = 0.99) -> float:
    """Two-qubit depolarizing rate that makes one MS gate read out at the
    target fidelity under the population+contrast protocol.

    With rate r the Bell populations give 1 - r/2 and the contrast 1 - r,
    so F = 1 - 3r/4.
    """
    if not 0.0 < target_fidelity <= 1.0:
        raise ValidationError("target fidelity must be in (0, 1]")
    return 4.0 * (1.0 - target_fidelity) / 3.0


# -- GHZ ------------------------------------------------------------------------

def ghz_circuit(qubit_count: int = 5, triple=GHZ_TRIPLE,
                chi: float = np.pi / 4) -> ci.Circuit:
    """One-step GHZ: parallel MS pair sharing the middle qubit, then local
    rotations.

    The phase gates on the outer qubits are exp(+i sigma_z pi/4); with the
    +chi convention of the MS gate this lands the state on
    (|000> + |111>) / sqrt(2) up to a global phase.
    """
    a, b, c = triple
    return ci.Circuit(qubit_count, (
        ci.Moment((ci.ms(a, b, chi, Axis.X), ci.ms(b, c, chi, Axis.Y))),
        ci.Moment((ci.sdg(a), ci.sdg(c))),
        ci.Moment((ci.h(a), ci.h(b), ci.h(c))),
    ))


@dataclass
class GhzResult:
    report: ci.FidelityReport
    populations: dict
    scan: ci.ParityScan
    circuit: ci.Circuit


def ghz_experiment(noise: ci.NoiseModel = ci.NOISELESS,
                   shots: int | None = None, seed: int | None = None,
                   qubit_count: int = 5, triple=GHZ_TRIPLE,
                   n_phases: int = 24,
                   times: ci.GateTimes = ci.DEFAULT_TIMES) -> GhzResult:
    """Run the GHZ circuit and estimate fidelity from populations plus a
    parity scan with period 2 pi / 3."""
    circ = ghz_circuit(qubit_count, triple)
    result = ci.run(circ, noise, shots=shots, seed=seed, times=times)
    probs = result.probabilities
    n = circ.qubit_count
    if shots is None:
        pop = ci.ghz_populations(probs, triple, n)
    else:
        rng = np.random.default_rng(seed)
        sampled = rng.multinomial(shots, probs) / shots
        pop = ci.ghz_populations(sampled, triple, n)
    phases = np.linspace(0.0, 2 * np.pi, n_phases, endpoint=False)
    scan = ci.parity_scan(circ, triple, phases, noise=noise, shots=shots,
                          seed=None if seed is None else seed + 1,
                          times=times)
    report = ci.estimate_fidelity(pop, scan, n_qubits=3)
    populations = {format(i, f"0{n}b"): float(p) for i, p in enumerate(probs)
                   if p > 1e-12}
    return GhzResult(report=report, populations=populations, scan=scan,
                     circuit=circ)


def pair_fidelity_experiment(pairs=((2, 4), (1, 3)),
                             noise: ci.NoiseModel = ci.NOISELESS,
                             shots: int | None = None,
                             seed: int | None = None, qubit_count: int = 5,
                             n_phases: int = 24,
                             times: ci.GateTimes = ci.DEFAULT_TIMES) -> dict:
    """Parallel pi/4 gates on two pairs: per-pair fidelity and the four
    cross-pair parity contrasts.

    The first pair rides the X bus, the second the Y bus.  Returns
    {"pairs": {pair: FidelityReport}, "cross_pairs": {pair: contrast}}.
    """
    (p1, q1), (p2, q2) = pairs
    layer = ci.circuit(qubit_count, [ci.ms(p1, q1, np.pi / 4, Axis.X),
                                     ci.ms(p2, q2, np.pi / 4, Axis.Y)])
    phases = np.linspace(0.0, 2 * np.pi, n_phases, endpoint=False)
    reports, crosses = {}, {}
    for i, pair in enumerate(pairs):
        result = ci.run(layer, noise, shots=shots,
                        seed=None if seed is None else seed + i, times=times)
        probs = result.probabilities
        if shots is not None:
            rng = np.random.default_rng(None if seed is None else seed + i)
            probs = rng.multinomial(shots, probs) / shots
        pop = ci.ghz_populations(probs, pair, qubit_count)
        scan = ci.parity_scan(layer, pair, phases, noise=noise, shots=shots,
                              seed=None if seed is None else seed + 10 + i,
                              times=times)
        reports[tuple(pair)] = ci.estimate_fidelity(pop, scan, n_qubits=2)
    for cross in ((p1, p2), (p1, q2), (q1, p2), (q1, q2)):
        scan = ci.parity_scan(layer, cross, phases, noise=noise, shots=shots,
                              seed=seed, times=times)
        crosses[cross] = ci.estimate_fidelity(0.0, scan,
                                              n_qubits=2).parity_contrast
    return {"pairs": reports, "cross_pairs": crosses}


# -- TFIM -----------------------------------------------------------------------

@dataclass(frozen=True)
class TfimConfig:
    """Open-chain transverse-field Ising model and its Trotterization.

    H = -J sum XX - B sum Z on ``spins`` qubits; one first-order step is
    exp(+i J dt XX) per bond followed by free z rotations.
    """

    spins: int = 5
    coupling: float = 1.0
    ratio: float = 0.096  # B / J
    step_angle: float = np.pi / 10  # J dt per Trotter step
    steps: int = 12

    def __post_init__(self):
        if self.spins < 2:
            raise ValidationError("need at least two spins")
        if self.steps < 1:
            raise ValidationError("need at least one step")
        if self.coupling <= 0:
            raise ValidationError("coupling must be positive")

    @property
    def field(self) -> float:
        return self.ratio * self.coupling

    @property
    def dt(self) -> float:
        return self.step_angle / self.coupling

    @property
    def bonds(self) -> tuple:
        return tuple((i, i + 1) for i in range(self.spins - 1))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)


@dataclass
class MagnetizationTrace:
    times: np.ndarray
    magnetization: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.magnetization = np.asarray(self.magnetization, dtype=float)


def _magnetization(probs: np.ndarray, n: int) -> float:
    idx = np.arange(probs.size)
    pops = np.array([bin(i).count("1") for i in range(probs.size)])
    return float(np.dot(probs, n - 2 * pops))


def trotter_step_moments(config: TfimConfig, mode: str) -> tuple:
    """Moments of one Trotter step: entangling layers then free rotations."""
    chi = config.step_angle
    gates = sch.GateList(tuple((bond, chi) for bond in config.bonds))
    if mode == "parallel":
        layers = sch.schedule(gates, policy="greedy").to_circuit(
            config.spins).moments
    elif mode == "sequential":
        layers = tuple(ci.Moment((ci.ms(*bond, chi, Axis.X),))
                       for bond in config.bonds)
    else:
        raise ValidationError("mode must be 'parallel' or 'sequential'")
    rz_angle = -2.0 * config.field * config.dt  # exp(+i B dt Z) per qubit
    field_moment = ci.Moment(tuple(ci.rz(q, rz_angle)
                                   for q in range(config.spins)))
    return tuple(layers) + (field_moment,)


def tfim_circuit(config: TfimConfig, mode: str, steps: int) -> ci.Circuit:
    step = trotter_step_moments(config, mode)
    return ci.Circuit(config.spins, step * steps)


def tfim_trotter(config: TfimConfig, mode: str = "parallel",
                 noise: ci.NoiseModel = ci.NOISELESS,
                 shots: int | None = None, seed: int | None = None,
                 times: ci.GateTimes = ci.DEFAULT_TIMES) -> MagnetizationTrace:
    """Total z magnetization after each Trotter step, starting from |0...0>."""
    n = config.spins
    step_moments = trotter_step_moments(config, mode)
    values = [float(n)]
    errors = [0.0]
    state = None  # statevector or density matrix, grown step by step
    noiseless = noise.is_noiseless
    if noiseless:
        state = np.zeros(2**n, dtype=complex)
        state[0] = 1.0
    else:
        state = np.zeros((2**n, 2**n), dtype=complex)
        state[0, 0] = 1.0
    rng = np.random.default_rng(seed)
    step_circ = ci.Circuit(n, step_moments)
    for _ in range(config.steps):
        if noiseless:
            state = ci.simulate_state(step_circ, state)
            probs = np.abs(state) ** 2
        else:
            state = ci.simulate_density(step_circ, noise, times, state)
            probs = np.clip(np.diag(state).real, 0.0, None)
        probs = probs / probs.sum()
        if shots is None:
            values.append(_magnetization(probs, n))
            errors.append(0.0)
        else:
            counts = rng.multinomial(shots, probs)
            sample_m = np.array([n - 2 * bin(i).count("1")
                                 for i in range(2**n)], dtype=float)
            mean = float(np.dot(counts, sample_m) / shots)
            var = float(np.dot(counts, (sample_m - mean) ** 2) / shots)
            values.append(mean)
            errors.append(math.sqrt(var / shots))
    return MagnetizationTrace(times=config.times,
                              magnetization=np.array(values),
                              stderr=np.array(errors) if shots else None)


def exact_reference(config: TfimConfig,
                    times=None) -> MagnetizationTrace:
    """Dense matrix-exponential evolution of the full Hamiltonian."""
    n = config.spins
    if n > 12:
        raise ValidationError("exact reference capped at 12 spins")
    if times is None:
        times = config.times
    times = np.asarray(times, dtype=float)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)

    def embed(op, q):
        mats = [np.eye(2, dtype=complex)] * n
        mats[q] = op
        out = mats[0]
        for m in mats[1:]:
            out = np.kron(out, m)
        return out

    ham = np.zeros((2**n, 2**n), dtype=complex)
    for p, q in config.bonds:
        ham -= config.coupling * (embed(x, p) @ embed(x, q))
    for q in range(n):
        ham -= config.field * embed(z, q)

    evals, evecs = np.linalg.eigh(ham)
    psi0 = np.zeros(2**n, dtype=complex)
    psi0[0] = 1.0
    coef = evecs.conj().T @ psi0
    mags = []
    for t in times:
        psi = evecs @ (np.exp(-1j * evals * t) * coef)
        mags.append(_magnetization(np.abs(psi) ** 2, n))
    return MagnetizationTrace(times=times, magnetization=np.array(mags))


@dataclass
class RuntimeComparison:
    """Noisy-versus-noiseless magnetization error, parallel vs sequential."""

    times: np.ndarray
    ideal: np.ndarray
    error_parallel: np.ndarray
    error_sequential: np.ndarray

    def ratios(self, error_floor: float = 1e-6) -> np.ndarray:
        mask = self.error_parallel > error_floor
        out = np.full(self.times.shape, np.nan)
        out[mask] = self.error_sequential[mask] / self.error_parallel[mask]
        return out

    def high_magnetization_mask(self, fraction: float = 0.5,
                                error_cap: float = 0.5,
                                error_floor: float = 1e-6) -> np.ndarray:
        spins = np.max(np.abs(self.ideal))
        return ((np.abs(self.ideal) >= fraction * spins)
                & (self.error_parallel > error_floor)
                & (self.error_sequential < error_cap))


def runtime_error_comparison(config: TfimConfig, noise: ci.NoiseModel,
                             times: ci.GateTimes = ci.DEFAULT_TIMES
                             ) -> RuntimeComparison:
    """Error traces |m_noisy - m_ideal| for both execution modes.

    Identical per-gate parameters; the modes differ only in how many wall
    -clock moments each Trotter step takes.
    """
    ideal = tfim_trotter(config, "parallel")
    noisy_par = tfim_trotter(config, "parallel", noise=noise, times=times)
    noisy_seq = tfim_trotter(config, "sequential", noise=noise, times=times)
    return RuntimeComparison(
        times=ideal.times,
        ideal=ideal.magnetization,
        error_parallel=np.abs(noisy_par.magnetization - ideal.magnetization),
        error_sequential=np.abs(noisy_seq.magnetization
                                - ideal.magnetization),
    )


# -- file output -------------------------------------------------------------------

def trace_to_csv(trace: MagnetizationTrace) -> str:
    lines = ["time,magnetization,stderr"]
    err = trace.stderr if trace.stderr is not None \
        else np.zeros_like(trace.times)
    for t, m, e in zip(trace.times, trace.magnetization, err):
        lines.append(f"{t:.17g},{m:.17g},{e:.17g}")
    return "\n".join(lines) + "\n"


def scan_to_csv(scan: ci.ParityScan) -> str:
    lines = ["phase,parity,stderr"]
    err = scan.stderr if scan.stderr is not None \
        else np.zeros_like(scan.phases)
    for p, v, e in zip(scan.phases, scan.parities, err):
        lines.append(f"{p:.17g},{v:.17g},{e:.17g}")
    return "\n".join(lines) + "\n"
