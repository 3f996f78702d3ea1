"""Command-line pipeline: chain modes, pulse design, parallel-gate
verification, scheduling, and the simulated experiments.

Every command writes its outputs plus a run manifest (config snapshot, seed,
version, SHA-256 digests) into the output directory; re-running with the
same inputs and seed reproduces the files byte for byte.

Exit codes: 0 success, 1 validation, 2 numeric or design failure, 3 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import chain, circuit as ci, dynamics, experiments as ex
from . import pulse, scheduler as sch
from .chain import Axis
from .errors import (ConvergenceError, DesignError, FockLeakageError,
                     IonparError, SolverError, ValidationError)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


def _apply_thread_cap():
    cap = os.environ.get("IONPAR_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ValidationError("IONPAR_THREADS must be an integer")
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except Exception:
        pass


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_text(path: Path, text: str, manifest: "Manifest"):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    manifest.outputs[path.name] = hashlib.sha256(text.encode()).hexdigest()


def _write_json(path: Path, payload, manifest: "Manifest"):
    text = json.dumps(payload, indent=2, sort_keys=True,
                      default=_json_default) + "\n"
    _write_text(path, text, manifest)


class Manifest:
    def __init__(self, command: str, seed: int, config_snapshot: dict):
        self.data = {
            "command": command,
            "seed": seed,
            "version": __version__,
            "config": config_snapshot,
            "inputs": {},
            "outputs": {},
        }

    @property
    def outputs(self):
        return self.data["outputs"]

    def record_input(self, path):
        path = Path(path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.data["inputs"][path.name] = digest

    def write(self, out_dir: Path):
        text = json.dumps(self.data, indent=2, sort_keys=True,
                          default=_json_default) + "\n"
        (out_dir / "manifest.json").write_text(text)


def _load_config(args) -> chain.TrapConfig:
    if args.config:
        return chain.load_trap_config(args.config)
    return chain.default_config()


def _mode_sets(config):
    eq = chain.solve_equilibrium(config)
    return {axis: chain.normal_modes(config, eq, axis)
            for axis in (Axis.X, Axis.Y, Axis.Z)}


def _noise_from_args(args) -> ci.NoiseModel:
    t2 = getattr(args, "t2", None)
    depol_f = getattr(args, "depol_fidelity", None)
    kwargs = {}
    if t2 is not None:
        kwargs["t2"] = t2
    if depol_f is not None:
        kwargs["depolarizing_per_ms"] = ex.calibrate_depolarizing(depol_f)
    return ci.NoiseModel(**kwargs)


# -- subcommands ------------------------------------------------------------------

def cmd_modes(args, out_dir: Path) -> int:
    config = _load_config(args)
    manifest = Manifest("modes", args.seed, chain.trap_config_to_dict(config))
    if args.config:
        manifest.record_input(args.config)
    sets = _mode_sets(config)
    for axis, modes in sets.items():
        _write_json(out_dir / f"modes_{axis.value.lower()}.json",
                    chain.mode_set_to_dict(modes), manifest)
    rep = chain.mode_separation_report(sets[Axis.X], sets[Axis.Y])
    _write_json(out_dir / "mode_separation.json", {
        "x_band_hz": [b / (2 * np.pi) for b in rep.x_band],
        "y_band_hz": [b / (2 * np.pi) for b in rep.y_band],
        "gap_hz": rep.gap / (2 * np.pi),
        "disjoint": rep.disjoint,
    }, manifest)
    manifest.write(out_dir)
    print(f"wrote mode sets for X, Y, Z; X/Y bands "
          f"{'disjoint' if rep.disjoint else 'overlap'} "
          f"(gap {rep.gap / (2 * np.pi):.3e} Hz)")
    return EXIT_OK


def cmd_design(args, out_dir: Path) -> int:
    config = _load_config(args)
    manifest = Manifest("design", args.seed, {
        **chain.trap_config_to_dict(config),
        "pair": list(args.pair), "axis": args.axis, "chi": args.chi,
        "tau_s": args.tau, "segments": args.segments,
        "mu_offset_hz": args.mu_offset_hz, "mu_hz": args.mu_hz,
    })
    if args.config:
        manifest.record_input(args.config)
    sets = _mode_sets(config)
    modes = sets[Axis(args.axis)]
    if args.mu_hz is not None:
        mu = 2 * np.pi * args.mu_hz
    else:
        mu = pulse.default_detuning(modes, 2 * np.pi * args.mu_offset_hz)
    sched = pulse.design_amplitude_modulated(
        tuple(args.pair), modes, args.tau, args.segments, mu, args.chi,
        omega_max=args.omega_max)
    residual = pulse.normalized_closure(sched, modes)
    achieved = pulse.chi_angle(sched, modes)
    _write_json(out_dir / "pulse.json", pulse.schedule_to_dict(sched),
                manifest)
    _write_json(out_dir / "design_report.json", {
        "normalized_closure": residual,
        "chi_target": args.chi,
        "chi_achieved": achieved,
        "lamb_dicke_metric": sched.lamb_dicke_metric,
        "max_amplitude_rad_s": sched.max_amplitude,
    }, manifest)
    manifest.write(out_dir)
    print(f"max |alpha| (design units) {residual:.3e}; "
          f"chi achieved {achieved:.12f} (target {args.chi:.12f})")
    return EXIT_OK


def cmd_verify(args, out_dir: Path) -> int:
    config = _load_config(args)
    manifest = Manifest("verify", args.seed, {
        **chain.trap_config_to_dict(config),
        "cutoff": args.cutoff, "retain": args.retain,
        "distance_tol": args.distance_tol,
        "infidelity_tol": args.infidelity_tol,
    })
    sched_x = pulse.load_schedule(args.schedule_x)
    sched_y = pulse.load_schedule(args.schedule_y)
    manifest.record_input(args.schedule_x)
    manifest.record_input(args.schedule_y)
    if sched_x.axis == sched_y.axis:
        raise ValidationError(
            "both schedules drive the same axis; use the scheduler to "
            "serialize them instead")
    if sched_x.axis != Axis.X:
        sched_x, sched_y = sched_y, sched_x

    sets = _mode_sets(config)
    retain = None
    if args.retain:
        retain = {Axis.X: tuple(range(args.retain)),
                  Axis.Y: tuple(range(args.retain))}
    result = dynamics.cross_coupling_check(
        sched_x, sched_y, sets[Axis.X], sets[Axis.Y], retain=retain,
        cutoff=args.cutoff)
    report = dynamics.magnus_propagator([sched_x, sched_y], sets[Axis.X],
                                        sets[Axis.Y], retain=retain)
    fidelity = None
    if report.unitary is not None:
        dim = report.unitary.shape[0]
        psi0 = np.zeros(dim, dtype=complex)
        psi0[0] = 1.0
        fidelity = result.parallel.spin_fidelity(report.unitary @ psi0)
    payload = report.to_dict()
    payload["cross_coupling_distance"] = result.distance
    payload["magnus_vs_exact_fidelity"] = fidelity
    _write_json(out_dir / "verify_report.json", payload, manifest)
    manifest.write(out_dir)

    print(f"cross-coupling distance D = {result.distance:.3e}")
    for key, value in sorted(report.residuals.items()):
        print(f"  residual {key}: |alpha| = {abs(value):.3e}")
    if fidelity is not None:
        print(f"magnus-vs-exact spin fidelity = {fidelity:.9f}")
    ok = result.distance < args.distance_tol and (
        fidelity is not None and 1.0 - fidelity < args.infidelity_tol)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_schedule(args, out_dir: Path) -> int:
    manifest = Manifest("schedule", args.seed, {
        "circuit": str(args.circuit), "policy": args.policy,
        "mode": args.mode, "allow_shared": not args.forbid_shared,
    })
    manifest.record_input(args.circuit)
    text = Path(args.circuit).read_text()
    circ = ci.circuit_from_text(text)
    gates = sch.gates_from_circuit(circ, mode=args.mode)
    out = sch.schedule(gates, policy=args.policy,
                       allow_shared=not args.forbid_shared)
    rep = sch.depth_report(out)
    payload = out.to_dict()
    payload["depth_report"] = {
        "t_sequential_s": rep.t_sequential,
        "t_parallel_s": rep.t_parallel,
        "ratio": rep.ratio,
    }
    _write_json(out_dir / "schedule.json", payload, manifest)
    _write_text(out_dir / "scheduled_circuit.txt",
                sch.annotated_circuit_text(out, circ.qubit_count), manifest)
    manifest.write(out_dir)
    print(f"depth {out.depth} ({len(gates.gates)} gates); "
          f"sequential/parallel wall time ratio {rep.ratio:.3f}")
    return EXIT_OK


def cmd_run(args, out_dir: Path) -> int:
    manifest = Manifest("run", args.seed, {
        "circuit": str(args.circuit), "shots": args.shots,
        "t2_s": args.t2, "depol_fidelity": args.depol_fidelity,
    })
    manifest.record_input(args.circuit)
    circ = ci.circuit_from_text(Path(args.circuit).read_text())
    noise = _noise_from_args(args)
    result = ci.run(circ, noise, shots=args.shots, seed=args.seed)
    lines = ["bitstring,probability,count"]
    hist = result.histogram or {}
    for i, p in enumerate(result.probabilities):
        bits = format(i, f"0{circ.qubit_count}b")
        if p > 1e-15 or bits in hist:
            lines.append(f"{bits},{p:.17g},{hist.get(bits, '')}")
    _write_text(out_dir / "histogram.csv", "\n".join(lines) + "\n", manifest)
    manifest.write(out_dir)
    print(f"ran {len(circ.moments)} moments on {circ.qubit_count} qubits")
    return EXIT_OK


def cmd_ghz(args, out_dir: Path) -> int:
    manifest = Manifest("ghz", args.seed, {
        "shots": args.shots, "t2_s": args.t2,
        "depol_fidelity": args.depol_fidelity,
    })
    noise = _noise_from_args(args)
    res = ex.ghz_experiment(noise=noise, shots=args.shots, seed=args.seed)
    _write_text(out_dir / "ghz_parity.csv", ex.scan_to_csv(res.scan),
                manifest)
    _write_json(out_dir / "ghz_report.json", {
        "fidelity_report": res.report.to_dict(),
        "populations": res.populations,
    }, manifest)
    manifest.write(out_dir)
    print(f"GHZ fidelity {res.report.fidelity:.6f} "
          f"(contrast {res.report.parity_contrast:.6f})")
    return EXIT_OK


def cmd_tfim(args, out_dir: Path) -> int:
    config = ex.TfimConfig(ratio=args.ratio, steps=args.steps,
                           step_angle=args.step_angle)
    manifest = Manifest("tfim", args.seed, {
        "mode": args.mode, "ratio": args.ratio, "steps": args.steps,
        "step_angle": args.step_angle, "shots": args.shots,
        "t2_s": args.t2, "depol_fidelity": args.depol_fidelity,
    })
    noise = _noise_from_args(args)
    trace = ex.tfim_trotter(config, args.mode, noise=noise,
                            shots=args.shots, seed=args.seed)
    _write_text(out_dir / f"tfim_{args.mode}.csv", ex.trace_to_csv(trace),
                manifest)
    if args.exact:
        _write_text(out_dir / "tfim_exact.csv",
                    ex.trace_to_csv(ex.exact_reference(config)), manifest)
    manifest.write(out_dir)
    print(f"TFIM {args.mode}: {config.steps} steps, "
          f"final m = {trace.magnetization[-1]:.4f}")
    return EXIT_OK


def cmd_compare(args, out_dir: Path) -> int:
    config = ex.TfimConfig(ratio=args.ratio, steps=args.steps,
                           step_angle=args.step_angle)
    manifest = Manifest("compare", args.seed, {
        "ratio": args.ratio, "steps": args.steps,
        "step_angle": args.step_angle, "t2_s": args.t2,
    })
    if args.t2 is None:
        raise ValidationError("compare needs a finite --t2")
    comp = ex.runtime_error_comparison(config, ci.NoiseModel(t2=args.t2))
    ratios = comp.ratios()
    lines = ["time,m_ideal,error_parallel,error_sequential,ratio"]
    for i, t in enumerate(comp.times):
        r = "" if np.isnan(ratios[i]) else f"{ratios[i]:.17g}"
        lines.append(f"{t:.17g},{comp.ideal[i]:.17g},"
                     f"{comp.error_parallel[i]:.17g},"
                     f"{comp.error_sequential[i]:.17g},{r}")
    _write_text(out_dir / "compare.csv", "\n".join(lines) + "\n", manifest)
    manifest.write(out_dir)
    mask = comp.high_magnetization_mask()
    if mask.any():
        print(f"sequential/parallel error ratio at high |m|: "
              f"{np.nanmean(ratios[mask]):.3f}")
    else:
        print("no points in the small-error high-magnetization window")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionpar",
        description="pairwise-parallel entangling gates on orthogonal "
                    "motional modes: design, verify, schedule, simulate")
    parser.add_argument("--config", type=Path, default=None,
                        help="trap config file (JSON or TOML, SI units)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="reserved; outputs carry their natural format")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("modes", help="chain equilibrium and mode tables")

    p = sub.add_parser("design", help="amplitude-modulated pulse design")
    p.add_argument("--pair", type=int, nargs=2, required=True,
                   metavar=("P", "Q"))
    p.add_argument("--axis", choices=("X", "Y"), default="X")
    p.add_argument("--chi", type=float, default=np.pi / 4)
    p.add_argument("--tau", type=float, default=200e-6)
    p.add_argument("--segments", type=int, default=None,
                   help="defaults to 2N+1 for an N-ion chain")
    p.add_argument("--mu-offset-hz", type=float, default=3e3,
                   help="beat-note offset beyond the top sideband")
    p.add_argument("--mu-hz", type=float, default=None,
                   help="absolute beat-note frequency (overrides offset)")
    p.add_argument("--omega-max", type=float, default=np.inf)

    p = sub.add_parser("verify", help="cross-coupling and fidelity check")
    p.add_argument("schedule_x", type=Path)
    p.add_argument("schedule_y", type=Path)
    p.add_argument("--cutoff", type=int, default=12)
    p.add_argument("--retain", type=int, default=2,
                   help="modes kept per axis (0 = all)")
    p.add_argument("--distance-tol", type=float, default=1e-8)
    p.add_argument("--infidelity-tol", type=float, default=1e-6)

    p = sub.add_parser("schedule", help="pack a gate stream into layers")
    p.add_argument("circuit", type=Path)
    p.add_argument("--policy", choices=("greedy", "exhaustive"),
                   default="greedy")
    p.add_argument("--mode", choices=(sch.COMMUTING, sch.STRICT),
                   default=sch.COMMUTING)
    p.add_argument("--forbid-shared", action="store_true")

    p = sub.add_parser("run", help="simulate a circuit file")
    p.add_argument("circuit", type=Path)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--t2", type=float, default=None)
    p.add_argument("--depol-fidelity", type=float, default=None)

    p = sub.add_parser("ghz", help="one-step GHZ experiment")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--t2", type=float, default=None)
    p.add_argument("--depol-fidelity", type=float, default=None)

    p = sub.add_parser("tfim", help="Trotterized Ising magnetization")
    p.add_argument("--mode", choices=("parallel", "sequential"),
                   default="parallel")
    p.add_argument("--ratio", type=float, default=0.096)
    p.add_argument("--steps", type=int, default=12)
    p.add_argument("--step-angle", type=float, default=np.pi / 10)
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--t2", type=float, default=None)
    p.add_argument("--depol-fidelity", type=float, default=None)
    p.add_argument("--exact", action="store_true",
                   help="also write the exact-diagonalization trace")

    p = sub.add_parser("compare", help="parallel vs sequential under T2")
    p.add_argument("--ratio", type=float, default=0.096)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--step-angle", type=float, default=np.pi / 10)
    p.add_argument("--t2", type=float, default=None)
    return parser


_HANDLERS = {
    "modes": cmd_modes,
    "design": cmd_design,
    "verify": cmd_verify,
    "schedule": cmd_schedule,
    "run": cmd_run,
    "ghz": cmd_ghz,
    "tfim": cmd_tfim,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_cap()
        if args.command == "design" and args.segments is None:
            config = _load_config(args)
            args.segments = 2 * config.ion_count + 1
        out_dir = args.out
        out_dir.mkdir(parents=True, exist_ok=True)
        return _HANDLERS[args.command](args, out_dir)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DesignError, SolverError, FockLeakageError,
            ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except IonparError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
