"""Pack two-qubit XX gates into pairwise-parallel layers.

Each layer holds at most one gate per motional bus (X modes, Y modes); two
gates in a layer may share a qubit.  In ``commuting-xx`` mode every gate
commutes with every other so any pairing is legal; ``strict-order`` mode
only pairs gates adjacent in the input stream, for callers that cannot
guarantee commutation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import circuit as circuit_mod
from . import pulse as pulse_mod
from .chain import Axis
from .errors import ValidationError

COMMUTING = "commuting-xx"
STRICT = "strict-order"


@dataclass(frozen=True)
class GateList:
    """Ordered XX gates (pair, angle) plus the dependency discipline."""

    gates: tuple
    mode: str = COMMUTING

    def __post_init__(self):
        norm = []
        for pair, chi in self.gates:
            p, q = int(pair[0]), int(pair[1])
            if p == q:
                raise ValidationError("gate pair must be distinct qubits")
            norm.append(((p, q), float(chi)))
        object.__setattr__(self, "gates", tuple(norm))
        if self.mode not in (COMMUTING, STRICT):
            raise ValidationError(f"unknown dependency mode {self.mode!r}")


@dataclass(frozen=True)
class Layer:
    x_gate: pulse_mod.GateSpec | None = None
    y_gate: pulse_mod.GateSpec | None = None

    @property
    def gates(self):
        return [g for g in (self.x_gate, self.y_gate) if g is not None]


@dataclass(frozen=True)
class Schedule:
    layers: tuple
    mode: str

    @property
    def depth(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "depth": self.depth,
            "layers": [
                {slot: (None if g is None else
                        {"pair": list(g.qubit_pair), "chi": g.target_angle})
                 for slot, g in (("x_gate", layer.x_gate),
                                 ("y_gate", layer.y_gate))}
                for layer in self.layers
            ],
        }

    def to_circuit(self, qubit_count: int) -> circuit_mod.Circuit:
        moments = []
        for layer in self.layers:
            ops = []
            if layer.x_gate is not None:
                ops.append(circuit_mod.ms(*layer.x_gate.qubit_pair,
                                          layer.x_gate.target_angle, Axis.X))
            if layer.y_gate is not None:
                ops.append(circuit_mod.ms(*layer.y_gate.qubit_pair,
                                          layer.y_gate.target_angle, Axis.Y))
            moments.append(circuit_mod.Moment(tuple(ops)))
        return circuit_mod.Circuit(qubit_count, tuple(moments))


def _make_layer(first, second=None) -> Layer:
    x = pulse_mod.GateSpec(qubit_pair=first[0], axis=Axis.X,
                           target_angle=first[1])
    y = None
    if second is not None:
        y = pulse_mod.GateSpec(qubit_pair=second[0], axis=Axis.Y,
                               target_angle=second[1])
    return Layer(x_gate=x, y_gate=y)


def _compatible(g1, g2, mode, allow_shared, adjacent):
    if mode == STRICT and not adjacent:
        return False
    if not allow_shared and set(g1[0]) & set(g2[0]):
        return False
    return True


def schedule(gates: GateList, policy: str = "greedy",
             allow_shared: bool = True) -> Schedule:
    """Assign gates to layers; axis alternates X then Y inside a layer.

    ``greedy`` pairs each gate with the next compatible one; ``exhaustive``
    (at most 16 gates) minimizes the layer count by search.  Ties break
    toward earlier input order, so results are deterministic.
    """
    items = list(gates.gates)
    n = len(items)
    if policy == "greedy":
        used = [False] * n
        layers = []
        for i in range(n):
            if used[i]:
                continue
            used[i] = True
            partner = None
            for j in range(i + 1, n):
                if used[j]:
                    continue
                if _compatible(items[i], items[j], gates.mode, allow_shared,
                               adjacent=(j == i + 1)):
                    partner = j
                    used[j] = True
                    break
                if gates.mode == STRICT:
                    break  # only the immediate successor may join
            layers.append(_make_layer(items[i],
                                      items[partner] if partner is not None
                                      else None))
        return Schedule(layers=tuple(layers), mode=gates.mode)

    if policy == "exhaustive":
        if n > 16:
            raise ValidationError("exhaustive search capped at 16 gates")
        if gates.mode == STRICT:
            # contiguous pairing: linear DP
            best = {}

            def solve(i):
                if i >= n:
                    return 0, ()
                if i in best:
                    return best[i]
                d1, l1 = solve(i + 1)
                cand = (1 + d1, ((i, None),) + l1)
                if i + 1 < n and _compatible(items[i], items[i + 1],
                                             gates.mode, allow_shared, True):
                    d2, l2 = solve(i + 2)
                    if 1 + d2 < cand[0]:
                        cand = (1 + d2, ((i, i + 1),) + l2)
                best[i] = cand
                return cand

            _, pairing = solve(0)
        else:
            # bitmask DP over pairings
            memo = {}

            def solve_mask(mask):
                if mask == 0:
                    return 0, ()
                if mask in memo:
                    return memo[mask]
                i = (mask & -mask).bit_length() - 1
                rest = mask & ~(1 << i)
                d1, l1 = solve_mask(rest)
                cand = (1 + d1, ((i, None),) + l1)
                for j in range(i + 1, n):
                    if not rest & (1 << j):
                        continue
                    if _compatible(items[i], items[j], gates.mode,
                                   allow_shared, adjacent=(j == i + 1)):
                        d2, l2 = solve_mask(rest & ~(1 << j))
                        if 1 + d2 < cand[0]:
                            cand = (1 + d2, ((i, j),) + l2)
                memo[mask] = cand
                return cand

            _, pairing = solve_mask((1 << n) - 1)
        layers = tuple(
            _make_layer(items[i], items[j] if j is not None else None)
            for i, j in pairing)
        return Schedule(layers=layers, mode=gates.mode)

    raise ValidationError(f"unknown policy {policy!r}")


@dataclass(frozen=True)
class DepthReport:
    t_sequential: float
    t_parallel: float
    ratio: float


def depth_report(sched: Schedule,
                 times: circuit_mod.GateTimes = circuit_mod.DEFAULT_TIMES
                 ) -> DepthReport:
    """Wall time with one gate at a time versus the scheduled layers."""
    n_gates = sum(len(layer.gates) for layer in sched.layers)
    t_seq = n_gates * times.ms
    t_par = sched.depth * times.ms
    ratio = t_seq / t_par if t_par > 0 else 1.0
    return DepthReport(t_sequential=t_seq, t_parallel=t_par, ratio=ratio)


@dataclass(frozen=True)
class PowerReport:
    """Worst summed drive per layer when pulses are attached."""

    per_layer: tuple  # ((ion, max summed amplitude) worst entry per layer)
    maximum: float
    over_budget: bool


def power_report(sched: Schedule, pulses: dict,
                 omega_max: float = np.inf) -> PowerReport:
    """Summed-drive maxima per layer; pulses keyed by qubit pair."""
    per_layer = []
    overall = 0.0
    for layer in sched.layers:
        scheds = []
        for gate in layer.gates:
            key = tuple(gate.qubit_pair)
            if key not in pulses:
                raise ValidationError(f"no pulse supplied for pair {key}")
            scheds.append(pulses[key])
        worst_ion, worst = None, 0.0
        ions = {ion for s in scheds for ion in s.qubit_pair}
        for ion in sorted(ions):
            drive = pulse_mod.summed_drive(scheds, ion)
            if drive.maximum > worst:
                worst_ion, worst = ion, drive.maximum
        per_layer.append((worst_ion, worst))
        overall = max(overall, worst)
    return PowerReport(per_layer=tuple(per_layer), maximum=overall,
                       over_budget=bool(overall > omega_max))


# -- files -------------------------------------------------------------------------

def save_schedule(sched: Schedule, path) -> None:
    with open(path, "w") as fh:
        json.dump(sched.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def gates_from_circuit(circ: circuit_mod.Circuit,
                       mode: str = COMMUTING) -> GateList:
    """Collect the MS gates of a circuit, in order, for rescheduling."""
    gates = []
    for moment in circ.moments:
        for op in moment.ops:
            if op.kind == "MS":
                gates.append((op.qubits, op.angle))
            elif op.kind not in ("RZ",):
                raise ValidationError(
                    "only MS and RZ operations can be rescheduled as a "
                    "commuting-XX stream")
    return GateList(gates=tuple(gates), mode=mode)


def annotated_circuit_text(sched: Schedule, qubit_count: int) -> str:
    circ = sched.to_circuit(qubit_count)
    lines = [f"# {sched.mode} schedule, depth {sched.depth}"]
    lines.append(circuit_mod.circuit_to_text(circ).rstrip("\n"))
    return "\n".join(lines) + "\n"
