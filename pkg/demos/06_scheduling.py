#!/usr/bin/env python3
"""Packing a gate stream onto the two motional buses.

Schedules the four bonds of one Ising step into two layers, shows the
wall-time ratio, and reports the summed optical power on the busiest ion
when two pulses overlap.
"""

import numpy as np

from ionpar import chain, pulse, scheduler as sch
from ionpar.chain import Axis

gates = sch.GateList((((0, 1), np.pi / 10), ((2, 3), np.pi / 10),
                      ((1, 2), np.pi / 10), ((3, 4), np.pi / 10)))
schedule = sch.schedule(gates, policy="greedy")
print(f"TFIM step: {len(gates.gates)} gates -> {schedule.depth} layers")
for i, layer in enumerate(schedule.layers):
    desc = []
    if layer.x_gate:
        desc.append(f"{layer.x_gate.qubit_pair} on X")
    if layer.y_gate:
        desc.append(f"{layer.y_gate.qubit_pair} on Y")
    print(f"  layer {i}: " + ", ".join(desc))
report = sch.depth_report(schedule)
print(f"wall time sequential/parallel: {report.ratio:.2f}x")

print("\nshared-ion layer power budget:")
config = chain.default_config(7)
eq = chain.solve_equilibrium(config)
mx = chain.normal_modes(config, eq, Axis.X)
my = chain.normal_modes(config, eq, Axis.Y)
tau, nseg = 120e-6, 15
px = pulse.design_amplitude_modulated((3, 5), mx, tau, nseg,
                                      pulse.default_detuning(mx, 2 * np.pi * 20e3),
                                      np.pi / 4)
py = pulse.design_amplitude_modulated((2, 5), my, tau, nseg,
                                      pulse.default_detuning(my, 2 * np.pi * 20e3),
                                      np.pi / 4)
layer = sch.schedule(sch.GateList((((3, 5), np.pi / 4), ((2, 5), np.pi / 4))))
power = sch.power_report(layer, {(3, 5): px, (2, 5): py})
ion, worst = power.per_layer[0]
print(f"busiest ion: {ion}, summed drive {worst / 2 / np.pi / 1e3:.1f} "
      f"(2pi kHz)")
print(f"sum of individual maxima: "
      f"{(px.max_amplitude + py.max_amplitude) / 2 / np.pi / 1e3:.1f} "
      f"(2pi kHz) -- the overlap rarely hits the worst case")

drive = pulse.summed_drive([px, py], 5)
print("\nsummed drive on the shared ion per segment (2pi kHz):")
print(np.round(drive.totals / 2 / np.pi / 1e3, 1))
