"""Small DC nodal-analysis solver with piecewise-linear diodes.

This is deliberately general and slow: it stamps a modified nodal matrix
and tries every on/off combination of the diodes until it finds one that is
self-consistent. It exists as an independent cross-check of the closed-form
pilot solver, and to build the pilot topologies used in tests and sweeps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

GROUND = "gnd"


@dataclass
class Netlist:
    resistors: list = field(default_factory=list)  # (a, b, ohms)
    sources: list = field(default_factory=list)  # (plus, minus, volts)
    diodes: list = field(default_factory=list)  # (anode, cathode, forward_drop)

    def resistor(self, a: str, b: str, ohms: float) -> "Netlist":
        if math.isinf(ohms):
            return self
        if ohms == 0:
            self.sources.append((a, b, 0.0))
        else:
            self.resistors.append((a, b, float(ohms)))
        return self

    def source(self, plus: str, minus: str, volts: float) -> "Netlist":
        self.sources.append((plus, minus, float(volts)))
        return self

    def diode(self, anode: str, cathode: str, forward_drop: float = 0.0) -> "Netlist":
        self.diodes.append((anode, cathode, float(forward_drop)))
        return self

    def nodes(self) -> list:
        seen = []
        for a, b, _ in self.resistors + self.sources + self.diodes:
            for n in (a, b):
                if n != GROUND and n not in seen:
                    seen.append(n)
        return seen


class NoConsistentState(RuntimeError):
    pass


def _solve_linear(net: Netlist, nodes: list, on: tuple) -> tuple:
    index = {n: i for i, n in enumerate(nodes)}
    vsrc = list(net.sources) + [(a, c, vd) for (a, c, vd), state in zip(net.diodes, on) if state]
    n, m = len(nodes), len(vsrc)
    A = np.zeros((n + m, n + m))
    z = np.zeros(n + m)

    for a, b, r in net.resistors:
        g = 1.0 / r
        for p, q in ((a, b), (b, a)):
            if p != GROUND:
                A[index[p], index[p]] += g
                if q != GROUND:
                    A[index[p], index[q]] -= g
    for k, (p, q, v) in enumerate(vsrc):
        row = n + k
        if p != GROUND:
            A[index[p], row] += 1.0
            A[row, index[p]] += 1.0
        if q != GROUND:
            A[index[q], row] -= 1.0
            A[row, index[q]] -= 1.0
        z[row] = v

    x = np.linalg.solve(A, z)
    volts = {nd: x[index[nd]] for nd in nodes}
    volts[GROUND] = 0.0
    currents = x[n:]
    return volts, currents


def solve(net: Netlist, tol: float = 1e-12) -> dict:
    """Node voltages of the consistent diode configuration."""
    nodes = net.nodes()
    n_src = len(net.sources)
    for on in itertools.product((True, False), repeat=len(net.diodes)):
        try:
            volts, currents = _solve_linear(net, nodes, on)
        except np.linalg.LinAlgError:
            continue
        ok = True
        k = n_src
        for (a, c, vd), state in zip(net.diodes, on):
            if state:
                # MNA branch current runs anode -> cathode through the device
                if currents[k] < -tol:
                    ok = False
                k += 1
            elif volts[a] - volts[c] > vd + tol:
                ok = False
        if ok:
            return volts
    raise NoConsistentState("no self-consistent diode configuration")


def pilot_netlist(
    v_high: float,
    r1: float,
    r_v: float,
    r_att_serial: float = 0.0,
    r_att_parallel: float = math.inf,
    ev_drop: float = 0.0,
    attack_drop: float = 0.0,
) -> Netlist:
    """Positive half-cycle of the pilot line, optionally with an attack."""
    net = Netlist()
    net.source("src", GROUND, v_high)
    net.resistor("src", "evse", r1)
    net.resistor("evse", "ev", r_att_serial)
    if not math.isinf(r_v):
        net.diode("ev", "ev_k", ev_drop)
        net.resistor("ev_k", GROUND, r_v)
    if not math.isinf(r_att_parallel):
        net.diode("ev", "att_k", attack_drop)
        net.resistor("att_k", GROUND, r_att_parallel)
    # keeps the EV inlet defined when every branch below it is off
    net.resistor("ev", GROUND, 1e15)
    return net
