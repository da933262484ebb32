"""Per-unit network susceptance matrix (weighted graph Laplacian)."""

from __future__ import annotations

import numpy as np


class DisconnectedNetworkError(ValueError):
    """The line graph does not connect all buses; lists the components."""

    def __init__(self, components):
        comps = ", ".join("{" + ", ".join(map(str, sorted(c))) + "}" for c in components)
        super().__init__(f"network is disconnected; components: {comps}")
        self.components = [sorted(c) for c in components]


def line_susceptance_pu(line, scenario):
    """Per-unit susceptance of one line on the system base.

    b = Z_base / (reactance_per_km * length) with Z_base = kV^2 / S_base,
    using the nominal voltage of the from-bus.
    """
    kv = scenario.bus(line.from_bus).voltage_kv
    z_base = kv * kv / scenario.s_base_mva
    return z_base / (line.reactance_ohm_per_km * line.length_km)


def connected_components(n_buses, lines):
    """Connected components of the line graph, as sets of bus ids."""
    adjacency = {i: set() for i in range(1, n_buses + 1)}
    for line in lines:
        adjacency[line.from_bus].add(line.to_bus)
        adjacency[line.to_bus].add(line.from_bus)
    unseen = set(adjacency)
    components = []
    while unseen:
        stack = [unseen.pop()]
        comp = {stack[0]}
        while stack:
            node = stack.pop()
            for nbr in adjacency[node]:
                if nbr in unseen:
                    unseen.discard(nbr)
                    comp.add(nbr)
                    stack.append(nbr)
        components.append(comp)
    return components


def susceptance_matrix(scenario):
    """Bus-by-bus susceptance Laplacian B of the line network, per unit.

    B[i][j] = -b_ij for every line i-j and B[i][i] = sum_j b_ij, so rows
    sum to zero and B is symmetric positive semidefinite with exactly one
    zero eigenvalue for a connected network.

    Raises
    ------
    DisconnectedNetworkError
        If the line graph does not span all buses (single-bus scenarios
        are trivially connected).
    """
    n = len(scenario.buses)
    if n > 1:
        components = connected_components(n, scenario.lines)
        if len(components) != 1:
            raise DisconnectedNetworkError(components)
    b = np.zeros((n, n))
    for line in scenario.lines:
        sus = line_susceptance_pu(line, scenario)
        i, j = line.from_bus - 1, line.to_bus - 1
        b[i, i] += sus
        b[j, j] += sus
        b[i, j] -= sus
        b[j, i] -= sus
    return b
