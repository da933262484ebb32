"""Grid scenario definition, loading, and validation.

A scenario is a declarative description of the study system: buses with
stored kinetic energy, transmission lines, synchronous generators with
optional hydro governors, droop-controlled inverter-based resources
(IBRs), step disturbances, and numerical study settings.

Scenario files are YAML trees with top-level keys ``system``, ``buses``,
``lines``, ``generators``, ``ibr``, ``disturbances`` and ``study``; the
bundled ``*.scn`` files under :mod:`freqstab.scenarios` are the reference
examples.  Unknown keys anywhere in the tree are rejected so that schema
drift fails loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

# System-wide defaults for fields omitted from scenario files (Nordic-style
# 400 kV system; all overridable per file).
DEFAULT_VOLTAGE_KV = 400.0
DEFAULT_REACTANCE_OHM_PER_KM = 0.3
DEFAULT_S_BASE_MVA = 1000.0
DEFAULT_F0_HZ = 50.0
DEFAULT_DAMPING = 1.0            # pu torque / pu speed, machine base
DEFAULT_TRANSIENT_REACTANCE = 0.3  # pu, machine base

# Hydro governor defaults: droop with transient-droop compensation, servo
# lag, and a non-minimum-phase water column.
DEFAULT_T_SERVO = 0.2
DEFAULT_T_RESET = 5.0
DEFAULT_TRANSIENT_DROOP = 0.4
DEFAULT_T_WATER = 1.0

# IBR controller defaults: droop filtered by the response lag t_filter and
# the local frequency-measurement lag t_measure.
DEFAULT_T_FILTER = 0.25
DEFAULT_T_MEASURE = 0.25

# Study defaults: log grid spans governor through electromechanical ranges.
DEFAULT_OMEGA_MIN = 1e-2
DEFAULT_OMEGA_MAX = 1e2
DEFAULT_POINTS_PER_DECADE = 100
DEFAULT_HORIZON_S = 40.0
DEFAULT_DT_S = 1e-3


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The file is not readable as a YAML mapping."""


class ScenarioValidationError(ScenarioError):
    """An invariant is violated; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownKeyError(ScenarioError):
    """The file contains a key outside the schema."""

    def __init__(self, path, keys):
        super().__init__(f"{path}: unknown key(s) {sorted(keys)}")
        self.path = path
        self.keys = sorted(keys)


@dataclass(frozen=True)
class BusSpec:
    id: int
    kinetic_energy_gws: float
    rated_power_mw: float
    voltage_kv: float = DEFAULT_VOLTAGE_KV


@dataclass(frozen=True)
class LineSpec:
    from_bus: int
    to_bus: int
    length_km: float
    reactance_ohm_per_km: float = DEFAULT_REACTANCE_OHM_PER_KM


@dataclass(frozen=True)
class GovernorSpec:
    """Hydro governor: droop gain (pu power / pu frequency, system base)
    shaped by transient-droop compensation, a servo lag, and the
    water-column dynamics of the turbine."""

    droop_gain: float
    t_servo: float = DEFAULT_T_SERVO
    t_reset: float = DEFAULT_T_RESET
    transient_droop: float = DEFAULT_TRANSIENT_DROOP
    t_water: float = DEFAULT_T_WATER


@dataclass(frozen=True)
class GeneratorSpec:
    bus: int
    kind: str                       # "hydro" | "thermal"
    damping: float = DEFAULT_DAMPING
    transient_reactance: float = DEFAULT_TRANSIENT_REACTANCE
    governor: GovernorSpec | None = None


@dataclass(frozen=True)
class IbrControllerSpec:
    """Droop-based IBR frequency controller fed by the local bus frequency.

    The response path is droop_gain filtered by t_filter; the feedback
    signal is the bus frequency estimated through a first-order
    measurement lag t_measure.
    """

    bus: int
    droop_gain: float               # pu power / pu frequency, system base
    t_filter: float = DEFAULT_T_FILTER
    t_measure: float = DEFAULT_T_MEASURE


@dataclass(frozen=True)
class DisturbanceSpec:
    """Step active-power imbalance at t = 0; positive magnitude is a
    power deficit (load increase / generation loss) and drives the
    frequency down."""

    bus: int
    magnitude_mw: float


@dataclass(frozen=True)
class StudySettings:
    omega_min: float = DEFAULT_OMEGA_MIN
    omega_max: float = DEFAULT_OMEGA_MAX
    points_per_decade: int = DEFAULT_POINTS_PER_DECADE
    horizon_s: float = DEFAULT_HORIZON_S
    dt_s: float = DEFAULT_DT_S


@dataclass(frozen=True)
class Scenario:
    name: str
    s_base_mva: float
    f0_hz: float
    buses: tuple[BusSpec, ...]
    lines: tuple[LineSpec, ...]
    generators: tuple[GeneratorSpec, ...]
    ibr_controllers: tuple[IbrControllerSpec, ...]
    disturbances: tuple[DisturbanceSpec, ...]
    study: StudySettings = field(default_factory=StudySettings)

    def bus(self, bus_id):
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(f"no bus {bus_id}")

    def generator(self, bus_id):
        for g in self.generators:
            if g.bus == bus_id:
                return g
        raise KeyError(f"no generator at bus {bus_id}")

    def total_kinetic_energy_gws(self):
        """System inertia level: sum of stored kinetic energy over buses."""
        return sum(b.kinetic_energy_gws for b in self.buses)

    def inertia_constant_machine(self, bus_id):
        """H in seconds on the machine MVA base (rated power)."""
        b = self.bus(bus_id)
        return b.kinetic_energy_gws * 1000.0 / b.rated_power_mw

    def inertia_constant_system(self, bus_id):
        """H in seconds rebased to the system MVA base."""
        b = self.bus(bus_id)
        return b.kinetic_energy_gws * 1000.0 / self.s_base_mva

    def total_droop_gain(self):
        """Total primary droop (governors + IBRs), pu/pu on system base."""
        gov = sum(g.governor.droop_gain for g in self.generators
                  if g.governor is not None)
        ibr = sum(c.droop_gain for c in self.ibr_controllers)
        return gov + ibr

    def with_ibr_gains(self, gains):
        """Copy of the scenario with IBR droop gains replaced.

        ``gains`` maps bus id to the new droop gain; buses without an
        existing controller get one with default time constants.
        """
        ibrs = list(self.ibr_controllers)
        present = {c.bus: i for i, c in enumerate(ibrs)}
        for bus_id, gain in sorted(gains.items()):
            if bus_id in present:
                ibrs[present[bus_id]] = replace(ibrs[present[bus_id]],
                                                droop_gain=float(gain))
            else:
                self.bus(bus_id)
                ibrs.append(IbrControllerSpec(bus=bus_id, droop_gain=float(gain)))
        return replace(self, ibr_controllers=tuple(ibrs))


def _require_mapping(node, path):
    if not isinstance(node, dict):
        raise ScenarioValidationError(path, f"expected a mapping, got {type(node).__name__}")


def _check_keys(node, path, allowed):
    unknown = set(node) - set(allowed)
    if unknown:
        raise UnknownKeyError(path, unknown)


def _get(node, path, key, kind, default=None, required=False):
    if key not in node:
        if required:
            raise ScenarioValidationError(f"{path}.{key}", "missing required field")
        return default
    value = node[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioValidationError(f"{path}.{key}", f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioValidationError(f"{path}.{key}", f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ScenarioValidationError(f"{path}.{key}", f"expected a string, got {value!r}")
        return value
    raise AssertionError(kind)


def load_scenario(path):
    """Load and validate a scenario file.

    Parameters
    ----------
    path : str or Path
        Scenario file (YAML tree, conventionally ``*.scn``).

    Returns
    -------
    Scenario
        Fully validated scenario with defaults applied.

    Raises
    ------
    ScenarioParseError
        Malformed YAML.
    ScenarioValidationError
        An invariant is violated; the message names the field path.
    UnknownKeyError
        A key outside the schema (schema drift guard).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    if raw is None:
        raise ScenarioParseError(f"{path}: empty file")
    scenario = scenario_from_dict(raw, name=path.stem)
    return scenario


def bundled_scenario_path(name):
    """Filesystem path of a bundled scenario (``high_inertia``, ...)."""
    if not name.endswith(".scn"):
        name = name + ".scn"
    ref = resources.files("freqstab") / "scenarios" / name
    return Path(str(ref))


def load_bundled_scenario(name):
    """Load one of the scenarios shipped with the package."""
    return load_scenario(bundled_scenario_path(name))


def scenario_from_dict(raw, name="scenario"):
    """Build a validated Scenario from a parsed YAML tree."""
    _require_mapping(raw, name)
    _check_keys(raw, name, ["system", "buses", "lines", "generators", "ibr",
                            "disturbances", "study"])

    sysnode = raw.get("system", {}) or {}
    _require_mapping(sysnode, "system")
    _check_keys(sysnode, "system", ["s_base_mva", "f0_hz", "name"])
    s_base = _get(sysnode, "system", "s_base_mva", float, DEFAULT_S_BASE_MVA)
    f0 = _get(sysnode, "system", "f0_hz", float, DEFAULT_F0_HZ)
    name = _get(sysnode, "system", "name", str, name)
    if s_base <= 0:
        raise ScenarioValidationError("system.s_base_mva", "must be positive")
    if f0 <= 0:
        raise ScenarioValidationError("system.f0_hz", "must be positive")

    buses = []
    for i, node in enumerate(raw.get("buses", []) or []):
        p = f"buses[{i}]"
        _require_mapping(node, p)
        _check_keys(node, p, ["id", "kinetic_energy_gws", "rated_power_mw", "voltage_kv"])
        bus = BusSpec(
            id=_get(node, p, "id", int, required=True),
            kinetic_energy_gws=_get(node, p, "kinetic_energy_gws", float, required=True),
            rated_power_mw=_get(node, p, "rated_power_mw", float, required=True),
            voltage_kv=_get(node, p, "voltage_kv", float, DEFAULT_VOLTAGE_KV),
        )
        if bus.kinetic_energy_gws < 0:
            raise ScenarioValidationError(f"{p}.kinetic_energy_gws", "must be >= 0")
        if bus.voltage_kv <= 0:
            raise ScenarioValidationError(f"{p}.voltage_kv", "must be positive")
        buses.append(bus)
    if not buses:
        raise ScenarioValidationError("buses", "at least one bus is required")
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        raise ScenarioValidationError("buses", f"duplicate bus ids in {ids}")
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise ScenarioValidationError("buses", f"bus ids must be contiguous from 1, got {sorted(ids)}")
    bus_ids = set(ids)

    lines = []
    for i, node in enumerate(raw.get("lines", []) or []):
        p = f"lines[{i}]"
        _require_mapping(node, p)
        _check_keys(node, p, ["from_bus", "to_bus", "length_km", "reactance_ohm_per_km"])
        line = LineSpec(
            from_bus=_get(node, p, "from_bus", int, required=True),
            to_bus=_get(node, p, "to_bus", int, required=True),
            length_km=_get(node, p, "length_km", float, required=True),
            reactance_ohm_per_km=_get(node, p, "reactance_ohm_per_km", float,
                                      DEFAULT_REACTANCE_OHM_PER_KM),
        )
        if line.from_bus == line.to_bus:
            raise ScenarioValidationError(p, f"line connects bus {line.from_bus} to itself")
        for end in ("from_bus", "to_bus"):
            if getattr(line, end) not in bus_ids:
                raise ScenarioValidationError(f"{p}.{end}", f"references unknown bus {getattr(line, end)}")
        if line.length_km <= 0:
            raise ScenarioValidationError(f"{p}.length_km", "must be positive")
        if line.reactance_ohm_per_km <= 0:
            raise ScenarioValidationError(f"{p}.reactance_ohm_per_km", "must be positive")
        lines.append(line)

    generators = []
    for i, node in enumerate(raw.get("generators", []) or []):
        p = f"generators[{i}]"
        _require_mapping(node, p)
        _check_keys(node, p, ["bus", "kind", "damping", "transient_reactance", "governor"])
        govnode = node.get("governor")
        governor = None
        if govnode is not None:
            gp = f"{p}.governor"
            _require_mapping(govnode, gp)
            _check_keys(govnode, gp, ["droop_gain", "t_servo", "t_reset",
                                      "transient_droop", "t_water"])
            governor = GovernorSpec(
                droop_gain=_get(govnode, gp, "droop_gain", float, required=True),
                t_servo=_get(govnode, gp, "t_servo", float, DEFAULT_T_SERVO),
                t_reset=_get(govnode, gp, "t_reset", float, DEFAULT_T_RESET),
                transient_droop=_get(govnode, gp, "transient_droop", float,
                                     DEFAULT_TRANSIENT_DROOP),
                t_water=_get(govnode, gp, "t_water", float, DEFAULT_T_WATER),
            )
            if governor.droop_gain < 0:
                raise ScenarioValidationError(f"{gp}.droop_gain", "must be >= 0")
            for tc in ("t_servo", "t_reset", "t_water"):
                if getattr(governor, tc) <= 0:
                    raise ScenarioValidationError(f"{gp}.{tc}", "must be positive")
            if governor.transient_droop <= 0:
                raise ScenarioValidationError(f"{gp}.transient_droop", "must be positive")
        gen = GeneratorSpec(
            bus=_get(node, p, "bus", int, required=True),
            kind=_get(node, p, "kind", str, required=True),
            damping=_get(node, p, "damping", float, DEFAULT_DAMPING),
            transient_reactance=_get(node, p, "transient_reactance", float,
                                     DEFAULT_TRANSIENT_REACTANCE),
            governor=governor,
        )
        if gen.bus not in bus_ids:
            raise ScenarioValidationError(f"{p}.bus", f"references unknown bus {gen.bus}")
        if gen.kind not in ("hydro", "thermal"):
            raise ScenarioValidationError(f"{p}.kind", f"must be 'hydro' or 'thermal', got {gen.kind!r}")
        if gen.kind == "thermal" and gen.governor is not None:
            raise ScenarioValidationError(f"{p}.governor",
                                          "thermal units carry no governor model")
        if gen.damping < 0:
            raise ScenarioValidationError(f"{p}.damping", "must be >= 0")
        if gen.transient_reactance <= 0:
            raise ScenarioValidationError(f"{p}.transient_reactance", "must be positive")
        generators.append(gen)
    gen_buses = [g.bus for g in generators]
    if len(set(gen_buses)) != len(gen_buses):
        raise ScenarioValidationError("generators", "more than one generator on a bus")
    for g in generators:
        bus = next(b for b in buses if b.id == g.bus)
        if bus.rated_power_mw <= 0:
            raise ScenarioValidationError(
                f"buses[id={bus.id}].rated_power_mw",
                "must be positive on a generator bus")

    ibrs = []
    for i, node in enumerate(raw.get("ibr", []) or []):
        p = f"ibr[{i}]"
        _require_mapping(node, p)
        _check_keys(node, p, ["bus", "droop_gain", "t_filter", "t_measure"])
        ibr = IbrControllerSpec(
            bus=_get(node, p, "bus", int, required=True),
            droop_gain=_get(node, p, "droop_gain", float, required=True),
            t_filter=_get(node, p, "t_filter", float, DEFAULT_T_FILTER),
            t_measure=_get(node, p, "t_measure", float, DEFAULT_T_MEASURE),
        )
        if ibr.bus not in bus_ids:
            raise ScenarioValidationError(f"{p}.bus", f"references unknown bus {ibr.bus}")
        if ibr.droop_gain < 0:
            raise ScenarioValidationError(f"{p}.droop_gain", "must be >= 0")
        if ibr.t_filter <= 0:
            raise ScenarioValidationError(f"{p}.t_filter", "must be positive")
        if ibr.t_measure <= 0:
            raise ScenarioValidationError(f"{p}.t_measure", "must be positive")
        if ibr.bus not in set(gen_buses):
            raise ScenarioValidationError(
                f"{p}.bus", f"bus {ibr.bus} hosts no generator; IBR injections "
                            "attach to generator buses only")
        ibrs.append(ibr)
    ibr_buses = [c.bus for c in ibrs]
    if len(set(ibr_buses)) != len(ibr_buses):
        raise ScenarioValidationError("ibr", "more than one IBR controller on a bus")

    disturbances = []
    for i, node in enumerate(raw.get("disturbances", []) or []):
        p = f"disturbances[{i}]"
        _require_mapping(node, p)
        _check_keys(node, p, ["bus", "magnitude_mw"])
        dist = DisturbanceSpec(
            bus=_get(node, p, "bus", int, required=True),
            magnitude_mw=_get(node, p, "magnitude_mw", float, required=True),
        )
        if dist.bus not in bus_ids:
            raise ScenarioValidationError(f"{p}.bus", f"references unknown bus {dist.bus}")
        if dist.magnitude_mw == 0 or not math.isfinite(dist.magnitude_mw):
            raise ScenarioValidationError(f"{p}.magnitude_mw", "must be finite and nonzero")
        if dist.bus not in set(gen_buses):
            raise ScenarioValidationError(
                f"{p}.bus", f"bus {dist.bus} hosts no generator; disturbances "
                            "attach to generator buses only")
        disturbances.append(dist)

    studynode = raw.get("study", {}) or {}
    _require_mapping(studynode, "study")
    _check_keys(studynode, "study", ["omega_min", "omega_max", "points_per_decade",
                                     "horizon_s", "dt_s"])
    study = StudySettings(
        omega_min=_get(studynode, "study", "omega_min", float, DEFAULT_OMEGA_MIN),
        omega_max=_get(studynode, "study", "omega_max", float, DEFAULT_OMEGA_MAX),
        points_per_decade=_get(studynode, "study", "points_per_decade", int,
                               DEFAULT_POINTS_PER_DECADE),
        horizon_s=_get(studynode, "study", "horizon_s", float, DEFAULT_HORIZON_S),
        dt_s=_get(studynode, "study", "dt_s", float, DEFAULT_DT_S),
    )
    if study.omega_min <= 0 or study.omega_max <= study.omega_min:
        raise ScenarioValidationError("study", "need 0 < omega_min < omega_max")
    if study.points_per_decade < 2:
        raise ScenarioValidationError("study.points_per_decade", "must be >= 2")
    if study.horizon_s <= 0 or study.dt_s <= 0:
        raise ScenarioValidationError("study", "horizon_s and dt_s must be positive")

    scenario = Scenario(
        name=name,
        s_base_mva=s_base,
        f0_hz=f0,
        buses=tuple(buses),
        lines=tuple(lines),
        generators=tuple(generators),
        ibr_controllers=tuple(ibrs),
        disturbances=tuple(disturbances),
        study=study,
    )
    # connectivity is validated by the network builder; run it here so a
    # disconnected file is rejected at load time
    from . import network
    network.susceptance_matrix(scenario)
    return scenario
