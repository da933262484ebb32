import pytest
from hypothesis import HealthCheck, settings

import freqstab as fs

settings.register_profile(
    "ci", derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def high_inertia():
    return fs.load_bundled_scenario("high_inertia")


@pytest.fixture(scope="session")
def low_inertia():
    return fs.load_bundled_scenario("low_inertia")


@pytest.fixture(scope="session")
def high_droop():
    return fs.load_bundled_scenario("high_droop_bus3")


@pytest.fixture(scope="session")
def mitigated():
    return fs.load_bundled_scenario("mitigated_allocation")


@pytest.fixture(scope="session")
def all_scenarios(high_inertia, low_inertia, high_droop, mitigated):
    return {
        "high_inertia": high_inertia,
        "low_inertia": low_inertia,
        "high_droop_bus3": high_droop,
        "mitigated_allocation": mitigated,
    }


def single_machine_scenario(h_seconds=5.0, damping=0.0, droop=0.0,
                            t_filter=0.25, t_measure=0.25, disturbance_mw=100.0):
    """One machine, no lines: the textbook swing-equation case."""
    ibr = []
    if droop > 0:
        ibr.append({"bus": 1, "droop_gain": droop,
                    "t_filter": t_filter, "t_measure": t_measure})
    raw = {
        "system": {"s_base_mva": 1000.0, "f0_hz": 50.0, "name": "single"},
        "buses": [{"id": 1, "kinetic_energy_gws": h_seconds,
                   "rated_power_mw": 1000.0}],
        "lines": [],
        "generators": [{"bus": 1, "kind": "thermal", "damping": damping,
                        "transient_reactance": 0.3}],
        "ibr": ibr,
        "disturbances": [{"bus": 1, "magnitude_mw": disturbance_mw}],
    }
    return fs.scenario.scenario_from_dict(raw)


def two_bus_scenario(length_km=100.0, reactance=0.3, voltage=400.0,
                     s_base=1000.0):
    raw = {
        "system": {"s_base_mva": s_base, "f0_hz": 50.0, "name": "pair"},
        "buses": [
            {"id": 1, "kinetic_energy_gws": 10.0, "rated_power_mw": 2000.0,
             "voltage_kv": voltage},
            {"id": 2, "kinetic_energy_gws": 5.0, "rated_power_mw": 1000.0,
             "voltage_kv": voltage},
        ],
        "lines": [{"from_bus": 1, "to_bus": 2, "length_km": length_km,
                   "reactance_ohm_per_km": reactance}],
        "generators": [
            {"bus": 1, "kind": "thermal", "damping": 1.0},
            {"bus": 2, "kind": "thermal", "damping": 1.0},
        ],
        "ibr": [{"bus": 1, "droop_gain": 20.0}],
        "disturbances": [{"bus": 2, "magnitude_mw": 100.0}],
    }
    return fs.scenario.scenario_from_dict(raw)
