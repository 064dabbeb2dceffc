import json
from pathlib import Path

import pytest

from basinuq.scenario import load_scenario, scenario_from_dict

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def single_layer_cfg():
    return load_scenario(SCENARIOS / "single_layer.json")


@pytest.fixture(scope="session")
def multilayer_cfg():
    return load_scenario(SCENARIOS / "multilayer.json")


@pytest.fixture(scope="session")
def multilayer_case_a_cfg():
    return load_scenario(SCENARIOS / "multilayer_case_a.json")


def tiny_scenario(**overrides):
    """Small, fast synthetic scenario for solver unit tests."""
    doc = {
        "name": "tiny",
        "materials": {
            "sand": {
                "rho_s": 2648.0, "c_s": 741.0, "lambda_s": 3.0,
                "phi0": 0.5, "phi_f": 0.14,
                "k1": 14.9, "k2": 1.94, "beta": 7.0e-8,
                "quartz_active": False,
            }
        },
        "fluid": {
            "rho_l": 999.0, "rho_sea": 1025.0, "mu_l": 1.001e-3,
            "c_l": 4186.0, "lambda_l": 0.6,
        },
        "quartz": {
            "rho_q": 2650.0, "m_q": 6.008e-2, "a0": 1.0e4,
            "a_q": 5.0e-19, "b_q": 0.022, "t_c": 373.15,
        },
        "deposition": [{"material": "sand", "duration": 1.0, "rate": 40.0}],
        "boundary": {"h_sea": 200.0, "t_top": 295.15, "g_t": 0.024},
        "mesh": {"cell_size": 10.0, "alpha_steps": 2},
    }
    doc.update(overrides)
    return scenario_from_dict(doc)
