import json
import os
from pathlib import Path

import numpy as np
import pytest

import hmpc

SOURCE = Path(os.environ.get("HMPC_SOURCE_DIR", Path(__file__).resolve().parents[2]))
TINY = SOURCE / "tests" / "data" / "tiny_line.json"


def test_load_and_round_trip():
    s = hmpc.load_scenario(str(TINY))
    assert s.name == "tiny_line"
    assert s.days == 2
    assert hmpc.parse_scenario(s.to_json()).to_json() == s.to_json()
    battery = hmpc.battery_line_scenario()
    assert battery.plant.n_machines == 7
    assert battery.to_json() == (SOURCE / "scenarios" / "battery_line.json").read_text()


def test_invalid_scenario_raises_with_line():
    text = TINY.read_text().replace('"days": 2,', '"days": 2,\n    "weeks": 1,')
    with pytest.raises(hmpc.ScenarioError, match=r"/horizon/weeks"):
        hmpc.parse_scenario(text, "bad.json")


def test_plant_functions():
    plant = hmpc.battery_line_scenario().plant
    h = np.ones(7)
    assert np.allclose(plant.effective_capacity(h), plant.as_new_capacity)
    assert plant.step_energy(np.zeros(7), h) == 0.0
    h2 = plant.step_health(h, np.full(7, 40.0), np.zeros(7))
    assert np.allclose(h2, 0.98)


def test_closed_loop_and_kpis(tmp_path):
    s = hmpc.load_scenario(str(TINY))
    r = hmpc.run_closed_loop(s)
    assert r.hours == 12
    assert r.u.shape == (2, 12)
    assert r.x.shape == (2, 13)
    k = r.kpis()
    assert k["total_cost"] == pytest.approx(k["energy_cost"] + k["pm_cost"])
    assert all(abs(day[0] - 16.0) < 1e-6 for day in r.shipped)
    files = r.write_bundle(str(tmp_path / "run"))
    assert "kpi.json" in files
    saved = json.loads((tmp_path / "run" / "kpi.json").read_text())
    assert saved["total_cost"] == k["total_cost"]

    s.controller = "baseline"
    b = hmpc.run_closed_loop(s).kpis()
    rows = hmpc.compare_reports(b, k)
    assert [row[0] for row in rows][:3] == ["Energy Cost ($)", "PM Cost ($)", "Total Cost ($)"]


def test_plan_day():
    s = hmpc.load_scenario(str(TINY))
    out = hmpc.plan_day(s)
    assert out["plan"].shape == (2, 6)
    assert out["stop"] == "converged"
    lb, ub = out["lower_bounds"], out["upper_bounds"]
    assert all(a <= b + 1e-9 for a, b in zip(lb, lb[1:]))
    assert all(a >= b - 1e-9 for a, b in zip(ub, ub[1:]))
    assert json.loads(out["json"])["hours"] == 6


def test_solve_qp_kkt_example():
    # minimize x^2 subject to x >= 1
    sol = hmpc.solve_qp(
        P=np.array([[2.0]]), q=np.zeros(1),
        A_eq=np.zeros((0, 1)), b_eq=np.zeros(0),
        A_in=np.array([[1.0]]), lower=np.array([1.0]), upper=np.array([np.inf]),
    )
    assert sol["status"] == "optimal"
    assert sol["x"][0] == pytest.approx(1.0, abs=1e-7)
    assert sol["duals_in_lower"][0] == pytest.approx(2.0, abs=1e-6)


def test_synth_prices_deterministic():
    a = hmpc.synth_prices(24, 0.03, 0.09, {17, 18, 19}, 0)
    assert a == hmpc.synth_prices(24, 0.03, 0.09, {17, 18, 19}, 0)
    assert sum(p >= 0.081 for p in a) == 3
