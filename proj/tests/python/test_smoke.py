import json
import math
import pathlib

import pytest

import loadopf

DATA = pathlib.Path(__file__).resolve().parents[2] / "data"


def test_classify_tabulated_zip():
    r = loadopf.classify("zip", [1.1392, -0.19632, 0.4767, 0.15877, -0.16338, -0.50372])
    assert r["p_class"] == "impedance-type"
    assert max(r["p_margins"].values()) == pytest.approx(0.4767 - 2 * 0.16338, abs=1e-12)


def test_eval_power_identity():
    e = loadopf.eval_load("big", [0.5, -0.1, 0.3, -0.2], 0.98, -0.05)
    assert e["p"] == pytest.approx(0.98 * e["i_r"] - 0.05 * e["i_i"], abs=1e-14)
    assert loadopf.parameter_names("big") == ["alpha_r", "alpha_i", "g", "b"]


def test_pf_and_opf_on_bundled_case():
    case = DATA / "case2_reconstruction.json"
    pf = loadopf.pf(str(case))
    opf = loadopf.opf(json.loads(case.read_text()))
    assert pf and opf
    assert "objective" in json.dumps(opf)


def test_sweep_and_gap():
    seg = str(DATA / "case5_segmented.json")
    sweep = loadopf.sweep(seg, kinds=["pq", "y"])
    assert json.dumps(sweep).count('"ok"') == 24
    gap = loadopf.gap(seg, "pq", "pq")
    deltas = [row["delta"] for row in gap["rows"]]
    assert len(deltas) == 12
    assert all(abs(d) < 1e-5 for d in deltas)


def test_fit_bundled_series():
    r = loadopf.fit(DATA / "meas_bus2.csv", 2, kind="big", segments=3)
    assert len(r["segments"]) == 3
    assert all(math.isfinite(s["rms"]) for s in r["segments"])


def test_errors_carry_a_code():
    with pytest.raises(loadopf.Error) as info:
        loadopf.pf('{"buses": []}')
    assert info.value.code in {"ParseError", "NoSlack", "ValidationError"}
