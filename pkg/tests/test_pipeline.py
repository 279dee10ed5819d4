import json
from pathlib import Path

import numpy as np
import pytest

from holomera.config import load_config
from holomera.pipeline import StageError, load_shots, manifest_path, run_pipeline

SMOKE = Path(__file__).resolve().parent.parent / "configs" / "smoke.yaml"


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    return load_config(SMOKE), root, run_pipeline(load_config(SMOKE), root)


def test_artifacts_written(smoke):
    _, root, res = smoke
    for rel in ["config.json", "reference/mps.npz", "reference/correlations.json", "networks/mera_d1/split.json",
                "networks/gmera_d1/optimized.npz", "networks/gmera_d1/trace.csv", "circuits/mera_d1.circuit.json",
                "circuits/mera_d1.qasm", "exact/gmera_d1.json", "shots/mera_d1__p1_0.001_p2_0.01.npz",
                "tables/mera_d1__p1_0_p2_0.csv", "reports/gmera_d1__p1_0_p2_0.json", "summary.json",
                "summary.csv", "plot.json"]:
        assert (root / rel).is_file(), rel
    assert manifest_path(root / "reference/mps.npz").is_file()
    assert len(res.summary["rows"]) == 4
    assert all(e.computed for e in res.events)


def test_trace_is_monotone_and_has_no_timing(smoke):
    _, root, _ = smoke
    lines = (root / "networks/mera_d1/trace.csv").read_text().splitlines()
    assert lines[0] == "cycle,overlap"
    vals = [float(x.split(",")[1]) for x in lines[1:]]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_summary_contents(smoke):
    cfg, root, res = smoke
    rows = {(r["network"], r["noise"]): r for r in res.summary["rows"]}
    exact_ed = json.loads(manifest_path(root / "reference/mps.npz").read_text()).get("ed_energy")
    assert exact_ed is not None and abs(res.summary["reference_energy"] - exact_ed) < 1e-8
    for r in rows.values():
        assert r["n_shots"] == 200 and 0 < r["reference_fidelity"] <= 1 + 1e-12
    # noiseless sampling agrees with the exact circuit values
    assert rows[("mera_d1", "p1_0_p2_0")]["max_abs_z_vs_exact"] < 5


def test_shot_file(smoke):
    _, root, _ = smoke
    rec = load_shots(root / "shots/gmera_d1__p1_0_p2_0.npz")
    assert rec.values.shape == (200, 8) and set(np.unique(rec.values)) <= {-1, 1} and rec.basis == "X"


def test_rerun_is_a_no_op(smoke):
    cfg, root, _ = smoke
    before = {p: p.read_bytes() for p in root.rglob("*") if p.is_file() and p.name != "config.json"}
    res = run_pipeline(cfg, root)
    assert res.computed() == []
    after = {p: p.read_bytes() for p in before}
    assert after == before


def test_changes_recompute_only_downstream(tmp_path):
    cfg = load_config(SMOKE)
    run_pipeline(cfg, tmp_path)
    cfg.sampling.n_shots = 100
    res = run_pipeline(cfg, tmp_path)
    stages = {e.stage for e in res.computed()}
    assert stages == {"simulate", "analyze"}
    assert not any(e.item.endswith(":exact") for e in res.computed())
    # corrupting an artifact triggers recomputation of that stage
    t = tmp_path / "tables/mera_d1__p1_0_p2_0.csv"
    t.write_text("garbage\n")
    res = run_pipeline(cfg, tmp_path)
    assert [(e.stage, e.item) for e in res.computed()] == [("analyze", "mera_d1__p1_0_p2_0")]
    assert t.read_text().startswith("kind,index")
    assert len(run_pipeline(cfg, tmp_path, force=True).computed()) == len(res.events)


def test_outputs_are_byte_identical_across_runs(smoke, tmp_path):
    cfg, root, _ = smoke
    run_pipeline(load_config(SMOKE), tmp_path)
    for rel in ["summary.csv", "plot.json", "tables/gmera_d1__p1_0.001_p2_0.01.csv",
                "networks/gmera_d1/trace.csv", "circuits/gmera_d1.qasm"]:
        assert (tmp_path / rel).read_bytes() == (root / rel).read_bytes(), rel


def test_until_stops_early(tmp_path):
    res = run_pipeline(load_config(SMOKE), tmp_path, until="compile")
    assert (tmp_path / "circuits/gmera_d1.circuit.json").exists()
    assert not (tmp_path / "shots").exists() and not res.summary
    with pytest.raises(ValueError):
        run_pipeline(load_config(SMOKE), tmp_path, until="plot")


def test_stage_errors_are_wrapped(tmp_path):
    cfg = load_config(SMOKE)
    cfg.dmrg.sweeps, cfg.dmrg.strict = 1, True
    with pytest.raises(StageError) as info:
        run_pipeline(cfg, tmp_path)
    assert info.value.stage == "prepare"
