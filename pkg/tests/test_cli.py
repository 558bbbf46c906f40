import csv
import json
import re

import pytest

from q1dshock.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, main
from q1dshock.config import SCENARIO_DIR


def scenario_file(tmp_path, name="stable_iso", **values):
    """Copy a bundled scenario, replacing `key = ...` lines by the given values."""
    text = (SCENARIO_DIR / f"{name}.toml").read_text()
    for key, value in values.items():
        text, count = re.subn(rf"(?m)^{key} = .*$", f"{key} = {value}", text)
        assert count == 1, key
    path = tmp_path / f"{name}_small.toml"
    path.write_text(text)
    return path


def small_file(tmp_path, name="stable_iso", **values):
    base = dict(n_cells=100, n_nodes=100, t_end_transits=1.0, identity_transits=2.0)
    base.update(values)
    return scenario_file(tmp_path, name, **base)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_steady_writes_profile_and_summary(tmp_path):
    out = tmp_path / "out"
    assert main(["steady", "--config", "stable_iso", "--out", str(out), "--quiet",
                 "--samples", "51"]) == EXIT_OK
    header, rows = read_csv(out / "steady.csv")
    assert header == ["x", "side", "rho", "u", "a", "mach"]
    assert len(rows) == 51
    assert {r[1] for r in rows} == {"minus", "plus"}
    # supersonic before the shock, subsonic after
    assert all(float(r[5]) > 1 for r in rows if r[1] == "minus")
    assert all(float(r[5]) < 1 for r in rows if r[1] == "plus")
    summary = json.loads((out / "steady.json").read_text())
    assert summary["x0"] == pytest.approx(2.0, abs=1e-8)
    assert summary["linearized_shock_rate"] > 0


def test_out_may_name_a_file(tmp_path):
    target = tmp_path / "nested" / "profile.csv"
    assert main(["steady", "--config", "stable_iso", "--out", str(target), "--quiet"]) == EXIT_OK
    assert target.exists() and target.with_suffix(".json").exists()


def test_simulate_outputs(tmp_path):
    cfg = small_file(tmp_path, t_end_transits=3.0, snapshot_times="[0.0, 1.0]")
    out = tmp_path / "sim"
    code = main(["simulate", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert code in (EXIT_OK, EXIT_INCONCLUSIVE)
    header, rows = read_csv(out / "trace.csv")
    assert header == ["t", "s", "sdot", "lax_ok", "E0"]
    assert len(rows) > 10
    summary = json.loads((out / "summary.json").read_text())
    assert {"lambda_fit", "stable", "stop_reason", "lax_all", "transit"} <= set(summary)
    assert (out / "snapshot_t0.csv").exists() and (out / "snapshot_t1.csv").exists()


def test_linear_energy_ledger(tmp_path):
    cfg = small_file(tmp_path)
    out = tmp_path / "lin"
    assert main(["linear-energy", "--config", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    header, rows = read_csv(out / "ledger.csv")
    assert header == ["t", "E", "D", "E_plus_D_minus_E0"]
    summary = json.loads((out / "ledger.json").read_text())
    assert summary["n_nodes"] == 100 and summary["identity_residual"] < 1e-2
    assert float(rows[0][2]) == 0.0


def test_spectrum_json(tmp_path):
    cfg = small_file(tmp_path)
    out = tmp_path / "spec"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out), "--quiet"]) == EXIT_OK
    rep = json.loads((out / "spectrum.json").read_text())
    assert 0 < rep["radius"] < 1 and rep["T"] > 0


def test_spectrum_explicit_horizon(tmp_path):
    cfg = small_file(tmp_path)
    out = tmp_path / "spec"
    assert main(["spectrum", "--config", str(cfg), "--out", str(out), "--quiet",
                 "--T", "1.5", "--n", "60"]) == EXIT_OK
    assert json.loads((out / "spectrum.json").read_text())["T"] == pytest.approx(1.5, rel=0.05)


def test_short_experiment_is_inconclusive(tmp_path):
    # half a transit is too short for any shrinkage verdict
    cfg = small_file(tmp_path, t_end_transits=0.5, transient_transits=0.0)
    out = tmp_path / "exp"
    assert main(["stability-experiment", "--config", str(cfg), "--out", str(out),
                 "--quiet"]) == EXIT_INCONCLUSIVE
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "Inconclusive" and report["reason"]
    assert (out / "trace.csv").exists()


def test_invalid_config_exits_with_error(tmp_path, capsys):
    cfg = scenario_file(tmp_path, n_cells=3)
    assert main(["steady", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_missing_config_exits_with_error(tmp_path):
    assert main(["steady", "--config", str(tmp_path / "nope.toml"),
                 "--out", str(tmp_path)]) == EXIT_ERROR


def test_steady_failure_exits_with_error(tmp_path):
    cfg = scenario_file(tmp_path, x0_design=9.0)
    assert main(["steady", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == EXIT_ERROR


def test_quiet_suppresses_stdout(tmp_path, capsys):
    main(["steady", "--config", "stable_iso", "--out", str(tmp_path), "--quiet"])
    assert capsys.readouterr().out == ""
    main(["steady", "--config", "stable_iso", "--out", str(tmp_path)])
    assert "x0" in capsys.readouterr().out


def test_seed_changes_random_perturbation(tmp_path):
    cfg = small_file(tmp_path, bump='"random"', epsilon=0.01, x0_shift=0.0, t_end_transits=0.2)
    traces = []
    for seed in ("1", "1", "2"):
        out = tmp_path / f"seed{len(traces)}"
        main(["simulate", "--config", str(cfg), "--out", str(out), "--quiet", "--seed", seed])
        traces.append((out / "trace.csv").read_text())
    assert traces[0] == traces[1]
    assert traces[0] != traces[2]


def test_sweep_with_vary(tmp_path):
    cfg = small_file(tmp_path)
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(cfg), "--vary", "perturbation.x0_shift=0.02,0.04",
                 "--out", str(out), "--quiet"])
    assert code in (EXIT_OK, EXIT_INCONCLUSIVE)
    header, rows = read_csv(out / "sweep.csv")
    assert header[:2] == ["name", "verdict"]
    assert [r[0] for r in rows] == [f"stable_iso[perturbation.x0_shift={v}]" for v in ("0.02", "0.04")]
    assert len(json.loads((out / "sweep.json").read_text())) == 2


def test_sweep_bad_vary_spec_is_error(tmp_path):
    cfg = small_file(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--vary", "perturbation.x0_shift",
                 "--out", str(tmp_path), "--quiet"]) == EXIT_ERROR


def test_refine_table(tmp_path):
    cfg = small_file(tmp_path, n_cells=50, n_nodes=50)
    out = tmp_path / "ref"
    assert main(["refine", "--config", str(cfg), "--out", str(out), "--quiet",
                 "--levels", "3", "--no-simulation"]) == EXIT_OK
    header, rows = read_csv(out / "refine.csv")
    assert header[:3] == ["level", "n_cells", "n_nodes"]
    assert [int(r[1]) for r in rows] == [50, 100, 200]
    table = json.loads((out / "refine.json").read_text())
    assert len(table["order_identity_residual"]) == 2


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as info:
        main(["fly"])
    assert info.value.code != 0
