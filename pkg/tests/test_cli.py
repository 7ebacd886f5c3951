"""Command-line interface: formats, exit codes, determinism, sweeps."""

import json
import os

import pytest

from gwboot.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_pc_json_regular(capsys):
    code, out, _ = run_cli(capsys, "pc", "--dist", "regular:b=3", "--r", "2", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload["pc"] == pytest.approx(1 / 9, abs=1e-12)
    assert payload["r"] == 2
    assert payload["spec"] == "regular:b=3"
    assert payload["method"] == "closed-form"


def test_pc_json_roundtrip_bytes(capsys):
    code, out, _ = run_cli(capsys, "pc", "--dist", "geometric:b=3", "--r", "2", "--format", "json")
    assert code == 0
    again = json.dumps(json.loads(out), sort_keys=True, indent=2) + "\n"
    assert again == out


def test_pc_mass_below_threshold(capsys):
    code, out, _ = run_cli(capsys, "pc", "--dist", "pmf:1=0.5,3=0.5", "--r", "2", "--format", "json")
    assert code == 0
    assert json.loads(out)["pc"] == 1.0


def test_pc_table_output(capsys):
    code, out, _ = run_cli(capsys, "pc", "--dist", "regular:b=3", "--r", "2")
    assert code == 0
    assert "pc:" in out and "0.1111111111111" in out


def test_parse_error_exit_code(capsys):
    code, _, err = run_cli(capsys, "pc", "--dist", "nonsense:q=1", "--r", "2")
    assert code == 2
    assert "error" in err


def test_precondition_exit_code(capsys):
    code, _, err = run_cli(capsys, "pc", "--dist", "regular:b=3", "--r", "1")
    assert code == 3
    assert "error" in err


def test_bounds_table(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--dist", "regular:b=10", "--r", "2")
    assert code == 0
    for name in ("lb_second_moment", "lb_fort", "lb_branching_exact", "ub_fort", "ub_regular_rd"):
        assert name in out


def test_bounds_heavy_vacuous_flags(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--dist", "heavy:r=2", "--r", "2", "--format", "json")
    assert code == 0
    payload = json.loads(out)
    flags = {e["name"]: e["valid"] for e in payload["bounds"]}
    assert flags["lb_branching_exact"] is False
    assert payload["pc"]["pc"] <= 1e-6


def test_simulate_p0(capsys):
    code, out, _ = run_cli(
        capsys, "simulate", "--dist", "regular:b=3", "--r", "2", "--p", "0",
        "--n", "3", "--reps", "200", "--seed", "7", "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    assert payload["qhat"] == 1.0 and payload["se"] == 0.0


def test_simulate_replay_identical_bytes(capsys):
    args = ("simulate", "--dist", "geometric:b=3", "--r", "2", "--p", "0.2",
            "--n", "4", "--reps", "500", "--seed", "42", "--format", "csv")
    code1, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code1 == code2 == 0
    assert out1 == out2
    header = out1.splitlines()[0]
    assert header == "spec,r,p,n,N,seed,qhat,se,q_exact,z"


def test_simulate_generates_and_prints_seed(capsys):
    code, out, err = run_cli(
        capsys, "simulate", "--dist", "regular:b=3", "--r", "2", "--p", "0.1",
        "--n", "2", "--reps", "50", "--format", "json",
    )
    assert code == 0
    assert "seed:" in err
    assert json.loads(out)["seed"] >= 0


def test_sweep_b_grid_scaled_column(capsys, tmp_path):
    out_file = tmp_path / "sweep.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "--dist", "regular:b=3", "--r", "2",
        "--b-grid", "3:30:1", "--out", str(out_file),
    )
    assert code == 0
    lines = out_file.read_text().splitlines()
    header = lines[0].split(",")
    idx = header.index("pc_times_2b2")
    vals = [float(row.split(",")[idx]) for row in lines[1:]]
    # pc(T_b,2) * 2b^2 -> 1 from above as b grows
    assert vals[-1] < vals[0]
    assert abs(vals[-1] - 1.0) < 0.15


def test_sweep_empty_grid_header_only(capsys):
    code, out, _ = run_cli(
        capsys, "sweep", "--dist", "regular:b=3", "--r", "2", "--b-grid", "5:4:1",
    )
    assert code == 0
    assert out.strip() == "spec,r,b,pc,x_star,M,err,pc_times_2b2,method,status"


def test_sweep_p_grid_qlimit_drops(capsys):
    code, out, _ = run_cli(
        capsys, "sweep", "--dist", "regular:b=3", "--r", "2", "--p-grid", "0:0.3:0.02",
    )
    assert code == 0
    lines = out.splitlines()
    cols = lines[0].split(",")
    qi = cols.index("qlimit")
    qlims = [float(r.split(",")[qi]) for r in lines[1:]]
    assert all(qlims[i + 1] <= qlims[i] + 1e-12 for i in range(len(qlims) - 1))
    assert qlims[0] == pytest.approx(1.0)
    assert qlims[-1] < 1e-6  # p = 0.3 is far above pc = 1/9


def test_sweep_rejects_double_grid(capsys):
    code, _, err = run_cli(
        capsys, "sweep", "--dist", "regular:b=3", "--r", "2",
        "--p-grid", "0:1:0.5", "--b-grid", "3:4:1",
    )
    assert code == 2
    assert "error" in err


def test_sweep_row_failure_recorded_not_fatal(capsys):
    # b = 2 is invalid for the geometric family; the row reports the error
    code, out, _ = run_cli(
        capsys, "sweep", "--dist", "geometric:b=3", "--r", "2", "--b-grid", "2:4:1",
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 4
    assert "error" in lines[1]
    assert lines[2].endswith("ok") and lines[3].endswith("ok")


def test_out_file_atomic_write(capsys, tmp_path):
    target = tmp_path / "res.json"
    code, _, _ = run_cli(
        capsys, "pc", "--dist", "regular:b=4", "--r", "2",
        "--format", "json", "--out", str(target),
    )
    assert code == 0
    payload = json.loads(target.read_text())
    assert payload["pc"] == pytest.approx(
        1 - (3 ** 5) / (4 ** 3 * 2 ** 2), abs=1e-12
    )
    leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".gwboot-")]
    assert leftovers == []


def test_sweep_p_grid_with_replicates(capsys):
    code, out, err = run_cli(
        capsys, "sweep", "--dist", "regular:b=3", "--r", "2",
        "--p-grid", "0.1:0.3:0.1", "--n", "3", "--reps", "400", "--seed", "5",
        "--format", "csv",
    )
    assert code == 0
    lines = out.splitlines()
    cols = lines[0].split(",")
    for name in ("qhat", "se", "q_exact", "z", "qlimit"):
        assert name in cols
    assert len(lines) == 4
    qi, qe = cols.index("qhat"), cols.index("q_exact")
    for row in lines[1:]:
        parts = row.split(",")
        assert abs(float(parts[qi]) - float(parts[qe])) < 0.12


def test_budget_env_variable(capsys, monkeypatch):
    monkeypatch.setenv("GWBOOT_BUDGET", "10")
    code, _, err = run_cli(
        capsys, "simulate", "--dist", "regular:b=3", "--r", "2", "--p", "0.2",
        "--n", "3", "--reps", "5", "--seed", "1",
    )
    # budget of 10 vertices cannot hold the 40-vertex tree: every replicate
    # is truncated, which is a precondition failure
    assert code == 3
    assert "budget" in err


def test_bounds_json_roundtrip_bytes(capsys):
    code, out, _ = run_cli(
        capsys, "bounds", "--dist", "geometric:b=4", "--r", "2", "--format", "json",
    )
    assert code == 0
    again = json.dumps(json.loads(out), sort_keys=True, indent=2) + "\n"
    assert again == out


def test_inconsistency_exit_code(capsys, monkeypatch):
    import gwboot.cli as cli_mod

    monkeypatch.setattr(
        cli_mod.bounds_mod, "sandwich_violations", lambda rep, tol=1e-8: ["forced"]
    )
    code, _, err = run_cli(capsys, "bounds", "--dist", "regular:b=5", "--r", "2")
    assert code == 4
    assert "sandwich violation" in err


def test_budget_warning(capsys):
    # deterministic tree of 341 vertices fits the budget of 400, but the
    # expected size 4^4 = 256 exceeds half of it, so the warning fires
    code, _, err = run_cli(
        capsys, "simulate", "--dist", "regular:b=4", "--r", "2", "--p", "0.3",
        "--n", "4", "--reps", "10", "--seed", "1", "--budget", "400",
    )
    assert code == 0
    assert "warning" in err
