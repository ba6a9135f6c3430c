import numpy as np
import pytest

from connmaint.cli import main

QUICK = """
dims 2 2 2
positions 0.45 0.0 -0.225 0.3897 -0.225 -0.3897
targets 0.78 0.0 -0.39 0.6755 -0.39 -0.6755
priority 0 1 2
range 2.0
sigma 2.0
taper 0.4
epsilon 0.1
v_nom 0.5
k_frac 0.75
target_radius 0.15
dt 0.01
max_steps 400
solver_step 0.02
solver_iters 2000
kkt_tol 1e-5
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "quick.scn"
    path.write_text(QUICK)
    return path


def test_simulate_success(tmp_path, scenario_file, capsys):
    out = tmp_path / "log.csv"
    code = main(
        ["simulate", "--scenario", str(scenario_file), "--controller", "agg",
         "--out", str(out)]
    )
    assert code == 0
    assert out.exists()
    stdout = capsys.readouterr().out
    assert "termination: all_reached" in stdout
    header = out.read_text().splitlines()[0]
    assert header.startswith("t,x_0")


def test_simulate_incomplete_is_violation(tmp_path, scenario_file):
    out = tmp_path / "log.csv"
    code = main(
        ["simulate", "--scenario", str(scenario_file), "--controller", "agg",
         "--max-steps", "3", "--out", str(out)]
    )
    assert code == 1
    assert len(out.read_text().splitlines()) == 4


def test_simulate_missing_scenario(tmp_path):
    code = main(
        ["simulate", "--scenario", str(tmp_path / "absent.scn"), "--controller",
         "agg", "--out", str(tmp_path / "log.csv")]
    )
    assert code == 2


def test_simulate_bad_flag_exits_2(tmp_path, scenario_file):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--scenario", str(scenario_file), "--controller", "bogus",
              "--out", str(tmp_path / "log.csv")])
    assert exc.value.code == 2


def test_probe_prints_slack(scenario_file, capsys):
    code = main(["probe", "--scenario", str(scenario_file)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "slack:" in stdout
    assert "g_" not in stdout  # labels are printed bare
    slack = float(stdout.strip().splitlines()[-1].split()[-1])
    assert slack > 0.0


def test_report_runs_and_renders(tmp_path, scenario_file):
    out_dir = tmp_path / "report"
    code = main(
        ["report", "--scenario", str(scenario_file), "--controller", "agg",
         "--out-dir", str(out_dir)]
    )
    assert code == 0
    assert (out_dir / "agg.csv").exists()
    for name in ("agg_eigenvalues.png", "agg_inputs.png", "agg_constraints.png"):
        assert (out_dir / name).stat().st_size > 0


def test_report_from_existing_log(tmp_path, scenario_file):
    out_dir = tmp_path / "report"
    main(["simulate", "--scenario", str(scenario_file), "--controller", "str",
          "--out", str(tmp_path / "run.csv")])
    code = main(
        ["report", "--log", str(tmp_path / "run.csv"), "--epsilon", "0.1",
         "--out-dir", str(out_dir)]
    )
    assert code == 0
    assert (out_dir / "run_eigenvalues.png").exists()


def test_report_needs_inputs(tmp_path):
    assert main(["report", "--out-dir", str(tmp_path)]) == 2


def test_log_roundtrip_matches(tmp_path, scenario_file):
    from connmaint.report import log_from_csv
    from connmaint.sim import load_scenario, run
    from connmaint.controllers import ControllerKind

    out = tmp_path / "log.csv"
    main(["simulate", "--scenario", str(scenario_file), "--controller", "agg",
          "--out", str(out)])
    loaded = log_from_csv(out)
    direct = run(load_scenario(scenario_file), ControllerKind.AGGREGATE)
    assert len(loaded) == len(direct)
    assert loaded.g_labels == direct.g_labels
    np.testing.assert_allclose(loaded.eigenvalues, direct.eigenvalues, rtol=1e-8, atol=1e-12)
    np.testing.assert_array_equal(loaded.priority, direct.priority)
