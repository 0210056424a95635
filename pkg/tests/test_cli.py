import json

import numpy as np
import pandas as pd
import pytest

from secure_estimation import cli
from secure_estimation.components import attack_sim
from secure_estimation.constants import estimation_pipeline as const
from secure_estimation.exceptions.exception import GenerationFailureError
from secure_estimation.utils.main_utils.utils import load_numpy_array_data, read_yaml, write_system_file


@pytest.fixture
def system_file(tmp_path, sso_system):
    path = tmp_path / "system.json"
    write_system_file(str(path), sso_system)
    return str(path)


def write_json(path, content):
    path.write_text(json.dumps(content), encoding="utf-8")
    return str(path)


def only(out_dir, name):
    matches = list(out_dir.glob(f"*/{name}"))
    assert len(matches) == 1, matches
    return matches[0]


def test_estimate_writes_report_and_window(tmp_path, system_file):
    scenario = write_json(tmp_path / "scenario.json",
                          {"seed": 0, "r": 1, "s": 1, "T": 5, "attacked_inputs": [2], "attacked_outputs": [3]})
    out = tmp_path / "out"
    code = cli.main(["estimate", "--system", system_file, "--scenario", scenario, "--out", str(out),
                     "--dump-window"])
    assert code == const.EXIT_OK

    report = json.loads(only(out, const.REPORT_FILE_NAME).read_text(encoding="utf-8"))
    assert report["relative_error"] <= 1e-6
    assert len(report["b"]) <= 1 and len(report["c"]) <= 1
    assert report["sat_calls"] >= 1
    window = pd.read_csv(only(out, const.WINDOW_FILE_NAME))
    assert len(window) == 3 and window.columns[0] == "t"


def test_attack_free_scenario_reports_no_attacked_channel(tmp_path, system_file):
    scenario = write_json(tmp_path / "scenario.json",
                          {"seed": 4, "r": 1, "s": 1, "T": 3, "attacked_inputs": [], "attacked_outputs": []})
    out = tmp_path / "out"
    assert cli.main(["estimate", "--system", system_file, "--scenario", scenario, "--out", str(out),
                     "--method", "method1"]) == const.EXIT_OK
    report = json.loads(only(out, const.REPORT_FILE_NAME).read_text(encoding="utf-8"))
    assert report["b"] == [] and report["c"] == []
    assert report["sat_calls"] == 1


def test_malformed_scenario_exits_with_input_error(tmp_path, system_file, capsys):
    scenario = tmp_path / "scenario.json"
    scenario.write_text("{\"seed\": 0,", encoding="utf-8")
    code = cli.main(["estimate", "--system", system_file, "--scenario", str(scenario), "--out", str(tmp_path)])
    assert code == const.EXIT_PARSE_ERROR
    assert "JSON invalide" in capsys.readouterr().err


def test_missing_system_exits_with_input_error(tmp_path):
    assert cli.main(["estimate", "--out", str(tmp_path)]) == const.EXIT_PARSE_ERROR


def test_unknown_command_exits_with_input_error():
    assert cli.main(["solve"]) == const.EXIT_PARSE_ERROR


def test_estimate_on_non_sso_system_is_structural(tmp_path, non_sso_system):
    system = tmp_path / "system.json"
    write_system_file(str(system), non_sso_system)
    scenario = write_json(tmp_path / "scenario.json", {"seed": 0, "r": 1, "s": 1, "T": 2})
    code = cli.main(["estimate", "--system", str(system), "--scenario", scenario, "--out", str(tmp_path)])
    assert code == const.EXIT_STRUCTURAL


def test_check_sso_reports_witness_without_failing(tmp_path, capsys):
    system = write_json(tmp_path / "system.json",
                        {"A": [[1.0, 0.0], [0.0, 1.0]], "B": [[1.0], [1.0]], "C": [[0.0, 0.0]], "D": [[1.0]]})
    out = tmp_path / "out"
    assert cli.main(["check-sso", "--system", system, "-r", "0", "-s", "0", "--out", str(out)]) == const.EXIT_OK
    report = read_yaml(str(only(out, const.SSO_REPORT_FILE_NAME)))
    assert report["holds"] is False
    assert report["witness_gamma_u"] == [] and report["witness_gamma_y"] == [1]
    assert "non" in capsys.readouterr().out


def test_witness_scenarios_replay_to_identical_observations(tmp_path, non_sso_system):
    system = tmp_path / "system.json"
    write_system_file(str(system), non_sso_system)
    out = tmp_path / "out"
    assert cli.main(["witness", "--system", str(system), "-r", "1", "-s", "1", "--out", str(out)]) == const.EXIT_OK

    streams = []
    for name in const.WITNESS_FILE_NAMES:
        content = json.loads(only(out, name).read_text(encoding="utf-8"))
        assert len(content["attacked_inputs"]) <= 1 and len(content["attacked_outputs"]) <= 1
        scenario, x0, u_ctrl, T = attack_sim.prepare_run(
            non_sso_system, content["r"], content["s"], content["seed"], T=content["T"],
            attacked_inputs=[i - 1 for i in content["attacked_inputs"]],
            attacked_outputs=[i - 1 for i in content["attacked_outputs"]],
            x0=content["x0"], u_ctrl=content["u_ctrl"],
            w_stream=content["w_stream"], a_stream=content["a_stream"])
        streams.append((x0, attack_sim.observed_streams(non_sso_system, scenario, x0, u_ctrl, T)))

    (x1, (u1, y1)), (x2, (u2, y2)) = streams
    np.testing.assert_allclose(u1, u2, atol=1e-8)
    np.testing.assert_allclose(y1, y2, atol=1e-8)
    assert np.linalg.norm(x1 - x2) > 1e-6

    first, second = (pd.read_csv(only(out, name)) for name in const.WITNESS_WINDOW_FILE_NAMES)
    pd.testing.assert_frame_equal(first, second, atol=1e-8)


def test_witness_on_sso_system_exits_structural(tmp_path, system_file):
    assert cli.main(["witness", "--system", system_file, "-r", "1", "-s", "1",
                     "--out", str(tmp_path)]) == const.EXIT_STRUCTURAL


def test_export_opb_writes_pseudo_boolean_instance(tmp_path, system_file):
    scenario = write_json(tmp_path / "scenario.json", {"seed": 2, "r": 1, "s": 1, "T": 4})
    target = tmp_path / "state.opb"
    code = cli.main(["export-opb", "--system", system_file, "--scenario", scenario,
                     "--out", str(tmp_path), "--dump-opb", str(target)])
    assert code == const.EXIT_OK
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("* #variable= 10 ")
    assert lines[1].endswith("<= 1 ;") and lines[2].endswith("<= 1 ;")


def test_bench_random_writes_pinned_columns(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["bench-random", "--n", "3", "--m", "3", "--p-grid", "7", "--trials", "2",
                     "--out", str(out)])
    assert code == const.EXIT_OK
    frame = pd.read_csv(only(out, f"{const.BENCHMARK_DIR_NAME}/{const.RANDOM_BENCH_FILE_NAME}"))
    assert list(frame.columns) == ["n", "m", "p", "r", "s", "method", "mean_sat_calls",
                                   "mean_wall_time_s", "success_rate", "bruteforce_bound"]
    assert frame["method"].tolist() == ["method1", "method2"]


def test_bench_plant_generation_failure_exits_structural(tmp_path, monkeypatch):
    def failing_plant(seed, pol=None, max_redraws=0):
        raise GenerationFailureError(f"aucune usine (graine {seed})")

    monkeypatch.setattr(attack_sim, "plant_system", failing_plant)
    code = cli.main(["bench-plant", "--trials", "1", "--out", str(tmp_path)])
    assert code == const.EXIT_STRUCTURAL


def test_estimate_persists_the_ground_truth_trajectory(tmp_path, system_file, sso_system):
    scenario = write_json(tmp_path / "scenario.json", {"seed": 3, "r": 1, "s": 1, "T": 5})
    out = tmp_path / "out"
    assert cli.main(["estimate", "--system", system_file, "--scenario", scenario,
                     "--out", str(out)]) == const.EXIT_OK
    report = json.loads(only(out, const.REPORT_FILE_NAME).read_text(encoding="utf-8"))
    trajectory = load_numpy_array_data(str(only(out, const.GROUND_TRUTH_FILE_NAME)))
    assert trajectory.shape == (5 + 1, sso_system.n)
    np.testing.assert_allclose(trajectory[5 - sso_system.n], report["x_true"])


@pytest.mark.parametrize("flags, checked", [([], True), (["--no-sso-check"], False)])
def test_bench_random_records_whether_sso_was_checked(tmp_path, flags, checked):
    out = tmp_path / "out"
    code = cli.main(["bench-random", "--n", "3", "--m", "3", "--p-grid", "7", "--trials", "2",
                     "--out", str(out)] + flags)
    assert code == const.EXIT_OK
    metadata = read_yaml(str(only(out, f"{const.BENCHMARK_DIR_NAME}/{const.METADATA_FILE_NAME}")))
    assert metadata["sso_checked"] is checked


@pytest.mark.slow
def test_check_sso_on_the_plant(tmp_path):
    path = tmp_path / "plant.json"
    write_system_file(str(path), attack_sim.plant_system(seed=0))
    out = tmp_path / "out"
    assert cli.main(["check-sso", "--system", str(path), "-r", "2", "-s", "4", "--out", str(out)]) == const.EXIT_OK
    report = read_yaml(str(only(out, const.SSO_REPORT_FILE_NAME)))
    assert report["holds"] is True
    assert report["subsets_checked"] > 0
