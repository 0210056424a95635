import math

import numpy as np
import pandas as pd
import pytest

from secure_estimation.entity.config_entity import (EstimationPipelineConfig, PlantBenchmarkConfig,
                                                    RandomBenchmarkConfig)
from secure_estimation.exceptions.exception import InvalidInputError
from secure_estimation.pipelines.benchmark_pipeline import (PlantBenchmark, RandomBenchmark, TrialOutcome,
                                                            relative_error, summarize)
from secure_estimation.utils.main_utils.utils import read_yaml


def test_summarize_averages_successful_trials():
    outcomes = [
        TrialOutcome("method1", 4, 0.2, True),
        TrialOutcome("method1", 6, 0.4, True),
        TrialOutcome("method2", 2, 0.1, True),
        TrialOutcome("method2", 0, float("nan"), False),
    ]
    frame = summarize(outcomes, ("method1", "method2")).set_index("method")
    assert frame.loc["method1", "mean_sat_calls"] == pytest.approx(5.0)
    assert frame.loc["method1", "success_rate"] == pytest.approx(1.0)
    assert frame.loc["method2", "mean_wall_time_s"] == pytest.approx(0.1)
    assert frame.loc["method2", "success_rate"] == pytest.approx(0.5)
    assert frame.loc["method2", "trials"] == 2


def test_relative_error_is_scaled_by_state_norm():
    assert relative_error(np.array([2.0, 0.0]), np.array([4.0, 0.0])) == pytest.approx(0.5)


def test_benchmark_configs_reject_zero_trials(tmp_path):
    with pytest.raises(InvalidInputError):
        RandomBenchmarkConfig(EstimationPipelineConfig(str(tmp_path)), trials=0)
    with pytest.raises(InvalidInputError):
        PlantBenchmarkConfig(EstimationPipelineConfig(str(tmp_path)), trials=0)


def test_random_benchmark_writes_csv_and_metadata(tmp_path):
    config = RandomBenchmarkConfig(EstimationPipelineConfig(str(tmp_path), timestamp="run"),
                                   n=3, m=3, p_grid=(7, 8), trials=2, seed=0, workers=2)
    artifact = RandomBenchmark(config).initiate_random_benchmark()

    frame = pd.read_csv(artifact.result_file_path)
    assert list(frame.columns) == ["n", "m", "p", "r", "s", "method", "mean_sat_calls",
                                   "mean_wall_time_s", "success_rate", "bruteforce_bound"]
    assert artifact.rows == len(frame) == 4
    assert set(frame["method"]) == {"method1", "method2"}
    assert frame["r"].tolist() == [1, 1, 1, 1] and frame["s"].tolist() == [1, 1, 1, 1]
    assert frame.loc[frame["p"] == 7, "bruteforce_bound"].iloc[0] == math.comb(7, 1) * math.comb(3, 1)

    metadata = read_yaml(artifact.metadata_file_path)
    assert metadata["benchmark"] == "bench-random"
    assert {"platform", "python", "numpy"} <= set(metadata)


def test_random_benchmark_is_deterministic(tmp_path):
    def run(timestamp):
        config = RandomBenchmarkConfig(EstimationPipelineConfig(str(tmp_path), timestamp=timestamp),
                                       n=3, m=3, p_grid=(7,), trials=2, seed=5)
        return pd.read_csv(RandomBenchmark(config).initiate_random_benchmark().result_file_path)

    first, second = run("a"), run("b")
    pd.testing.assert_series_equal(first["mean_sat_calls"], second["mean_sat_calls"])


@pytest.mark.slow
def test_plant_benchmark_shape_and_ordering(tmp_path):
    config = PlantBenchmarkConfig(EstimationPipelineConfig(str(tmp_path), timestamp="plant"), trials=20, seed=0)
    artifact = PlantBenchmark(config).initiate_plant_benchmark()
    frame = pd.read_csv(artifact.result_file_path).set_index("method")

    assert list(frame.index) == ["method1", "method2"]
    assert (frame["success_rate"] == 1.0).all()
    assert frame.loc["method1", "mean_sat_calls"] <= 60
    assert frame.loc["method2", "mean_sat_calls"] <= 25
    assert frame.loc["method2", "mean_sat_calls"] <= frame.loc["method1", "mean_sat_calls"]
