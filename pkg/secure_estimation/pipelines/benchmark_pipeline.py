import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb
from typing import Callable, List, Optional, Sequence

import numpy as np
import pandas as pd
import scipy

from secure_estimation.components import attack_sim, estimator
from secure_estimation.constants.estimation_pipeline import RECOVERY_REL_TOL
from secure_estimation.entity.artifact_entity import BenchmarkArtifact
from secure_estimation.entity.config_entity import (PlantBenchmarkConfig, RandomBenchmarkConfig,
                                                    TolerancePolicy)
from secure_estimation.entity.model_entity import Quadruple
from secure_estimation.exceptions.exception import (InfeasibilityError,
                                                    SecureEstimationException, StructuralError)
from secure_estimation.logging.logger import logging
from secure_estimation.utils.main_utils.utils import read_schema, write_dataframe_csv, write_yaml_file


@dataclass
class TrialOutcome:
    method: str
    sat_calls: int
    wall_time: float
    recovered: bool


def relative_error(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    return float(np.linalg.norm(x_hat - x_true) / max(np.linalg.norm(x_true), 1.0))


def run_trial(system: Quadruple, r: int, s: int, seed: int, methods: Sequence[str],
              pol: TolerancePolicy, check_sso: bool) -> List[TrialOutcome]:
    """
    Un essai : un scénario d'attaque aléatoire simulé une fois, puis estimé par chaque
    méthode sur la même fenêtre. Le temps mesuré exclut la simulation.
    """
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(system, r, s, seed)
    window, truth = attack_sim.run_scenario(system, scenario, x0, u_ctrl, T)
    window = attack_sim.remove_ctrl_effect(system, window)

    outcomes = []
    for method in methods:
        try:
            report = estimator.estimate(system, window, r, s, method=method, pol=pol, check_sso=check_sso)
        except (InfeasibilityError, StructuralError) as e:
            logging.warning(f"Essai {seed}, méthode {method}: échec de l'estimation ({e})")
            outcomes.append(TrialOutcome(method, 0, float("nan"), False))
            continue
        error = relative_error(report.x_hat, truth.x_at_estimate_time)
        outcomes.append(TrialOutcome(method, report.sat_calls, report.wall_time, error <= RECOVERY_REL_TOL))
        logging.debug(f"Essai {seed}, méthode {method}: {report.sat_calls} appels SAT, erreur {error:.2e}")
    return outcomes


def _fan_out(task: Callable[[int], List[TrialOutcome]], seeds: Sequence[int], workers: int) -> List[TrialOutcome]:
    if workers <= 1:
        results = [task(seed) for seed in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, seeds))
    return [outcome for trial in results for outcome in trial]


def summarize(outcomes: List[TrialOutcome], methods: Sequence[str]) -> pd.DataFrame:
    """Moyennes par méthode ; les essais échoués comptent dans le taux de succès seulement."""
    frame = pd.DataFrame([vars(o) for o in outcomes], columns=["method", "sat_calls", "wall_time", "recovered"])
    rows = []
    for method in methods:
        subset = frame[frame["method"] == method]
        done = subset[subset["recovered"]]
        rows.append({
            "method": method,
            "trials": len(subset),
            "mean_sat_calls": float(done["sat_calls"].mean()) if len(done) else float("nan"),
            "mean_wall_time_s": float(done["wall_time"].mean()) if len(done) else float("nan"),
            "success_rate": float(subset["recovered"].mean()) if len(subset) else 0.0,
        })
    return pd.DataFrame(rows)


def machine_metadata(**extra) -> dict:
    """Informations machine jointes aux résultats (les temps absolus ne sont pas portables)."""
    metadata = {
        "platform": platform.platform(),
        "processor": platform.processor(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }
    metadata.update(extra)
    return metadata


class RandomBenchmark:
    """
    Benchmark sur systèmes aléatoires : balayage de p à n et m fixés, 20 % des canaux
    attaqués, comparaison des méthodes de certificat.

    Attributs :
        config (RandomBenchmarkConfig) : paramètres du balayage et chemins de sortie.
        policy (TolerancePolicy) : tolérances numériques.
    """

    def __init__(self, config: RandomBenchmarkConfig, policy: Optional[TolerancePolicy] = None):
        try:
            self.config = config
            self.policy = policy if policy is not None else TolerancePolicy()
            self._columns = read_schema()["bench_random_columns"]
        except Exception as e:
            raise SecureEstimationException(e, sys)

    def run_point(self, p: int) -> pd.DataFrame:
        """Tous les essais pour une valeur de p ; l'essai k utilise la graine seed + k."""
        cfg = self.config
        r, s = attack_sim.attack_budget(cfg.m, p)
        logging.info(f"Point n={cfg.n}, m={cfg.m}, p={p}, (r, s)=({r}, {s}): {cfg.trials} essais")

        def task(seed: int) -> List[TrialOutcome]:
            system = attack_sim.random_system(cfg.n, cfg.m, p, seed, self.policy)
            return run_trial(system, r, s, seed, cfg.methods, self.policy, cfg.check_sso)

        seeds = [cfg.seed + k for k in range(cfg.trials)]
        summary = summarize(_fan_out(task, seeds, cfg.workers), cfg.methods)
        summary["n"], summary["m"], summary["p"], summary["r"], summary["s"] = cfg.n, cfg.m, p, r, s
        summary["bruteforce_bound"] = comb(p, s) * comb(cfg.m, r)
        return summary

    def initiate_random_benchmark(self) -> BenchmarkArtifact:
        """
        Exécute le balayage complet, écrit le CSV et les métadonnées machine.

        Returns:
            BenchmarkArtifact : chemins des fichiers produits.

        Raises:
            SecureEstimationException : en cas d'erreur durant le benchmark.
        """
        try:
            cfg = self.config
            frame = pd.concat([self.run_point(p) for p in cfg.p_grid], ignore_index=True)
            write_dataframe_csv(cfg.result_file_path, frame, self._columns)
            write_yaml_file(cfg.metadata_file_path, machine_metadata(
                benchmark="bench-random", n=cfg.n, m=cfg.m, p_grid=list(cfg.p_grid), trials=cfg.trials,
                seed=cfg.seed, methods=list(cfg.methods), sso_checked=cfg.check_sso))
            logging.info(f"Benchmark aléatoire terminé: {cfg.result_file_path}")
            return BenchmarkArtifact(cfg.result_file_path, cfg.metadata_file_path, len(frame))
        except SecureEstimationException:
            raise
        except Exception as e:
            raise SecureEstimationException(e, sys)


class PlantBenchmark:
    """Benchmark sur l'usine chimique (n=8, m=4, p=10) : une instance par essai, r=1, s=2."""

    def __init__(self, config: PlantBenchmarkConfig, policy: Optional[TolerancePolicy] = None):
        try:
            self.config = config
            self.policy = policy if policy is not None else TolerancePolicy()
            self._columns = read_schema()["bench_plant_columns"]
        except Exception as e:
            raise SecureEstimationException(e, sys)

    def initiate_plant_benchmark(self) -> BenchmarkArtifact:
        """
        Raises:
            GenerationFailureError : aucune instance (2,4)-fortement observable générée.
        """
        try:
            cfg = self.config

            # l'usine est déjà (2,4)-SSO par construction, la vérification est inutile
            def task(seed: int) -> List[TrialOutcome]:
                system = attack_sim.plant_system(seed, self.policy)
                return run_trial(system, cfg.r, cfg.s, seed, cfg.methods, self.policy, check_sso=False)

            seeds = [cfg.seed + k for k in range(cfg.trials)]
            frame = summarize(_fan_out(task, seeds, cfg.workers), cfg.methods)
            write_dataframe_csv(cfg.result_file_path, frame, self._columns)
            write_yaml_file(cfg.metadata_file_path, machine_metadata(
                benchmark="bench-plant", r=cfg.r, s=cfg.s, trials=cfg.trials, seed=cfg.seed,
                methods=list(cfg.methods)))
            logging.info(f"Benchmark usine terminé: {cfg.result_file_path}")
            return BenchmarkArtifact(cfg.result_file_path, cfg.metadata_file_path, len(frame))
        except SecureEstimationException:
            raise
        except Exception as e:
            raise SecureEstimationException(e, sys)
