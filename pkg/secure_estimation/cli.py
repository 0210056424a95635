"""
Interface en ligne de commande : estimation sécurisée, vérification structurelle,
benchmarks et construction de témoins d'indiscernabilité.

Codes de sortie : 0 succès, 1 erreur d'entrée, 2 erreur structurelle, 3 infaisabilité.
"""
import argparse
import os
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

from secure_estimation.components import attack_sim, estimator, lti_model, sat_core, strong_obs
from secure_estimation.constants import estimation_pipeline as const
from secure_estimation.entity.config_entity import (EstimationPipelineConfig, PlantBenchmarkConfig,
                                                    RandomBenchmarkConfig, RunConfig, TolerancePolicy)
from secure_estimation.entity.model_entity import LtiSystem
from secure_estimation.exceptions.exception import (GenerationFailureError, InfeasibilityError,
                                                    InvalidInputError, SecureEstimationException,
                                                    StructuralError)
from secure_estimation.logging.logger import logging
from secure_estimation.pipelines.benchmark_pipeline import PlantBenchmark, RandomBenchmark, relative_error
from secure_estimation.utils.main_utils.utils import (load_scenario_file, load_system_file, report_to_dict,
                                                       save_numpy_array_data, window_dataframe,
                                                       write_dataframe_csv, write_json, write_window_csv,
                                                       write_yaml_file)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(f"arguments invalides: {message}", sys)


def _p_grid(text: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"liste d'entiers attendue, reçu {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--system", dest="system_path", help="fichier JSON du système (A, B, C, D)")
    common.add_argument("--scenario", dest="scenario_path", help="fichier JSON du scénario d'attaque")
    common.add_argument("-r", type=int, default=None, help="nombre maximal d'entrées attaquées")
    common.add_argument("-s", type=int, default=None, help="nombre maximal de sorties attaquées")
    common.add_argument("--method", choices=const.METHODS, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=const.DEFAULT_TRIALS)
    common.add_argument("--out", dest="out_dir", default=const.ARTIFACT_DIR)
    common.add_argument("--dump-opb", dest="dump_opb", default=None)
    common.add_argument("--tau", type=int, default=None)
    common.add_argument("--n", type=int, default=const.RANDOM_BENCH_STATE_DIM)
    common.add_argument("--m", type=int, default=const.RANDOM_BENCH_INPUT_DIM)
    common.add_argument("--p-grid", dest="p_grid", type=_p_grid, default=const.RANDOM_BENCH_OUTPUT_GRID)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--no-sso-check", dest="check_sso", action="store_false")
    common.add_argument("--dump-window", dest="dump_window", action="store_true")

    parser = _Parser(prog="secure-estimation", description="Estimation d'état sécurisée sous attaques parcimonieuses")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for command in const.COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def parse_run_config(argv: Optional[List[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(policy=TolerancePolicy.from_env(), **vars(args))


def _load_system(cfg: RunConfig) -> LtiSystem:
    matrices = load_system_file(cfg.system_path)
    return lti_model.make_system(matrices["A"], matrices["B"], matrices["C"], matrices["D"], cfg.policy)


def _zero_based(indices):
    if indices is None:
        return None
    if any(not isinstance(i, int) or i < 1 for i in indices):
        raise InvalidInputError(f"indices en base 1 attendus, reçu {indices}", sys)
    return [i - 1 for i in indices]


def _load_run(cfg: RunConfig, system: LtiSystem):
    content = load_scenario_file(cfg.scenario_path)
    r = cfg.r if cfg.r is not None else int(content["r"])
    s = cfg.s if cfg.s is not None else int(content["s"])
    scenario, x0, u_ctrl, T = attack_sim.prepare_run(
        system, int(content["r"]), int(content["s"]), int(content["seed"]), T=int(content["T"]),
        attacked_inputs=_zero_based(content.get("attacked_inputs")),
        attacked_outputs=_zero_based(content.get("attacked_outputs")),
        x0=content.get("x0"), u_ctrl=content.get("u_ctrl"),
        w_stream=content.get("w_stream"), a_stream=content.get("a_stream"))
    window, truth = attack_sim.run_scenario(system, scenario, x0, u_ctrl, T, tau=cfg.tau)
    return r, s, window, truth


def _run_estimation(cfg: RunConfig, artifact_dir: str):
    system = _load_system(cfg)
    r, s, window, truth = _load_run(cfg, system)
    if cfg.dump_window:
        write_window_csv(os.path.join(artifact_dir, const.WINDOW_FILE_NAME), window, system.p, system.m)
    solver = sat_core.new_solver(system.m, system.p, r, s)
    report = estimator.estimate(system, attack_sim.remove_ctrl_effect(system, window), r, s,
                                method=cfg.method or const.DEFAULT_METHOD, pol=cfg.policy,
                                check_sso=cfg.check_sso, workers=cfg.workers, solver=solver)
    return report, truth, solver


def cmd_estimate(cfg: RunConfig) -> int:
    artifact_dir = EstimationPipelineConfig(cfg.out_dir).artifact_dir
    report, truth, solver = _run_estimation(cfg, artifact_dir)
    content = report_to_dict(report)
    content["x_true"] = [float(v) for v in truth.x_at_estimate_time]
    content["relative_error"] = relative_error(report.x_hat, truth.x_at_estimate_time)
    report_path = os.path.join(artifact_dir, const.REPORT_FILE_NAME)
    write_json(report_path, content)
    save_numpy_array_data(os.path.join(artifact_dir, const.GROUND_TRUTH_FILE_NAME), truth.x_trajectory)
    if cfg.dump_opb:
        _write_text(cfg.dump_opb, solver.export_opb())

    print(f"x_hat = {np.array2string(report.x_hat, precision=6)}")
    print(f"entrées attaquées (b) = {content['b']}, sorties attaquées (c) = {content['c']}")
    print(f"appels SAT = {report.sat_calls}, tests = {report.theory_calls}, "
          f"erreur relative = {content['relative_error']:.2e}")
    print(f"rapport: {report_path}")
    return const.EXIT_OK


def cmd_export_opb(cfg: RunConfig) -> int:
    artifact_dir = EstimationPipelineConfig(cfg.out_dir).artifact_dir
    _, _, solver = _run_estimation(cfg, artifact_dir)
    path = cfg.dump_opb or os.path.join(artifact_dir, const.OPB_FILE_NAME)
    _write_text(path, solver.export_opb())
    print(f"état du solveur ({len(solver.clauses)} clauses): {path}")
    return const.EXIT_OK


def cmd_check_sso(cfg: RunConfig) -> int:
    system = _load_system(cfg)
    report = strong_obs.is_sparse_strongly_observable(system, cfg.r, cfg.s, cfg.policy, workers=cfg.workers)
    content = {"holds": report.holds, "r": cfg.r, "s": cfg.s, "subsets_checked": report.subsets_checked}
    if report.holds:
        print(f"({cfg.r},{cfg.s})-fortement observable: oui ({report.subsets_checked} sous-ensembles vérifiés)")
    else:
        content["witness_gamma_u"] = report.witness_gamma_u.one_based()
        content["witness_gamma_y"] = report.witness_gamma_y.one_based()
        print(f"({cfg.r},{cfg.s})-fortement observable: non, témoin Γu={content['witness_gamma_u']}, "
              f"Γy={content['witness_gamma_y']} ({report.subsets_checked} sous-ensembles vérifiés)")
    write_yaml_file(os.path.join(EstimationPipelineConfig(cfg.out_dir).artifact_dir, const.SSO_REPORT_FILE_NAME),
                    content)
    return const.EXIT_OK


def cmd_witness(cfg: RunConfig) -> int:
    system = _load_system(cfg)
    r, s = cfg.r, cfg.s
    if 2 * r > system.m or 2 * s > system.p:
        raise InvalidInputError(f"(2r, 2s) = ({2 * r}, {2 * s}) dépasse (m, p) = ({system.m}, {system.p})", sys)
    report = strong_obs.is_sparse_strongly_observable(system, 2 * r, 2 * s, cfg.policy, workers=cfg.workers)
    if report.holds:
        print(f"le système est ({2 * r},{2 * s})-fortement observable: aucun témoin")
        return const.EXIT_STRUCTURAL
    pair = strong_obs.build_indistinguishable_pair(system, r, s, report.witness_gamma_u,
                                                   report.witness_gamma_y, cfg.policy)
    if pair is None:
        print("aucun vecteur du noyau exploitable: témoin introuvable")
        return const.EXIT_STRUCTURAL

    artifact_dir = EstimationPipelineConfig(cfg.out_dir).artifact_dir
    T = system.n
    for witness, name, window_name in zip(pair, const.WITNESS_FILE_NAMES, const.WITNESS_WINDOW_FILE_NAMES):
        scenario = witness.scenario
        write_json(os.path.join(artifact_dir, name), {
            "seed": cfg.seed, "r": r, "s": s, "T": T,
            "attacked_inputs": scenario.attacked_inputs.one_based(),
            "attacked_outputs": scenario.attacked_outputs.one_based(),
            "x0": witness.x0.tolist(), "u_ctrl": witness.u_ctrl.tolist(),
            "w_stream": scenario.w_stream.tolist(), "a_stream": scenario.a_stream.tolist(),
        })
        u_obs, y_obs = attack_sim.observed_streams(system, scenario, witness.x0, witness.u_ctrl, T)
        write_dataframe_csv(os.path.join(artifact_dir, window_name), window_dataframe(y_obs, u_obs))

    print(f"témoin Γu={report.witness_gamma_u.one_based()}, Γy={report.witness_gamma_y.one_based()}")
    print(f"x0 (scénario 1) = {np.array2string(pair[0].x0, precision=6)}")
    print(f"x0 (scénario 2) = {np.array2string(pair[1].x0, precision=6)}")
    print(f"scénarios écrits dans {artifact_dir}")
    return const.EXIT_OK


def cmd_bench_random(cfg: RunConfig) -> int:
    methods = (cfg.method,) if cfg.method else const.RANDOM_BENCH_METHODS
    config = RandomBenchmarkConfig(EstimationPipelineConfig(cfg.out_dir), n=cfg.n, m=cfg.m, p_grid=cfg.p_grid,
                                   methods=methods, trials=cfg.trials, seed=cfg.seed, workers=cfg.workers,
                                   check_sso=cfg.check_sso)
    artifact = RandomBenchmark(config, cfg.policy).initiate_random_benchmark()
    print(f"{artifact.rows} lignes écrites: {artifact.result_file_path}")
    return const.EXIT_OK


def cmd_bench_plant(cfg: RunConfig) -> int:
    methods = (cfg.method,) if cfg.method else const.PLANT_BENCH_METHODS
    config = PlantBenchmarkConfig(EstimationPipelineConfig(cfg.out_dir), methods=methods, trials=cfg.trials,
                                  seed=cfg.seed, workers=cfg.workers)
    artifact = PlantBenchmark(config, cfg.policy).initiate_plant_benchmark()
    print(f"{artifact.rows} lignes écrites: {artifact.result_file_path}")
    return const.EXIT_OK


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as file:
        file.write(text)


COMMAND_HANDLERS: Dict[str, Callable[[RunConfig], int]] = {
    "estimate": cmd_estimate,
    "check-sso": cmd_check_sso,
    "bench-random": cmd_bench_random,
    "bench-plant": cmd_bench_plant,
    "witness": cmd_witness,
    "export-opb": cmd_export_opb,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = parse_run_config(argv)
        logging.info(f"Commande {cfg.command} lancée")
        return COMMAND_HANDLERS[cfg.command](cfg)
    except StructuralError as e:
        if e.gamma_u is not None:
            print(f"erreur structurelle: témoin Γu={[i + 1 for i in e.gamma_u]}, "
                  f"Γy={[i + 1 for i in e.gamma_y]}", file=sys.stderr)
        else:
            print(f"erreur structurelle: {e}", file=sys.stderr)
        logging.error(str(e))
        return const.EXIT_STRUCTURAL
    except GenerationFailureError as e:
        print(f"échec de génération: {e}", file=sys.stderr)
        logging.error(str(e))
        return const.EXIT_STRUCTURAL
    except InfeasibilityError as e:
        print(f"infaisable: {e}", file=sys.stderr)
        logging.error(str(e))
        return const.EXIT_INFEASIBLE
    except SecureEstimationException as e:
        print(f"erreur: {e}", file=sys.stderr)
        logging.error(str(e))
        return const.EXIT_PARSE_ERROR


if __name__ == "__main__":
    sys.exit(main())
