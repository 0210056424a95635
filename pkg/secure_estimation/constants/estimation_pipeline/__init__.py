import os


"""
definition des constantes generales du pipeline d'estimation
"""
PIPELINE_NAME: str = "SecureEstimation"
ARTIFACT_DIR: str = "Artifacts"
SCHEMA_FILE_PATH: str = os.path.join(os.path.dirname(__file__), "..", "..", "..", "data_schema", "schema.yml")
ENV_PREFIX: str = "SECURE_ESTIMATION_"

"""
constantes numeriques (politique de tolerance)
"""
RANK_REL_TOL: float = 1e-9
RESIDUAL_ABS_FLOOR: float = 1e-7
RESIDUAL_REL_FACTOR: float = 1e-8
# seuil de norme de la partie etat d'un vecteur du noyau (temoin d'indiscernabilite)
WITNESS_STATE_NORM_MIN: float = 1e-6

"""
constantes relatives aux scenarios d'attaque
"""
ATTACK_FRACTION: float = 0.2
PLANT_STATE_DIM: int = 8
PLANT_INPUT_DIM: int = 4
PLANT_OUTPUT_DIM: int = 10
PLANT_SAMPLING_TIME: float = 5.0
PLANT_MAX_REDRAWS: int = 50
PLANT_SSO_R: int = 2
PLANT_SSO_S: int = 4
PLANT_ATTACK_R: int = 1
PLANT_ATTACK_S: int = 2

# motif de parcimonie du modele continu de l'usine chimique (1 = entree non nulle)
PLANT_A_PATTERN: tuple = (
    (1, 1, 1, 1, 1, 1, 1, 0),
    (1, 1, 1, 1, 1, 0, 1, 0),
    (1, 1, 1, 1, 1, 0, 1, 0),
    (1, 1, 1, 1, 0, 0, 0, 1),
    (0, 0, 0, 0, 1, 0, 0, 0),
    (0, 0, 0, 0, 0, 1, 0, 0),
    (0, 0, 0, 0, 0, 0, 1, 0),
    (0, 0, 0, 1, 0, 0, 0, 1),
)
PLANT_B_PATTERN: tuple = (
    (0, 0, 0, 0),
    (0, 0, 0, 0),
    (0, 0, 0, 0),
    (0, 0, 0, 0),
    (1, 0, 0, 0),
    (0, 1, 0, 0),
    (0, 0, 1, 0),
    (0, 0, 0, 1),
)
PLANT_C_PATTERN: tuple = (
    (0, 0, 0, 0, 1, 0, 0, 0),
    (0, 0, 0, 0, 0, 1, 0, 0),
    (1, 1, 1, 1, 0, 0, 1, 0),
    (1, 1, 1, 1, 0, 0, 0, 1),
    (1, 1, 1, 1, 0, 0, 0, 0),
    (0, 0, 0, 1, 0, 0, 0, 0),
    (1, 1, 1, 0, 0, 0, 0, 0),
    (1, 1, 1, 0, 0, 0, 0, 0),
    (1, 1, 1, 0, 0, 0, 0, 0),
    (1, 1, 1, 0, 0, 0, 1, 1),
)

"""
constantes relatives a l'estimateur
"""
METHODS: tuple = ("naive", "method1", "method2", "both")
DEFAULT_METHOD: str = "method2"
QUICKXPLAIN_ORDERINGS: tuple = ("inputs_first", "outputs_first", "alternate")

"""
constantes relatives aux benchmarks
"""
BENCHMARK_DIR_NAME: str = "benchmark"
DEFAULT_TRIALS: int = 20
RANDOM_BENCH_STATE_DIM: int = 40
RANDOM_BENCH_INPUT_DIM: int = 10
RANDOM_BENCH_OUTPUT_GRID: tuple = (24,)
RANDOM_BENCH_METHODS: tuple = ("method1", "method2")
PLANT_BENCH_METHODS: tuple = ("method1", "method2")
RECOVERY_REL_TOL: float = 1e-6
RANDOM_BENCH_FILE_NAME: str = "bench_random.csv"
PLANT_BENCH_FILE_NAME: str = "bench_plant.csv"
METADATA_FILE_NAME: str = "metadata.yaml"

"""
constantes relatives aux commandes de la CLI
"""
COMMANDS: tuple = ("estimate", "check-sso", "bench-random", "bench-plant", "witness", "export-opb")
REPORT_FILE_NAME: str = "estimate_report.json"
GROUND_TRUTH_FILE_NAME: str = "x_trajectory.npy"
SSO_REPORT_FILE_NAME: str = "sso_report.yaml"
WINDOW_FILE_NAME: str = "window.csv"
WITNESS_FILE_NAMES: tuple = ("witness_scenario_1.json", "witness_scenario_2.json")
WITNESS_WINDOW_FILE_NAMES: tuple = ("witness_window_1.csv", "witness_window_2.csv")
OPB_FILE_NAME: str = "solver_state.opb"

EXIT_OK: int = 0
EXIT_PARSE_ERROR: int = 1
EXIT_STRUCTURAL: int = 2
EXIT_INFEASIBLE: int = 3
