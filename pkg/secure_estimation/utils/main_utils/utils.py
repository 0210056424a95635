import json
import os
import sys
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import yaml

from secure_estimation.constants.estimation_pipeline import SCHEMA_FILE_PATH
from secure_estimation.entity.artifact_entity import EstimateReport, ObservationWindow
from secure_estimation.exceptions.exception import InvalidInputError, SecureEstimationException
from secure_estimation.logging.logger import logging


def read_yaml(file_path: str) -> dict:
    """
    Lit un fichier YAML et retourne son contenu sous forme de dictionnaire.

    Raises:
        SecureEstimationException: Si la lecture du fichier échoue.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as yaml_file:
            return yaml.safe_load(yaml_file)
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def write_yaml_file(file_path: str, content: object, replace: bool = False) -> None:
    """
    Écrit un dictionnaire dans un fichier YAML.

    Args:
        file_path (str): Chemin du fichier YAML.
        content (object): Contenu à écrire.
        replace (bool, optionnel): Remplace le fichier s'il existe déjà (défaut : False).
    """
    try:
        if replace and os.path.exists(file_path):
            os.remove(file_path)
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as file:
            yaml.safe_dump(content, file, sort_keys=False)
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def read_schema(schema_path: str = SCHEMA_FILE_PATH) -> dict:
    return read_yaml(os.path.normpath(schema_path))


def read_json(file_path: str) -> Any:
    """
    Lit un fichier JSON.

    Raises:
        InvalidInputError: JSON mal formé (message de l'analyseur conservé).
        SecureEstimationException: fichier illisible.
    """
    try:
        with open(file_path, "r", encoding="utf-8") as file:
            return json.load(file)
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"JSON invalide dans {file_path}: {e}", sys) from e
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def write_json(file_path: str, content: Any) -> None:
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "w", encoding="utf-8") as file:
            json.dump(content, file, indent=2)
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def validate_keys(content: Dict[str, Any], section: str, schema: dict = None) -> None:
    """Vérifie la présence des clés requises (et l'absence de clés inconnues) d'après le schéma."""
    schema = schema if schema is not None else read_schema()
    spec = schema[section]
    required = spec.get("required_keys", [])
    allowed = set(required) | set(spec.get("optional_keys", []))
    if not isinstance(content, dict):
        raise InvalidInputError(f"{section}: un objet JSON est attendu", sys)
    missing = [k for k in required if k not in content]
    if missing:
        raise InvalidInputError(f"{section}: clés manquantes {missing}", sys)
    unknown = [k for k in content if k not in allowed]
    if unknown:
        raise InvalidInputError(f"{section}: clés inconnues {unknown}", sys)


def load_system_file(file_path: str) -> Dict[str, np.ndarray]:
    """Lit un fichier système {"A", "B", "C", "D"} et retourne les matrices."""
    content = read_json(file_path)
    validate_keys(content, "system_file")
    matrices = {}
    for key in ("A", "B", "C", "D"):
        try:
            matrices[key] = np.array(content[key], dtype=float, ndmin=2)
        except (TypeError, ValueError) as e:
            raise InvalidInputError(f"matrice {key} invalide: {e}", sys) from e
    logging.info(f"Système chargé depuis {file_path}: A {matrices['A'].shape}, C {matrices['C'].shape}")
    return matrices


def write_system_file(file_path: str, system) -> None:
    write_json(file_path, {key: getattr(system, key).tolist() for key in ("A", "B", "C", "D")})


def load_scenario_file(file_path: str) -> Dict[str, Any]:
    content = read_json(file_path)
    validate_keys(content, "scenario_file")
    return content


def save_numpy_array_data(file_path: str, array: np.ndarray) -> None:
    """Sauvegarde un tableau NumPy dans un fichier."""
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        with open(file_path, "wb") as file_obj:
            np.save(file_obj, array)
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def load_numpy_array_data(file_path: str) -> np.ndarray:
    """Charge un tableau NumPy depuis un fichier."""
    try:
        with open(file_path, "rb") as file_obj:
            return np.load(file_obj, allow_pickle=False)
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def window_dataframe(y_stream: np.ndarray, u_stream: np.ndarray, t0: int = 0) -> pd.DataFrame:
    """Une ligne par instant : t, y_1..y_p, u_1..u_m."""
    y_stream = np.atleast_2d(y_stream)
    u_stream = np.asarray(u_stream).reshape(y_stream.shape[0], -1)
    frame = pd.DataFrame({"t": np.arange(t0, t0 + y_stream.shape[0])})
    for j in range(y_stream.shape[1]):
        frame[f"y_{j + 1}"] = y_stream[:, j]
    for i in range(u_stream.shape[1]):
        frame[f"u_{i + 1}"] = u_stream[:, i]
    return frame


def write_window_csv(file_path: str, win: ObservationWindow, p: int, m: int) -> None:
    """Vide une fenêtre d'observation au format CSV."""
    t0 = win.t_end - win.tau + 1
    frame = window_dataframe(win.Y.reshape(win.tau, p), win.U_ctrl.reshape(win.tau, m), t0)
    write_dataframe_csv(file_path, frame)


def write_dataframe_csv(file_path: str, frame: pd.DataFrame, columns: List[str] = None) -> None:
    try:
        os.makedirs(os.path.dirname(file_path) or ".", exist_ok=True)
        if columns is not None:
            frame = frame[columns]
        frame.to_csv(file_path, index=False, header=True, encoding="utf-8")
        logging.info(f"CSV écrit: {file_path} ({len(frame)} lignes)")
    except Exception as e:
        raise SecureEstimationException(e, sys) from e


def report_to_dict(report: EstimateReport) -> Dict[str, Any]:
    """Sérialisation JSON d'un rapport d'estimation (indices en base 1)."""
    return {
        "x_hat": [float(v) for v in report.x_hat],
        "b": report.identified.attacked_inputs().one_based(),
        "c": report.identified.attacked_outputs().one_based(),
        "sat_calls": report.sat_calls,
        "theory_calls": report.theory_calls,
        "certificates_added": report.certificates_added,
        "wall_time_s": report.wall_time,
    }
