"""JSON envelope for MDPs and the tables that travel with them.

An envelope is one JSON object. MDP keys: ``num_states``, ``num_actions``,
``gamma``, ``transition`` [s][a][s'], ``reward`` [s][a], ``initial`` [s],
``terminal`` [s]. Optional companions: ``baseline`` [s][a],
``features`` [s][a][k] and ``theta`` ([s][a] or flat).
"""

import json
from pathlib import Path

import numpy as np

from errors import InputError
from mdp.core import Mdp, require_valid
from util.logging import logger

MDP_KEYS = ("num_states", "num_actions", "gamma", "transition", "reward", "initial", "terminal")


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        logger.warning(f"Cannot read {path}: {e}")
        raise InputError(f"cannot read {path}: {e}") from e
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        logger.warning(f"Malformed JSON in {path} at line {e.lineno}")
        raise InputError(
            f"{path}: line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(document, dict):
        raise InputError(f"{path}: expected a JSON object at top level")
    return document


def table_from_document(document: dict, key: str, ndim: int, source: str = "document") -> np.ndarray:
    if key not in document:
        raise InputError(f"{source}: missing key '{key}'")
    try:
        arr = np.array(document[key], dtype=float)
    except (TypeError, ValueError) as e:
        raise InputError(f"{source}: key '{key}' is not a numeric array: {e}") from e
    if arr.ndim != ndim:
        raise InputError(f"{source}: key '{key}' must be {ndim}-dimensional, got {arr.ndim}")
    return arr


def _count(document: dict, key: str, source: str) -> int:
    value = document[key]
    # JSON true/false decode to bool, which is an int subclass
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{source}: '{key}' must be an integer, got {value!r}")
    return value


def _flags(document: dict, key: str, source: str) -> np.ndarray:
    value = document[key]
    if not isinstance(value, list) or not all(isinstance(v, bool) for v in value):
        raise InputError(f"{source}: '{key}' must be a list of true/false values")
    return np.array(value, dtype=bool)


def mdp_from_dict(document: dict, source: str = "document") -> Mdp:
    """Build and validate an Mdp; raises InputError or InvalidMdpError."""
    missing = [k for k in MDP_KEYS if k not in document]
    if missing:
        raise InputError(f"{source}: missing key(s) {', '.join(missing)}")
    num_states = _count(document, "num_states", source)
    num_actions = _count(document, "num_actions", source)
    terminal = _flags(document, "terminal", source)
    gamma = document["gamma"]
    if isinstance(gamma, bool) or not isinstance(gamma, int | float):
        raise InputError(f"{source}: 'gamma' must be a number, got {gamma!r}")
    gamma = float(gamma)
    transition = table_from_document(document, "transition", 3, source)
    reward = table_from_document(document, "reward", 2, source)
    initial = table_from_document(document, "initial", 1, source)
    if transition.shape[:2] != (num_states, num_actions):
        raise InputError(
            f"{source}: transition shape {transition.shape} disagrees with "
            f"num_states={num_states}, num_actions={num_actions}"
        )
    mdp = Mdp(transition=transition, reward=reward, gamma=gamma, initial=initial, terminal=terminal)
    return require_valid(mdp)


def mdp_to_dict(mdp: Mdp) -> dict:
    return {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "gamma": mdp.gamma,
        "transition": mdp.transition.tolist(),
        "reward": mdp.reward.tolist(),
        "initial": mdp.initial.tolist(),
        "terminal": [bool(t) for t in mdp.terminal],
    }


def load_mdp(path: str | Path) -> Mdp:
    mdp = mdp_from_dict(read_json(path), source=str(path))
    logger.info(f"Loaded {mdp} from {path}")
    return mdp
