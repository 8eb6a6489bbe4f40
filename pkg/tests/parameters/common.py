import random

from typing import List, Tuple

import numpy as np


SEEDS = [0, 1, 2, 3, 7, 11, 42]

# scalar subsystems x+ = a x + u + c (x_left + x_right)
WEAK_CHAIN_A = 0.8
WEAK_CHAIN_COUPLING = 0.02
WEAK_CHAIN_X = 10.0
WEAK_CHAIN_U = 1.0
WEAK_CHAIN_X0 = [1.5, -1.0, 0.5]

# two states per subsystem, x+ = A_local x + B_local u + c (x_left + x_right), input on the second state
PLANAR_CHAIN_A = [[0.5, 0.1], [0.0, 0.8]]
PLANAR_CHAIN_B = [[0.0], [1.0]]
PLANAR_CHAIN_X0 = [1.0, 1.5, -0.5, -1.0, 0.3, 0.5]

ONE_TRUCK = {
    "masses": [3.0],
    "springs": [],
    "dampers": [],
    "position_bound": 2.0,
    "velocity_bound": 8.0,
    "force_bound": 4.0,
    "Ts": 0.1,
}
TWO_TRUCKS = {
    "masses": [3.0, 2.0],
    "springs": [7.5],
    "dampers": [4.0],
    "position_bound": 2.0,
    "velocity_bound": 8.0,
    "force_bound": 4.0,
    "Ts": 0.1,
}
# soft spring and damper, so the discretized coupling stays small
WEAK_TWO_TRUCKS = {
    "masses": [3.0, 2.0],
    "springs": [0.05],
    "dampers": [0.02],
    "position_bound": 2.0,
    "velocity_bound": 8.0,
    "force_bound": 4.0,
    "Ts": 0.1,
}


def random_points(seed: int, count: int = 12, dim: int = 2) -> np.ndarray:
    """Random point cloud around the origin.

    :param seed: generator seed
    :param count: number of points
    :param dim: dimension
    """
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(count, dim))


def random_rotation(seed: int) -> np.ndarray:
    """Random planar rotation matrix.

    :param seed: generator seed
    """
    angle = np.random.default_rng(seed).uniform(0, np.pi)
    return np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])


def random_directions(seed: int, count: int = 16, dim: int = 2) -> np.ndarray:
    """Random unit directions.

    :param seed: generator seed
    :param count: number of directions
    :param dim: dimension
    """
    d = np.random.default_rng(seed).normal(size=(count, dim))
    return d / np.linalg.norm(d, axis=1)[:, None]


def random_qp(seed: int, n: int = 3, m: int = 4) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Random strictly convex QP with a bounded feasible set containing the origin.

    Returns (H, f, A, b).

    :param seed: generator seed
    :param n: number of variables
    :param m: number of random inequality rows on top of a box
    """
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    H = M @ M.T + n * np.eye(n)
    f = rng.normal(size=n) * 3
    A = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([rng.uniform(0.2, 1.0, size=m), np.full(2 * n, 2.0)])
    return H, f, A, b


def random_name(length: int = 10) -> str:
    """Random lower-case name.

    :param length: name length
    """
    return "".join(random.choices("abcdefghijklmnopqrstuvwxyz", k=length))


def invalid_positive_ints() -> List[object]:
    """Values rejected where a positive integer is required."""
    return [0, -1, 1.5, "3", None, True]
