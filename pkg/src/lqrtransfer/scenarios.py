"""The two-source / one-target example systems and derived fixtures.

The example matrices are given to two decimals, so their eigenvalues only
approximate the nominal mode dictionary.  ``exact_*`` variants keep the
eigenvectors of the rounded matrices but place the eigenvalues exactly on
the nominal values.
"""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from .lti import StateSpaceModel

SOURCE_1 = dict(
    A=[[0.41, 1.56, -1.59], [0.06, 1.34, -1.25], [-0.30, 1.24, -1.14]],
    B=[[-0.47], [-0.81], [1.00]],
    C=[[1.80, -2.75, 0.76]],
)
SOURCE_2 = dict(
    A=[[1.42, -2.91, 3.58], [1.24, -3.57, 5.12], [0.55, -2.37, 3.74]],
    B=[[1.17], [1.37], [0.75]],
    C=[[-0.46, 0.03, 1.36]],
)
TARGET = dict(
    A=[[1.93, -0.87, -0.27], [1.11, -0.07, -0.36], [-1.17, 2.30, -0.89]],
    B=[[-0.07], [0.32], [-0.01]],
    C=[[-0.04, -0.32, 2.33]],
)

DICTIONARY = (0.11, -0.52, 1.02, 0.21, 0.36)
TARGET_MODES = (0.36, -0.52, 1.02)
SOURCE_1_MODES = (0.11, -0.52, 1.02)
SOURCE_2_MODES = (0.21, 0.36, 1.02)
# nominal weights of the reconstructed target response, ordered as TARGET_MODES_PRINTED
TARGET_MODES_PRINTED = (1.02, -0.52, 0.36)
TARGET_WEIGHTS_PRINTED = (-0.48, -2.69, 3.04)
Q_WEIGHT = 4.0
R_WEIGHT = 1.0
N_ORDER = 3
TARGET_SAMPLES = 4


def _model(d: dict) -> StateSpaceModel:
    return StateSpaceModel(np.array(d["A"]), np.array(d["B"]), np.array(d["C"])).validate()


def printed_sources() -> List[StateSpaceModel]:
    return [_model(SOURCE_1), _model(SOURCE_2)]


def printed_target() -> StateSpaceModel:
    return _model(TARGET)


def with_modes(model: StateSpaceModel, modes: Sequence[float]) -> StateSpaceModel:
    """Same eigenvectors, B and C; eigenvalues replaced by ``modes``.

    Eigenvalues of ``model.A`` are paired with ``modes`` by sorted order.
    """
    w, V = np.linalg.eig(model.A)
    if np.abs(w.imag).max() > 1e-12:
        raise ValueError("only real-spectrum models are supported")
    order = np.argsort(w.real)
    V = V.real[:, order]
    target = np.sort(np.asarray(modes, dtype=float))
    A = V @ np.diag(target) @ np.linalg.inv(V)
    return StateSpaceModel(A, model.B, model.C).validate()


def exact_sources() -> List[StateSpaceModel]:
    s1, s2 = printed_sources()
    return [with_modes(s1, SOURCE_1_MODES), with_modes(s2, SOURCE_2_MODES)]


def exact_target() -> StateSpaceModel:
    return with_modes(printed_target(), TARGET_MODES)


def perturbed_targets(base: StateSpaceModel, scales: Sequence[float],
                      rng: np.random.Generator, kind: str = "modes") -> List[StateSpaceModel]:
    """Random targets around ``base``, one per scale.

    ``kind="modes"`` shifts the eigenvalues of ``base`` by ``s * d`` with a fresh
    unit direction ``d`` (eigenvectors, B and C kept); ``kind="matrix"`` uses
    ``A + s * ||A|| * D`` with a unit-Frobenius Gaussian ``D``.
    """
    out = []
    if kind == "modes":
        modes = np.sort(np.linalg.eigvals(base.A).real)
        for s in scales:
            d = rng.standard_normal(base.n)
            out.append(with_modes(base, modes + s * d / np.linalg.norm(d)))
    elif kind == "matrix":
        norm = np.linalg.norm(base.A)
        for s in scales:
            D = rng.standard_normal(base.A.shape)
            D /= np.linalg.norm(D)
            out.append(StateSpaceModel(base.A + s * norm * D, base.B, base.C).validate())
    else:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    return out
