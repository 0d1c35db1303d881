"""Ground-truth discrete-time LTI models and model-based LQR.

Everything here needs ``(A, B, C)``; it is the oracle the data-driven
routines are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from .blocks import ImpulseTrajectory, build_S
from .errors import ConvergenceError, DimensionError, RankError, ValidationError, WeightError

PINV_RCOND = 1e-10
RICCATI_RTOL = 1e-12
RICCATI_MAXITER = 100_000


def pinv(X: np.ndarray) -> np.ndarray:
    """SVD pseudoinverse, singular values below ``1e-10 * sigma_max`` dropped."""
    return np.linalg.pinv(X, rcond=PINV_RCOND)


def numerical_rank(X: np.ndarray, rtol: float = PINV_RCOND) -> int:
    s = np.linalg.svd(X, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _freeze(X) -> np.ndarray:
    X = np.array(np.atleast_2d(X), dtype=float)
    X.flags.writeable = False
    return X


@dataclass(frozen=True)
class StateSpaceModel:
    """``x(t+1) = A x(t) + B u(t)``, ``y(t) = C x(t)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    validated: bool = False

    def __post_init__(self):
        A, B, C = _freeze(self.A), _freeze(self.B), _freeze(self.C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if self.validated:
            _check_minimal(A, B, C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    def controllability(self) -> np.ndarray:
        cols = [self.B]
        for _ in range(self.n - 1):
            cols.append(self.A @ cols[-1])
        return np.hstack(cols)

    def observability(self) -> np.ndarray:
        rows = [self.C]
        for _ in range(self.n - 1):
            rows.append(rows[-1] @ self.A)
        return np.vstack(rows)

    def validate(self) -> "StateSpaceModel":
        """Return a copy flagged ``validated``; raises ValidationError if not minimal."""
        if self.validated:
            return self
        return replace(self, validated=True)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)


def _check_minimal(A, B, C) -> None:
    model = StateSpaceModel(A, B, C)
    n = model.n
    rc = numerical_rank(model.controllability())
    if rc < n:
        raise ValidationError(f"controllability matrix has rank {rc} < n = {n}")
    ro = numerical_rank(model.observability())
    if ro < n:
        raise ValidationError(f"observability matrix has rank {ro} < n = {n}")


def _ensure_validated(model: StateSpaceModel) -> StateSpaceModel:
    return model if model.validated else model.validate()


@dataclass(frozen=True)
class CostSpec:
    """Output/input weights and horizon; ``horizon=None`` means infinite."""

    Q: np.ndarray
    R: np.ndarray
    horizon: Optional[int] = None

    def __post_init__(self):
        Q, R = _freeze(self.Q), _freeze(self.R)
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise DimensionError("Q and R must be square")
        if not np.allclose(Q, Q.T, atol=1e-12) or not np.allclose(R, R.T, atol=1e-12):
            raise WeightError("Q and R must be symmetric")
        qscale = max(1.0, np.abs(Q).max(initial=0.0))
        if np.linalg.eigvalsh(Q).min() < -1e-12 * qscale:
            raise WeightError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise WeightError("R must be positive definite")
        if self.horizon is not None and self.horizon < 1:
            raise DimensionError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @property
    def infinite(self) -> bool:
        return self.horizon is None

    def with_horizon(self, horizon: Optional[int]) -> "CostSpec":
        return replace(self, horizon=horizon)


@dataclass(frozen=True)
class RiccatiSolution:
    """``P_seq[t]`` is ``P_t`` for ``t = 0..T``; ``K_seq[t]`` is ``K_t`` for ``t = 0..T-1``.

    For the infinite-horizon problem the sequences are empty and only the
    stationary pair is set.
    """

    P_seq: List[np.ndarray] = field(default_factory=list)
    K_seq: List[np.ndarray] = field(default_factory=list)
    P_star: Optional[np.ndarray] = None
    K_star: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def horizon(self) -> Optional[int]:
        return len(self.K_seq) if self.K_seq else None


@dataclass(frozen=True)
class ModelBlockMatrices:
    Fu: np.ndarray
    Obs: np.ndarray
    ObsPinv: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """States ``x(0:T)``, inputs ``u(0:T-1)``, outputs ``y(0:T)``, one row per step."""

    x: np.ndarray
    u: np.ndarray
    y: np.ndarray

    @property
    def T(self) -> int:
        return self.u.shape[0]


def simulate(model: StateSpaceModel, x0, inputs) -> Trajectory:
    """Run the noise-free recursion from ``x0`` under ``inputs`` (one row per step)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    U = np.asarray(inputs, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1) if model.m == 1 else U.reshape(1, -1)
    if x0.shape[0] != model.n:
        raise DimensionError(f"x0 has length {x0.shape[0]}, model has n = {model.n}")
    if U.shape[0] < 1:
        raise DimensionError("at least one input is required")
    if U.shape[1] != model.m:
        raise DimensionError(f"inputs have width {U.shape[1]}, model has m = {model.m}")
    T = U.shape[0]
    X = np.empty((T + 1, model.n))
    X[0] = x0
    for t in range(T):
        X[t + 1] = model.A @ X[t] + model.B @ U[t]
    return Trajectory(x=X, u=U, y=X @ model.C.T)


def impulse_response(model: StateSpaceModel, T: int) -> ImpulseTrajectory:
    """``M(t) = C A^(t-1) B`` for ``t = 1..T``."""
    if T < 1:
        raise DimensionError(f"T must be positive, got {T}")
    out = np.empty((T, model.l, model.m))
    AkB = model.B
    for t in range(T):
        out[t] = model.C @ AkB
        AkB = model.A @ AkB
    return ImpulseTrajectory(out)


def _riccati_step(A, B, R, CQC, P):
    BtP = B.T @ P
    gain = np.linalg.solve(R + BtP @ B, BtP @ A)
    Pn = A.T @ P @ A - (A.T @ P @ B) @ gain + CQC
    return 0.5 * (Pn + Pn.T), gain


def solve_riccati(model: StateSpaceModel, cost: CostSpec, *, rtol: float = RICCATI_RTOL,
                  maxiter: int = RICCATI_MAXITER) -> RiccatiSolution:
    """Backward Riccati recursion from ``P_T = C^T Q C``.

    Finite horizons return every ``P_t`` and ``K_t``.  The infinite horizon
    iterates the same map until the relative Frobenius change drops below
    ``rtol``.
    """
    model = _ensure_validated(model)
    A, B, C = model.A, model.B, model.C
    if cost.Q.shape != (model.l, model.l) or cost.R.shape != (model.m, model.m):
        raise DimensionError("weight shapes do not match the model")
    CQC = C.T @ cost.Q @ C
    if not cost.infinite:
        T = cost.horizon
        P = [None] * (T + 1)
        K = [None] * T
        P[T] = CQC
        for t in range(T - 1, -1, -1):
            P[t], K[t] = _riccati_step(A, B, cost.R, CQC, P[t + 1])
        return RiccatiSolution(P_seq=P, K_seq=K)

    P = CQC
    for it in range(1, maxiter + 1):
        Pn, _ = _riccati_step(A, B, cost.R, CQC, P)
        if np.linalg.norm(Pn - P) <= rtol * np.linalg.norm(P):
            P = Pn
            break
        P = Pn
    else:
        raise ConvergenceError(f"Riccati iteration did not converge in {maxiter} steps")
    BtP = B.T @ P
    K = np.linalg.solve(cost.R + BtP @ B, BtP @ A)
    return RiccatiSolution(P_star=P, K_star=K, iterations=it)


def model_blocks(model: StateSpaceModel) -> ModelBlockMatrices:
    """``Fu = [A^(n-1)B ... AB B]``, the observability matrix and its pseudoinverse."""
    Obs = model.observability()
    if numerical_rank(Obs) < model.n:
        raise RankError("observability matrix is rank deficient")
    Fu = model.controllability()
    # controllability() runs B, AB, ...; Fu runs the other way
    Fu = np.hstack([Fu[:, j * model.m:(j + 1) * model.m] for j in reversed(range(model.n))])
    return ModelBlockMatrices(Fu=Fu, Obs=Obs, ObsPinv=pinv(Obs))


def model_output_gain(model: StateSpaceModel, riccati: RiccatiSolution, t: Optional[int] = None):
    """Output-feedback gain ``-K_t [Fu - A^n O^+ S_n, A^n O^+]`` from the model.

    ``t=None`` uses the stationary gain.  The result maps ``[U_n(t); Y_n(t)]``
    (oldest sample first) to ``u(t)``.
    """
    from .ddlqr import OutputFeedbackGain

    model = _ensure_validated(model)
    if t is None:
        if riccati.K_star is None:
            raise ValueError("riccati solution has no stationary gain")
        K = riccati.K_star
    else:
        if not 0 <= t < len(riccati.K_seq):
            raise DimensionError(f"step {t} outside horizon {len(riccati.K_seq)}")
        K = riccati.K_seq[t]
    blocks = model_blocks(model)
    n = model.n
    An = np.linalg.matrix_power(model.A, n)
    Sn = build_S(impulse_response(model, n), 1, n)
    AnOp = An @ blocks.ObsPinv
    gain = -K @ np.hstack([blocks.Fu - AnOp @ Sn, AnOp])
    return OutputFeedbackGain(gain=gain, n=n, l=model.l, m=model.m)


def run_state_feedback(model: StateSpaceModel, x0, K_seq: Sequence[np.ndarray],
                       warmup: int = 0) -> Trajectory:
    """Closed loop under ``u(t) = -K_seq[t] x(t)``, with ``u = 0`` for ``t < warmup``."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    X, U = [x], []
    for t, K in enumerate(K_seq):
        u = np.zeros(model.m) if t < warmup else -K @ x
        U.append(u)
        x = model.A @ x + model.B @ u
        X.append(x)
    X = np.array(X)
    return Trajectory(x=X, u=np.array(U).reshape(len(K_seq), model.m), y=X @ model.C.T)


def evaluate_cost(traj: Trajectory, cost: CostSpec) -> float:
    """``y(T)'Qy(T) + sum_{t<T} y(t)'Qy(t) + u(t)'Ru(t)``."""
    Y, U = np.atleast_2d(traj.y), np.atleast_2d(traj.u)
    T = U.shape[0]
    if cost.horizon is not None and T != cost.horizon:
        raise DimensionError(f"trajectory has {T} inputs, horizon is {cost.horizon}")
    if Y.shape[0] != T + 1:
        raise DimensionError(f"expected {T + 1} outputs, got {Y.shape[0]}")
    J = np.einsum("ti,ij,tj->", Y, cost.Q, Y) + np.einsum("ti,ij,tj->", U, cost.R, U)
    return float(J)


def random_model(rng: np.random.Generator, n: int, m: int, l: int,
                 radius: Sequence[float] = (0.3, 1.1), max_cond: float = 1e6,
                 max_tries: int = 1000) -> StateSpaceModel:
    """Gaussian ``(A, B, C)`` with spectral radius drawn uniformly from ``radius``.

    Draws whose controllability or observability matrix is rank deficient,
    or conditioned worse than ``max_cond``, are rejected.
    """
    for _ in range(max_tries):
        A = rng.standard_normal((n, n))
        A *= rng.uniform(*radius) / np.max(np.abs(np.linalg.eigvals(A)))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((l, n))
        model = StateSpaceModel(A, B, C)
        if all(np.linalg.cond(X) < max_cond for X in
               (model.controllability() @ model.controllability().T,
                model.observability().T @ model.observability())):
            return model.validate()
    raise ValidationError(f"no minimal model found in {max_tries} draws")
