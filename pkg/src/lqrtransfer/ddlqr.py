"""Output-feedback LQR gains computed from impulse responses alone.

The gain at step ``t`` of a horizon-``T`` problem maps the last ``n``
inputs and outputs (oldest first) to the optimal input ``u(t)``.  It is
assembled from the batch form of the Riccati recursion:

    K = -[R + M' G M]^-1 M' G [E - F S_n, F],
    G = Qb - Qb S (Rb + S' Qb S)^-1 S' Qb

where ``M``, ``S`` and ``E`` cover the ``T - t`` samples after ``t`` and
``F`` stacks ``C A^(i+n) O^+`` rebuilt from the characteristic polynomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .blocks import ImpulseTrajectory, build_E, build_hankel, build_M_stack, build_S
from .errors import DataLengthError, DimensionError, NumericalError, RankError
from .lti import CostSpec, StateSpaceModel, numerical_rank, pinv

BRACKET_MAX_COND = 1e14


@dataclass(frozen=True)
class CharPoly:
    """Characteristic coefficients with ``alpha[i-1]`` multiplying ``A^(i-1)``:

    ``A^n + alpha_1 I + alpha_2 A + ... + alpha_n A^(n-1) = 0``.
    """

    alpha: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float).reshape(-1)
        a.flags.writeable = False
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.alpha.size

    def descending(self) -> np.ndarray:
        """Monic coefficients ``[1, alpha_n, ..., alpha_1]`` (numpy.roots order)."""
        return np.concatenate(([1.0], self.alpha[::-1]))

    def evaluate(self, A: np.ndarray) -> np.ndarray:
        """``A^n + sum_i alpha_i A^(i-1)``; vanishes for the true polynomial."""
        A = np.atleast_2d(A)
        acc = np.zeros_like(A, dtype=float)
        Ak = np.eye(A.shape[0])
        for a in self.alpha:
            acc = acc + a * Ak
            Ak = Ak @ A
        return acc + Ak


@dataclass(frozen=True)
class OutputFeedbackGain:
    """``u(t) = gain @ [U_n(t); Y_n(t)]``; ``gain`` is ``m x (nm + nl)``."""

    gain: np.ndarray
    n: int
    l: int
    m: int

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gain, dtype=float))
        if g.shape != (self.m, self.n * (self.m + self.l)):
            raise DimensionError(f"gain shape {g.shape} inconsistent with n={self.n}, "
                                 f"l={self.l}, m={self.m}")
        object.__setattr__(self, "gain", g)

    @property
    def gain_U(self) -> np.ndarray:
        return self.gain[:, : self.n * self.m]

    @property
    def gain_Y(self) -> np.ndarray:
        return self.gain[:, self.n * self.m:]


@dataclass(frozen=True)
class HistoryWindow:
    """Stacked past samples, oldest first: ``U = [u(t-n); ...; u(t-1)]``, same for ``Y``."""

    U: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_samples(cls, inputs, outputs) -> "HistoryWindow":
        """Build from ``n`` rows of past inputs and outputs, oldest row first."""
        u = np.atleast_2d(np.asarray(inputs, dtype=float))
        y = np.atleast_2d(np.asarray(outputs, dtype=float))
        return cls(U=u.reshape(-1), Y=y.reshape(-1))


@dataclass(frozen=True)
class FBlocks:
    """``blocks[i-1]`` is ``F_i = C A^(i+n) O^+`` (an ``l x nl`` matrix), ``i = 1..count``."""

    blocks: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        count, l, w = self.blocks.shape
        return self.blocks.reshape(count * l, w)


@dataclass
class ConvergenceDiagnostics:
    horizons: np.ndarray
    errors: np.ndarray
    mu_hat: float
    c_hat: float
    r2: float
    floor_reached: bool
    reference: OutputFeedbackGain = field(repr=False)


def estimate_alpha(data: ImpulseTrajectory, n: int, column: int = 0) -> CharPoly:
    """Least-squares characteristic coefficients from ``M(1:2n)``.

    Uses input channel ``column`` (0-based).  If that channel alone does not
    excite all ``n`` modes, every channel is stacked into one system.
    """
    if n < 1:
        raise DimensionError("order must be positive")
    data.require(2 * n, f"characteristic polynomial of order {n}")

    def system(j):
        col = data.column(j)
        H = build_hankel(col, n, n, 1)
        rhs = col.entries[n:2 * n].reshape(-1)
        return H, rhs

    H, rhs = system(column)
    if numerical_rank(H) < n:
        parts = [system(j) for j in range(data.m)]
        H = np.vstack([p[0] for p in parts])
        rhs = np.concatenate([p[1] for p in parts])
        if numerical_rank(H) < n:
            raise RankError(f"Hankel matrix of the data has rank below n = {n}; "
                            "realization not minimal or order wrong")
    return CharPoly(pinv(-H) @ rhs)


def _propagate(seed: list, alpha: np.ndarray, count: int) -> np.ndarray:
    # seed holds F_{-n}..F_{-1}; F_i = -sum_j alpha_j F_{i-n+j-1}
    n = alpha.size
    hist = list(seed)
    for _ in range(count + 1):
        window = hist[-n:]
        hist.append(-sum(a * F for a, F in zip(alpha, window)))
    # hist[n] is F_0
    return np.array(hist[n + 1:n + 1 + count])


def f_blocks_single_output(alpha: CharPoly, count: int, n: int) -> FBlocks:
    """F blocks for ``l = 1``: seeds are the rows of ``I_n``."""
    if alpha.n != n:
        raise DimensionError(f"alpha has {alpha.n} coefficients, expected {n}")
    if count < 1:
        raise DimensionError("count must be positive")
    seed = [np.eye(n)[i:i + 1] for i in range(n)]
    return FBlocks(_propagate(seed, alpha.alpha, count))


def default_hankel_width(n: int, m: int) -> int:
    return math.ceil(n / m) + 2


def observability_projector(data: ImpulseTrajectory, n: int, k: Optional[int] = None) -> np.ndarray:
    """``O O^+`` recovered from the column space of the ``n x k`` block Hankel matrix."""
    l, m = data.dims
    k = default_hankel_width(n, m) if k is None else k
    if m * k < n:
        raise RankError(f"Hankel width k={k} too small: need m*k >= n ({m}*{k} < {n})")
    H = build_hankel(data, n, k, 1)
    r = numerical_rank(H)
    if r < n:
        raise RankError(f"data Hankel matrix has rank {r} < n = {n}")
    # column pivoting so the leading n columns of Q span range(H)
    Qf, _, _ = scipy.linalg.qr(H, pivoting=True)
    O_tilde = Qf[:, :n]
    return O_tilde @ pinv(O_tilde)


def f_blocks_multi_output(data: ImpulseTrajectory, alpha: CharPoly, count: int, n: int,
                          k: Optional[int] = None) -> FBlocks:
    """F blocks for any ``l``: seeds are the ``l``-row blocks of the projector ``O O^+``."""
    if alpha.n != n:
        raise DimensionError(f"alpha has {alpha.n} coefficients, expected {n}")
    if count < 1:
        raise DimensionError("count must be positive")
    l = data.l
    L = observability_projector(data, n, k)
    seed = [L[j * l:(j + 1) * l] for j in range(n)]
    return FBlocks(_propagate(seed, alpha.alpha, count))


def batch_weight(Q: np.ndarray, R: np.ndarray, S: np.ndarray) -> np.ndarray:
    """``Qb - Qb S (Rb + S' Qb S)^-1 S' Qb``, equal to ``(Qb^-1 + S Rb^-1 S')^-1`` when Q > 0."""
    l, m = Q.shape[0], R.shape[0]
    nb = S.shape[0] // l
    Qb = np.kron(np.eye(nb), Q)
    Rb = np.kron(np.eye(nb), R)
    QS = Qb @ S
    G = Qb - QS @ np.linalg.solve(Rb + S.T @ QS, QS.T)
    return 0.5 * (G + G.T)


def _psd_sqrt(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(X)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def weighted_gram(Q: np.ndarray, R: np.ndarray, S: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``Y' G Y`` with ``G`` from :func:`batch_weight`, without forming ``G``.

    ``Y' G Y`` is the Gram matrix of the residuals of the regularised least
    squares problem ``min_V ||Qb^(1/2)(Y - S V)||^2 + ||Rb^(1/2) V||^2``.
    Projecting onto the orthogonal complement from a complete QR avoids the
    cancellation the explicit ``G`` suffers once ``S`` grows.
    """
    l, m = Q.shape[0], R.shape[0]
    nb = S.shape[0] // l
    Qh = np.kron(np.eye(nb), _psd_sqrt(Q))
    Rh = np.kron(np.eye(nb), _psd_sqrt(R))
    A = np.vstack([Qh @ S, Rh])
    b = np.vstack([Qh @ Y, np.zeros((Rh.shape[0], Y.shape[1]))])
    Qa, _ = np.linalg.qr(A, mode="complete")
    resid = Qa[:, A.shape[1]:].T @ b
    return resid.T @ resid


def required_length(n: int, T: int, t: int = 0, l: int = 1, m: int = 1,
                    k: Optional[int] = None) -> int:
    """Samples ``M(1:L)`` needed by :func:`data_driven_gain`."""
    need = max(T - t + n, 2 * n)
    if l > 1:
        k = default_hankel_width(n, m) if k is None else k
        need = max(need, k + n - 1)
    return need


def data_driven_gain(data: ImpulseTrajectory, cost: CostSpec, t: int, n: int, *,
                     alpha: Optional[CharPoly] = None, k: Optional[int] = None,
                     column: int = 0) -> OutputFeedbackGain:
    """Output-feedback gain at step ``t`` of the horizon in ``cost``.

    ``alpha`` may be passed when the characteristic polynomial is known
    already (e.g. from transferred modes); otherwise it is estimated from
    ``M(1:2n)``.
    """
    if cost.infinite:
        raise DimensionError("data-driven gain needs a finite horizon")
    T = cost.horizon
    if not 0 <= t < T:
        raise DimensionError(f"step t={t} outside 0..{T - 1}")
    l, m = data.dims
    if cost.Q.shape != (l, l) or cost.R.shape != (m, m):
        raise DimensionError("weight shapes do not match the data")
    data.require(required_length(n, T, t, l, m, k), f"gain at t={t}, T={T}")
    if alpha is None:
        alpha = estimate_alpha(data, n, column)

    # P_{t+1} involves the T - t samples after step t
    Mst = build_M_stack(data, t + 2, T)
    S = build_S(data, t + 1, T)
    E = build_E(data, t + 2, T, n)
    Sn = build_S(data, T - n + 1, T)
    count = T - t
    if l == 1:
        F = f_blocks_single_output(alpha, count, n).stacked
    else:
        F = f_blocks_multi_output(data, alpha, count, n, k).stacked

    X = np.hstack([E - F @ Sn, F])
    gram = weighted_gram(cost.Q, cost.R, S, np.hstack([Mst, X]))
    bracket = cost.R + gram[:m, :m]
    if not np.all(np.isfinite(bracket)) or np.linalg.cond(bracket) > BRACKET_MAX_COND:
        raise NumericalError("gain bracket R + M'GM is singular to working precision")
    gain = -np.linalg.solve(bracket, gram[:m, m:])
    return OutputFeedbackGain(gain=gain, n=n, l=l, m=m)


def control_step(gain: OutputFeedbackGain, window: HistoryWindow) -> np.ndarray:
    U = np.asarray(window.U, dtype=float).reshape(-1)
    Y = np.asarray(window.Y, dtype=float).reshape(-1)
    if U.size != gain.n * gain.m or Y.size != gain.n * gain.l:
        raise DimensionError(f"window sizes ({U.size}, {Y.size}) do not match gain "
                             f"({gain.n * gain.m}, {gain.n * gain.l})")
    return gain.gain @ np.concatenate([U, Y])


def run_closed_loop(plant: StateSpaceModel, x0, gains: Sequence[OutputFeedbackGain]):
    """Drive ``plant`` with ``u(t) = gains[t] @ window`` for ``t >= n``.

    The first ``n`` inputs are zero while the history window fills.
    ``plant`` only plays the role of the unknown system.
    """
    from .lti import Trajectory

    T = len(gains)
    x = np.asarray(x0, dtype=float).reshape(-1)
    X = [x]
    Y = [plant.C @ x]
    U = []
    for t in range(T):
        n = gains[t].n
        if t < n:
            u = np.zeros(plant.m)
        else:
            window = HistoryWindow.from_samples(U[t - n:t], Y[t - n:t])
            u = control_step(gains[t], window)
        U.append(u)
        x = plant.A @ x + plant.B @ u
        X.append(x)
        Y.append(plant.C @ x)
    return Trajectory(x=np.array(X), u=np.array(U).reshape(T, plant.m), y=np.array(Y))


def _loglinear_fit(h: np.ndarray, e: np.ndarray):
    X = np.column_stack([np.ones_like(h), h])
    y = np.log(e)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return math.exp(coef[1]), math.exp(coef[0]), float(r2)


def convergence_curve(data: ImpulseTrajectory, cost: CostSpec, n: int, t_range: Sequence[int], *,
                      reference: Optional[OutputFeedbackGain] = None,
                      alpha: Optional[CharPoly] = None, floor: float = 1e-12,
                      k: Optional[int] = None) -> ConvergenceDiagnostics:
    """Error ``||K^0(T) - K*||_F`` over horizons ``T`` in ``t_range``.

    ``K^0(T)`` is the step-0 gain of a horizon-``T`` problem, which equals the
    gain ``T`` steps before the end of any longer horizon.  Without an explicit
    ``reference`` the gain at the longest horizon the data supports is used.
    Returns the fitted ``c * mu^T`` envelope over the points above ``floor``.
    """
    horizons = np.asarray(sorted(t_range), dtype=int)
    if horizons.size < 3:
        raise DataLengthError("convergence curve needs at least three horizons")
    if alpha is None:
        alpha = estimate_alpha(data, n)
    l, m = data.dims
    if reference is None:
        H_ref = len(data) - n
        if H_ref <= horizons[-1]:
            raise DataLengthError(f"reference horizon {H_ref} must exceed the largest swept "
                                  f"horizon {horizons[-1]}")
        reference = data_driven_gain(data, cost.with_horizon(int(H_ref)), 0, n, alpha=alpha, k=k)
    errors = np.array([
        np.linalg.norm(data_driven_gain(data, cost.with_horizon(int(T)), 0, n,
                                        alpha=alpha, k=k).gain - reference.gain)
        for T in horizons
    ])
    above = errors > floor
    floor_reached = bool(np.any(~above))
    if above.sum() >= 2:
        mu, c, r2 = _loglinear_fit(horizons[above].astype(float), errors[above])
    else:
        mu = c = r2 = float("nan")
    return ConvergenceDiagnostics(horizons=horizons, errors=errors, mu_hat=mu, c_hat=c, r2=r2,
                                  floor_reached=floor_reached, reference=reference)
