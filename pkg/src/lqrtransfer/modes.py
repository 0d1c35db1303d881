"""Mode dictionaries, mode selection and Markov-parameter reconstruction.

A mode is an eigenvalue of the state matrix.  Modes learned from source
systems form a dictionary; the subset that best explains a short target
trajectory is selected by the Cayley-Hamilton residual, and the target's
impulse response is then extended to any horizon by fitting weights on
the exponential basis ``sigma^(t-1)``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .blocks import ImpulseTrajectory, PathLike, blkdiag_columns
from .ddlqr import CharPoly, OutputFeedbackGain, data_driven_gain, estimate_alpha, required_length
from .errors import (ConjugacyError, DictionaryTooSmall, RankError, SampleComplexityError,
                     SearchLimitError)
from .lti import CostSpec, numerical_rank, pinv

CONJ_TOL = 1e-9
DEDUP_TOL = 1e-6
IMAG_TOL = 1e-6
MAX_SUBSETS = 10**6


def _sort_modes(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    return z[np.lexsort((z.imag, z.real))]


def _mode_key(z: np.ndarray) -> tuple:
    return tuple((float(v.real), float(v.imag)) for v in _sort_modes(z))


def is_conjugate_closed(z: np.ndarray, tol: float = CONJ_TOL) -> bool:
    z = np.asarray(z, dtype=complex).reshape(-1)
    unused = list(range(z.size))
    while unused:
        i = unused.pop(0)
        scale = max(1.0, abs(z[i]))
        if abs(z[i].imag) <= tol * scale:
            continue
        match = [j for j in unused if abs(z[j] - np.conj(z[i])) <= tol * scale]
        if not match:
            return False
        unused.remove(match[0])
    return True


@dataclass(frozen=True)
class ModeSet:
    """Multiset of ``n`` (possibly complex) modes, kept sorted."""

    modes: np.ndarray

    def __post_init__(self):
        z = _sort_modes(self.modes)
        z.flags.writeable = False
        object.__setattr__(self, "modes", z)

    def __len__(self) -> int:
        return self.modes.size

    @property
    def n(self) -> int:
        return self.modes.size

    def conjugate_closed(self, tol: float = CONJ_TOL) -> bool:
        return is_conjugate_closed(self.modes, tol)

    def distance(self, other: Sequence[complex]) -> float:
        """Largest gap under the best one-to-one matching (brute force, small n)."""
        b = np.asarray(other, dtype=complex).reshape(-1)
        if b.size != self.n:
            return math.inf
        return min(float(np.abs(self.modes - b[list(p)]).max(initial=0.0))
                   for p in itertools.permutations(range(self.n)))


@dataclass
class ModeDictionary:
    """Distinct modes pooled from the source systems with their origin."""

    entries: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex).reshape(-1)
        self.provenance = np.asarray(self.provenance, dtype=int).reshape(-1)
        if self.entries.size != self.provenance.size:
            raise ValueError("one provenance index per entry is required")

    def __len__(self) -> int:
        return self.entries.size

    @property
    def k(self) -> int:
        return self.entries.size

    def to_csv(self, path: PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["re", "im", "source_index"])
            for z, src in zip(self.entries, self.provenance):
                w.writerow([repr(float(z.real)), repr(float(z.imag)), int(src)])

    @classmethod
    def from_csv(cls, path: PathLike) -> "ModeDictionary":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(entries=np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows]),
                   provenance=np.array([int(r["source_index"]) for r in rows], dtype=int))


@dataclass(frozen=True)
class CandidateSubset:
    modes: ModeSet
    alpha: CharPoly
    score: float


@dataclass(frozen=True)
class ModeWeightSolution:
    """Weights ``W`` (``lmn x m``, block diagonal) with ``M~(t) = H(modes, t-1) W``."""

    W: np.ndarray
    modes: ModeSet
    l: int
    m: int
    T0: int
    residual: float


# -- polynomial <-> modes ----------------------------------------------------------


def companion(alpha: CharPoly) -> np.ndarray:
    n = alpha.n
    Cm = np.zeros((n, n))
    Cm[:-1, 1:] = np.eye(n - 1)
    Cm[-1, :] = -alpha.alpha
    return Cm


def modes_from_alpha(alpha: CharPoly) -> ModeSet:
    """Roots of ``lambda^n + alpha_n lambda^(n-1) + ... + alpha_1`` via the companion matrix."""
    if alpha.n < 1:
        raise ValueError("empty polynomial")
    return ModeSet(np.linalg.eigvals(companion(alpha)).astype(complex))


def alpha_from_modes(modes) -> CharPoly:
    """Expand ``prod (lambda - sigma_i)`` into real characteristic coefficients."""
    z = modes.modes if isinstance(modes, ModeSet) else np.asarray(modes, dtype=complex)
    if not is_conjugate_closed(z):
        raise ConjugacyError(f"modes {z} are not closed under conjugation")
    coeffs = np.poly(z)
    return CharPoly(np.real(coeffs[1:])[::-1])


# -- dictionary and selection ----------------------------------------------------------


def build_dictionary(sources: Sequence[ImpulseTrajectory], n: int,
                     dedup_tol: float = DEDUP_TOL) -> ModeDictionary:
    """Estimate each source's modes from ``M_i(1:2n)`` and pool the distinct ones."""
    entries: List[complex] = []
    prov: List[int] = []
    for idx, src in enumerate(sources):
        src.require(2 * n, f"source {idx} mode estimation")
        for z in modes_from_alpha(estimate_alpha(src, n)).modes:
            if any(abs(z - e) <= dedup_tol * max(1.0, abs(e)) for e in entries):
                continue
            entries.append(complex(z))
            prov.append(idx)
    return ModeDictionary(entries=np.array(entries, dtype=complex), provenance=np.array(prov))


def residual_Z(alpha: CharPoly, target_head: ImpulseTrajectory) -> float:
    """``||M(n+1) + alpha_1 M(1) + ... + alpha_n M(n)||_F``."""
    n = alpha.n
    target_head.require(n + 1, "Cayley-Hamilton residual")
    E = target_head.entries
    R = E[n] + np.tensordot(alpha.alpha, E[:n], axes=1)
    return float(np.linalg.norm(R))


def select_modes(dictionary: ModeDictionary, target_head: ImpulseTrajectory, n: int,
                 max_subsets: int = MAX_SUBSETS) -> CandidateSubset:
    """Exhaustive argmin of the residual over conjugate-closed ``n``-subsets.

    Ties are broken by the lexicographic order of the sorted modes, so the
    result does not depend on the dictionary order.
    """
    k = dictionary.k
    if k < n:
        raise DictionaryTooSmall(f"dictionary has {k} modes, need at least n = {n}")
    target_head.require(n + 1, "mode selection")
    total = math.comb(k, n)
    if total > max_subsets:
        raise SearchLimitError(f"C({k},{n}) = {total} subsets exceeds the limit {max_subsets}; "
                               "prune the source systems or the dictionary")
    best = None
    for idx in itertools.combinations(range(k), n):
        z = dictionary.entries[list(idx)]
        if not is_conjugate_closed(z):
            continue
        alpha = alpha_from_modes(z)
        key = (residual_Z(alpha, target_head), _mode_key(z))
        if best is None or key < best[0]:
            best = (key, z, alpha)
    if best is None:
        raise ConjugacyError("no conjugate-closed subset of the dictionary has size n")
    (score, _), z, alpha = best
    return CandidateSubset(modes=ModeSet(z), alpha=alpha, score=score)


# -- reconstruction ---------------------------------------------------------------------


def mode_basis(modes, t: int, l: int, m: int) -> np.ndarray:
    """``lm x lmn`` block diagonal with ``lm`` copies of ``[p(1)^t ... p(n)^t]``."""
    z = modes.modes if isinstance(modes, ModeSet) else np.asarray(modes, dtype=complex)
    row = (z.astype(complex) ** t).reshape(1, -1)
    return np.kron(np.eye(l * m), row)


def stacked_mode_basis(modes, T0: int, l: int, m: int) -> np.ndarray:
    """``[H(p, 1); ...; H(p, T0)]``, shape ``lm T0 x lmn``."""
    return np.vstack([mode_basis(modes, t, l, m) for t in range(1, T0 + 1)])


def solve_W(modes: ModeSet, target_head: ImpulseTrajectory, T0: Optional[int] = None
            ) -> ModeWeightSolution:
    """Least-squares weights from ``M(2:T0+1)``; ``T0`` defaults to ``len(head) - 1``."""
    n = modes.n
    l, m = target_head.dims
    T0 = len(target_head) - 1 if T0 is None else T0
    if T0 < n:
        raise SampleComplexityError(
            f"reconstruction needs T0 >= n, i.e. M(1:{n + 1}); got T0 = {T0}")
    target_head.require(T0 + 1, "weight fit")
    z = modes.modes
    gaps = [abs(a - b) for a, b in itertools.combinations(z, 2)]
    if gaps and min(gaps) <= DEDUP_TOL * max(1.0, np.abs(z).max()):
        raise RankError("repeated modes make the exponential basis rank deficient")
    H = stacked_mode_basis(modes, T0, l, m)
    if numerical_rank(H) < l * m * n:
        raise RankError(f"stacked mode basis has rank below lmn = {l * m * n}")
    Mt = np.vstack([blkdiag_columns(target_head.at(t)) for t in range(2, T0 + 2)])
    W = pinv(H) @ Mt
    resid = float(np.linalg.norm(H @ W - Mt))
    return ModeWeightSolution(W=W, modes=modes, l=l, m=m, T0=T0, residual=resid)


def reconstruct_markov(solution: ModeWeightSolution, T: int) -> np.ndarray:
    """``M(T) = [I_l ... I_l] H(modes, T-1) W``, real part after a conjugacy check."""
    if T < 1:
        raise ValueError("T must be positive")
    l, m = solution.l, solution.m
    Mt = mode_basis(solution.modes, T - 1, l, m) @ solution.W
    M = np.kron(np.ones((1, m)), np.eye(l)) @ Mt
    scale = max(np.linalg.norm(M.real), np.finfo(float).tiny)
    if np.linalg.norm(M.imag) > IMAG_TOL * max(scale, 1.0):
        raise ConjugacyError(f"reconstructed M({T}) has imaginary residue "
                             f"{np.linalg.norm(M.imag):.3g}")
    return M.real


def reconstruct_trajectory(solution: ModeWeightSolution, T: int) -> ImpulseTrajectory:
    return ImpulseTrajectory(np.array([reconstruct_markov(solution, t) for t in range(1, T + 1)]))


# -- pipeline ------------------------------------------------------------------------------


@dataclass
class TransferReport:
    dictionary: ModeDictionary
    selected: CandidateSubset
    weights: ModeWeightSolution
    reconstructed: ImpulseTrajectory
    horizon: int
    head_length: int
    source_lengths: List[int] = field(default_factory=list)

    @property
    def Z(self) -> float:
        return self.selected.score

    def sample_counts(self) -> dict:
        n = self.selected.modes.n
        return {"target_used": self.head_length, "target_needed_with_modes": n + 1,
                "target_needed_direct": 2 * n, "sources": list(self.source_lengths)}

    def to_dict(self) -> dict:
        def cplx(z):
            return [[float(v.real), float(v.imag)] for v in z]
        return {
            "dictionary": {"modes": cplx(self.dictionary.entries),
                           "source_index": [int(i) for i in self.dictionary.provenance]},
            "selected_modes": cplx(self.selected.modes.modes),
            "alpha": [float(a) for a in self.selected.alpha.alpha],
            "Z": float(self.selected.score),
            "fit_residual": float(self.weights.residual),
            "horizon": int(self.horizon),
            "sample_counts": self.sample_counts(),
        }


def transfer_pipeline(sources: Sequence[ImpulseTrajectory], target_head: ImpulseTrajectory,
                      n: int, cost: CostSpec, horizon: Optional[int] = None, *,
                      dedup_tol: float = DEDUP_TOL, k: Optional[int] = None
                      ) -> Tuple[OutputFeedbackGain, TransferReport]:
    """Dictionary, selection, weight fit, reconstruction and the step-0 gain."""
    if len(target_head) < n + 1:
        raise SampleComplexityError(
            f"target trajectory has {len(target_head)} samples; transfer needs at least "
            f"n + 1 = {n + 1}")
    horizon = cost.horizon if horizon is None else horizon
    if horizon is None:
        raise ValueError("a finite horizon is required")
    cost = cost.with_horizon(horizon)
    dictionary = build_dictionary(sources, n, dedup_tol)
    selected = select_modes(dictionary, target_head, n)
    weights = solve_W(selected.modes, target_head)
    l, m = target_head.dims
    M_hat = reconstruct_trajectory(weights, required_length(n, horizon, 0, l, m, k))
    gain = data_driven_gain(M_hat, cost, 0, n, alpha=selected.alpha, k=k)
    report = TransferReport(dictionary=dictionary, selected=selected, weights=weights,
                            reconstructed=M_hat, horizon=horizon, head_length=len(target_head),
                            source_lengths=[len(s) for s in sources])
    return gain, report
