"""AHP task priorities.

Three factors, in fixed order: deadline, CPU cycles, data size. Factor weights
come from the principal eigenvector of a 3x3 reciprocal comparison matrix;
per-task weights come from a pairwise ratio matrix per factor with row-sum
normalisation. A task's priority is the factor-weighted sum of its per-factor
weights.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

FACTORS = ("deadline", "cpu_cycles", "data_size")

# Deadline vs CPU = 3, Deadline vs Data = 5, CPU vs Data = 3.
DEFAULT_COMPARISON = np.array([
    [1.0, 3.0, 5.0],
    [1 / 3, 1.0, 3.0],
    [1 / 5, 1 / 3, 1.0],
])

SAATY_SCALE = (1, 2, 3, 4, 5, 6, 7, 8, 9)


def comparison_matrix(entries) -> np.ndarray:
    """Build a comparison matrix from nine entries (numbers or strings like "1/3")."""
    vals = [float(Fraction(str(e))) if isinstance(e, str) else float(e) for e in np.ravel(entries)]
    if len(vals) != 9:
        raise ValueError("comparison matrix needs exactly nine entries")
    A = np.array(vals).reshape(3, 3)
    check_comparison_matrix(A)
    return A


def check_comparison_matrix(A, tol: float = 1e-12, scale: bool = False) -> None:
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ValueError(f"comparison matrix must be 3x3, got {A.shape}")
    if np.any(A <= 0) or not np.all(np.isfinite(A)):
        raise ValueError("comparison entries must be positive and finite")
    if np.any(np.abs(np.diag(A) - 1.0) > tol):
        raise ValueError("comparison matrix diagonal must be 1")
    if np.any(np.abs(A * A.T - 1.0) > tol):
        raise ValueError("comparison matrix is not reciprocal (a_ij != 1/a_ji)")
    if scale:
        allowed = np.array([s for s in SAATY_SCALE] + [1 / s for s in SAATY_SCALE])
        if not all(np.min(np.abs(allowed - a)) <= tol for a in A.ravel()):
            raise ValueError("entries must come from the 1..9 scale or reciprocals")


def factor_weights(A=DEFAULT_COMPARISON, rtol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Principal eigenvector of ``A`` normalised to sum 1, by power iteration."""
    A = np.asarray(A, dtype=float)
    check_comparison_matrix(A)
    w = np.full(3, 1 / 3)
    for _ in range(max_iter):
        nxt = A @ w
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w) / np.abs(nxt)) < rtol:
            return nxt
        w = nxt
    raise RuntimeError("power iteration did not converge")


def factor_values(tasks) -> np.ndarray:
    """Raw factor values, 3 x J, oriented so that larger means more urgent.

    Deadline enters inverted (a tighter deadline is more urgent).
    """
    return np.array([
        [1.0 / t.deadline_ms for t in tasks],
        [t.cpu_cycles for t in tasks],
        [t.data_in_bits + t.data_out_bits for t in tasks],
    ], dtype=float)


def task_weight_matrix(tasks) -> np.ndarray:
    """Per-factor task weights (3 x J), each row summing to 1.

    For factor k the pairwise matrix has entries x_r / x_j; normalising row
    sums by the grand total reduces to x_r / sum(x). A factor whose values are
    all zero spreads its weight evenly.
    """
    tasks = list(tasks)
    if not tasks:
        raise ValueError("task_weight_matrix needs at least one task")
    X = factor_values(tasks)
    totals = X.sum(axis=1, keepdims=True)
    J = X.shape[1]
    return np.where(totals > 0, X / np.where(totals > 0, totals, 1.0), 1.0 / J)


def priority_vector(delta, lam) -> np.ndarray:
    """One priority per task: delta.T @ lam."""
    delta = np.asarray(delta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if delta.ndim != 2 or lam.shape != (delta.shape[0],):
        raise ValueError(f"shape mismatch: delta {delta.shape}, weights {lam.shape}")
    return delta.T @ lam


def priorities(tasks, A=DEFAULT_COMPARISON) -> np.ndarray:
    return priority_vector(task_weight_matrix(tasks), factor_weights(A))


def priority_order(pv, submit_times, task_ids) -> list[int]:
    """Indices sorted most-urgent first: PV descending, then earlier submit, then id."""
    return sorted(range(len(pv)), key=lambda r: (-pv[r], submit_times[r], task_ids[r]))
