"""Deterministic direct solution of the assembled sparse systems."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = ["SolveReport", "solve"]


@dataclass
class SolveReport:
    residual_norm: float
    iterations: int
    method: str


def solve(system, rtol: float = 1e-10, atol: float = 1e-12):
    """Solve A x = b by sparse LU with a verified residual.

    Rows are equilibrated by power-of-two factors before factorization,
    which leaves the exact solution untouched (and the computed one
    bitwise-invariant under row rescaling of the input) while keeping the
    residual test meaningful for badly row-scaled systems.  The residual
    of the equilibrated system is always verified; up to five steps of
    iterative refinement are applied before giving up.
    """
    A = system.matrix.tocsr()
    b = system.rhs
    row_max = np.zeros(A.shape[0])
    if A.nnz:
        absA = abs(A)
        row_max = np.asarray(absA.max(axis=1).todense()).ravel()
    if np.any(row_max <= 0) or not np.all(np.isfinite(row_max)):
        raise RuntimeError("singular system")
    scale = np.exp2(-np.ceil(np.log2(row_max)))
    As = (sp.diags(scale) @ A).tocsc()
    bs = scale * b
    try:
        lu = splu(As)
    except RuntimeError as exc:
        raise RuntimeError("singular system") from exc
    x = lu.solve(bs)
    target = rtol * float(np.max(np.abs(bs)) if bs.size else 0.0) + atol
    history = []
    res = float(np.max(np.abs(bs - As @ x)))
    history.append(res)
    iters = 0
    while res > target and iters < 5:
        x = x + lu.solve(bs - As @ x)
        res = float(np.max(np.abs(bs - As @ x)))
        history.append(res)
        iters += 1
    if res > target:
        raise RuntimeError(
            f"solve did not reach residual target {target:.3e}; history {history}"
        )
    return x, SolveReport(residual_norm=res, iterations=iters, method="splu")
