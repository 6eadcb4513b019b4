"""Sum-of-squares decompositions and symmetric eigendecomposition.

Data layout conventions used throughout the package:

- observations are rows: the response matrix ``Y`` is ``(n, p)`` and the
  design matrix ``X`` is ``(n, q)``;
- ``X`` is column-centered, so the intercept is handled separately;
- eigenpairs come back in descending eigenvalue order, and each
  eigenvector is sign-fixed so its largest-magnitude entry is positive.

The central objects are the regression, residual and total sum-of-squares
matrices of a multivariate linear fit,

    S_reg   = Y' P Y,            P = X (X'X)^{-1} X',
    S_resid = Y' (C - P) Y,      C = I - (1/n) 1 1',
    S_total = Y' C Y,

which satisfy S_total = S_reg + S_resid because the column span of a
centered X lies inside the range of C.  All three are computed from a thin
QR factorization of X; the explicit normal-equations inverse is never
formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RankDeficiencyError

# Relative tolerances for validity checks.  "Relative" is always with
# respect to the max-abs entry (or the trace, for semidefiniteness) of the
# matrix being checked.
CENTER_TOL = 1e-9
SYM_INPUT_TOL = 1e-8   # asymmetry allowed in sym_eig input
SYM_STORED_TOL = 1e-10  # asymmetry allowed in stored S matrices
PSD_TOL = 1e-8          # min eigenvalue >= -PSD_TOL * trace
ADDITIVITY_TOL = 1e-9   # |S_total - S_reg - S_resid| entrywise
COND_LIMIT = 1e12       # condition-number cap for X'X


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def _check_symmetric(m: np.ndarray, rtol: float, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"`{name}` must be a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"`{name}` contains non-finite entries")
    asym = _max_abs(m - m.T)
    if asym > rtol * max(_max_abs(m), 1e-300):
        raise ValueError(
            f"`{name}` is not symmetric: max|M - M'| = {asym:.3e} exceeds "
            f"relative tolerance {rtol:g}"
        )


def _check_psd(m: np.ndarray, name: str) -> None:
    lo = float(np.linalg.eigvalsh(m)[0])
    floor = -PSD_TOL * max(float(np.trace(m)), 0.0)
    if lo < floor:
        raise ValueError(
            f"`{name}` is not positive semidefinite: min eigenvalue {lo:.3e}"
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """A response matrix paired with a column-centered design matrix.

    Parameters
    ----------
    y : ndarray of shape (n, p)
        Responses, one observation per row.
    x : ndarray of shape (n, q)
        Explanatory variables.  Must already be column-centered and of
        full column rank, with n > 1 + q.

    Raises
    ------
    ValueError
        If shapes are inconsistent, n <= 1 + q, or `x` is not centered.
    RankDeficiencyError
        If `x` has (numerically) deficient column rank.
    """

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 2:
            raise ValueError(f"`y` must be 2-D, got shape {y.shape}")
        if x.ndim != 2:
            raise ValueError(f"`x` must be 2-D, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ValueError(
                f"`y` has {y.shape[0]} rows but `x` has {x.shape[0]}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("`y` and `x` must be finite")
        n, q = x.shape
        if n <= 1 + q:
            raise ValueError(
                f"need n > 1 + q for the residual fit to have positive "
                f"degrees of freedom; got n = {n}, q = {q}"
            )
        col_sums = np.abs(x.sum(axis=0))
        limit = CENTER_TOL * n * max(_max_abs(x), 1e-300)
        if np.any(col_sums > limit):
            j = int(np.argmax(col_sums))
            raise ValueError(
                f"`x` is not column-centered: column {j} sums to "
                f"{x[:, j].sum():.3e}"
            )
        sv = np.linalg.svd(x, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise RankDeficiencyError(
                f"`x` is rank deficient: singular values range from "
                f"{sv[-1]:.3e} to {sv[0]:.3e}"
            )
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "x", _readonly(x))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def q(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class SumOfSquares:
    """Regression, residual and total sum-of-squares matrices.

    All three are p x p, symmetric and positive semidefinite, and satisfy
    ``s_total = s_reg + s_resid`` up to roundoff.  `n` and `q` record the
    sample size and design rank they came from; the residual degrees of
    freedom are ``n - 1 - q``.
    """

    s_reg: np.ndarray
    s_resid: np.ndarray
    s_total: np.ndarray
    n: int
    q: int

    def __post_init__(self):
        mats = {}
        for name in ("s_reg", "s_resid", "s_total"):
            m = np.asarray(getattr(self, name), dtype=float)
            _check_symmetric(m, SYM_STORED_TOL, name)
            _check_psd(m, name)
            mats[name] = m
        shapes = {m.shape for m in mats.values()}
        if len(shapes) != 1:
            raise ValueError(f"matrix shapes disagree: {sorted(shapes)}")
        if not (isinstance(self.n, (int, np.integer)) and isinstance(self.q, (int, np.integer))):
            raise ValueError("`n` and `q` must be ints")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "q", int(self.q))
        if self.q < 1 or self.n <= 1 + self.q:
            raise ValueError(f"need q >= 1 and n > 1 + q; got n = {self.n}, q = {self.q}")
        gap = _max_abs(mats["s_total"] - mats["s_reg"] - mats["s_resid"])
        if gap > ADDITIVITY_TOL * max(_max_abs(mats["s_total"]), 1e-300):
            raise ValueError(
                f"s_total != s_reg + s_resid: max entry gap {gap:.3e}"
            )
        for name, m in mats.items():
            object.__setattr__(self, name, _readonly(m))

    @classmethod
    def from_parts(cls, s_reg, s_resid, n: int, q: int) -> "SumOfSquares":
        """Build from the two components, deriving the total."""
        s_reg = np.asarray(s_reg, dtype=float)
        s_resid = np.asarray(s_resid, dtype=float)
        return cls(s_reg, s_resid, s_reg + s_resid, n, q)

    @property
    def p(self) -> int:
        return self.s_reg.shape[0]


@dataclass(frozen=True, eq=False)
class SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    ``vectors[:, j]`` is the unit eigenvector for ``values[j]``, sign-fixed
    so that its largest-magnitude entry is positive (ties broken toward the
    lowest index).
    """

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vecs = np.asarray(self.vectors, dtype=float)
        if vals.ndim != 1 or vecs.ndim != 2 or vecs.shape != (vals.size, vals.size):
            raise ValueError(
                f"inconsistent shapes: values {vals.shape}, vectors {vecs.shape}"
            )
        if np.any(np.diff(vals) > 0):
            raise ValueError("`values` must be non-increasing")
        gram_err = _max_abs(vecs.T @ vecs - np.eye(vals.size))
        if gram_err > 1e-8:
            raise ValueError(f"`vectors` not orthonormal: max|V'V - I| = {gram_err:.3e}")
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "vectors", _readonly(vecs))


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so each column's peak entry is positive."""
    lead = np.argmax(np.abs(vecs), axis=0)
    flip = vecs[lead, np.arange(vecs.shape[1])] < 0.0
    out = vecs.copy()
    out[:, flip] *= -1.0
    return out


def sym_eig(m: np.ndarray) -> SymEig:
    """Eigendecompose a symmetric matrix deterministically.

    The input is symmetrized as (M + M') / 2, rescaled by a power of two
    (so that positive power-of-two rescalings of M produce bit-identical
    eigenvectors), and passed to LAPACK.  Eigenvalues are returned in
    descending order under the package sign convention.

    Parameters
    ----------
    m : ndarray of shape (p, p)
        Symmetric matrix; asymmetry up to 1e-8 relative is tolerated.

    Returns
    -------
    SymEig

    Raises
    ------
    ValueError
        If `m` is not square or is asymmetric beyond tolerance.
    """
    m = np.asarray(m, dtype=float)
    _check_symmetric(m, SYM_INPUT_TOL, "m")
    sym = (m + m.T) / 2.0
    peak = _max_abs(sym)
    scale = 2.0 ** math.floor(math.log2(peak)) if peak > 0.0 else 1.0
    vals, vecs = np.linalg.eigh(sym / scale)
    vals = vals[::-1] * scale
    vecs = _fix_signs(vecs[:, ::-1])
    # eigh should hand back an exact reconstruction up to roundoff; a large
    # residual here means the input was numerically pathological.
    resid = vecs @ (vals[:, None] * vecs.T) - sym
    fro = float(np.linalg.norm(sym))
    if float(np.linalg.norm(resid)) > 1e-8 * max(fro, 1e-300):
        raise ValueError("eigendecomposition failed to reconstruct the input")
    return SymEig(vals, vecs)


def center_columns(x: np.ndarray) -> np.ndarray:
    """Subtract the column means from a 2-D array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"`x` must be 2-D, got shape {x.shape}")
    if x.shape[0] < 1:
        raise ValueError("`x` must have at least one row")
    return x - x.mean(axis=0)


def sums_of_squares(data: Dataset) -> SumOfSquares:
    """Decompose the centered response scatter along and off the design span.

    Uses a thin QR factorization of `x`: with Q the orthonormal basis of the
    design span and Yc the column-centered response,

        s_reg   = (Q'Yc)' (Q'Yc),
        s_resid = R'R for R = Yc - Q Q'Yc,
        s_total = Yc'Yc,

    each formed as a Gram matrix so positive semidefiniteness holds by
    construction.  Centering Yc leaves s_reg unchanged because the centered
    design span is orthogonal to the constant vector.

    Raises
    ------
    RankDeficiencyError
        If cond(X'X) exceeds 1e12.
    """
    x, y = data.x, data.y
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= 0.0 or (sv[0] / sv[-1]) ** 2 > COND_LIMIT:
        raise RankDeficiencyError(
            f"cond(X'X) = {(sv[0] / max(sv[-1], 1e-300)) ** 2:.3e} exceeds "
            f"{COND_LIMIT:g}; design columns are too collinear"
        )
    qmat = np.linalg.qr(x, mode="reduced")[0]
    yc = y - y.mean(axis=0)
    proj = qmat.T @ yc
    resid = yc - qmat @ proj
    s_reg = proj.T @ proj
    s_resid = resid.T @ resid
    s_total = yc.T @ yc
    s_reg = (s_reg + s_reg.T) / 2.0
    s_resid = (s_resid + s_resid.T) / 2.0
    s_total = (s_total + s_total.T) / 2.0
    return SumOfSquares(s_reg, s_resid, s_total, data.n, data.q)


def weighted_matrix(ss: SumOfSquares, w: float) -> np.ndarray:
    """Blend the regression and residual scatter: (1 - w) s_reg + w s_resid.

    w = 0 keeps only the regression scatter, w = 1 only the residual
    scatter, and w = 0.5 is half the total scatter (same eigenvectors).

    Raises
    ------
    ValueError
        If `w` is outside [0, 1].
    """
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"weight w = {w!r} outside [0, 1]")
    return (1.0 - w) * ss.s_reg + w * ss.s_resid
