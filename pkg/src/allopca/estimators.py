"""Leading-axis estimators built from weighted sum-of-squares matrices.

The estimator family indexes a one-parameter blend of the regression and
residual scatter,

    S(w) = (1 - w) s_reg + w s_resid,      w in [0, 1],

and takes the leading eigenvector of S(w) as the estimate of the principal
axis.  w = 0.5 reproduces the ordinary PCA direction of the total scatter,
w = 1 uses the residual scatter alone, and w = 0 the regression scatter
alone.  The mean-squared-error-optimal weight has a closed form in the
scalar summaries

    a = tr(Sigma^2) + (tr Sigma)^2,
    b = lambda_1 + tr Sigma,
    c = ||X alpha||^2           (signal energy through the design),
    d = lambda_1 - lambda_2     (eigengap),

and each of those summaries has a natural plug-in estimate from the data,
leading to a fully data-driven weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, SumOfSquares, sums_of_squares, sym_eig, weighted_matrix
from .errors import DegreesOfFreedomError, RankDeficiencyError

# An eigenvalue tie is declared when the top gap is this small relative to
# the trace of the blended matrix.
TIE_TOL = 1e-12

# Data-driven weights are clamped into [0, WEIGHT_CAP]; the optimal weight
# always lies strictly below 2/3 whenever a >= b * d, which holds for
# summaries derived from a common covariance spectrum.
WEIGHT_CAP = 2.0 / 3.0


@dataclass(frozen=True)
class AbcdParams:
    """Scalar model summaries (a, b, c, d) with the sample dimensions.

    Requires a, b, d > 0, c >= 0, q >= 1, n > 1 + q, and a >= b * d.  The
    last condition is automatic when a, b and d come from one covariance
    spectrum (lambda_1^2 <= tr(Sigma^2) and lambda_1 <= tr Sigma) and is
    what keeps the optimal weight below 2/3.
    """

    a: float
    b: float
    c: float
    d: float
    q: int
    n: int

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (isinstance(self.q, (int, np.integer)) and isinstance(self.n, (int, np.integer))):
            raise ValueError("`q` and `n` must be ints")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "n", int(self.n))
        vals = (self.a, self.b, self.c, self.d)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"parameters must be finite, got {vals}")
        if self.a <= 0 or self.b <= 0 or self.d <= 0:
            raise ValueError(f"need a, b, d > 0; got a={self.a}, b={self.b}, d={self.d}")
        if self.c < 0:
            raise ValueError(f"need c >= 0, got c={self.c}")
        if self.q < 1 or self.n <= 1 + self.q:
            raise ValueError(f"need q >= 1 and n > 1 + q; got q={self.q}, n={self.n}")
        if self.b * self.d > self.a * (1.0 + 1e-12):
            raise ValueError(
                f"need a >= b * d (true for any covariance spectrum); "
                f"got a={self.a}, b*d={self.b * self.d}"
            )

    @classmethod
    def from_spectrum(cls, lambdas, c: float, q: int, n: int) -> "AbcdParams":
        """Summaries of a covariance with eigenvalues `lambdas` (descending)."""
        lam = np.asarray(lambdas, dtype=float)
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("`lambdas` must be 1-D with at least two entries")
        if np.any(lam < 0) or np.any(np.diff(lam) > 0):
            raise ValueError("`lambdas` must be non-negative and non-increasing")
        tr = float(lam.sum())
        a = float((lam ** 2).sum()) + tr * tr
        b = float(lam[0]) + tr
        d = float(lam[0] - lam[1])
        return cls(a, b, float(c), d, q, n)


def w_star(params: AbcdParams) -> float:
    """The weight minimizing the estimation-error bound, in closed form.

    Equals (a d q + 2 b c d) / (2 a d q + 2 b c d + a c).  Always lies in
    (0, 2/3), and equals exactly 0.5 when c = 0 (no signal through the
    design, so the blend should fall back to total-scatter PCA).
    """
    a, b, c, d, q = params.a, params.b, params.c, params.d, params.q
    num = a * d * q + 2.0 * b * c * d
    den = 2.0 * a * d * q + 2.0 * b * c * d + a * c
    return num / den


@dataclass(frozen=True, eq=False)
class Gamma1Estimate:
    """Leading-axis estimate: unit vector, the weight used, and tie info.

    `leading_gap` is the gap between the two largest eigenvalues of the
    blended matrix; `tie_flag` marks a numerically degenerate gap, in which
    case the returned direction is arbitrary within the tied eigenspace.
    """

    vector: np.ndarray
    weight_used: float
    leading_gap: float
    tie_flag: bool

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1:
            raise ValueError(f"`vector` must be 1-D, got shape {v.shape}")
        nrm = float(np.linalg.norm(v))
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"`vector` must be unit length, got norm {nrm!r}")
        if not 0.0 <= self.weight_used <= 1.0:
            raise ValueError(f"`weight_used` outside [0, 1]: {self.weight_used!r}")
        if self.leading_gap < 0.0:
            raise ValueError(f"`leading_gap` must be >= 0, got {self.leading_gap!r}")
        arr = np.array(v, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "vector", arr)
        object.__setattr__(self, "weight_used", float(self.weight_used))
        object.__setattr__(self, "leading_gap", float(self.leading_gap))
        object.__setattr__(self, "tie_flag", bool(self.tie_flag))


def gamma1_hat(ss: SumOfSquares, w: float) -> Gamma1Estimate:
    """Leading eigenvector of the blended scatter S(w).

    Parameters
    ----------
    ss : SumOfSquares
    w : float
        Blend weight in [0, 1].

    Returns
    -------
    Gamma1Estimate
        Unit-norm estimate under the package sign convention.  The result
        is invariant (bit-identical) under positive power-of-two rescaling
        of both scatter matrices, and stable up to roundoff under any other
        positive rescaling.
    """
    if ss.p < 2:
        raise ValueError("need at least two response coordinates")
    m = weighted_matrix(ss, w)
    eig = sym_eig(m)
    gap = float(eig.values[0] - eig.values[1])
    trace = float(np.trace(m))
    tie = gap <= TIE_TOL * trace
    return Gamma1Estimate(eig.vectors[:, 0], float(w), gap, tie)


def mse_up_to_sign(g_hat: np.ndarray, g_true: np.ndarray) -> float:
    """Squared error between unit vectors, minimized over the sign of g_hat.

    Returns min over s in {-1, +1} of ||s * g_hat - g_true||^2, which for
    unit vectors equals 2 - 2 |<g_hat, g_true>| and lies in [0, 2].

    Raises
    ------
    ValueError
        If the inputs are not unit length within 1e-8.
    """
    g_hat = np.asarray(g_hat, dtype=float)
    g_true = np.asarray(g_true, dtype=float)
    if g_hat.shape != g_true.shape or g_hat.ndim != 1:
        raise ValueError(
            f"inputs must be 1-D of equal length, got {g_hat.shape} and {g_true.shape}"
        )
    for name, v in (("g_hat", g_hat), ("g_true", g_true)):
        nrm = float(np.linalg.norm(v))
        if abs(nrm - 1.0) > 1e-8:
            raise ValueError(f"`{name}` must be unit length, got norm {nrm!r}")
    dot = float(np.dot(g_hat, g_true))
    return max(0.0, 2.0 - 2.0 * abs(dot))


@dataclass(frozen=True, eq=False)
class PluginWeights:
    """Plug-in model summaries and the data-driven weight they produce.

    `w_hat_raw` is the closed-form weight evaluated at the plug-in
    summaries (NaN when its denominator vanishes); `w_hat` is the usable
    version, set to 0 when the denominator is non-positive and clamped
    into [0, 2/3] otherwise.
    """

    sigma_hat: np.ndarray
    lambda1_hat: float
    lambda2_hat: float
    tr_sigma2_hat: float
    a_hat: float
    b_hat: float
    c_hat: float
    d_hat: float
    w_hat_raw: float
    w_hat: float

    def __post_init__(self):
        s = np.asarray(self.sigma_hat, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"`sigma_hat` must be square, got shape {s.shape}")
        asym = float(np.max(np.abs(s - s.T))) if s.size else 0.0
        if asym > 1e-10 * max(float(np.max(np.abs(s))), 1e-300):
            raise ValueError("`sigma_hat` must be symmetric")
        if float(np.linalg.eigvalsh(s)[0]) < -1e-8 * max(float(np.trace(s)), 0.0):
            raise ValueError("`sigma_hat` must be positive semidefinite")
        if self.d_hat < 0.0:
            raise ValueError(f"`d_hat` must be >= 0, got {self.d_hat!r}")
        if not 0.0 <= self.w_hat <= WEIGHT_CAP:
            raise ValueError(f"`w_hat` outside [0, 2/3]: {self.w_hat!r}")
        arr = np.array(s, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "sigma_hat", arr)
        for name in ("lambda1_hat", "lambda2_hat", "tr_sigma2_hat", "a_hat",
                     "b_hat", "c_hat", "d_hat", "w_hat_raw", "w_hat"):
            object.__setattr__(self, name, float(getattr(self, name)))


def estimate_abcd(ss: SumOfSquares) -> PluginWeights:
    """Plug-in estimates of (a, b, c, d) and the data-driven weight.

    With m = n - 1 - q residual degrees of freedom:

    - Sigma_hat = s_resid / m;
    - tr(Sigma^2) is estimated unbiasedly by
      {tr(s_resid^2) - (tr s_resid)^2 / m} / {(n + 1 - q)(n - 2 - q)};
    - a_hat = that estimate + (tr Sigma_hat)^2;
    - b_hat = lambda1_hat + tr Sigma_hat, with lambda1_hat, lambda2_hat the
      two largest eigenvalues of Sigma_hat;
    - c_hat = tr(s_reg) - q tr(Sigma_hat);
    - d_hat = lambda1_hat - lambda2_hat.

    Requires n > 2 + q so the variance-correction factor is positive.

    Raises
    ------
    DegreesOfFreedomError
        If n <= 2 + q.
    """
    n, q = ss.n, ss.q
    if n <= 2 + q:
        raise DegreesOfFreedomError(
            f"plug-in weight needs n > q + 2; got n = {n}, q = {q}"
        )
    m = n - 1 - q
    sigma_hat = ss.s_resid / m
    evals = np.linalg.eigvalsh(sigma_hat)[::-1]
    lam1, lam2 = float(evals[0]), float(evals[1])
    tr_sig = float(np.trace(sigma_hat))
    tr_se = float(np.trace(ss.s_resid))
    tr_se2 = float(np.sum(ss.s_resid * ss.s_resid))
    tr_sigma2_hat = (tr_se2 - tr_se ** 2 / m) / ((n + 1 - q) * (n - 2 - q))
    a_hat = tr_sigma2_hat + tr_sig ** 2
    b_hat = lam1 + tr_sig
    c_hat = float(np.trace(ss.s_reg)) - q * tr_sig
    d_hat = max(lam1 - lam2, 0.0)
    num = a_hat * d_hat * q + 2.0 * b_hat * c_hat * d_hat
    den = 2.0 * a_hat * d_hat * q + 2.0 * b_hat * c_hat * d_hat + a_hat * c_hat
    w_raw = num / den if den != 0.0 else float("nan")
    if den <= 0.0:
        w_hat = 0.0
    else:
        w_hat = min(max(w_raw, 0.0), WEIGHT_CAP)
    return PluginWeights(
        sigma_hat=sigma_hat,
        lambda1_hat=lam1,
        lambda2_hat=lam2,
        tr_sigma2_hat=tr_sigma2_hat,
        a_hat=a_hat,
        b_hat=b_hat,
        c_hat=c_hat,
        d_hat=d_hat,
        w_hat_raw=w_raw,
        w_hat=w_hat,
    )


# --------------------------------------------------------------------------
# rank-one regression fits and leave-one-out evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FixedWeight:
    """Use a fixed blend weight."""

    w: float

    def __post_init__(self):
        w = float(self.w)
        if not 0.0 <= w <= 1.0:
            raise ValueError(f"weight w = {w!r} outside [0, 1]")
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class PluginRule:
    """Use the data-driven weight from `estimate_abcd`."""


@dataclass(frozen=True)
class OlsRule:
    """Unrestricted least-squares fit (no rank-one projection)."""


def _ols_fit(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients (q x p) and intercept for centered x."""
    x, y = data.x, data.y
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] <= 0.0 or (sv[0] / sv[-1]) ** 2 > 1e12:
        raise RankDeficiencyError(
            f"cond(X'X) = {(sv[0] / max(sv[-1], 1e-300)) ** 2:.3e} too large "
            f"for a least-squares fit"
        )
    qmat, rmat = np.linalg.qr(x, mode="reduced")
    coef = np.linalg.solve(rmat, qmat.T @ y)
    mu = y.mean(axis=0)
    return coef, mu


def reduced_rank_coefficients(
    data: Dataset, g_hat: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one coefficient matrix obtained by projecting the OLS fit.

    Projects each response's least-squares coefficient vector onto the
    estimated axis: B = B_ols g g'.  Returns (B, mu) with B of shape
    (q, p) and mu the intercept (column means of y, exact because x is
    centered).

    Raises
    ------
    ValueError
        If `g_hat` is not a unit vector of length p.
    RankDeficiencyError
        If the design is too ill-conditioned.
    """
    g = np.asarray(g_hat, dtype=float)
    if g.ndim != 1 or g.size != data.p:
        raise ValueError(f"`g_hat` must have shape ({data.p},), got {g.shape}")
    nrm = float(np.linalg.norm(g))
    if abs(nrm - 1.0) > 1e-8:
        raise ValueError(f"`g_hat` must be unit length, got norm {nrm!r}")
    coef, mu = _ols_fit(data)
    return np.outer(coef @ g, g), mu


def loo_cv_mspe(data: Dataset, rule) -> float:
    """Leave-one-out mean squared prediction error of a weight rule.

    For each held-out observation the remaining rows are re-centered, the
    model is refit under `rule`, and the held-out response is predicted;
    the average of ||y_i - yhat_i||^2 over all n folds is returned.

    Parameters
    ----------
    data : Dataset
    rule : FixedWeight | PluginRule | OlsRule

    Raises
    ------
    DegreesOfFreedomError
        If n <= q + 3, so some fold could not support every rule.
    """
    if not isinstance(rule, (FixedWeight, PluginRule, OlsRule)):
        raise ValueError(f"unknown rule: {rule!r}")
    x, y = data.x, data.y
    n, q = data.n, data.q
    if n <= q + 3:
        raise DegreesOfFreedomError(
            f"leave-one-out folds have {n - 1} training rows but need more "
            f"than {q + 2} (n > q + 3); got n = {n}, q = {q}"
        )
    sse = 0.0
    for i in range(n):
        mask = np.arange(n) != i
        x_tr = x[mask]
        fold_means = x_tr.mean(axis=0)
        fold = Dataset(y[mask], x_tr - fold_means)
        if isinstance(rule, OlsRule):
            coef, mu = _ols_fit(fold)
        else:
            ss = sums_of_squares(fold)
            if isinstance(rule, FixedWeight):
                w = rule.w
            else:
                w = estimate_abcd(ss).w_hat
            g = gamma1_hat(ss, w).vector
            coef, mu = reduced_rank_coefficients(fold, g)
        pred = mu + (x[i] - fold_means) @ coef
        resid = y[i] - pred
        sse += float(resid @ resid)
    return sse / n
