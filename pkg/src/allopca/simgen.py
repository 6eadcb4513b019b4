"""Synthetic data generation for the rank-one regression model.

Data are drawn from

    Y = 1 mu' + X alpha gamma_1' + E,    rows of E ~ N_p(0, Sigma) iid,

with Sigma = Gamma diag(lambdas) Gamma' and gamma_1 the first column of
the orthonormal basis Gamma.  The design X is standard normal, column-
centered, and redrawn every replication.

Randomness is counter-based (Philox) and fully keyed: replication r of a
model draws its design from the stream (master_seed, r, 0) and its noise
from (master_seed, r, 1), so any subset of replications can be generated
independently, in any order, on any number of workers, with identical
results.  The orthonormal basis uses the one-element key (2,) and so never
collides with a replication stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, sym_eig
from .errors import DegreesOfFreedomError

_STREAM_X = 0
_STREAM_E = 1
_STREAM_GAMMA = 2


def substream(master_seed: int, *path: int) -> np.random.Generator:
    """A counter-based generator keyed by (master_seed, *path).

    Distinct paths give statistically independent streams, and the mapping
    is stable across processes and platforms.
    """
    if master_seed < 0:
        raise ValueError(f"`master_seed` must be >= 0, got {master_seed}")
    if any(k < 0 for k in path):
        raise ValueError(f"stream path entries must be >= 0, got {path}")
    seq = np.random.SeedSequence(master_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seq))


def random_gamma(p: int, seed: int) -> np.ndarray:
    """A seeded random orthonormal basis of R^p.

    Draws 2p standard normal vectors, forms their sample covariance, and
    returns its eigenvector basis (descending eigenvalues, package sign
    convention).  The basis is exactly reproducible from `seed`.
    """
    if p < 2:
        raise ValueError(f"`p` must be >= 2, got {p}")
    rng = substream(seed, _STREAM_GAMMA)
    z = rng.standard_normal((2 * p, p))
    zc = z - z.mean(axis=0)
    s = zc.T @ zc / (2 * p - 1)
    return sym_eig((s + s.T) / 2.0).vectors


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Complete description of one simulation model.

    Parameters
    ----------
    p, q, n : int
        Response dimension (>= 2), design rank (>= 1), sample size
        (> 1 + q).
    mu : ndarray of shape (p,)
        Intercept.
    alpha : ndarray of shape (q,)
        Design coefficients of the rank-one signal.
    lambdas : ndarray of shape (p,)
        Covariance eigenvalues, positive and non-increasing.
    gamma_basis : ndarray of shape (p, p)
        Orthonormal eigenvector basis; the first column is the signal axis.
    master_seed : int
        Root of the replication stream tree.
    """

    p: int
    q: int
    n: int
    mu: np.ndarray
    alpha: np.ndarray
    lambdas: np.ndarray
    gamma_basis: np.ndarray
    master_seed: int

    def __post_init__(self):
        p, q, n = int(self.p), int(self.q), int(self.n)
        if p < 2 or q < 1:
            raise ValueError(f"need p >= 2 and q >= 1; got p = {p}, q = {q}")
        if n <= 1 + q:
            raise ValueError(f"need n > 1 + q; got n = {n}, q = {q}")
        mu = np.asarray(self.mu, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        lam = np.asarray(self.lambdas, dtype=float)
        gamma = np.asarray(self.gamma_basis, dtype=float)
        if mu.shape != (p,):
            raise ValueError(f"`mu` must have shape ({p},), got {mu.shape}")
        if alpha.shape != (q,):
            raise ValueError(f"`alpha` must have shape ({q},), got {alpha.shape}")
        if lam.shape != (p,):
            raise ValueError(f"`lambdas` must have shape ({p},), got {lam.shape}")
        if gamma.shape != (p, p):
            raise ValueError(f"`gamma_basis` must have shape ({p}, {p}), got {gamma.shape}")
        for name, arr in (("mu", mu), ("alpha", alpha), ("lambdas", lam), ("gamma_basis", gamma)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"`{name}` contains non-finite entries")
        if np.any(lam <= 0) or np.any(np.diff(lam) > 0):
            raise ValueError("`lambdas` must be positive and non-increasing")
        ortho_err = float(np.max(np.abs(gamma.T @ gamma - np.eye(p))))
        if ortho_err > 1e-8:
            raise ValueError(f"`gamma_basis` not orthonormal: max|G'G - I| = {ortho_err:.3e}")
        if int(self.master_seed) < 0:
            raise ValueError(f"`master_seed` must be >= 0, got {self.master_seed}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "master_seed", int(self.master_seed))
        for name, arr in (("mu", mu), ("alpha", alpha), ("lambdas", lam), ("gamma_basis", gamma)):
            frozen = np.array(arr, dtype=float)
            frozen.flags.writeable = False
            object.__setattr__(self, name, frozen)

    @property
    def gamma1(self) -> np.ndarray:
        """The signal axis (first basis column)."""
        return self.gamma_basis[:, 0]

    @property
    def lambda1(self) -> float:
        return float(self.lambdas[0])

    @property
    def lambda2(self) -> float:
        return float(self.lambdas[1])

    def sigma(self) -> np.ndarray:
        """The noise covariance Gamma diag(lambdas) Gamma'."""
        s = (self.gamma_basis * self.lambdas) @ self.gamma_basis.T
        return (s + s.T) / 2.0


def gen_dataset(spec: ModelSpec, replication: int = 0) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Draw one replication of the model.

    Parameters
    ----------
    spec : ModelSpec
    replication : int
        Replication index; selects the (X, E) substreams.

    Returns
    -------
    (dataset, gamma1, sigma)
        The drawn data plus the ground-truth axis and covariance.
    """
    if replication < 0:
        raise ValueError(f"`replication` must be >= 0, got {replication}")
    n, p, q = spec.n, spec.p, spec.q
    rng_x = substream(spec.master_seed, replication, _STREAM_X)
    x = rng_x.standard_normal((n, q))
    x -= x.mean(axis=0)
    rng_e = substream(spec.master_seed, replication, _STREAM_E)
    z = rng_e.standard_normal((n, p))
    root = spec.gamma_basis * np.sqrt(spec.lambdas)
    e = z @ root.T
    y = spec.mu + np.outer(x @ spec.alpha, spec.gamma1) + e
    return Dataset(y, x), spec.gamma1, spec.sigma()


# --------------------------------------------------------------------------
# named scenarios
# --------------------------------------------------------------------------

TABLE3_CASES = ("weak_spike", "strong_spike")


def scenario_table1(n: int, seed: int) -> ModelSpec:
    """Baseline scenario: p = 10, q = 5, lambdas = (2, 1, ..., 1), alpha = 1.

    Any n > 7 is accepted so the plug-in weight is always defined.
    """
    if n <= 7:
        raise DegreesOfFreedomError(f"baseline scenario needs n > 7, got n = {n}")
    p, q = 10, 5
    lam = np.ones(p)
    lam[0] = 2.0
    return ModelSpec(
        p=p, q=q, n=int(n),
        mu=np.zeros(p), alpha=np.ones(q),
        lambdas=lam, gamma_basis=random_gamma(p, seed),
        master_seed=int(seed),
    )


def scenario_table2(n: int, eta: float, seed: int) -> ModelSpec:
    """Shrinking-eigengap scenario: lambda_1 = 1 + n^(-eta), others 1."""
    if eta <= 0:
        raise ValueError(f"`eta` must be > 0, got {eta}")
    if n <= 7:
        raise DegreesOfFreedomError(f"shrinking-gap scenario needs n > 7, got n = {n}")
    p, q = 10, 5
    lam = np.ones(p)
    lam[0] = 1.0 + float(n) ** (-float(eta))
    return ModelSpec(
        p=p, q=q, n=int(n),
        mu=np.zeros(p), alpha=np.ones(q),
        lambdas=lam, gamma_basis=random_gamma(p, seed),
        master_seed=int(seed),
    )


def scenario_large_p(p: int, delta: float, beta: float, beta2: float, seed: int) -> ModelSpec:
    """Growing-dimension model: n = floor(p^delta), spiked lambdas."""
    q = 5
    n = int(math.floor(float(p) ** float(delta)))
    if n <= 2 + q:
        raise DegreesOfFreedomError(
            f"p = {p} gives n = {n} <= q + 2 = {q + 2}; increase p or delta"
        )
    lam = np.ones(p)
    lam[0] = float(p) ** beta if beta > 0 else 1.0 + float(p) ** beta
    lam[1] = float(p) ** beta2
    if not lam[0] > lam[1] >= 1.0:
        raise ValueError(
            f"spike exponents give lambda_1 = {lam[0]}, lambda_2 = {lam[1]}; "
            f"need lambda_1 > lambda_2 >= 1"
        )
    return ModelSpec(
        p=int(p), q=q, n=n,
        mu=np.zeros(p), alpha=np.ones(q),
        lambdas=lam, gamma_basis=random_gamma(int(p), seed),
        master_seed=int(seed),
    )


def scenario_table3(p: int, case: str, seed: int) -> ModelSpec:
    """Growing-dimension scenario: q = 5, n = floor(p^0.8), spiked spectrum.

    `case` selects the spike strength:

    - "weak_spike": lambda_1 = p^0.25, lambda_2 = 1;
    - "strong_spike": lambda_1 = p^0.8, lambda_2 = p^0.4.

    Remaining eigenvalues are 1.  Requires p > 10.
    """
    if case not in TABLE3_CASES:
        raise ValueError(f"`case` must be one of {TABLE3_CASES}, got {case!r}")
    if p <= 10:
        raise ValueError(f"`p` must be > 10, got {p}")
    if case == "weak_spike":
        return scenario_large_p(p, 0.8, 0.25, 0.0, seed)
    return scenario_large_p(p, 0.8, 0.8, 0.4, seed)


# --------------------------------------------------------------------------
# asymptotic regimes for consistency sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Traditional:
    """Fixed model (baseline scenario), sample size grows."""


@dataclass(frozen=True)
class WeakIdentifiability:
    """Eigengap shrinks with n: lambda_1 = 1 + n^(-eta)."""

    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"`eta` must be > 0, got {self.eta}")
        object.__setattr__(self, "eta", float(self.eta))


@dataclass(frozen=True)
class LargePLargeN:
    """Dimension grows with n = floor(p^delta); spikes are powers of p.

    lambda_1 = p^beta (or 1 + p^beta when beta <= 0, keeping the spectrum
    ordered), lambda_2 = p^beta2, the rest 1.
    """

    delta: float
    beta: float
    beta2: float = 0.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"`delta` must be > 0, got {self.delta}")
        if self.beta > 1:
            raise ValueError(f"`beta` must be <= 1, got {self.beta}")
        if self.beta > 0:
            if not 0.0 <= self.beta2 < self.beta:
                raise ValueError(
                    f"need 0 <= beta2 < beta; got beta = {self.beta}, beta2 = {self.beta2}"
                )
        elif self.beta2 != 0.0:
            raise ValueError("`beta2` must be 0 when beta <= 0")
        for name in ("delta", "beta", "beta2"):
            object.__setattr__(self, name, float(getattr(self, name)))


@dataclass(frozen=True)
class RegimeSpec:
    """An asymptotic regime plus the grid of sizes to sweep.

    `grid` holds sample sizes n for `Traditional` and `WeakIdentifiability`
    and dimensions p for `LargePLargeN`; it must be strictly increasing.
    """

    kind: Traditional | WeakIdentifiability | LargePLargeN
    grid: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.kind, (Traditional, WeakIdentifiability, LargePLargeN)):
            raise ValueError(f"unknown regime kind: {self.kind!r}")
        grid = tuple(int(g) for g in self.grid)
        if len(grid) < 2:
            raise ValueError("`grid` needs at least two sizes to show a trend")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"`grid` must be strictly increasing, got {grid}")
        object.__setattr__(self, "grid", grid)

    def point_label(self, size: int) -> str:
        axis = "p" if isinstance(self.kind, LargePLargeN) else "n"
        return f"{axis}={size}"

    def model_spec(self, size: int, seed: int) -> ModelSpec:
        """The model at one grid point."""
        if isinstance(self.kind, Traditional):
            return scenario_table1(size, seed)
        if isinstance(self.kind, WeakIdentifiability):
            return scenario_table2(size, self.kind.eta, seed)
        return scenario_large_p(size, self.kind.delta, self.kind.beta, self.kind.beta2, seed)
