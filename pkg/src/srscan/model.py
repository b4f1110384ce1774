"""Domain types shared by the sampler: hyperparameters, chain configuration,
data container and the mutable chain state."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

B_PI_FLOOR = 1e-6
PI_EDGE = 1e-12


class ValidationError(ValueError):
    """Raised when a configuration or dataset violates an invariant.

    ``field`` names the offending attribute so that CLI front ends can point
    the user at the flag to fix.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ScanMode(str, Enum):
    RANDOM_SCAN = "random_scan"
    FULL_SWEEP = "full_sweep"


@dataclass(frozen=True)
class Hyperparameters:
    """Prior hyperparameters.

    Gamma priors use the shape/rate parameterization, the inverse-gamma prior
    on ``sigma2`` uses shape/scale.  ``sigma_prop`` is the standard deviation
    of the log-scale random walk on ``(a_pi, b_pi)``.
    """

    lambda1: float = 1.0
    a_kappa: float = 1.0
    b_kappa: float = 1.0
    a_sigma: float = 1.0
    b_sigma: float = 1.0
    alpha_a: float = 1.0
    beta_a: float = 1.0
    alpha_b: float = 1.0
    beta_b: float = 0.1
    sigma_prop: float = 0.5

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f.name, f"must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class ChainConfig:
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    epsilon: float = 0.1
    m: int = 500
    n_iter: int = 10_000
    burn_in: int = 2_000
    thin: int = 1
    k_target: int = 20
    scan_mode: ScanMode = ScanMode.RANDOM_SCAN
    seed: int = 0
    standardize: bool = False
    gram_cap: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "scan_mode", ScanMode(self.scan_mode))
        if isinstance(self.hyper, dict):
            object.__setattr__(self, "hyper", Hyperparameters(**self.hyper))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scan_mode"] = self.scan_mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        d = dict(d)
        if "hyper" in d and isinstance(d["hyper"], dict):
            d["hyper"] = Hyperparameters(**d["hyper"])
        return cls(**d)


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    names: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column_names(self) -> list[str]:
        if self.names is not None:
            return list(self.names)
        return [f"x{j + 1}" for j in range(self.p)]


@dataclass
class ModelState:
    """Current values of every sampled quantity.

    ``active`` lists the included coordinates in insertion order and
    ``beta_active`` is aligned with it; inactive coefficients are exactly zero
    and therefore not stored.
    """

    z: np.ndarray
    active: list[int]
    beta_active: np.ndarray
    tau2: np.ndarray
    kappa2: float
    sigma2: float
    pi: float
    a_pi: float
    b_pi: float

    @property
    def p(self) -> int:
        return self.z.shape[0]

    def beta_full(self) -> np.ndarray:
        beta = np.zeros(self.p)
        beta[self.active] = self.beta_active
        return beta

    def copy(self) -> "ModelState":
        return ModelState(
            z=self.z.copy(), active=list(self.active), beta_active=self.beta_active.copy(),
            tau2=self.tau2.copy(), kappa2=self.kappa2, sigma2=self.sigma2, pi=self.pi,
            a_pi=self.a_pi, b_pi=self.b_pi,
        )

    def check(self) -> None:
        """Assert the structural invariants; used by tests and debug runs."""
        idx = np.flatnonzero(self.z)
        assert len(set(self.active)) == len(self.active), "duplicate active index"
        assert sorted(self.active) == idx.tolist(), "active set out of sync with z"
        assert self.beta_active.shape == (len(self.active),)
        assert np.all(self.tau2 > 0) and self.kappa2 > 0 and self.sigma2 > 0
        assert 0.0 < self.pi < 1.0


def validate(config: ChainConfig, data: Dataset) -> tuple[ChainConfig, Dataset]:
    """Check ``config`` against ``data`` and return the pair unchanged."""
    X, y = data.X, data.y
    if X.ndim != 2:
        raise ValidationError("X", f"expected a 2-d matrix, got shape {X.shape}")
    n, p = X.shape
    if y.shape[0] != n:
        raise ValidationError("y", f"length {y.shape[0]} does not match X rows {n}")
    if n < 2:
        raise ValidationError("X", "need at least 2 observations")
    if p < 1:
        raise ValidationError("X", "need at least 1 predictor")
    if not np.all(np.isfinite(X)):
        r, c = np.argwhere(~np.isfinite(X))[0]
        raise ValidationError("X", f"non-finite entry at row {r + 1}, column {c + 1}")
    if not np.all(np.isfinite(y)):
        r = int(np.flatnonzero(~np.isfinite(y))[0])
        raise ValidationError("y", f"non-finite entry at row {r + 1}")
    if data.names is not None and len(data.names) != p:
        raise ValidationError("names", f"{len(data.names)} names for {p} columns")

    if not 0.0 < config.epsilon < 1.0:
        raise ValidationError("epsilon", "epsilon must lie in (0,1)")
    if config.m < 1:
        raise ValidationError("m", "m must be at least 1")
    if config.m > p:
        raise ValidationError("m", f"m exceeds p ({config.m} > {p})")
    if not 1 <= config.k_target <= p:
        raise ValidationError("k_target", f"k_target must lie in [1, {p}]")
    if config.n_iter < 1:
        raise ValidationError("n_iter", "n_iter must be positive")
    if config.thin < 1:
        raise ValidationError("thin", "thin must be positive")
    if not 0 <= config.burn_in < config.n_iter:
        raise ValidationError("burn_in", "burn_in must lie in [0, n_iter)")
    if config.seed < 0:
        raise ValidationError("seed", "seed must be non-negative")
    return config, data


def initialize_state(config: ChainConfig, p: int, rng: np.random.Generator) -> ModelState:
    """Sparse random start whose prior expected model size is ``k_target``."""
    lam2 = config.hyper.lambda1 ** 2
    k = min(config.k_target, p)
    active = sorted(rng.choice(p, size=k, replace=False).tolist())
    z = np.zeros(p, dtype=bool)
    z[active] = True
    beta_active = rng.normal(0.0, 0.1, size=k)
    tau2 = rng.exponential(scale=1.0 / (3.0 * lam2), size=p)
    a_pi = 1.0
    b_pi = max(a_pi * (p / config.k_target - 1.0), B_PI_FLOOR)
    pi = min(max(config.k_target / p, PI_EDGE), 1.0 - PI_EDGE)
    return ModelState(
        z=z, active=active, beta_active=beta_active, tau2=tau2,
        kappa2=1.0, sigma2=1.0, pi=pi, a_pi=a_pi, b_pi=b_pi,
    )
