"""Synthetic target/source problems for the five benchmark designs.

Randomness comes from one root seed. Every (trial, component) pair gets its
own stream through ``SeedSequence(seed, spawn_key=(trial, label_hash))`` so
adding trials or components never shifts the draws of existing ones.
"""
import dataclasses
import enum
import hashlib
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigError
from .ipod import Dataset

EX1_W = (1.5, 0.75, 0.0, 0.0, -1.25)


class Example(str, enum.Enum):
    EX1 = "Ex1"
    EX2 = "Ex2"
    EX3 = "Ex3"
    EX4 = "Ex4"
    EX5 = "Ex5"


class Covariance(str, enum.Enum):
    IDENTITY = "identity"
    TOEPLITZ = "toeplitz"   # per-source banded Toeplitz, identity for the target
    AR05 = "ar05"


class Noise(str, enum.Enum):
    UNIT = "unit"
    PER_SOURCE = "per_source"   # source k has variance (k+1)/10


@dataclass
class SimulationConfig:
    example_id: Example = Example.EX1
    n: int = 150
    p: int = 100
    K: int = 5
    s: int = 25
    N: int = 1000
    rho: float = 0.1
    h: float = 6.0
    w: tuple = EX1_W          # None draws U(-2, 2) per coordinate
    covariance: Covariance = Covariance.IDENTITY
    noise: Noise = Noise.UNIT
    noise_scale: float = 1.0  # multiplies every noise standard deviation
    seed: int = 0
    identified: bool = True   # delta support restricted to {s+1..p}
    variance_params: bool = True   # N(a, b) and N(0, h/s_delta) read b, h/s_delta as variances
    shared_contamination: bool = False  # one (a, b) draw per dataset instead of per point

    def __post_init__(self):
        self.example_id = Example(self.example_id)
        self.covariance = Covariance(self.covariance)
        self.noise = Noise(self.noise)
        if self.w is not None:
            self.w = tuple(float(x) for x in self.w)
        self.validate()

    @property
    def r0(self):
        return self.s // 3

    @property
    def s_delta(self):
        return self.s // 5

    def validate(self):
        for name in ("n", "p", "K", "s", "N"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.s > self.p:
            raise ConfigError(f"s={self.s} exceeds p={self.p}")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError(f"rho must lie in [0, 1], got {self.rho}")
        if self.h < 0 or self.noise_scale < 0:
            raise ConfigError("h and noise_scale must be nonnegative")
        if self.r0 < self.K:
            raise ConfigError(f"floor(s/3)={self.r0} must be >= K={self.K}")
        if self.s_delta < 1:
            raise ConfigError(f"floor(s/5) must be >= 1, got s={self.s}")
        if self.identified and self.s_delta > self.p - self.s:
            raise ConfigError(f"s_delta={self.s_delta} exceeds p - s = {self.p - self.s}")
        if self.w is not None and len(self.w) != self.K:
            raise ConfigError(f"w has {len(self.w)} entries but K={self.K}")
        if self.covariance is Covariance.TOEPLITZ and 2 * self.K > self.p:
            raise ConfigError(f"Toeplitz sources need 2K <= p, got K={self.K}, p={self.p}")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def digest(self):
        items = sorted((k, str(v.value if isinstance(v, enum.Enum) else v))
                       for k, v in dataclasses.asdict(self).items())
        return hashlib.sha1(repr(items).encode()).hexdigest()[:12]


def reference_config(example_id, **overrides):
    """Desk configuration for one of the five designs (N=1000, s=25 rows)."""
    ex = Example(example_id)
    base = dict(example_id=ex, n=150, p=100, K=5, s=25, N=1000, rho=0.1, h=6.0, w=EX1_W)
    if ex is Example.EX2:
        base.update(n=200, s=30, K=4, w=None, rho=0.05)
    elif ex is Example.EX3:
        base.update(covariance=Covariance.TOEPLITZ, noise=Noise.PER_SOURCE)
    elif ex is Example.EX4:
        base.update(covariance=Covariance.AR05, identified=False)
    elif ex is Example.EX5:
        base.update(n=50)
    if "K" in overrides and "w" not in overrides and ex is not Example.EX2:
        raise ConfigError("changing K requires an explicit w")
    base.update(overrides)
    return SimulationConfig(**base)


@dataclass
class GroundTruth:
    beta: np.ndarray
    B: np.ndarray
    w: np.ndarray
    delta: np.ndarray
    gamma_target: np.ndarray
    gamma_sources: list
    outliers_target: np.ndarray
    outliers_sources: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------


def trial_seed(seed, trial):
    return np.random.SeedSequence(int(seed), spawn_key=(int(trial),))


def stream(seed_seq, label):
    key = tuple(seed_seq.spawn_key) + (zlib.crc32(label.encode()),)
    return np.random.default_rng(np.random.SeedSequence(seed_seq.entropy, spawn_key=key))


# ---------------------------------------------------------------------------
# components
# ---------------------------------------------------------------------------


def gen_coefficient_bank(p, s, K, rng):
    """``B = (2 U_K; 0.3 I_{s-r0,K}; 0_{p-s,K})`` with ``U_K`` from the SVD of a Gaussian."""
    r0 = s // 3
    if r0 < K:
        raise ConfigError(f"floor(s/3)={r0} must be >= K={K}")
    omega = rng.standard_normal((r0, K))
    U, _, _ = np.linalg.svd(omega, full_matrices=False)
    B = np.zeros((p, K))
    B[:r0] = 2.0 * U[:, :K]
    B[r0:s] = 0.3 * np.eye(s - r0, K)
    return B


def gen_delta(p, s, h, rng, identified=True, variance=True):
    s_delta = s // 5
    if s_delta < 1:
        raise ConfigError(f"floor(s/5) must be >= 1, got s={s}")
    pool = np.arange(s, p) if identified else np.arange(p)
    if s_delta > pool.size:
        raise ConfigError(f"cannot draw {s_delta} delta positions from {pool.size}")
    support = np.sort(rng.choice(pool, size=s_delta, replace=False))
    spread = np.sqrt(h / s_delta) if variance else h / s_delta
    delta = np.zeros(p)
    delta[support] = spread * rng.standard_normal(s_delta)
    return delta


def gen_contamination(m, rho, rng, variance=True, shared=False):
    """Mean shifts ``N(a, b)`` with ``a ~ U(0,20)``, ``b ~ U(0,5)`` on ``floor(rho m)`` points."""
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"rho must lie in [0, 1], got {rho}")
    size = int(np.floor(rho * m + 1e-9))
    idx = np.sort(rng.choice(m, size=size, replace=False))
    n_draw = 1 if shared else size
    a = rng.uniform(0.0, 20.0, n_draw)
    b = rng.uniform(0.0, 5.0, n_draw)
    sd = np.sqrt(b) if variance else b
    gamma = np.zeros(m)
    gamma[idx] = a + sd * rng.standard_normal(size)
    return gamma, idx


def covariance_matrix(kind, p, k=None):
    kind = Covariance(kind)
    if kind is Covariance.IDENTITY:
        return np.eye(p)
    if kind is Covariance.AR05:
        idx = np.arange(p)
        return 0.5 ** np.abs(idx[:, None] - idx[None, :])
    if k is None:
        raise ConfigError("Toeplitz covariance needs a source index k")
    if 2 * k > p:
        raise ConfigError(f"Toeplitz covariance needs 2k <= p, got k={k}, p={p}")
    row = np.zeros(p)
    row[0] = 1.0
    row[1:2 * k] = 1.0 / (k + 1)
    sigma = toeplitz(row)
    low = np.linalg.eigvalsh(sigma)[0]
    if not low > 0:
        raise ConfigError(f"Toeplitz covariance for k={k}, p={p} is not PD (eigenvalue {low:.3g})")
    return sigma


def _draw_design(rng, n, sigma):
    p = sigma.shape[0]
    z = rng.standard_normal((n, p))
    if np.array_equal(sigma, np.eye(p)):
        return z
    return z @ np.linalg.cholesky(sigma).T


def gen_problem(config, seed_seq=None):
    """Draw target, sources and the ground truth for one trial.

    ``seed_seq`` defaults to trial 0 of ``config.seed``.
    """
    cfg = config
    cfg.validate()
    ss = trial_seed(cfg.seed, 0) if seed_seq is None else seed_seq
    B = gen_coefficient_bank(cfg.p, cfg.s, cfg.K, stream(ss, "B"))
    delta = gen_delta(cfg.p, cfg.s, cfg.h, stream(ss, "delta"), cfg.identified, cfg.variance_params)
    if cfg.w is None:
        w = stream(ss, "w").uniform(-2.0, 2.0, cfg.K)
    else:
        w = np.asarray(cfg.w, dtype=float)
    beta = B @ w + delta

    target_cov = Covariance.AR05 if cfg.covariance is Covariance.AR05 else Covariance.IDENTITY
    X = _draw_design(stream(ss, "target.X"), cfg.n, covariance_matrix(target_cov, cfg.p))
    gamma, outliers = gen_contamination(cfg.n, cfg.rho, stream(ss, "target.gamma"),
                                        cfg.variance_params, cfg.shared_contamination)
    eps = cfg.noise_scale * stream(ss, "target.eps").standard_normal(cfg.n)
    target = Dataset(X, X @ beta + gamma + eps)

    sources, gammas, sets = [], [], []
    for k in range(1, cfg.K + 1):
        tag = f"source{k}"
        if cfg.covariance is Covariance.TOEPLITZ:
            sigma = covariance_matrix(Covariance.TOEPLITZ, cfg.p, k)
        else:
            sigma = covariance_matrix(target_cov, cfg.p)
        Xk = _draw_design(stream(ss, tag + ".X"), cfg.N, sigma)
        gk, ok = gen_contamination(cfg.N, cfg.rho, stream(ss, tag + ".gamma"),
                                   cfg.variance_params, cfg.shared_contamination)
        sd = np.sqrt((k + 1) / 10.0) if cfg.noise is Noise.PER_SOURCE else 1.0
        ek = cfg.noise_scale * sd * stream(ss, tag + ".eps").standard_normal(cfg.N)
        sources.append(Dataset(Xk, Xk @ B[:, k - 1] + gk + ek))
        gammas.append(gk)
        sets.append(ok)

    truth = GroundTruth(beta=beta, B=B, w=w, delta=delta, gamma_target=gamma,
                        gamma_sources=gammas, outliers_target=outliers, outliers_sources=sets)
    return target, sources, truth
