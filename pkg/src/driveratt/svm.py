"""Kernel SVM trained by sequential minimal optimization, with z-scoring.

The solver is Platt-style SMO: the first index of each working pair is the
point with the largest KKT violation, the second maximizes |E_i - E_j| with
a seeded random fallback. The pairwise update keeps sum(alpha_i y_i) = 0
exactly, and the dual objective never decreases across accepted updates.
Features are standardized inside svm_train (band powers span orders of
magnitude across bands; unscaled kernels degenerate) and the fitted
statistics travel with the model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingleClassInput, TooFewRows


@dataclass
class Standardizer:
    """Per-feature training-set mean and (population) standard deviation.

    Zero-variance features get scale 1 and are recorded in `flagged`.
    """

    mean: np.ndarray
    scale: np.ndarray
    flagged: list[int] = field(default_factory=list)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.mean.size:
            raise DimensionMismatch(
                f"expected {self.mean.size} features, got shape {x.shape}"
            )
        return (x - self.mean) / self.scale


def standardize_fit_apply(x: np.ndarray) -> tuple[Standardizer, np.ndarray]:
    """Fit column statistics and return the standardized training matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows(f"standardization needs >= 2 rows, got shape {x.shape}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flagged = [int(i) for i in np.flatnonzero(std == 0.0)]
    scale = np.where(std == 0.0, 1.0, std)
    std_x = (x - mean) / scale
    return Standardizer(mean=mean, scale=scale, flagged=flagged), std_x


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    kernel: str = "rbf"  # "rbf" | "linear"
    gamma: float | None = None  # None: 1 / (n_features * mean feature variance)
    tol: float = 1e-3
    max_passes: int = 50

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError(f"C must be positive, got {self.c}")
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"kernel must be rbf or linear, got {self.kernel!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")


def kernel_matrix(kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # standardized
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: str
    gamma: float
    c: float
    standardizer: Standardizer

    def __post_init__(self) -> None:
        if self.support_vectors.shape[0] == 0:
            raise ValueError("a model needs at least one support vector")
        if self.support_vectors.shape[0] != self.dual_coef.size:
            raise DimensionMismatch("support vector / dual coefficient count mismatch")

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        z = self.standardizer.apply(x)
        k = kernel_matrix(self.kernel, self.gamma, z, self.support_vectors)
        return k @ self.dual_coef + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Labels in {-1, +1}; a margin of exactly 0 goes to +1."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        f = self.decision_function(x)
        return np.where(f >= 0.0, 1, -1).astype(np.int64)


def svm_train(x: np.ndarray, y: np.ndarray, cfg: SvmConfig = SvmConfig(),
              seed: int = 0) -> SvmModel:
    """Fit by SMO on the standardized features.

    y must be -1/+1 with both classes present. Deterministic for a given
    seed: only the fallback second-index choice is random.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape[0] != y.size:
        raise DimensionMismatch(f"{x.shape[0]} rows but {y.size} labels")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature values")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassInput("training needs both classes")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be -1 or +1")

    standardizer, z = standardize_fit_apply(x)
    if cfg.gamma is not None:
        gamma = cfg.gamma
    else:
        mean_var = float(z.var(axis=0).mean())
        gamma = 1.0 / (z.shape[1] * mean_var) if mean_var > 0 else 1.0 / z.shape[1]

    k = kernel_matrix(cfg.kernel, gamma, z, z)
    n = z.shape[0]
    c = cfg.c
    tol = cfg.tol
    alpha = np.zeros(n)
    b = 0.0
    # error cache E_i = f(x_i) - y_i, maintained incrementally
    err = -y.copy()
    rng = np.random.default_rng(seed)

    def kkt_violation() -> np.ndarray:
        """Per-point violation of the soft-margin optimality conditions."""
        margin = y * (err + y)  # y_i * f(x_i)
        v = np.zeros(n)
        lower = alpha < tol  # alpha ~ 0: need margin >= 1
        upper = alpha > c - tol  # alpha ~ C: need margin <= 1
        inner = ~lower & ~upper  # free: need margin == 1
        v[lower] = np.maximum(0.0, 1.0 - margin[lower])
        v[upper] = np.maximum(0.0, margin[upper] - 1.0)
        v[inner] = np.abs(margin[inner] - 1.0)
        return v

    def take_step(i: int, j: int) -> bool:
        nonlocal b
        if i == j:
            return False
        ai_old, aj_old = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        ei, ej = err[i], err[j]
        if yi != yj:
            lo = max(0.0, aj_old - ai_old)
            hi = min(c, c + aj_old - ai_old)
        else:
            lo = max(0.0, ai_old + aj_old - c)
            hi = min(c, ai_old + aj_old)
        if hi - lo < 1e-12:
            return False
        eta = k[i, i] + k[j, j] - 2.0 * k[i, j]
        if eta <= 1e-12:
            return False
        aj = aj_old + yj * (ei - ej) / eta
        aj = min(hi, max(lo, aj))
        if abs(aj - aj_old) < 1e-12 * (aj + aj_old + 1e-12):
            return False
        ai = ai_old + yi * yj * (aj_old - aj)
        # bias update (Platt): prefer the side whose multiplier stays free
        b1 = b - ei - yi * (ai - ai_old) * k[i, i] - yj * (aj - aj_old) * k[i, j]
        b2 = b - ej - yi * (ai - ai_old) * k[i, j] - yj * (aj - aj_old) * k[j, j]
        if tol < ai < c - tol:
            b_new = b1
        elif tol < aj < c - tol:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        db = b_new - b
        err[:] += yi * (ai - ai_old) * k[i] + yj * (aj - aj_old) * k[j] + db
        alpha[i], alpha[j] = ai, aj
        b = b_new
        return True

    stalled = 0
    while stalled < cfg.max_passes:
        viol = kkt_violation()
        i = int(np.argmax(viol))
        if viol[i] <= tol:
            break  # converged
        # second choice: maximize |E_i - E_j|, seeded random fallback
        gap = np.abs(err[i] - err)
        gap[i] = -1.0
        candidates = np.argsort(gap)[::-1]
        moved = False
        for j in candidates[: max(8, n // 4)]:
            if take_step(i, int(j)):
                moved = True
                break
        if not moved:
            for j in rng.permutation(n):
                if take_step(i, int(j)):
                    moved = True
                    break
        stalled = 0 if moved else stalled + 1

    sv = alpha > 1e-9
    if not sv.any():
        # solver left every multiplier at zero (degenerate input); keep the
        # largest so the model stays loadable and predicts via bias
        sv = alpha == alpha.max()
    return SvmModel(
        support_vectors=z[sv],
        dual_coef=(alpha * y)[sv],
        bias=float(b),
        kernel=cfg.kernel,
        gamma=float(gamma),
        c=float(c),
        standardizer=standardizer,
    )


def svm_predict(model: SvmModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, margins) for a feature matrix in original (unscaled) units."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    f = model.decision_function(x)
    return np.where(f >= 0.0, 1, -1).astype(np.int64), f


def dual_objective(alpha: np.ndarray, y: np.ndarray, k: np.ndarray) -> float:
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ k @ ay)
