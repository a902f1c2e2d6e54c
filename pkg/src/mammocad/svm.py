"""Soft-margin SVM: four kernels, a deterministic SMO solver for the dual
problem, feature scaling, a brute-force QP oracle for verification, and a
versioned text serialization of trained models.

The dual solved here is the usual box-constrained problem

    max W(a) = sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C and sum(a_i y_i) = 0

with labels in {+1, -1}. Determinism: the outer loop scans sample indices
in order and picks the first KKT violator; the partner index maximizes
|E_i - E_j| with ties going to the lowest index, falling back to an
index-order scan when that pair cannot move. No randomization anywhere,
so identical inputs give bit-identical models.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyDataset,
    SchemaViolation,
    SingleClass,
    TooLarge,
    UnsupportedVersion,
)

__all__ = [
    "KERNEL_KINDS",
    "KernelSpec",
    "Sample",
    "ScalerStats",
    "TrainConfig",
    "SvmModel",
    "kernel_eval",
    "gram_matrix",
    "fit_scaler",
    "apply_scaler",
    "smo_train",
    "train",
    "decision_value",
    "predict",
    "dual_objective",
    "brute_force_qp",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("linear", "polynomial", "rbf", "sigmoid")

MODEL_FORMAT_MAGIC = "mammocad-svm"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus parameters.

    Parameters irrelevant to `kind` are stored but ignored. The RBF kernel
    accepts either gamma or sigma, related by gamma = 1 / (2 sigma^2);
    a gamma of None is resolved to 1/dim (or from sigma) at training time.
    """

    kind: str = "rbf"
    gamma: float | None = None
    coef: float = 1.0
    degree: int = 3
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if self.gamma is not None and self.sigma is not None:
            implied = 1.0 / (2.0 * self.sigma * self.sigma)
            if abs(self.gamma - implied) > 1e-12:
                raise ValueError(
                    f"gamma {self.gamma} inconsistent with sigma {self.sigma} "
                    f"(implies gamma {implied})"
                )

    def resolved(self, dim: int) -> "KernelSpec":
        """Return a spec with a concrete gamma for `dim` input features."""
        if self.gamma is not None:
            return self
        if self.sigma is not None:
            return replace(self, gamma=1.0 / (2.0 * self.sigma * self.sigma))
        return replace(self, gamma=1.0 / dim)


@dataclass(frozen=True)
class Sample:
    """One labeled feature vector; y is +1 or -1."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64).ravel())
        if self.y not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {self.y}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("sample has non-finite components")


@dataclass(frozen=True)
class ScalerStats:
    """Per-component mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).ravel())
        object.__setattr__(self, "std", np.asarray(self.std, dtype=np.float64).ravel())
        if self.mean.shape != self.std.shape:
            raise DimensionMismatch("mean and std lengths differ")
        if np.any(self.std < 0):
            raise ValueError("std components must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    """SMO settings; max_passes of None resolves to 10 * n_samples."""

    c: float = 1.0
    tol: float = 1e-3
    max_passes: int | None = None
    eps: float = 1e-8

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be > 0")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")


@dataclass(frozen=True)
class SvmModel:
    """Trained classifier.

    coeffs[i] is alpha_i * y_i for support vector i; decision_value applies
    the stored scaler before evaluating kernels, so inputs are always raw
    feature vectors.
    """

    support_vectors: np.ndarray
    coeffs: np.ndarray
    bias: float
    kernel: KernelSpec
    scaler: ScalerStats
    c: float
    feature_names: tuple[str, ...] = ()
    converged: bool = True


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def gram_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix K[i, j] = k(a_i, b_j); gamma must be resolved."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"vector dims differ: {a.shape[1]} vs {b.shape[1]}")
    if spec.kind == "linear":
        return a @ b.T
    spec = spec.resolved(a.shape[1])
    if spec.kind == "polynomial":
        return (spec.gamma * (a @ b.T) + spec.coef) ** spec.degree
    if spec.kind == "rbf":
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    return np.tanh(spec.gamma * (a @ b.T) + spec.coef)


def kernel_eval(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Scalar kernel value for two vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"vector dims differ: {x.size} vs {y.size}")
    return float(gram_matrix(spec, x[None, :], y[None, :])[0, 0])


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------

def fit_scaler(data: list[Sample]) -> ScalerStats:
    """Per-component mean and population std of the sample matrix."""
    if not data:
        raise EmptyDataset("cannot fit a scaler on an empty dataset")
    x = np.stack([s.x for s in data])
    return ScalerStats(mean=x.mean(axis=0), std=x.std(axis=0))


def apply_scaler(stats: ScalerStats, x: np.ndarray) -> np.ndarray:
    """(x - mean) / std, with zero-variance components mapped to 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.mean.size:
        raise DimensionMismatch(
            f"vector dim {x.shape[-1]} does not match scaler dim {stats.mean.size}"
        )
    centered = x - stats.mean
    return np.divide(
        centered,
        stats.std,
        out=np.zeros_like(centered),
        where=stats.std > 0,
    )


def _identity_scaler(dim: int) -> ScalerStats:
    return ScalerStats(mean=np.zeros(dim), std=np.ones(dim))


# ---------------------------------------------------------------------------
# SMO solver
# ---------------------------------------------------------------------------

def _bias_from_alphas(k: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                      c: float, eps: float) -> float:
    """KKT-consistent bias: average over free vectors, else interval midpoint."""
    return _bias_from_g(k @ (alpha * y), y, alpha, c, eps)


def _bias_from_g(g: np.ndarray, y: np.ndarray, alpha: np.ndarray,
                 c: float, eps: float) -> float:
    cvals = y - g
    free = (alpha > eps) & (c - alpha > eps)
    if free.any():
        return float(cvals[free].mean())
    lower = ((y > 0) & (alpha <= eps)) | ((y < 0) & (c - alpha <= eps))
    upper = ((y < 0) & (alpha <= eps)) | ((y > 0) & (c - alpha <= eps))
    lo = cvals[lower].max() if lower.any() else -math.inf
    hi = cvals[upper].min() if upper.any() else math.inf
    if not math.isfinite(lo):
        return float(hi)
    if not math.isfinite(hi):
        return float(lo)
    return float((lo + hi) / 2.0)


class _SmoState:
    def __init__(self, k, y, c, tol, eps):
        self.k = k
        self.y = y
        self.c = c
        self.tol = tol
        self.eps = eps
        n = y.size
        self.alpha = np.zeros(n)
        self.b = 0.0
        self.errors = -y.astype(np.float64)  # E_i = f(x_i) - y_i at alpha = 0

    def refresh_bias(self) -> None:
        """Snap the threshold to the KKT-consistent value for current alphas.

        The incremental b1/b2 updates can drift outside the feasible
        threshold interval when both pair multipliers land on bounds;
        violation checks against a drifted threshold would flag optimal
        points as violating.
        """
        g = self.errors - self.b + self.y
        b_best = _bias_from_g(g, self.y, self.alpha, self.c, self.eps)
        self.errors += b_best - self.b
        self.b = b_best

    def violates_kkt(self, i: int) -> bool:
        r = self.errors[i] * self.y[i]
        return (r < -self.tol and self.alpha[i] < self.c - 1e-12) or (
            r > self.tol and self.alpha[i] > 1e-12
        )

    def try_pair(self, i: int, j: int) -> bool:
        if i == j:
            return False
        k, y, alpha, c, eps = self.k, self.y, self.alpha, self.c, self.eps
        ai, aj = alpha[i], alpha[j]
        yi, yj = y[i], y[j]
        s = yi * yj
        if yi != yj:
            low, high = max(0.0, aj - ai), min(c, c + aj - ai)
        else:
            low, high = max(0.0, ai + aj - c), min(c, ai + aj)
        if low >= high:
            return False
        kii, kjj, kij = k[i, i], k[j, j], k[i, j]
        ei, ej = self.errors[i], self.errors[j]
        eta = kii + kjj - 2.0 * kij
        if eta > 0.0:
            aj_new = min(high, max(low, aj + yj * (ei - ej) / eta))
        else:
            # Indefinite direction: evaluate the objective at both clip
            # bounds and take the better one. With E = g + b - y the
            # fixed-part terms are y*(E - b), removing the bias again.
            f1 = yi * (ei - self.b) - ai * kii - s * aj * kij
            f2 = yj * (ej - self.b) - s * ai * kij - aj * kjj
            l1 = ai + s * (aj - low)
            h1 = ai + s * (aj - high)
            psi_low = (
                l1 * f1 + low * f2
                + 0.5 * l1 * l1 * kii + 0.5 * low * low * kjj + s * low * l1 * kij
            )
            psi_high = (
                h1 * f1 + high * f2
                + 0.5 * h1 * h1 * kii + 0.5 * high * high * kjj + s * high * h1 * kij
            )
            if psi_low < psi_high - eps:
                aj_new = low
            elif psi_low > psi_high + eps:
                aj_new = high
            else:
                return False
        if abs(aj_new - aj) < eps * (aj_new + aj + eps):
            return False
        ai_new = ai + s * (aj - aj_new)
        d_i = yi * (ai_new - ai)
        d_j = yj * (aj_new - aj)
        b1 = self.b - ei - d_i * kii - d_j * kij
        b2 = self.b - ej - d_i * kij - d_j * kjj
        if 0.0 < ai_new < c:
            b_new = b1
        elif 0.0 < aj_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.errors += d_i * k[:, i] + d_j * k[:, j] + (b_new - self.b)
        alpha[i], alpha[j] = ai_new, aj_new
        self.b = b_new
        return True

    def step(self, i: int) -> bool:
        """Pick the partner maximizing |E_i - E_j|, then fall back to a scan."""
        gaps = np.abs(self.errors[i] - self.errors)
        gaps[i] = -1.0
        best = int(np.argmax(gaps))
        if self.try_pair(i, best):
            return True
        for j in range(self.y.size):
            if j != i and j != best and self.try_pair(i, j):
                return True
        return False


def smo_train(
    data: list[Sample],
    kernel: KernelSpec | None = None,
    cfg: TrainConfig | None = None,
    scaler: ScalerStats | None = None,
    feature_names: tuple[str, ...] = (),
) -> SvmModel:
    """Train a soft-margin SVM by deterministic SMO.

    `data` is expected to be pre-scaled; pass `scaler` to embed the stats
    applied upstream so the model can scale raw inputs itself (the default
    embeds an identity scaler). Support vectors are samples with
    alpha > eps. If max_passes runs out while KKT violations remain, the
    model is still returned with converged=False.
    """
    kernel = kernel or KernelSpec()
    cfg = cfg or TrainConfig()
    if not data:
        raise EmptyDataset("no training samples")
    if len(data) < 2 or len({s.y for s in data}) < 2:
        raise SingleClass("training data must contain both labels")
    dims = {s.x.size for s in data}
    if len(dims) != 1:
        raise DimensionMismatch(f"inconsistent sample dims: {sorted(dims)}")
    x = np.stack([s.x for s in data])
    y = np.asarray([s.y for s in data], dtype=np.float64)
    n, m = x.shape
    spec = kernel.resolved(m)
    if scaler is not None and scaler.mean.size != m:
        raise DimensionMismatch("scaler dim does not match sample dim")

    k = gram_matrix(spec, x, x)
    state = _SmoState(k, y, cfg.c, cfg.tol, cfg.eps)
    max_passes = cfg.max_passes if cfg.max_passes is not None else 10 * n

    converged = False
    passes = 0
    while passes < max_passes:
        state.refresh_bias()
        changed = 0
        saw_violation = False
        for i in range(n):
            if not state.violates_kkt(i):
                continue
            saw_violation = True
            if state.step(i):
                changed += 1
        passes += 1
        if not saw_violation:
            converged = True
            break
        if changed == 0:
            break  # violations remain but no pair can make progress
    if not converged:
        state.refresh_bias()
        converged = not any(state.violates_kkt(i) for i in range(n))
    if not converged:
        logger.warning(
            "SMO stopped after %d passes with KKT violations remaining", passes
        )

    bias = _bias_from_alphas(k, y, state.alpha, cfg.c, cfg.eps)
    sv = state.alpha > cfg.eps
    return SvmModel(
        support_vectors=x[sv].copy(),
        coeffs=(state.alpha * y)[sv].copy(),
        bias=bias,
        kernel=spec,
        scaler=scaler if scaler is not None else _identity_scaler(m),
        c=cfg.c,
        feature_names=tuple(feature_names),
        converged=converged,
    )


def train(
    data: list[Sample],
    kernel: KernelSpec | None = None,
    cfg: TrainConfig | None = None,
    feature_names: tuple[str, ...] = (),
) -> SvmModel:
    """Fit a scaler on raw samples, scale, and run smo_train."""
    if not data:
        raise EmptyDataset("no training samples")
    stats = fit_scaler(data)
    scaled = [Sample(x=apply_scaler(stats, s.x), y=s.y) for s in data]
    return smo_train(scaled, kernel, cfg, scaler=stats, feature_names=feature_names)


def decision_value(model: SvmModel, x: np.ndarray) -> float:
    """f(x) = sum_i coeffs[i] * k(sv_i, scaled x) + bias for a raw vector."""
    scaled = apply_scaler(model.scaler, np.asarray(x, dtype=np.float64).ravel())
    if model.support_vectors.size == 0:
        return float(model.bias)
    row = gram_matrix(model.kernel, model.support_vectors, scaled[None, :])[:, 0]
    return float(model.coeffs @ row + model.bias)


def predict(model: SvmModel, x: np.ndarray) -> int:
    """Sign of the decision value, with sign(0) defined as +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


# ---------------------------------------------------------------------------
# Verification helpers
# ---------------------------------------------------------------------------

def dual_objective(data: list[Sample], kernel: KernelSpec, alphas: np.ndarray) -> float:
    """W(a) = sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.size != len(data):
        raise DimensionMismatch("one alpha per sample required")
    x = np.stack([s.x for s in data])
    y = np.asarray([s.y for s in data], dtype=np.float64)
    k = gram_matrix(kernel.resolved(x.shape[1]), x, x)
    ay = alphas * y
    return float(alphas.sum() - 0.5 * (ay @ k @ ay))


def brute_force_qp(
    data: list[Sample],
    kernel: KernelSpec,
    c: float,
    grid_steps: int,
) -> np.ndarray:
    """Exhaustive grid search of the dual, for test oracles only.

    Enumerates alpha on {0, C/g, ..., C}^n, keeps near-feasible points
    (|sum a_i y_i| <= C/g) and returns the grid argmax of the objective
    (first in lexicographic order on ties). Limited to n <= 6 samples.
    """
    n = len(data)
    if n > 6:
        raise TooLarge(f"brute-force oracle supports at most 6 samples, got {n}")
    if n == 0:
        raise EmptyDataset("no samples")
    if grid_steps < 1:
        raise ValueError("grid_steps must be >= 1")
    x = np.stack([s.x for s in data])
    y = np.asarray([s.y for s in data], dtype=np.float64)
    k = gram_matrix(kernel.resolved(x.shape[1]), x, x)
    q = (y[:, None] * y[None, :]) * k
    levels = np.linspace(0.0, c, grid_steps + 1)
    grids = np.meshgrid(*([levels] * n), indexing="ij")
    candidates = np.stack([g.ravel() for g in grids], axis=1)
    feasible = np.abs(candidates @ y) <= c / grid_steps + 1e-9
    candidates = candidates[feasible]
    objective = candidates.sum(axis=1) - 0.5 * np.einsum(
        "ij,jk,ik->i", candidates, q, candidates
    )
    return candidates[int(np.argmax(objective))].copy()


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def save_model(model: SvmModel) -> bytes:
    """Serialize to the versioned line-oriented text format.

    Reals are written with 17 significant digits, which round-trips IEEE
    doubles exactly; arrays are length-prefixed by count fields.
    """
    sv = np.atleast_2d(model.support_vectors)
    dim = sv.shape[1] if sv.size else model.scaler.mean.size
    lines = [
        f"{MODEL_FORMAT_MAGIC} {MODEL_FORMAT_VERSION}",
        f"kernel {model.kernel.kind}",
        f"gamma {_fmt(model.kernel.gamma) if model.kernel.gamma is not None else 'none'}",
        f"coef {_fmt(model.kernel.coef)}",
        f"degree {model.kernel.degree}",
        f"sigma {_fmt(model.kernel.sigma) if model.kernel.sigma is not None else 'none'}",
        f"c {_fmt(model.c)}",
        f"bias {_fmt(model.bias)}",
        f"converged {int(model.converged)}",
        f"feature_names {len(model.feature_names)}",
        *model.feature_names,
        f"scaler_mean {model.scaler.mean.size}",
        *(_fmt(v) for v in model.scaler.mean),
        f"scaler_std {model.scaler.std.size}",
        *(_fmt(v) for v in model.scaler.std),
        f"coeffs {model.coeffs.size}",
        *(_fmt(v) for v in model.coeffs),
        f"support_vectors {sv.shape[0] if sv.size else 0} {dim}",
        *(" ".join(_fmt(v) for v in row) for row in (sv if sv.size else [])),
        "end",
        "",
    ]
    return "\n".join(lines).encode("ascii")


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise SchemaViolation("unexpected end of model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyed(self, key: str) -> list[str]:
        parts = self.next().split()
        if not parts or parts[0] != key:
            raise SchemaViolation(f"expected field {key!r}")
        return parts[1:]


def _parse_float(token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise SchemaViolation(f"bad {what} value {token!r}") from None


def _parse_count(tokens: list[str], what: str) -> int:
    if len(tokens) != 1 or not tokens[0].isdigit():
        raise SchemaViolation(f"bad {what} count")
    return int(tokens[0])


def load_model(data: bytes) -> SvmModel:
    """Parse bytes produced by save_model."""
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError:
        raise SchemaViolation("model file is not ASCII text") from None
    reader = _Reader(text)
    header = reader.next().split()
    if len(header) != 2 or header[0] != MODEL_FORMAT_MAGIC:
        raise SchemaViolation("missing model file magic")
    if header[1] != str(MODEL_FORMAT_VERSION):
        raise UnsupportedVersion(f"unsupported model format version {header[1]!r}")

    kind = reader.keyed("kernel")
    if len(kind) != 1:
        raise SchemaViolation("bad kernel field")

    def optional_float(key: str) -> float | None:
        tokens = reader.keyed(key)
        if len(tokens) != 1:
            raise SchemaViolation(f"bad {key} field")
        return None if tokens[0] == "none" else _parse_float(tokens[0], key)

    gamma = optional_float("gamma")
    coef = _parse_float(reader.keyed("coef")[0], "coef")
    degree_tokens = reader.keyed("degree")
    if len(degree_tokens) != 1 or not degree_tokens[0].isdigit():
        raise SchemaViolation("bad degree field")
    sigma = optional_float("sigma")
    c = _parse_float(reader.keyed("c")[0], "c")
    bias = _parse_float(reader.keyed("bias")[0], "bias")
    converged_tokens = reader.keyed("converged")
    if converged_tokens not in (["0"], ["1"]):
        raise SchemaViolation("bad converged field")

    n_names = _parse_count(reader.keyed("feature_names"), "feature_names")
    names = tuple(reader.next().strip() for _ in range(n_names))

    def float_block(key: str) -> np.ndarray:
        count = _parse_count(reader.keyed(key), key)
        return np.asarray(
            [_parse_float(reader.next(), key) for _ in range(count)], dtype=np.float64
        )

    mean = float_block("scaler_mean")
    std = float_block("scaler_std")
    coeffs = float_block("coeffs")

    sv_tokens = reader.keyed("support_vectors")
    if len(sv_tokens) != 2 or not all(t.isdigit() for t in sv_tokens):
        raise SchemaViolation("bad support_vectors header")
    rows, dim = int(sv_tokens[0]), int(sv_tokens[1])
    sv = np.zeros((rows, dim))
    for r in range(rows):
        parts = reader.next().split()
        if len(parts) != dim:
            raise SchemaViolation(f"support vector row {r} has {len(parts)} values")
        sv[r] = [_parse_float(p, "support vector") for p in parts]
    if reader.next().strip() != "end":
        raise SchemaViolation("missing end sentinel")
    if coeffs.size != rows:
        raise SchemaViolation("coeff count does not match support vector count")

    try:
        kernel = KernelSpec(
            kind=kind[0], gamma=gamma, coef=coef, degree=int(degree_tokens[0]), sigma=sigma
        )
        scaler = ScalerStats(mean=mean, std=std)
    except ValueError as exc:
        raise SchemaViolation(str(exc)) from None
    return SvmModel(
        support_vectors=sv,
        coeffs=coeffs,
        bias=bias,
        kernel=kernel,
        scaler=scaler,
        c=c,
        feature_names=names,
        converged=converged_tokens == ["1"],
    )
