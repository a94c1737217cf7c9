"""Kernel functions and Gram matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist


@dataclass(frozen=True)
class KernelSpec:
    """Linear kernel, or Gaussian ``exp(-||x - y||^2 / (2 sigma^2))``.

    A Gaussian spec with ``bandwidth=None`` is resolved at fit time with
    :func:`median_heuristic`.
    """

    kind: str = "linear"
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "gaussian"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and self.bandwidth is not None:
            if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
                raise ValueError("Gaussian bandwidth must be positive")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def gaussian(cls, bandwidth: float | None = None) -> "KernelSpec":
        return cls("gaussian", None if bandwidth is None else float(bandwidth))

    def resolve(self, X) -> "KernelSpec":
        if self.kind == "gaussian" and self.bandwidth is None:
            return KernelSpec.gaussian(median_heuristic(X))
        return self

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "gaussian":
            d["bandwidth"] = self.bandwidth
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(d["kind"], d.get("bandwidth"))

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse ``linear``, ``gaussian`` or ``gaussian:<sigma>``."""
        name, _, arg = text.partition(":")
        if name == "linear" and not arg:
            return cls.linear()
        if name == "gaussian":
            return cls.gaussian(float(arg) if arg else None)
        raise ValueError(f"cannot parse kernel {text!r}")


def _check_resolved(spec: KernelSpec):
    if spec.kind == "gaussian" and spec.bandwidth is None:
        raise ValueError("Gaussian bandwidth unresolved; call spec.resolve(X) first")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite kernel input")
    _check_resolved(spec)
    if spec.kind == "linear":
        return float(x @ y)
    d2 = float(np.sum((x - y) ** 2))
    return float(np.exp(-d2 / (2.0 * spec.bandwidth ** 2)))


def cross_gram(spec: KernelSpec, X, Y) -> np.ndarray:
    """``G[i, j] = K(X[i], Y[j])``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    _check_resolved(spec)
    if spec.kind == "linear":
        return X @ Y.T
    d2 = cdist(X, Y, "sqeuclidean")
    return np.exp(-d2 / (2.0 * spec.bandwidth ** 2))


def gram(spec: KernelSpec, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite kernel input")
    G = cross_gram(spec, X, X)
    # exact symmetry; matmul rounding can differ between the two triangles
    G = np.triu(G) + np.triu(G, 1).T
    if spec.kind == "gaussian":
        np.fill_diagonal(G, 1.0)
    return G


def median_heuristic(X) -> float:
    """Median pairwise Euclidean distance; 1.0 when it is zero or undefined."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) < 2:
        return 1.0
    med = float(np.median(pdist(X)))
    return med if med > 0 else 1.0
