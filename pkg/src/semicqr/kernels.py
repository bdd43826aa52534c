"""Compactly supported smoothing kernels and local weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientLocalDataError, InvalidBandwidthError

__all__ = [
    "KernelSpec",
    "EPANECHNIKOV",
    "UNIFORM",
    "TRIANGULAR",
    "get_kernel",
    "kernel_weight",
    "local_weights",
    "kernel_moments",
]

_MOMENTS = {
    # (mu2, nu0)
    "epanechnikov": (0.2, 0.6),
    "uniform": (1.0 / 3.0, 0.5),
    "triangular": (1.0 / 6.0, 2.0 / 3.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric density on ``[-support, support]``."""

    kind: str = "epanechnikov"
    support: float = 1.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind == "epan":
            kind = "epanechnikov"
        if kind not in _MOMENTS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {sorted(_MOMENTS)}")
        object.__setattr__(self, "kind", kind)

    def __call__(self, t):
        t = np.asarray(t, dtype=float) / self.support
        inside = np.abs(t) < 1.0
        if self.kind == "epanechnikov":
            k = 0.75 * (1.0 - t * t)
        elif self.kind == "uniform":
            k = np.full_like(t, 0.5)
        else:
            k = 1.0 - np.abs(t)
        return np.where(inside, k, 0.0) / self.support


EPANECHNIKOV = KernelSpec("epanechnikov")
UNIFORM = KernelSpec("uniform")
TRIANGULAR = KernelSpec("triangular")


def get_kernel(kernel) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    return KernelSpec(str(kernel))


def kernel_weight(spec: KernelSpec, t: float) -> float:
    return float(spec(t))


def local_weights(spec: KernelSpec, u, u0: float, h: float, min_count: int = 0):
    """Kernel weights ``K((u - u0) / h) / h``.

    Observations at distance ``h * support`` or more get an exact zero. If
    fewer than ``min_count`` weights are positive an
    :class:`InsufficientLocalDataError` is raised.
    """
    if not h > 0:
        raise InvalidBandwidthError(f"bandwidth must be positive, got {h!r}")
    w = spec((np.asarray(u, dtype=float) - u0) / h) / h
    if min_count and np.count_nonzero(w) < min_count:
        raise InsufficientLocalDataError(
            f"only {np.count_nonzero(w)} observations within h={h:g} of u0={u0:g}; "
            f"the local design needs at least {min_count}")
    return w


def kernel_moments(spec: KernelSpec):
    """Return ``(mu2, nu0)``: the kernel's second moment and the integral of K^2."""
    mu2, nu0 = _MOMENTS[get_kernel(spec).kind]
    s = spec.support
    # rescaled support K_s(t) = K(t/s)/s: mu2 scales by s^2, nu0 by 1/s
    return mu2 * s * s, nu0 / s
