"""Adsorption isotherms q(C) with the derivatives and antiderivatives used by
the transport scheme and the mass-balance diagnostics.

All evaluations accept scalars or numpy arrays.  Negative concentrations
(which discrete solutions may produce) are evaluated by the same closed
forms rather than clamped, keeping the nonlinear residual smooth; positivity
is monitored by diagnostics, never enforced here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class IsothermSample:
    """Pointwise isotherm data at a concentration c.

    ``q`` is the adsorbed amount, ``dq``/``d2q`` its first two derivatives,
    ``Q`` the antiderivative of q from 0, and ``A`` the antiderivative of
    ``s * q'(s)`` from 0.
    """

    q: np.ndarray
    dq: np.ndarray
    d2q: np.ndarray
    Q: np.ndarray
    A: np.ndarray


@dataclass(frozen=True)
class Constant:
    """q(C) = K."""

    K: float = 0.0

    def __post_init__(self):
        if self.K < 0.0:
            raise ValueError("constant isotherm requires K >= 0")

    def sample(self, c) -> IsothermSample:
        c = np.asarray(c, dtype=np.float64)
        z = np.zeros_like(c)
        return IsothermSample(q=np.full_like(c, self.K), dq=z, d2q=z,
                              Q=self.K * c, A=z.copy())


@dataclass(frozen=True)
class Affine:
    """q(C) = K1 + K2*C."""

    K1: float = 0.0
    K2: float = 0.0

    def __post_init__(self):
        if self.K1 < 0.0 or self.K2 < 0.0:
            raise ValueError("affine isotherm requires K1, K2 >= 0")

    def sample(self, c) -> IsothermSample:
        c = np.asarray(c, dtype=np.float64)
        return IsothermSample(
            q=self.K1 + self.K2 * c,
            dq=np.full_like(c, self.K2),
            d2q=np.zeros_like(c),
            Q=self.K1 * c + 0.5 * self.K2 * c * c,
            A=0.5 * self.K2 * c * c,
        )


@dataclass(frozen=True)
class Langmuir:
    """q(C) = q_max * K_eq * C / (1 + K_eq * C)."""

    q_max: float = 1.0
    K_eq: float = 1.0

    def __post_init__(self):
        if not (self.q_max > 0.0 and self.K_eq > 0.0):
            raise ValueError("Langmuir isotherm requires q_max > 0 and K_eq > 0")

    def sample(self, c) -> IsothermSample:
        c = np.asarray(c, dtype=np.float64)
        w = 1.0 + self.K_eq * c
        if np.any(w == 0.0):
            raise ValueError("Langmuir isotherm undefined where 1 + K_eq*c = 0")
        qm, ke = self.q_max, self.K_eq
        return IsothermSample(
            q=qm * ke * c / w,
            dq=qm * ke / w**2,
            d2q=-2.0 * qm * ke**2 / w**3,
            Q=qm * (c - np.log(w) / ke),
            A=qm * (np.log(w) / ke + 1.0 / (ke * w) - 1.0 / ke),
        )


Isotherm = Constant | Affine | Langmuir


def evaluate(iso, c) -> IsothermSample:
    """Evaluate isotherm ``iso`` at concentration(s) ``c``."""
    return iso.sample(c)


def from_config(params: dict) -> Isotherm:
    """Build an isotherm from flat config keys.

    Expects ``type`` in {constant, affine, langmuir} plus the matching
    parameters (``K`` / ``K1``, ``K2`` / ``q_max``, ``K_eq``).
    """
    kind = params.get("type", "").lower()
    if kind == "constant":
        return Constant(K=float(params.get("K", 0.0)))
    if kind == "affine":
        return Affine(K1=float(params.get("K1", 0.0)), K2=float(params.get("K2", 0.0)))
    if kind == "langmuir":
        return Langmuir(q_max=float(params.get("q_max", 1.0)),
                        K_eq=float(params.get("K_eq", 1.0)))
    raise ValueError(f"unknown isotherm type {kind!r}")
