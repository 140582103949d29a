"""Isotropic linear elasticity: Lame parameters, strain and stress maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MaterialError(ValueError):
    """Raised for physically inadmissible material parameters."""


def lame_from_engineering(E: float, nu: float) -> tuple[float, float]:
    """Plane-strain Lame coefficients from Young's modulus and Poisson ratio.

    Uses the direct 3D formulas mu = E/(2(1+nu)), lambda = E nu/((1+nu)(1-2nu)).
    """
    if E <= 0:
        raise MaterialError(f"Young's modulus must be positive, got {E}")
    if not 0 <= nu < 0.5:
        raise MaterialError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
    mu = E / (2.0 * (1.0 + nu))
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return lam, mu


@dataclass(frozen=True)
class SymTensor2:
    """Symmetric 2x2 tensor (stress or strain)."""

    xx: float
    yy: float
    xy: float

    @property
    def trace(self) -> float:
        return self.xx + self.yy

    def contract(self, other: "SymTensor2") -> float:
        """Frobenius double contraction a : b."""
        return self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy


@dataclass(frozen=True)
class MaterialModel:
    """Isotropic material with both engineering and Lame parameters.

    ``plane`` selects the 2D reduction: 'strain' keeps the 3D Lame lambda,
    'stress' replaces it by 2*lam*mu/(lam + 2*mu).
    """

    E: float
    nu: float
    lam: float
    mu: float
    plane: str = "strain"

    @classmethod
    def from_engineering(cls, E: float, nu: float, plane: str = "strain") -> "MaterialModel":
        if plane not in ("strain", "stress"):
            raise MaterialError(f"plane must be 'strain' or 'stress', got {plane!r}")
        lam, mu = lame_from_engineering(E, nu)
        if plane == "stress":
            lam = 2.0 * lam * mu / (lam + 2.0 * mu)
        return cls(E=E, nu=nu, lam=lam, mu=mu, plane=plane)

    def dmatrix(self) -> np.ndarray:
        """3x3 constitutive matrix in Voigt form (engineering shear)."""
        lam, mu = self.lam, self.mu
        return np.array([
            [lam + 2.0 * mu, lam, 0.0],
            [lam, lam + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ])


def strain(grad_u) -> SymTensor2:
    """Symmetric part of a 2x2 displacement gradient."""
    g = np.asarray(grad_u, dtype=float)
    return SymTensor2(xx=g[0, 0], yy=g[1, 1], xy=0.5 * (g[0, 1] + g[1, 0]))


def stress(eps: SymTensor2, mat: MaterialModel) -> SymTensor2:
    """Hooke's law sigma = lam tr(eps) I + 2 mu eps."""
    lt = mat.lam * eps.trace
    return SymTensor2(
        xx=lt + 2.0 * mat.mu * eps.xx,
        yy=lt + 2.0 * mat.mu * eps.yy,
        xy=2.0 * mat.mu * eps.xy,
    )
