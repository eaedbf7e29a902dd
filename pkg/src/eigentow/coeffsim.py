"""Eigenbasis-coefficient picture of the collapse dynamics.

Expanding the state over common eigenvectors labeled by their eigenvalue
vectors a, the amplitudes obey

    db_a/dt = b_a * gamma_a(p),   gamma_a = -sum_a' p_a' |a - a'|^2 / sum_a' p_a',

a closed ODE in the probabilities p_a = |b_a|^2 whose right-hand side is
real, so every phase arg(b_a) is a constant of motion.  The linear
(pre-projection) evolution of the full density matrix is available in
closed form as an independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, ParameterError

__all__ = [
    "CoefficientState",
    "coeff_simulate",
    "damping_rate",
    "lindblad_closed_form",
    "probabilities",
]


def _pairwise_sq_dists(eigvals: np.ndarray) -> np.ndarray:
    diff = eigvals[:, None, :] - eigvals[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass
class CoefficientState:
    """Complex coefficients b_a attached to eigenvalue vectors a."""

    eigvals: np.ndarray
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        ev = np.asarray(self.eigvals, dtype=np.float64)
        if ev.ndim == 1:
            ev = ev[:, None]
        if ev.ndim != 2:
            raise ContractViolationError("eigvals must be a vector or a 2-D array")
        self.eigvals = ev
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128).ravel()
        if self.coeffs.size != ev.shape[0]:
            raise ContractViolationError("one coefficient per eigenvalue vector required")

    @classmethod
    def from_probabilities(
        cls, eigvals: np.ndarray, probs: np.ndarray, time: float = 0.0
    ) -> "CoefficientState":
        """Real nonnegative amplitudes sqrt(p_a / sum p), zero phases."""
        p = np.asarray(probs, dtype=np.float64)
        if np.any(p < 0) or p.sum() == 0:
            raise ParameterError("probabilities must be nonnegative with positive sum")
        return cls(eigvals, np.sqrt(p / p.sum()).astype(np.complex128), time)


def probabilities(cs: CoefficientState) -> np.ndarray:
    """Normalized probabilities |b_a|^2 / sum |b_a|^2."""
    p = np.abs(cs.coeffs) ** 2
    total = p.sum()
    if total == 0.0:
        raise ContractViolationError("all coefficients vanish")
    return p / total


def damping_rate(cs: CoefficientState, a_index: int) -> float:
    """Instantaneous log-decay rate gamma_a = -sum_a' |a - a'|^2 p_a' (p normalized)."""
    if not 0 <= a_index < cs.coeffs.size:
        raise ParameterError(f"index {a_index} outside [0, {cs.coeffs.size})")
    d2 = _pairwise_sq_dists(cs.eigvals)
    return float(-(d2[a_index] @ probabilities(cs)))


def coeff_simulate(
    cs: CoefficientState, dt: float = 1e-3, t_end: float = 10.0
) -> list[CoefficientState]:
    """Integrate the coefficient ODE with classical fixed-step RK4.

    Returns the full trajectory, one state per step, starting with the
    (copied) input.  The squared norm never increases and phases stay fixed.
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if t_end < cs.time:
        raise ParameterError("t_end lies before the initial time")
    if np.abs(cs.coeffs).sum() == 0.0:
        raise ContractViolationError("all coefficients vanish")
    d2 = _pairwise_sq_dists(cs.eigvals)

    def rhs(b: np.ndarray) -> np.ndarray:
        p = np.abs(b) ** 2
        gamma = -(d2 @ p) / p.sum()
        return gamma * b

    steps = int(round((t_end - cs.time) / dt))
    b = cs.coeffs.copy()
    out = [CoefficientState(cs.eigvals, b.copy(), cs.time)]
    for i in range(1, steps + 1):
        k1 = rhs(b)
        k2 = rhs(b + 0.5 * dt * k1)
        k3 = rhs(b + 0.5 * dt * k2)
        k4 = rhs(b + dt * k3)
        b = b + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(CoefficientState(cs.eigvals, b.copy(), cs.time + i * dt))
    return out


def lindblad_closed_form(
    b0: np.ndarray, eigvals: np.ndarray, t: float
) -> np.ndarray:
    """Density coefficients c_aa'(t) = exp(-|a - a'|^2 t) b_a conj(b_a').

    Closed-form solution of the linear decoherence dynamics in the common
    eigenbasis; the diagonal is time independent.
    """
    if t < 0:
        raise ParameterError(f"t must be nonnegative, got {t}")
    b = np.asarray(b0, dtype=np.complex128).ravel()
    ev = np.asarray(eigvals, dtype=np.float64)
    if ev.ndim == 1:
        ev = ev[:, None]
    if ev.shape[0] != b.size:
        raise ContractViolationError("one coefficient per eigenvalue vector required")
    d2 = _pairwise_sq_dists(ev)
    with np.errstate(under="ignore"):
        decay = np.exp(-d2 * t)
    return decay * np.outer(b, b.conj())
