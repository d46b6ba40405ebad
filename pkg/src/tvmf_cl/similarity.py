"""Cosine, vMF and t-vMF similarity functions with exact derivatives.

Mathematical foundation:
    cosine:  c = a . b                      for unit vectors a, b
    chord:   d = ||a - b||,  d^2 = 2 - 2c
    vMF:     phi_e(c; k) = 2 (exp(kc) - exp(-k)) / (exp(k) - exp(-k)) - 1
    t-vMF:   phi_t(c; k) = (1 + c) / (1 + k (1 - c)) - 1

Both phi_e and phi_t arise from rescaling a radial profile function of the
chord distance -- exp(-k d^2 / 2) for vMF, 1 / (1 + k d^2 / 2) for the
heavy-tailed t variant -- to the range [-1, 1] via
2 (f(d) - f(2)) / (f(0) - f(2)) - 1. The normalization constants of the
underlying density cancel in that rescaling, so they are never computed.

Numerical considerations:
    - Dot products of unit vectors can exceed 1 by ~1e-8 in floating point;
      cosine() clamps to [-1, 1] so the phi functions stay in range.
    - phi_e is evaluated with exp(k) factored out (all remaining exponents
      are <= 0), so concentrations well beyond k = 500 cannot overflow.
    - k = 0 is legal for the t-vMF form (it reduces to plain cosine) but
      rejected for the vMF form, whose expression is 0/0 there.

All functions accept scalars or numpy arrays and apply elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Unit-norm tolerance for vector inputs.
UNIT_NORM_TOL = 1e-6

COSINE = "cosine"
VMF = "vmf"
TVMF = "tvmf"


def _as_float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _scalar_or_array(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def check_unit(v, tol: float = UNIT_NORM_TOL) -> np.ndarray:
    """Validate that ``v`` is a unit vector within ``tol`` and return it as float64.

    Raises:
        ValueError: if the Euclidean norm differs from 1 by more than ``tol``.
    """
    arr = _as_float_array(v).ravel()
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"expected unit vector, got norm {norm!r}")
    return arr


def cosine(a, b) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1].

    Args:
        a: First unit vector.
        b: Second unit vector (same dimension).

    Returns:
        The dot product in [-1, 1].

    Raises:
        ValueError: on dimension mismatch or non-unit input.
    """
    a_arr = check_unit(a)
    b_arr = check_unit(b)
    if a_arr.shape[0] != b_arr.shape[0]:
        raise ValueError(
            f"dimension mismatch: {a_arr.shape[0]} vs {b_arr.shape[0]}"
        )
    return float(np.clip(np.dot(a_arr, b_arr), -1.0, 1.0))


def chord_distance(a, b) -> float:
    """Euclidean distance ||a - b|| between two unit vectors.

    Satisfies d^2 = 2 - 2 * cosine(a, b) up to rounding.
    """
    a_arr = check_unit(a)
    b_arr = check_unit(b)
    if a_arr.shape[0] != b_arr.shape[0]:
        raise ValueError(
            f"dimension mismatch: {a_arr.shape[0]} vs {b_arr.shape[0]}"
        )
    return float(np.linalg.norm(a_arr - b_arr))


def profile_exp(d, kappa):
    """Exponential profile function exp(-kappa * d^2 / 2).

    Args:
        d: Chord distance(s), each in [0, 2].
        kappa: Concentration, >= 0.

    Returns:
        Value(s) in (0, 1].
    """
    d_arr = _as_float_array(d)
    _check_profile_args(d_arr, kappa)
    return _scalar_or_array(np.exp(-0.5 * kappa * d_arr * d_arr))


def profile_t(d, kappa):
    """Heavy-tailed profile function 1 / (1 + kappa * d^2 / 2).

    Args:
        d: Chord distance(s), each in [0, 2].
        kappa: Concentration, >= 0.

    Returns:
        Value(s) in (0, 1].
    """
    d_arr = _as_float_array(d)
    _check_profile_args(d_arr, kappa)
    return _scalar_or_array(1.0 / (1.0 + 0.5 * kappa * d_arr * d_arr))


def _check_profile_args(d_arr: np.ndarray, kappa: float) -> None:
    if np.any(d_arr < 0):
        raise ValueError("chord distance must be nonnegative")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")


def _check_cos_range(c_arr: np.ndarray) -> None:
    if np.any(c_arr < -1.0) or np.any(c_arr > 1.0):
        raise ValueError("cosine values must lie in [-1, 1]")


def vmf_similarity(c, kappa):
    """vMF similarity phi_e(c; kappa), a drop-in alternative for cosine.

    Evaluates 2 (exp(kc) - exp(-k)) / (exp(k) - exp(-k)) - 1 in the
    overflow-safe form 2 (exp(k(c-1)) - exp(-2k)) / (1 - exp(-2k)) - 1,
    where every exponent is <= 0.

    Args:
        c: Cosine value(s) in [-1, 1].
        kappa: Concentration, strictly positive (the expression is 0/0 at 0).

    Returns:
        Value(s) in [-1, 1]; phi_e(1) = 1 and phi_e(-1) = -1 exactly.
    """
    c_arr = _as_float_array(c)
    _check_cos_range(c_arr)
    if kappa <= 0:
        raise ValueError(f"vMF similarity requires kappa > 0, got {kappa}")
    em2k = np.exp(-2.0 * kappa)
    out = 2.0 * (np.exp(kappa * (c_arr - 1.0)) - em2k) / (1.0 - em2k) - 1.0
    return _scalar_or_array(out)


def vmf_similarity_dcos(c, kappa):
    """Exact derivative d phi_e / d c, strictly positive for kappa > 0."""
    c_arr = _as_float_array(c)
    _check_cos_range(c_arr)
    if kappa <= 0:
        raise ValueError(f"vMF similarity requires kappa > 0, got {kappa}")
    em2k = np.exp(-2.0 * kappa)
    out = 2.0 * kappa * np.exp(kappa * (c_arr - 1.0)) / (1.0 - em2k)
    return _scalar_or_array(out)


def tvmf_similarity(c, kappa):
    """t-vMF similarity phi_t(c; kappa) = (1 + c) / (1 + kappa (1 - c)) - 1.

    Args:
        c: Cosine value(s) in [-1, 1].
        kappa: Concentration, >= 0. At kappa = 0 the closed form reduces to
            the plain cosine, bit-exactly.

    Returns:
        Value(s) in [-1, 1]; endpoints map to themselves exactly.
    """
    c_arr = _as_float_array(c)
    _check_cos_range(c_arr)
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if kappa == 0:
        # the closed form collapses to (1 + c) - 1, which loses low bits of
        # small c; return the algebraically equal value bit-exactly
        return _scalar_or_array(c_arr.copy())
    out = (1.0 + c_arr) / (1.0 + kappa * (1.0 - c_arr)) - 1.0
    return _scalar_or_array(out)


def tvmf_similarity_dcos(c, kappa):
    """Exact derivative d phi_t / d c = (1 + 2k) / (1 + k (1 - c))^2.

    Strictly positive; equals 1 everywhere when kappa = 0.
    """
    c_arr = _as_float_array(c)
    _check_cos_range(c_arr)
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    denom = 1.0 + kappa * (1.0 - c_arr)
    out = (1.0 + 2.0 * kappa) / (denom * denom)
    return _scalar_or_array(out)


@dataclass(frozen=True)
class SimilarityKind:
    """Tagged choice of similarity function: cosine, vMF(k) or t-vMF(k).

    Use the factory classmethods; the constructor validates the kappa
    constraint for each tag (vMF needs kappa > 0, t-vMF needs kappa >= 0,
    cosine carries no kappa).
    """

    kind: str
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in (COSINE, VMF, TVMF):
            raise ValueError(f"unknown similarity kind {self.kind!r}")
        if self.kind == VMF and self.kappa <= 0:
            raise ValueError("vMF similarity requires kappa > 0")
        if self.kind == TVMF and self.kappa < 0:
            raise ValueError("t-vMF similarity requires kappa >= 0")
        if self.kind == COSINE and self.kappa != 0.0:
            raise ValueError("cosine similarity takes no kappa")

    @classmethod
    def cosine(cls) -> "SimilarityKind":
        return cls(COSINE)

    @classmethod
    def vmf(cls, kappa: float) -> "SimilarityKind":
        return cls(VMF, float(kappa))

    @classmethod
    def tvmf(cls, kappa: float) -> "SimilarityKind":
        return cls(TVMF, float(kappa))

    def similarity(self, c):
        """Apply the configured similarity function elementwise to ``c``."""
        if self.kind == COSINE:
            c_arr = _as_float_array(c)
            _check_cos_range(c_arr)
            return _scalar_or_array(c_arr.copy())
        if self.kind == VMF:
            return vmf_similarity(c, self.kappa)
        return tvmf_similarity(c, self.kappa)

    def similarity_dcos(self, c):
        """Derivative of the configured similarity with respect to the cosine."""
        if self.kind == COSINE:
            c_arr = _as_float_array(c)
            _check_cos_range(c_arr)
            return _scalar_or_array(np.ones_like(c_arr))
        if self.kind == VMF:
            return vmf_similarity_dcos(c, self.kappa)
        return tvmf_similarity_dcos(c, self.kappa)

    def describe(self) -> str:
        if self.kind == COSINE:
            return COSINE
        return f"{self.kind}(kappa={self.kappa:g})"


def similarity_curve(kind: SimilarityKind, grid) -> list[tuple[float, float]]:
    """Evaluate ``kind`` over a grid of cosine values.

    Args:
        kind: Similarity selector.
        grid: Iterable of cosine values, each in [-1, 1].

    Returns:
        One (cos, value) row per grid point, in grid order.
    """
    rows = []
    for c in grid:
        rows.append((float(c), float(kind.similarity(float(c)))))
    return rows
