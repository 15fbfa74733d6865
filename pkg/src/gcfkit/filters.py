"""Construction of 3rd-order generalized comb filters (GCF).

A GCF rotates the triple zeros of a classical 3rd-order comb by +/- alpha
inside every folding band.  For a power-of-two decimation factor D = 2**p the
filter factors into a polyphase bank decimating by D1 = 2**(p_p+1) followed by
a cascade of p - p_p - 1 identical-shape stages, each decimating by 2:

    H(z) = h_o * H_P(z) * H_N(z)
    H_N(z) = prod_k [ 1 + r_k (z**-2**k + z**-2*2**k) + z**-3*2**k ]

with r_k = 1 + 2 cos(2**k alpha).  Everything here is built in double
precision; fixed-point conversion lives in :mod:`gcfkit.wordlength`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InternalError, ParameterError

# Optimal zero-rotation fraction for a 3rd-order design.
DEFAULT_Q = 0.79

_REALNESS_TOL = 1e-12


def compute_alpha(q: float, f_c: float) -> float:
    """Zero rotation in radians: alpha = q * 2*pi * f_c.

    q in [0, 1] places the rotated zeros at the fraction q of the folding
    half-band; f_c is the normalized signal bandwidth in cycles/sample.
    """
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"q must be in [0, 1], got {q}")
    if not 0.0 < f_c < 0.5:
        raise ParameterError(f"f_c must be in (0, 0.5), got {f_c}")
    return q * 2.0 * math.pi * f_c


@dataclass(frozen=True)
class GcfSpec:
    """Complete parameterization of one 3rd-order GCF design instance.

    D = D1 * D2 = 2**p, with D1 = 2**(p_p+1) handled by the polyphase bank
    and D2 = 2**(p-p_p-1) by the two-by-two cascade.  p_p = -1 selects the
    pure cascade, p_p = p-1 the pure polyphase bank.
    """

    D: int
    f_c: float
    p_p: int = -1
    q: float = DEFAULT_Q
    rho: float | None = None
    # derived
    p: int = field(init=False)
    D1: int = field(init=False)
    D2: int = field(init=False)
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.D < 2 or (self.D & (self.D - 1)) != 0:
            raise ParameterError(f"D must be a power of two >= 2, got {self.D}")
        p = self.D.bit_length() - 1
        if not -1 <= self.p_p <= p - 1:
            raise ParameterError(f"p_p must be in [-1, {p - 1}] for D={self.D}, got {self.p_p}")
        if not 0.0 < self.f_c < 1.0 / (2 * self.D):
            raise ParameterError(
                f"f_c must satisfy 0 < f_c < 1/(2D) = {1.0 / (2 * self.D)}, got {self.f_c}"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "D1", 2 ** (self.p_p + 1))
        object.__setattr__(self, "D2", 2 ** (p - self.p_p - 1))
        object.__setattr__(self, "alpha", compute_alpha(self.q, self.f_c))

    @classmethod
    def from_oversampling(cls, D: int, rho: float, p_p: int = -1, q: float = DEFAULT_Q) -> "GcfSpec":
        """Build a spec from the converter oversampling ratio (f_c = 1/(2 rho))."""
        if rho <= 0:
            raise ParameterError(f"rho must be positive, got {rho}")
        return cls(D=D, f_c=1.0 / (2.0 * rho), p_p=p_p, q=q, rho=rho)

    @property
    def cascade_stages(self) -> range:
        """Full-rate stage indices k handled by the cascade part."""
        return range(self.p_p + 1, self.p)

    def as_dict(self) -> dict:
        return {
            "D": self.D, "D1": self.D1, "D2": self.D2, "p": self.p, "p_p": self.p_p,
            "q": self.q, "f_c": self.f_c, "alpha": self.alpha, "rho": self.rho,
        }


@dataclass(frozen=True)
class CombSpec:
    """Classical comb reference filter ((1/D)(1-z^-D)/(1-z^-1))**n_c."""

    D: int
    n_c: int = 3

    def __post_init__(self):
        if self.D < 2:
            raise ParameterError(f"comb D must be >= 2, got {self.D}")
        if self.n_c < 1:
            raise ParameterError(f"comb order must be >= 1, got {self.n_c}")

    def as_dict(self) -> dict:
        return {"D": self.D, "n_c": self.n_c}


@dataclass(frozen=True)
class CascadeCoefficients:
    """Per-stage multipliers r_k of the cascade, ascending k.

    After commutation every stage runs at its own input rate with unit
    delays; stage_delays records the equivalent full-rate delay unit 2**k.
    """

    r: tuple[float, ...]
    stage_delays: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.r)


@dataclass(frozen=True)
class PolyphaseBank:
    """Impulse response of the polyphase section and its D1 branches.

    h_p has length L = 3*D1 - 2; branch k holds e_k(n) = h_p(D1*n + k),
    zero-padded so all branches have ceil(L/D1) entries.
    """

    h_p: np.ndarray
    branches: tuple[np.ndarray, ...]
    r_block: float
    x_t: np.ndarray


@dataclass(frozen=True)
class NormalizationGain:
    """Scalar h_o making the DC gain of h_o * H_P * H_N exactly one."""

    h_o: float


def stage_coefficients(spec: GcfSpec) -> CascadeCoefficients:
    """Cascade multipliers r_k = 1 + 2 cos(2**k alpha) for k = p_p+1 .. p-1.

    p_p = p-1 yields a valid empty cascade (pure polyphase realization).
    """
    ks = list(spec.cascade_stages)
    r = tuple(1.0 + 2.0 * math.cos((2.0 ** k) * spec.alpha) for k in ks)
    return CascadeCoefficients(r=r, stage_delays=tuple(2 ** k for k in ks))


def _xt_sequence(D1: int, alpha: float, length: int) -> np.ndarray:
    # x_t = delta(n) - r delta(n-D1) + r delta(n-2D1) - delta(n-3D1),
    # r = 1 + 2 cos(alpha*D1).  The factorization
    # (1 - z^-D1)(1 - e^{j a D1} z^-D1)(1 - e^{-j a D1} z^-D1) forces the
    # factor 2; a 1 + cos form would not reduce to the binomial [1,3,3,1]
    # bank at D1=2, alpha=0.
    r = 1.0 + 2.0 * math.cos(alpha * D1)
    x = np.zeros(length)
    for idx, val in ((0, 1.0), (D1, -r), (2 * D1, r), (3 * D1, -1.0)):
        if idx < length:
            x[idx] = val
    return x


def polyphase_impulse(spec: GcfSpec) -> PolyphaseBank:
    """Impulse response h_p of the polyphase section and its branches.

    h_p(n), n in [0, 3*D1-3], is the triple modulated cumulative sum of the
    sparse 4-tap sequence x_t; evaluated as three successive modulated
    prefix sums (O(D1) instead of the literal O(D1**3) nesting).  The
    construction is complex but the result is real to within 1e-12
    relative; the imaginary residue is checked and dropped.
    """
    D1, alpha = spec.D1, spec.alpha
    L = 3 * D1 - 2
    x_t = _xt_sequence(D1, alpha, L)
    n = np.arange(L)
    c1 = np.cumsum(x_t)
    c2 = np.cumsum(np.exp(1j * alpha * n) * c1)
    c3 = np.cumsum(np.exp(-2j * alpha * n) * c2)
    h = np.exp(1j * alpha * n) * c3
    residue = np.max(np.abs(h.imag))
    scale = max(np.max(np.abs(h.real)), 1.0)
    if residue > _REALNESS_TOL * scale:
        raise InternalError(f"polyphase impulse response not real: residue {residue:g}")
    h_p = np.ascontiguousarray(h.real)
    branches = tuple(polyphase_decompose(h_p, D1))
    r_block = 1.0 + 2.0 * math.cos(alpha * D1)
    return PolyphaseBank(h_p=h_p, branches=branches, r_block=r_block, x_t=x_t)


def polyphase_decompose(h_p: np.ndarray, D1: int) -> list[np.ndarray]:
    """Split h_p into D1 branches e_k(n) = h_p(D1*n + k), zero-padded.

    len(h_p) must be 3*D1 - 2.  Every branch gets ceil(L/D1) entries so
    downstream consumers never deal with ragged banks.
    """
    h_p = np.asarray(h_p, dtype=float)
    L = len(h_p)
    if L != 3 * D1 - 2:
        raise ParameterError(f"expected len(h_p) = 3*D1-2 = {3 * D1 - 2}, got {L}")
    rows = -(-L // D1)
    padded = np.zeros(rows * D1)
    padded[:L] = h_p
    return [padded[k::D1].copy() for k in range(D1)]


def expand_full_polynomial(spec: GcfSpec) -> np.ndarray:
    """Coefficients of H_P(z) * H_N(z) as one polynomial of degree 3(D-1).

    Brute-force expansion used as the oracle for factorization identities:
    the polyphase bank (already expressed in full-rate delays) is multiplied
    by every sparse cascade-stage factor.
    """
    poly = polyphase_impulse(spec).h_p.astype(float)
    for k in spec.cascade_stages:
        r_k = 1.0 + 2.0 * math.cos((2.0 ** k) * spec.alpha)
        stage = np.zeros(3 * 2 ** k + 1)
        stage[0] = 1.0
        stage[2 ** k] = r_k
        stage[2 * 2 ** k] = r_k
        stage[3 * 2 ** k] = 1.0
        poly = np.convolve(poly, stage)
    return poly


def normalization_gain(spec: GcfSpec) -> NormalizationGain:
    """h_o = 1 / sum(expanded coefficients) = 1 / H(e^{j0})."""
    total = float(np.sum(expand_full_polynomial(spec)))
    if total <= 0.0:
        # cannot occur for alpha < pi/D
        raise InternalError(f"non-positive DC gain {total:g}")
    return NormalizationGain(h_o=1.0 / total)


def comb_coefficients(comb: CombSpec) -> np.ndarray:
    """Unnormalized impulse response of the classical comb (integer taps)."""
    poly = np.ones(1)
    for _ in range(comb.n_c):
        poly = np.convolve(poly, np.ones(comb.D))
    return poly


def coefficients_to_csv(path, values) -> None:
    """One coefficient per line: index,value at full decimal precision."""
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, repr(float(v))])


def coefficients_to_json(path, spec: GcfSpec, **arrays) -> None:
    """Spec echo plus named coefficient arrays."""
    payload = {"spec": spec.as_dict()}
    for name, arr in arrays.items():
        payload[name] = np.asarray(arr, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
