"""Frequency-domain evaluation: folding bands, responses, attenuation.

Frequencies are cycles/sample in [0, 1/2] externally; omega = 2*pi*f
internally.  Responses of the linear-phase cascade are evaluated in product
form, stage by stage, which stays finite at the in-band zeros.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import OverlappingBandsError, ParameterError
from .filters import CombSpec, GcfSpec, normalization_gain, polyphase_impulse, stage_coefficients

# dB value reported for exact zeros so plots stay finite
ATTENUATION_CAP_DB = 300.0

DEFAULT_POINTS_PER_BAND = 129
DEFAULT_GLOBAL_POINTS = 4096


@dataclass(frozen=True)
class FoldingBandSet:
    """Closed intervals [k/D - f_c, k/D + f_c] that alias onto baseband."""

    D: int
    f_c: float
    bands: tuple[tuple[float, float], ...]

    @property
    def k_m(self) -> int:
        return len(self.bands)

    def contains(self, freqs: np.ndarray) -> np.ndarray:
        """Boolean mask of frequencies lying inside any folding band."""
        freqs = np.asarray(freqs, dtype=float)
        mask = np.zeros(freqs.shape, dtype=bool)
        eps = 1e-12
        for lo, hi in self.bands:
            mask |= (freqs >= lo - eps) & (freqs <= hi + eps)
        return mask


@dataclass(frozen=True)
class ResponseGrid:
    """Sampled complex response with folding-band membership flags."""

    freqs: np.ndarray
    values: np.ndarray
    in_band_mask: np.ndarray

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def folding_bands(D: int, f_c: float) -> FoldingBandSet:
    """Folding bands for decimation by D with signal half-width f_c.

    k_M = floor(D/2) for even D, floor((D-1)/2) for odd D; band points are
    clipped to [0, 1/2].  f_c >= 1/(2D) makes adjacent bands touch baseband
    or each other, which is unusable for design.
    """
    if D < 2:
        raise ParameterError(f"D must be >= 2, got {D}")
    if not 0.0 < f_c:
        raise ParameterError(f"f_c must be positive, got {f_c}")
    if f_c >= 1.0 / (2 * D):
        raise OverlappingBandsError(
            f"f_c = {f_c} >= 1/(2D) = {1.0 / (2 * D)}: folding bands overlap"
        )
    k_m = D // 2 if D % 2 == 0 else (D - 1) // 2
    bands = tuple(
        (k / D - f_c, min(k / D + f_c, 0.5)) for k in range(1, k_m + 1)
    )
    return FoldingBandSet(D=D, f_c=f_c, bands=bands)


def _sinc_ratio(f: np.ndarray, D: int) -> np.ndarray:
    # sin(pi f D) / (D sin(pi f)) == sinc(f D) / sinc(f); np.sinc resolves the
    # removable singularities (f -> 0 and, for the numerator, f = k/D) exactly.
    return np.sinc(D * f) / np.sinc(f)


def comb_response(comb: CombSpec, f) -> complex | np.ndarray:
    """Complex response of the classical comb, unity gain at DC."""
    f = np.asarray(f, dtype=float)
    mag = _sinc_ratio(f, comb.D)
    phase = np.exp(-1j * np.pi * f * (comb.D - 1))
    out = (mag * phase) ** comb.n_c
    return out if out.ndim else complex(out)


def _cascade_response(f: np.ndarray, stage_ks, r: np.ndarray) -> np.ndarray:
    """Product of the per-stage responses 2 e^{-j3*2^{k-1}w} (cos3x + r cosx)."""
    w = 2.0 * np.pi * np.asarray(f, dtype=float)
    out = np.ones_like(w, dtype=complex)
    for k, r_k in zip(stage_ks, r):
        half = 2.0 ** (k - 1)
        out *= 2.0 * np.exp(-3j * half * w) * (np.cos(3 * half * w) + r_k * np.cos(half * w))
    return out


def _polyphase_response(f: np.ndarray, branches, D1: int) -> np.ndarray:
    """H_P via the branch reassembly sum_k z^-k E_k(z^D1)."""
    w = 2.0 * np.pi * np.asarray(f, dtype=float)
    out = np.zeros_like(w, dtype=complex)
    for k, e_k in enumerate(branches):
        n = np.arange(len(e_k))
        ek_of_zD1 = (e_k[None, :] * np.exp(-1j * np.outer(w, D1 * n))).sum(axis=1)
        out += np.exp(-1j * w * k) * ek_of_zD1
    return out


def gcf_response(spec: GcfSpec, f, normalized: bool = False) -> complex | np.ndarray:
    """Complex GCF response H_P * H_N at f (cycles/sample).

    The cascade part uses the closed-form stage product; the polyphase part
    is evaluated from the reassembled branches.  With normalized set the
    result is scaled by h_o (unity DC gain).
    """
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    cascade = stage_coefficients(spec)
    out = _cascade_response(f_arr, spec.cascade_stages, np.asarray(cascade.r))
    if spec.D1 > 1:
        bank = polyphase_impulse(spec)
        out = out * _polyphase_response(f_arr, bank.branches, spec.D1)
    if normalized:
        out = out * normalization_gain(spec).h_o
    return out if np.ndim(f) else complex(out[0])


def response_grid(
    spec_or_comb,
    band_config: FoldingBandSet,
    points_per_band: int = DEFAULT_POINTS_PER_BAND,
    global_points: int = DEFAULT_GLOBAL_POINTS,
    normalized: bool = True,
) -> ResponseGrid:
    """Dense response grid over [0, 1/2] with folding bands refined.

    The grid is global_points uniform samples augmented so every folding
    band carries at least points_per_band samples including both edges and
    the center.
    """
    if points_per_band < 2:
        raise ParameterError(f"points_per_band must be >= 2, got {points_per_band}")
    freqs = grid_frequencies(band_config, points_per_band, global_points)
    if isinstance(spec_or_comb, CombSpec):
        values = comb_response(spec_or_comb, freqs)
    elif isinstance(spec_or_comb, GcfSpec):
        values = gcf_response(spec_or_comb, freqs, normalized=normalized)
    else:
        raise ParameterError(f"expected GcfSpec or CombSpec, got {type(spec_or_comb)!r}")
    return ResponseGrid(freqs=freqs, values=np.asarray(values), in_band_mask=band_config.contains(freqs))


def grid_frequencies(
    band_config: FoldingBandSet,
    points_per_band: int = DEFAULT_POINTS_PER_BAND,
    global_points: int = DEFAULT_GLOBAL_POINTS,
) -> np.ndarray:
    """Frequency samples of :func:`response_grid` without evaluating a filter."""
    pieces = [np.linspace(0.0, 0.5, global_points)]
    for lo, hi in band_config.bands:
        seg = np.linspace(lo, hi, points_per_band)
        center = (lo + hi) / 2.0
        pieces.append(seg)
        pieces.append(np.array([center]))
    return np.unique(np.concatenate(pieces))


def worst_case_attenuation(grid: ResponseGrid) -> float:
    """-20 log10 of the largest in-band magnitude, capped for exact zeros.

    The grid must be normalized (DC gain 1) for the result to be an
    attenuation relative to the passband.
    """
    if not np.any(grid.in_band_mask):
        raise ParameterError("grid has no in-band points")
    peak = float(np.max(grid.magnitude[grid.in_band_mask]))
    if peak <= 10.0 ** (-ATTENUATION_CAP_DB / 20.0):
        return ATTENUATION_CAP_DB
    return -20.0 * np.log10(peak)


def grid_to_csv(path, grid: ResponseGrid, extra: dict | None = None) -> None:
    """CSV export: freq, re, im, magnitude, magnitude_dB, in_band [, extras].

    This is the plot-data format for the response figures; extra maps column
    names to arrays aligned with the grid.
    """
    extra = extra or {}
    mag = grid.magnitude
    floor = 10.0 ** (-ATTENUATION_CAP_DB / 20.0)
    mag_db = 20.0 * np.log10(np.maximum(mag, floor))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq", "re", "im", "magnitude", "magnitude_dB", "in_band"] + list(extra))
        for i in range(len(grid.freqs)):
            row = [
                repr(float(grid.freqs[i])),
                repr(float(grid.values[i].real)),
                repr(float(grid.values[i].imag)),
                repr(float(mag[i])),
                repr(float(mag_db[i])),
                int(grid.in_band_mask[i]),
            ]
            row += [repr(float(np.asarray(col)[i])) for col in extra.values()]
            writer.writerow(row)
