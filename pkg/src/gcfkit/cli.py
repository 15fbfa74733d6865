"""Command-line front end.

Subcommands: design | response | sensitivity | validate | simulate | compare.
Every command reads an optional JSON config file plus flag overrides (flags
mirror config keys), writes CSV/JSON artifacts into the output directory and
embeds the resolved config for provenance.  Figure data is emitted as CSV
only; plotting is left to external tools.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 runtime
numeric error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from .errors import ParameterError, StageOverflowError
from .filters import (
    CombSpec,
    GcfSpec,
    coefficients_to_csv,
    coefficients_to_json,
    expand_full_polynomial,
    polyphase_impulse,
    stage_coefficients,
)
from .spectral import (
    ResponseGrid,
    folding_bands,
    response_grid,
    grid_to_csv,
    worst_case_attenuation,
)
from .wordlength import (
    FixedPointFormat,
    ToleranceSpec,
    cascade_derivative_magnitudes,
    design_wordlengths,
    monte_carlo_coverage,
    monte_carlo_error_std,
    quantization_error_response,
    quantize_coefficients,
    quantized_response,
    sensitivity,
)
from .sdsim import SdConfig, run_experiment, export_run

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass
class DesignConfig:
    """Resolved configuration shared by all subcommands."""

    decimation_factor: int = 16
    pp_split: int = -1
    q: float = 0.79
    signal_bandwidth: float | None = None   # f_c, cycles/sample
    oversampling_ratio: float | None = None  # alternative to signal_bandwidth
    chi: float = 1e-4
    prob: float | None = None
    y: float | None = None
    input_width: int = 1
    points_per_band: int = 129
    global_points: int = 4096
    normalized: bool = True
    seed: int = 12345
    trials: int = 2000
    n_samples: int = 2 ** 18
    amplitude: float = 0.5
    sample_rate_hz: float | None = None
    segment: int = 4096
    overlap: float = 0.5
    comb_order: int = 3
    output_dir: str = "out"

    def spec(self) -> GcfSpec:
        if self.signal_bandwidth is not None:
            return GcfSpec(
                D=self.decimation_factor, f_c=self.signal_bandwidth,
                p_p=self.pp_split, q=self.q, rho=self.oversampling_ratio,
            )
        if self.oversampling_ratio is not None:
            return GcfSpec.from_oversampling(
                self.decimation_factor, self.oversampling_ratio, p_p=self.pp_split, q=self.q
            )
        raise ParameterError("one of signal_bandwidth / oversampling_ratio is required")

    def tolerance(self) -> ToleranceSpec:
        if self.y is not None and self.prob is not None:
            raise ParameterError("give either prob or y, not both")
        if self.y is not None:
            return ToleranceSpec.from_y(self.chi, self.y)
        return ToleranceSpec.from_prob(self.chi, self.prob if self.prob is not None else 0.95)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: str | None, overrides: dict) -> DesignConfig:
    """JSON config plus overrides; unknown keys are rejected."""
    known = {f.name for f in fields(DesignConfig)}
    merged: dict = {}
    if path:
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        merged.update(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return DesignConfig(**merged)


def _write_config_echo(cfg: DesignConfig, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "resolved_config.json"), "w") as fh:
        json.dump(cfg.as_dict(), fh, indent=2)
        fh.write("\n")


SWEEP_CHIS = (5e-3, 1e-3, 1e-4)
SWEEP_YS = (2.0, 1.63)


def _write_fn_sweep(cfg: DesignConfig, outdir: str) -> None:
    """F_n over every split of D, the standard chi triple and both working y."""
    base = cfg.spec()
    path = os.path.join(outdir, "fn_sweep.csv")
    with open(path, "w") as fh:
        fh.write("D,D1,pp_split,chi,y,f_n\n")
        for pp in range(-1, base.p):
            spec = GcfSpec(D=base.D, f_c=base.f_c, p_p=pp, q=base.q, rho=base.rho)
            bands = folding_bands(spec.D, spec.f_c)
            for chi in SWEEP_CHIS:
                for y in SWEEP_YS:
                    tol = ToleranceSpec.from_y(chi, y)
                    res = design_wordlengths(
                        spec, tol, cfg.input_width,
                        points_per_band=cfg.points_per_band,
                        global_points=cfg.global_points,
                        normalized=cfg.normalized,
                    )
                    fh.write(f"{spec.D},{spec.D1},{pp},{chi!r},{y!r},{res.f_n}\n")


def cmd_design(cfg: DesignConfig, sweep_splits: bool = False) -> int:
    spec = cfg.spec()
    tol = cfg.tolerance()
    outdir = cfg.output_dir
    _write_config_echo(cfg, outdir)
    if sweep_splits:
        _write_fn_sweep(cfg, outdir)
    report = design_wordlengths(
        spec, tol, cfg.input_width,
        points_per_band=cfg.points_per_band, global_points=cfg.global_points,
        normalized=cfg.normalized,
    )
    report.to_json(os.path.join(outdir, "report.json"))
    r = np.asarray(stage_coefficients(spec).r)
    bank = polyphase_impulse(spec)
    coefficients_to_csv(os.path.join(outdir, "cascade_exact.csv"), r)
    coefficients_to_csv(os.path.join(outdir, "cascade_quantized.csv"), quantize_coefficients(r, report.f_n))
    coefficients_to_csv(os.path.join(outdir, "bank_exact.csv"), bank.h_p)
    coefficients_to_csv(
        os.path.join(outdir, "bank_quantized.csv"),
        quantize_coefficients(bank.h_p / bank.h_p.sum(), report.f_n),
    )
    coefficients_to_json(
        os.path.join(outdir, "coefficients.json"), spec,
        cascade=r, cascade_quantized=quantize_coefficients(r, report.f_n),
        bank=bank.h_p, expanded=expand_full_polynomial(spec),
    )
    print(report.table())
    return EXIT_OK


def cmd_response(cfg: DesignConfig) -> int:
    spec = cfg.spec()
    tol = cfg.tolerance()
    outdir = cfg.output_dir
    _write_config_echo(cfg, outdir)
    bands = folding_bands(spec.D, spec.f_c)
    exact = response_grid(spec, bands, cfg.points_per_band, cfg.global_points)
    grid_to_csv(os.path.join(outdir, "response_exact.csv"), exact)
    report = design_wordlengths(
        spec, tol, cfg.input_width,
        points_per_band=cfg.points_per_band, global_points=cfg.global_points,
        normalized=cfg.normalized,
    )
    err = quantization_error_response(
        spec, report.f_n, bands=bands,
        points_per_band=cfg.points_per_band, global_points=cfg.global_points,
    )
    quant_vals = quantized_response(spec, report.f_n, exact.freqs)
    grid_to_csv(
        os.path.join(outdir, "response_quantized.csv"),
        ResponseGrid(freqs=exact.freqs, values=quant_vals, in_band_mask=exact.in_band_mask),
    )
    comb = CombSpec(D=spec.D, n_c=cfg.comb_order)
    comb_grid = response_grid(comb, bands, cfg.points_per_band, cfg.global_points)
    grid_to_csv(os.path.join(outdir, "response_comb.csv"), comb_grid)
    with open(os.path.join(outdir, "bands.csv"), "w") as fh:
        fh.write("k,low,high\n")
        for i, (lo, hi) in enumerate(bands.bands, start=1):
            fh.write(f"{i},{lo!r},{hi!r}\n")
    max_dev = float(np.max(np.abs(err.delta_h[err.in_band_mask])))
    print(f"max in-band |d|H|| at F_n={report.f_n}: {max_dev:.3e} (chi = {tol.chi:g})")
    return EXIT_OK


def cmd_sensitivity(cfg: DesignConfig) -> int:
    spec = cfg.spec()
    tol = cfg.tolerance()
    outdir = cfg.output_dir
    _write_config_echo(cfg, outdir)
    bands = folding_bands(spec.D, spec.f_c)
    grid = response_grid(spec, bands, cfg.points_per_band, cfg.global_points)
    result = sensitivity(spec, grid.freqs, normalized=cfg.normalized)
    report = design_wordlengths(
        spec, tol, cfg.input_width,
        points_per_band=cfg.points_per_band, global_points=cfg.global_points,
        normalized=cfg.normalized,
    )
    err = quantization_error_response(spec, report.f_n, bands=bands, freqs=grid.freqs)
    grid_to_csv(
        os.path.join(outdir, "sensitivity.csv"), grid,
        extra={"s_t": result.s_t, "sigma_dh": err.sigma_dh, "delta_h": err.delta_h},
    )
    print(f"S_T grid ({result.case_tag}, {result.n_multipliers} multipliers): "
          f"in-band max {np.max(result.s_t[grid.in_band_mask]):.6g}, F_n {report.f_n}")
    return EXIT_OK


def _check_split_invariance(spec: GcfSpec, corrupt: bool) -> tuple[bool, str]:
    ref = expand_full_polynomial(GcfSpec(D=spec.D, f_c=spec.f_c, p_p=-1, q=spec.q))
    if corrupt:
        ref = ref.copy()
        ref[1] += 1e-6
    scale = np.max(np.abs(ref))
    worst = 0.0
    for pp in range(0, spec.p):
        other = expand_full_polynomial(GcfSpec(D=spec.D, f_c=spec.f_c, p_p=pp, q=spec.q))
        worst = max(worst, float(np.max(np.abs(other - ref)) / scale))
    return worst <= 1e-10, f"split_invariance: max rel diff {worst:.3e} (tol 1e-10)"


def _check_sensitivity_fd(spec: GcfSpec, seed: int) -> tuple[bool, str]:
    caspec = spec if spec.p_p == -1 else GcfSpec(D=spec.D, f_c=spec.f_c, p_p=-1, q=spec.q)
    rng = np.random.default_rng(seed)
    freqs = rng.uniform(0.01, 0.49, size=50)
    analytic = cascade_derivative_magnitudes(caspec, freqs, normalized=False)
    r = np.asarray(stage_coefficients(caspec).r)
    step = 1e-6
    worst = 0.0
    w = 2.0 * np.pi * freqs
    for u in range(len(r)):
        hi = r.copy(); hi[u] += step
        lo = r.copy(); lo[u] -= step
        def _resp(rv):
            out = np.ones_like(w, dtype=complex)
            for k, r_k in zip(caspec.cascade_stages, rv):
                half = 2.0 ** (k - 1)
                out = out * 2.0 * np.exp(-3j * half * w) * (np.cos(3 * half * w) + r_k * np.cos(half * w))
            return out
        fd = np.abs((_resp(hi) - _resp(lo)) / (2 * step))
        rel = np.max(np.abs(fd - analytic[u]) / np.maximum(np.abs(analytic[u]), 1e-30))
        worst = max(worst, float(rel))
    return worst <= 1e-5, f"sensitivity_fd: max rel err {worst:.3e} (tol 1e-5)"


def _check_mc(spec: GcfSpec, tol: ToleranceSpec, f_n: int, trials: int, seed: int) -> tuple[bool, str]:
    # Model-validity checks that hold for the uniform multiplier-noise model:
    # sigma_dh is an upper bound on the true per-frequency std (10% slack for
    # sampling noise), and coverage at the design y cannot fall far below the
    # Gaussian prediction.
    fi, emp, model = monte_carlo_error_std(spec, f_n, trials, seed)
    ok_std = bool(np.all(emp <= 1.1 * model + 1e-18))
    cov = monte_carlo_coverage(spec, f_n, tol.y, trials, seed)
    floor = math.erf(tol.y / math.sqrt(2.0)) - 0.03
    ok_cov = cov >= floor
    msg = (f"mc_model: std bound {'ok' if ok_std else 'VIOLATED'}, "
           f"coverage {cov:.4f} >= {floor:.4f} {'ok' if ok_cov else 'VIOLATED'}")
    return ok_std and ok_cov, msg


def cmd_validate(cfg: DesignConfig, corrupt: bool = False) -> int:
    spec = cfg.spec()
    tol = cfg.tolerance()
    outdir = cfg.output_dir
    _write_config_echo(cfg, outdir)
    report = design_wordlengths(spec, tol, cfg.input_width, normalized=cfg.normalized)
    checks = {}
    ok1, msg1 = _check_split_invariance(spec, corrupt)
    checks["split_invariance"] = {"pass": ok1, "detail": msg1}
    ok2, msg2 = _check_sensitivity_fd(spec, cfg.seed)
    checks["sensitivity_fd"] = {"pass": ok2, "detail": msg2}
    ok3, msg3 = _check_mc(spec, tol, report.f_n, cfg.trials, cfg.seed)
    checks["mc_model"] = {"pass": ok3, "detail": msg3}
    all_ok = all(c["pass"] for c in checks.values())
    payload = {"pass": all_ok, "checks": checks, "f_n": report.f_n}
    with open(os.path.join(outdir, "validate.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    for name, c in checks.items():
        print(("PASS " if c["pass"] else "FAIL ") + c["detail"])
    return EXIT_OK if all_ok else EXIT_VALIDATION


def cmd_simulate(cfg: DesignConfig) -> int:
    spec = cfg.spec()
    tol = cfg.tolerance()
    outdir = cfg.output_dir
    report = design_wordlengths(spec, tol, cfg.input_width, normalized=cfg.normalized)
    fmt = FixedPointFormat(i_n=report.i_n_k, f_n=report.f_n)
    sd_cfg = SdConfig(
        fx_ratio=spec.f_c, amplitude=cfg.amplitude,
        n_samples=cfg.n_samples, seed=cfg.seed, fs=cfg.sample_rate_hz,
    )
    run = run_experiment(sd_cfg, spec, fmt, segment=cfg.segment, overlap_fraction=cfg.overlap)
    export_run(run, outdir)
    _write_config_echo(cfg, outdir)
    edge = spec.f_c * spec.D
    print(f"decimated {len(run.bitstream)} -> {len(run.decimated)} samples; "
          f"useful band edge {edge:.4f}; overloads {run.overload_count}")
    return EXIT_OK


def cmd_compare(cfg: DesignConfig) -> int:
    spec = cfg.spec()
    outdir = cfg.output_dir
    _write_config_echo(cfg, outdir)
    bands = folding_bands(spec.D, spec.f_c)
    gcf = response_grid(spec, bands, cfg.points_per_band, cfg.global_points)
    comb = response_grid(CombSpec(D=spec.D, n_c=cfg.comb_order), bands, cfg.points_per_band, cfg.global_points)
    rows = []
    for i, (lo, hi) in enumerate(bands.bands, start=1):
        m = (gcf.freqs >= lo - 1e-12) & (gcf.freqs <= hi + 1e-12)
        att_g = -20 * np.log10(max(np.max(gcf.magnitude[m]), 1e-15))
        att_c = -20 * np.log10(max(np.max(comb.magnitude[m]), 1e-15))
        rows.append((i, lo, hi, att_c, att_g, att_g - att_c))
    path = os.path.join(outdir, "comparison.csv")
    with open(path, "w") as fh:
        fh.write("band,low,high,comb_attenuation_dB,gcf_attenuation_dB,improvement_dB\n")
        for row in rows:
            fh.write(",".join(repr(x) if isinstance(x, float) else str(x) for x in row) + "\n")
    worst_g = worst_case_attenuation(gcf)
    worst_c = worst_case_attenuation(comb)
    print(f"worst-case attenuation: comb {worst_c:.2f} dB, gcf {worst_g:.2f} dB, "
          f"improvement {worst_g - worst_c:.2f} dB")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--decimation-factor", type=int, dest="decimation_factor")
    parser.add_argument("--pp-split", type=int, dest="pp_split")
    parser.add_argument("--q", type=float, dest="q")
    parser.add_argument("--signal-bandwidth", type=float, dest="signal_bandwidth")
    parser.add_argument("--oversampling-ratio", type=float, dest="oversampling_ratio")
    parser.add_argument("--chi", type=float, dest="chi")
    parser.add_argument("--prob", type=float, dest="prob")
    parser.add_argument("--y", type=float, dest="y")
    parser.add_argument("--input-width", type=int, dest="input_width")
    parser.add_argument("--points-per-band", type=int, dest="points_per_band")
    parser.add_argument("--global-points", type=int, dest="global_points")
    parser.add_argument("--unnormalized", action="store_const", const=False, dest="normalized")
    parser.add_argument("--seed", type=int, dest="seed")
    parser.add_argument("--trials", type=int, dest="trials")
    parser.add_argument("--n-samples", type=int, dest="n_samples")
    parser.add_argument("--amplitude", type=float, dest="amplitude")
    parser.add_argument("--sample-rate-hz", type=float, dest="sample_rate_hz")
    parser.add_argument("--segment", type=int, dest="segment")
    parser.add_argument("--overlap", type=float, dest="overlap")
    parser.add_argument("--comb-order", type=int, dest="comb_order")
    parser.add_argument("--output-dir", dest="output_dir")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gcfkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "design": cmd_design,
        "response": cmd_response,
        "sensitivity": cmd_sensitivity,
        "validate": cmd_validate,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
    }
    for name in handlers:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "validate":
            p.add_argument("--corrupt", action="store_true",
                           help="deliberately corrupt a coefficient (harness self-test)")
        if name == "design":
            p.add_argument("--sweep-splits", action="store_true",
                           help="also write fn_sweep.csv over all splits, chi and y values")
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "corrupt", "sweep_splits")}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "validate":
            return cmd_validate(cfg, corrupt=args.corrupt)
        if args.command == "design":
            return cmd_design(cfg, sweep_splits=args.sweep_splits)
        return handlers[args.command](cfg)
    except StageOverflowError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, FileNotFoundError, json.JSONDecodeError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
