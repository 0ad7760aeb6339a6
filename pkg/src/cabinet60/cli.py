"""``cabinet60`` command-line front end.

Subcommands: ``cir``, ``extract``, ``synth``, ``design``, ``ber`` and
``preset list|show``. Every command is deterministic given its inputs and
``--seed``; failures print a single ``error: <Type>: <message>`` line to
stderr and exit with status 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as fio
from .dsp import REFERENCE_GATE, DEFAULT_FLOOR, calibrated_cir, time_gate
from .extraction import (ConvergenceWarning, NonDecayingProfileError, MultipathProfile,
                         detect_paths, fit_arrivals, fit_decay_constant, fit_distribution,
                         fit_path_loss, measurement_distances, rds_threshold_sweep,
                         rms_delay_spread)
from .ofdm import (BLOCK_CAP, DESIGN_A, DESIGN_B, DesignEnvelope, OfdmConfig, StopRule,
                   ber_awgn_bpsk, ber_rayleigh_bpsk, check_design, cp_from_channel,
                   cp_from_delay, rate_and_latency, rayleigh_source, simulate_ber)
from .synthesis import (PRESET_NAMES, ChannelModel, DEFAULT_SAMPLE_PERIOD, SvModel,
                        model_from_dict, normalize_unit_power, preset, rng_stream,
                        synthesize_cir, synthesize_sv_cir)

SWEEP_THRESHOLDS = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
#: generation depth for BER channels, deeper than the analysis threshold to avoid truncation
BER_HORIZON_DB = 40.0


class UsageError(Exception):
    pass


class InfeasibleDesignError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- argument helpers ----------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``"0:2:20"`` (inclusive stop), ``"0,4,8"`` or a single value; ``inf`` allowed."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must be start:step:stop")
        start, step, stop = (float(p) for p in parts)
        if not step > 0 or stop < start:
            raise ValueError(f"grid {text!r} needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_window(text: str, unit: float = 1e-9):
    lo, hi = text.split(":")
    return float(lo) * unit, float(hi) * unit


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stem(path) -> str:
    name = Path(path).name
    for suffix in (".sweep.csv", ".cir.csv", ".profile.csv", ".csv"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def _emit(path):
    print(str(path))


# --- cir -----------------------------------------------------------------------

def cmd_cir(args) -> int:
    measured = fio.read_sweep(args.sweep)
    reference = fio.read_sweep(args.reference) if args.reference else None
    ref_gate = None if args.ref_gate == "none" else _parse_window(args.ref_gate)
    cir = calibrated_cir(measured, reference, window=args.window, floor=args.floor,
                         reference_gate=ref_gate)
    if args.gate:
        cir = time_gate(cir, *_parse_window(args.gate))
    _emit(fio.write_cir(_out_dir(args) / f"{_stem(args.sweep)}.cir.csv", cir))
    return 0


# --- extract -------------------------------------------------------------------

def _load_channel(path, threshold_db):
    """Return ``(profile, cir or None, total_power)`` for a CIR or profile file."""
    header = fio.read_header(path)
    meta = fio.read_sidecar(path)
    if header == fio.PROFILE_HEADER:
        prof = fio.read_profile(path)
        return prof, None, float(prof.powers.sum()), meta
    if header == fio.CIR_HEADER:
        cir = fio.read_cir(path, sample_period=meta.get("sample_period_s"))
        return detect_paths(cir, threshold_db), cir, cir.total_power(), meta
    raise fio.FormatError(path, 1, f"unrecognised header {','.join(header)!r}")


def _dist_fit(values, family):
    try:
        return fit_distribution(values, family).as_dict()
    except (ValueError, FloatingPointError, RuntimeError):
        return None


def build_report(paths, threshold_db: float, path_loss: str = "auto", seed: int = 0,
                 thresholds=SWEEP_THRESHOLDS) -> dict:
    """Extraction report over CIR and/or profile files (delays in ns, rates per ns)."""
    per_file, profiles, cirs, pl_points, missing = [], [], [], [], []
    for p in paths:
        prof, cir, total, meta = _load_channel(p, threshold_db)
        profiles.append(prof)
        if cir is not None:
            cirs.append(cir)
        try:
            gamma_ns = fit_decay_constant(prof).gamma * 1e9
        except (ValueError, NonDecayingProfileError):
            gamma_ns = None
        per_file.append({"file": str(p), "n_paths": len(prof),
                         "rds_ns": rms_delay_spread(prof) * 1e9, "gamma_ns": gamma_ns})
        d = meta.get("distance_m")
        if d is None:
            missing.append(str(p))
        elif total > 0:
            loss = -(10 * math.log10(total) + float(meta.get("large_scale_gain_db", 0.0)))
            pl_points.append((float(d), loss))

    if path_loss == "require" and missing:
        raise ValueError(f"path-loss fit requested but {len(missing)} file(s) lack a distance_m "
                         f"sidecar, first: {missing[0]}")
    diag = {}
    pl = {"pl_d0": None, "alpha": None, "sigma": None}
    if path_loss != "off" and not missing and len({d for d, _ in pl_points}) >= 2 and len(pl_points) >= 3:
        fit = fit_path_loss(pl_points)
        pl = {"pl_d0": fit.pl_d0, "alpha": fit.alpha, "sigma": fit.sigma}
        diag["path_loss"] = {"alpha_stderr": fit.alpha_stderr, "n_points": len(pl_points)}

    rds = np.array([f["rds_ns"] for f in per_file])
    gammas = [f["gamma_ns"] for f in per_file if f["gamma_ns"] is not None]
    if len(gammas) >= 2:
        gamma = {fam: _dist_fit(gammas, fam) for fam in ("gaussian", "gamma", "weibull")}
    else:
        gamma = {"gaussian": None, "gamma": None, "weibull": None}
    diag["gamma"] = {"mean_ns": float(np.mean(gammas)) if gammas else None, "n_fits": len(gammas)}

    arrivals = {"lambda": None, "lambda1": None, "lambda2": None, "b": None}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            af = fit_arrivals(profiles, seed=seed)
        arrivals = {"lambda": af.single_lambda, "lambda1": af.lambda1, "lambda2": af.lambda2,
                    "b": af.weight}
        diag["arrivals"] = {"loglik_single": af.loglik_single, "loglik_mixture": af.loglik_mixture,
                            "n_intervals": af.n_intervals, "converged": af.converged and not caught}
    except ValueError:
        pass

    sweep = []
    if cirs:
        sweep = [{"threshold_db": t, "mean_paths": n, "mean_rds_ns": r * 1e9}
                 for t, n, r in rds_threshold_sweep(cirs, thresholds)]
    return {
        "path_loss": pl,
        "rds": {"mean": float(rds.mean()), "std": float(rds.std())},
        "gamma": gamma,
        "arrivals": arrivals,
        "units": {"rds": "ns", "gamma": "ns", "arrivals": "1/ns", "path_loss": "dB"},
        "diagnostics": diag,
        "threshold_db": threshold_db,
        "n_files": len(per_file),
        "per_file": per_file,
        "threshold_sweep": sweep,
    }


def cmd_extract(args) -> int:
    mode = "require" if args.path_loss else "auto"
    report = build_report(args.files, args.threshold_db, mode, args.seed)
    _emit(fio.write_json(_out_dir(args) / args.report, report))
    return 0


# --- synth ---------------------------------------------------------------------

def _load_model(text: str):
    if Path(text).suffix == ".json" or Path(text).exists():
        return model_from_dict(fio.read_json(text))
    return preset(text)


def cmd_synth(args) -> int:
    model = _load_model(args.model)
    out = _out_dir(args)
    if args.grid:
        distances = measurement_distances(args.grid)
    else:
        distances = np.array([args.distance])
    label = model.label or _stem(args.model)
    prefix = args.prefix or label
    for i in range(args.count):
        rng = rng_stream(args.seed, "synth", i)
        d = float(distances[i % distances.size])
        if isinstance(model, SvModel):
            real = synthesize_sv_cir(model, args.sample_period, rng=rng, distance=d,
                                     threshold_db=args.threshold_db)
        else:
            real = synthesize_cir(model, d, args.sample_period, rng)
        base = out / f"{prefix}_{i:04d}"
        fio.write_profile(f"{base}.profile.csv", real.profile)
        if not args.no_cir:
            fio.write_cir(f"{base}.cir.csv", real.cir)
        meta = {"seed": args.seed, "index": i, "model_label": real.model_label,
                "distance_m": d, "large_scale_gain_db": real.large_scale_gain,
                "sample_period_s": real.cir.sample_period}
        meta.update({k: v for k, v in real.extras.items() if k != "expected_powers" and k != "distance_m"})
        _emit(fio.write_json(f"{base}.json", meta))
    return 0


# --- design --------------------------------------------------------------------

def design_report(cfg: OfdmConfig, env: DesignEnvelope) -> dict:
    rate, latency, kappa = rate_and_latency(cfg)
    chk = check_design(cfg, env)
    rep = cfg.to_dict()
    rep.update(rate_bps=rate, latency_s=latency, kappa=kappa)
    rep["margins"] = chk.to_dict()
    rep["margins"]["flat_fading_soft"] = True
    rep["envelope"] = {"t_max": env.t_max, "doppler": env.doppler, "speed": env.speed,
                       "carrier": env.carrier}
    rep["feasible"] = cfg.block_length < BLOCK_CAP
    return rep


def cmd_design(args) -> int:
    base = {"A": DESIGN_A, "B": DESIGN_B}.get(args.design, {})
    n_fft = args.n_fft or base.get("n_fft")
    n_user = args.n_user or base.get("n_user")
    if n_fft is None or n_user is None:
        raise ValueError("give --n-fft and --n-user or --design A|B")
    ts = 1.0 / args.bandwidth
    t_max = args.t_max
    if args.channel:
        prof, _, _, _ = _load_channel(args.channel, args.threshold_db)
        t_max = float(prof.times[-1] - prof.times[0])
        n_cp = cp_from_channel(prof, ts, args.margin)
    elif t_max is not None:
        n_cp = cp_from_delay(t_max, ts, args.margin)
    else:
        n_cp = None
    if args.n_cp is not None:
        n_cp = args.n_cp
    if n_cp is None:
        raise ValueError("give --t-max, --channel or --n-cp")
    if n_fft + n_cp >= BLOCK_CAP:
        raise InfeasibleDesignError(
            f"block of {n_fft} + {n_cp} samples reaches the {BLOCK_CAP}-sample coherence cap")
    cfg = OfdmConfig(n_fft, n_cp, n_user, args.bits, args.bandwidth)
    env = DesignEnvelope.from_speed(t_max or 0.0, args.speed, args.carrier)
    rep = design_report(cfg, env)
    _emit(fio.write_json(_out_dir(args) / args.name, rep))
    return 0


def config_from_report(rep: dict) -> OfdmConfig:
    return OfdmConfig(int(rep["n_fft"]), int(rep["n_cp"]), int(rep["n_user"]),
                      int(rep.get("bits_per_symbol", 1)), float(rep.get("bandwidth", 5e9)))


# --- ber -----------------------------------------------------------------------

def resolve_channel(text: str, cfg: OfdmConfig, seed: int):
    """Channel source -> ``(label, channel)`` for ``simulate_ber``."""
    kind, _, arg = text.partition(":")
    if kind == "awgn":
        return "awgn", np.ones(1, dtype=complex)
    if kind == "rayleigh":
        n = int(arg or 1)
        return f"rayleigh-{n}", rayleigh_source(n)
    if kind == "preset":
        model = preset(arg)
        rng = rng_stream(seed, "ber-channel", arg)
        if isinstance(model, ChannelModel):
            real = synthesize_cir(model, 1.0, cfg.symbol_period, rng, threshold_db=BER_HORIZON_DB)
        else:
            real = synthesize_sv_cir(model, cfg.symbol_period, rng=rng, threshold_db=BER_HORIZON_DB)
        return arg, normalize_unit_power(real)
    if kind == "file":
        header = fio.read_header(arg)
        label = _stem(arg)
        if header == fio.PROFILE_HEADER:
            return label, fio.read_profile(arg)
        return label, fio.read_cir(arg, sample_period=fio.read_sidecar(arg).get("sample_period_s"))
    raise ValueError(f"unknown channel source {text!r}; use awgn, rayleigh:L, preset:NAME or file:PATH")


def cmd_ber(args) -> int:
    cfg = config_from_report(fio.read_json(args.design))
    grid = parse_grid(args.ebn0)
    stop = StopRule(args.min_bits, args.min_errors, args.max_bits)
    out = _out_dir(args)
    for text in args.channel or ["awgn"]:
        label, ch = resolve_channel(text, cfg, args.seed)
        curve = simulate_ber(cfg, ch, grid, stop, seed=args.seed, channel_label=label)
        cols = None
        if args.reference:
            g = np.array(grid)
            cols = {"awgn_theory": ber_awgn_bpsk(g), "rayleigh_theory": ber_rayleigh_bpsk(g)}
        _emit(fio.write_ber(out / f"ber_{label}.csv", curve, cols))
        capped = [p.eb_n0 for p in curve.points if p.capped]
        if capped:
            print(f"warning: bit cap reached at Eb/N0 {capped} dB for {label}", file=sys.stderr)
    return 0


# --- preset ----------------------------------------------------------------------

def cmd_preset(args) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            m = preset(name)
            kind = "sv" if isinstance(m, SvModel) else "enclosure"
            print(f"{name}\t{kind}")
        return 0
    if not args.name:
        raise ValueError("preset show needs a NAME")
    sys.stdout.write(fio.dumps_json(preset(args.name).to_dict()))
    return 0


# --- parser ----------------------------------------------------------------------

def _globals(parser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="root seed (default 0)")
    parser.add_argument("--out", default=d("."), help="output directory (default .)")
    parser.add_argument("--threshold-db", type=float, default=d(30.0),
                        help="path threshold below the strongest path, dB (default 30)")
    parser.add_argument("--window", choices=("hann", "none"), default=d("hann"))


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cabinet60", description="Enclosure channel toolkit: sounding, extraction, "
                 "synthesis and OFDM link analysis.")
    _globals(ap, suppress=False)
    common = _Parser(add_help=False)
    _globals(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cir", parents=[common], help="sweep CSV -> CIR CSV")
    p.add_argument("sweep")
    p.add_argument("--reference", help="free-space reference sweep for inverse filtering")
    p.add_argument("--ref-gate", default=f"{REFERENCE_GATE[0] * 1e9:g}:{REFERENCE_GATE[1] * 1e9:g}",
                   help="reference gate start:stop in ns, or 'none' (default 0:50)")
    p.add_argument("--gate", help="gate applied to the output CIR, start:stop in ns")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.set_defaults(func=cmd_cir)

    p = sub.add_parser("extract", parents=[common], help="CIR/profile files -> JSON fit report")
    p.add_argument("files", nargs="+")
    p.add_argument("--path-loss", action="store_true",
                   help="require a path-loss fit (every file needs distance_m in its sidecar)")
    p.add_argument("--report", default="report.json")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", parents=[common], help="draw channel realizations")
    p.add_argument("model", help="preset name or model JSON file")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--distance", type=float, default=1.0, help="Tx-Rx distance in m")
    p.add_argument("--grid", choices=("sc1", "sc2", "sc3"),
                   help="cycle through the measurement-grid distances of a scenario")
    p.add_argument("--sample-period", type=float, default=DEFAULT_SAMPLE_PERIOD)
    p.add_argument("--prefix")
    p.add_argument("--no-cir", action="store_true", help="write only profile and sidecar files")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("design", parents=[common], help="OFDM design calculator")
    p.add_argument("--bandwidth", type=float, default=5e9)
    p.add_argument("--t-max", type=float, help="channel length in s")
    p.add_argument("--channel", help="CIR or profile file to size the cyclic prefix")
    p.add_argument("--margin", type=float, default=0.0)
    p.add_argument("--speed", type=float, default=0.0, help="relative speed in m/s")
    p.add_argument("--carrier", type=float, default=60e9)
    p.add_argument("--design", choices=("A", "B"))
    p.add_argument("--n-fft", type=int)
    p.add_argument("--n-user", type=int)
    p.add_argument("--n-cp", type=int, help="explicit prefix length (overrides sizing)")
    p.add_argument("--bits", type=int, default=1)
    p.add_argument("--name", default="design.json")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("ber", parents=[common], help="Monte Carlo BER curve")
    p.add_argument("design", help="design JSON")
    p.add_argument("--channel", action="append",
                   help="awgn | rayleigh:L | preset:NAME | file:PATH (repeatable)")
    p.add_argument("--ebn0", default="0:2:20")
    p.add_argument("--reference", action="store_true", help="append closed-form columns")
    p.add_argument("--min-bits", type=int, default=StopRule.min_bits)
    p.add_argument("--min-errors", type=int, default=StopRule.min_errors)
    p.add_argument("--max-bits", type=int, default=StopRule.max_bits)
    p.set_defaults(func=cmd_ber)

    p = sub.add_parser("preset", parents=[common], help="list or show channel presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(func=cmd_preset)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "count", 0) < 0:
            raise ValueError("--count must be >= 0")
        return args.func(args)
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
