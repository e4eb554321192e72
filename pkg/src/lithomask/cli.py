"""Command-line entry point: forward simulation, inversion, pattern metrics,
and kernel cache construction.

Exit codes: 0 success, 2 validation/configuration, 3 I/O, 4 optimizer stall
or kernel construction failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (ConfigurationError, ConstructionFailedError, DomainError,
                     GridMismatchError, LithomaskError, ResourceError)
from .fields import BinaryPattern, ScalarField
from .fileio import (hash_file, hash_json, read_mask, sidecar_path,
                     write_contours_json, write_field_csv, write_field_pgm,
                     write_pattern_pgm)
from .geometry import DistanceReport, strict_distance
from .imaging import OpticsConfig, exposed_set, hopkins_intensity, make_optics
from .kernels import build_smoothed_psf
from .optimize import ObjectiveConfig, gamma_sweep
from .phasefield import DoubleWellSpec, Region, format_energy

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_STALL = 4


@dataclass(frozen=True)
class RunConfig:
    """Validated bundle of grid, optics, and objective settings."""

    grid_n: int
    spacing: float
    window: float
    optics: OpticsConfig
    objective: ObjectiveConfig | None
    seed: int
    raw: dict
    allow_large: bool = False
    snapshot_every: int = 0
    kernel_budget: int | None = None

    @property
    def origin(self) -> tuple[float, float]:
        half = (self.grid_n - 1) / 2.0 * self.spacing
        return (-half, -half)

    def blank_field(self) -> ScalarField:
        return ScalarField.centered(self.grid_n, self.spacing)


def _collect(errors: list, cond: bool, msg: str):
    if cond:
        errors.append(msg)


def load_config(path, need_objective: bool = False) -> RunConfig:
    """Parse and validate a config JSON, aggregating every problem found."""
    raw = json.loads(Path(path).read_text())
    errors: list[str] = []
    grid = raw.get("grid", {})
    n = grid.get("n")
    window = grid.get("window")
    spacing = grid.get("spacing")
    _collect(errors, not isinstance(n, int) or n < 2, "grid.n must be an int >= 2")
    if spacing is None and window is not None and isinstance(n, int) and n >= 2:
        spacing = float(window) / n
    _collect(errors, spacing is None or not spacing > 0,
             "grid needs spacing > 0 or window > 0")
    if window is None and spacing is not None and isinstance(n, int):
        window = spacing * n

    opt = raw.get("optics", {})
    k = opt.get("k")
    na = opt.get("na")
    _collect(errors, not isinstance(k, (int, float)) or k <= 0,
             "optics.k must be positive")
    _collect(errors, not isinstance(na, (int, float)) or na <= 0,
             "optics.na must be positive")
    sigma = opt.get("sigma")
    _collect(errors, sigma is not None and sigma <= 0,
             "optics.sigma must be positive or null")
    threshold = opt.get("threshold", 0.5)
    eta = opt.get("eta", 0.1)
    psf_kind = opt.get("psf", "smoothed")
    _collect(errors, psf_kind not in ("smoothed", "jinc", "gaussian"),
             f"optics.psf {psf_kind!r} unknown")
    deviation = opt.get("deviation", 0.05)
    support_radius = opt.get("support_radius")

    obj_raw = raw.get("objective")
    _collect(errors, need_objective and obj_raw is None,
             "objective section required for inversion")

    if errors:
        raise ConfigurationError("invalid configuration:\n  - " +
                                 "\n  - ".join(errors))

    half = (n - 1) / 2.0 * spacing
    try:
        optics = make_optics(
            float(k), float(na), spacing=float(spacing), window_halfwidth=half,
            sigma=None if sigma is None else float(sigma),
            psf_kind=psf_kind, deviation=float(deviation),
            threshold=float(threshold), eta=float(eta),
            support_radius=None if support_radius is None else float(support_radius),
        )
    except (DomainError, ConstructionFailedError) as exc:
        raise ConfigurationError(f"invalid optics: {exc}") from exc

    objective = None
    if obj_raw is not None:
        objective = _build_objective(obj_raw, n, spacing, support_radius, errors)
        if errors:
            raise ConfigurationError("invalid configuration:\n  - " +
                                     "\n  - ".join(errors))

    return RunConfig(
        grid_n=int(n), spacing=float(spacing), window=float(window),
        optics=optics, objective=objective, seed=int(raw.get("seed", 0)),
        raw=raw, allow_large=bool(raw.get("allow_large", False)),
        snapshot_every=int(raw.get("snapshot_every", 0)),
        kernel_budget=raw.get("kernel_budget"),
    )


def _build_objective(obj_raw, n, spacing, support_radius, errors):
    half = (n - 1) / 2.0 * spacing
    reg_raw = obj_raw.get("region", {})
    kind = reg_raw.get("kind", "disk")
    try:
        if kind == "disk":
            radius = reg_raw.get("radius",
                                 support_radius if support_radius else half)
            region = Region(kind="disk",
                            center=tuple(reg_raw.get("center", (0.0, 0.0))),
                            radius=float(radius),
                            collar_cells=int(reg_raw.get("collar_cells", 1)))
        else:
            hw = reg_raw.get("halfwidth", (half, half))
            region = Region(kind="rect",
                            center=tuple(reg_raw.get("center", (0.0, 0.0))),
                            halfwidth=(float(hw[0]), float(hw[1])),
                            collar_cells=int(reg_raw.get("collar_cells", 1)))
        well = DoubleWellSpec.default(region, p=float(obj_raw.get("p", 2.0)))
        return ObjectiveConfig(
            well=well,
            weight=float(obj_raw.get("weight", 0.02)),
            eps_schedule=tuple(float(e) for e in obj_raw["eps_schedule"]),
            eta0=obj_raw.get("eta0"),
            kappa=obj_raw.get("kappa"),
            step0=float(obj_raw.get("step0", 1.0)),
            shrink=float(obj_raw.get("shrink", 0.5)),
            grow=float(obj_raw.get("grow", 1.3)),
            max_iter=int(obj_raw.get("max_iter", 200)),
            max_backtracks=int(obj_raw.get("max_backtracks", 30)),
            tol=float(obj_raw.get("tol", 1e-6)),
        )
    except (KeyError, TypeError, ValueError, ConfigurationError, DomainError) as exc:
        errors.append(f"objective section invalid: {exc}")
        return None


def _config_hash(cfg: RunConfig) -> str:
    return hash_json(cfg.raw)


def _write_manifest(out: Path, command: str, cfg_raw: dict,
                    inputs: dict, outputs: list[str], extra: dict | None = None):
    manifest = {
        "command": command,
        "config": cfg_raw,
        "config_hash": hash_json(cfg_raw),
        "inputs": inputs,
        "outputs": sorted(outputs),
        "version": __version__,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _read_mask_on_grid(path, cfg: RunConfig) -> ScalarField:
    f = read_mask(path, spacing=cfg.spacing, origin=cfg.origin)
    if f.values.shape != (cfg.grid_n, cfg.grid_n):
        raise GridMismatchError(
            f"mask grid {f.values.shape} != configured {cfg.grid_n}^2")
    vals = np.clip(f.values, 0.0, 1.0)
    return ScalarField(vals, cfg.spacing, cfg.origin)


# ---------------------------------------------------------------------------
# subcommands

def cmd_forward(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask = _read_mask_on_grid(args.mask, cfg)
    intensity = hopkins_intensity(mask, cfg.optics, allow_large=cfg.allow_large)
    pattern = exposed_set(intensity, cfg.optics.threshold)
    chash = _config_hash(cfg)
    write_field_pgm(intensity, out / "intensity.pgm", {"config_hash": chash})
    write_field_csv(intensity, out / "intensity.csv")
    write_pattern_pgm(pattern, out / "exposure.pgm", {"config_hash": chash})
    write_contours_json(pattern, out / "exposure_contours.json",
                        level=cfg.optics.threshold)
    _write_manifest(out, "forward", cfg.raw,
                    {str(args.mask): hash_file(args.mask)},
                    ["intensity.pgm", "intensity.csv", "exposure.pgm",
                     "exposure_contours.json"],
                    {"seed": args.seed})
    return EXIT_OK


def cmd_invert(args) -> int:
    cfg = load_config(args.config, need_objective=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target_field = _read_mask_on_grid(args.target, cfg)
    target = BinaryPattern.from_bitmap(target_field.values > 0.5,
                                       cfg.spacing, cfg.origin)
    trace = gamma_sweep(target, cfg.optics, cfg.objective,
                        allow_large=cfg.allow_large)
    chash = _config_hash(cfg)
    write_field_pgm(trace.final_mask, out / "mask.pgm", {"config_hash": chash})
    write_pattern_pgm(trace.final_binary, out / "mask_binary.pgm",
                      {"config_hash": chash})
    rows = ["eps,f_eps,d_eta,p_eps,l1_step,iterations,stalled"]
    for r in trace.records:
        rows.append(
            f"{r.eps:.17g},{r.f_eps:.17g},{r.d_eta:.17g},{r.p_eps:.17g},"
            f"{r.l1_step:.17g},{r.iterations},{int(r.stalled)}")
    (out / "sweep.csv").write_text("\n".join(rows) + "\n")
    (out / "report.csv").write_text(
        DistanceReport.csv_header() + "\n" + trace.report.csv_row() + "\n")
    _write_manifest(out, "invert", cfg.raw,
                    {str(args.target): hash_file(args.target)},
                    ["mask.pgm", "mask_binary.pgm", "sweep.csv", "report.csv"],
                    {"seed": args.seed, "stalled": trace.stalled,
                     "f_zero": format_energy(trace.f_zero),
                     "bound_constant": trace.bound_constant})
    if trace.stalled:
        print("warning: line search stalled in at least one stage",
              file=sys.stderr)
        return EXIT_STALL
    return EXIT_OK


def _read_pattern(path, cfg: RunConfig | None) -> BinaryPattern:
    if cfg is not None:
        f = _read_mask_on_grid(path, cfg)
    else:
        f = read_mask(path)
    return BinaryPattern.from_bitmap(f.values > 0.5, f.spacing, f.origin)


def cmd_metrics(args) -> int:
    cfg = load_config(args.config) if args.config else None
    a = _read_pattern(args.pattern_a, cfg)
    b = _read_pattern(args.pattern_b, cfg)
    report = strict_distance(a, b)
    text = DistanceReport.csv_header() + "\n" + report.csv_row() + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(text)
        _write_manifest(out, "metrics", cfg.raw if cfg else {},
                        {str(args.pattern_a): hash_file(args.pattern_a),
                         str(args.pattern_b): hash_file(args.pattern_b)},
                        ["metrics.csv"], {"seed": args.seed})
    return EXIT_OK


def cmd_kernel_build(args) -> int:
    deviation = args.deviation
    budget = None
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        deviation = raw.get("optics", {}).get("deviation", deviation)
        budget = raw.get("kernel_budget")
    if deviation is None:
        deviation = 0.05
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = {"kind": "smoothed_psf", "deviation": deviation, "budget": budget}
    tag = hash_json(params)[:12]
    header_path = out / f"smoothed_psf_{tag}.json"
    profile_path = out / f"smoothed_psf_{tag}.csv"
    if header_path.exists() and profile_path.exists():
        existing = json.loads(header_path.read_text())
        if existing.get("params_hash") == hash_json(params):
            print(f"cache hit: {header_path.name}")
            return EXIT_OK
    kern = build_smoothed_psf(float(deviation), max_candidates=budget)
    header = {
        "kind": "smoothed_psf",
        "params_hash": hash_json(params),
        "target_deviation": deviation,
        "achieved_deviation": kern.spec.deviation,
        "s0": kern.spec.s0,
        "b": kern.spec.b,
        "mass": kern.mass,
    }
    header_path.write_text(json.dumps(header, sort_keys=True, indent=1) + "\n")
    lines = ["radius,value"]
    lines += [f"{r:.17g},{v:.17g}" for r, v in zip(kern.radii, kern.profile)]
    profile_path.write_text("\n".join(lines) + "\n")
    print(f"built {header_path.name}: s0={kern.spec.s0} b={kern.spec.b} "
          f"deviation={kern.spec.deviation:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lithomask",
        description="photolithography forward simulation and mask inversion")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("forward", parents=[common],
                       help="simulate intensity and exposure for a mask")
    p.add_argument("mask")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("invert", parents=[common],
                       help="recover a mask for a target pattern")
    p.add_argument("target")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("metrics", parents=[common],
                       help="distance report between two patterns")
    p.add_argument("pattern_a")
    p.add_argument("pattern_b")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("kernel-build", parents=[common],
                       help="construct and cache the smoothed PSF")
    p.add_argument("--deviation", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_kernel_build)
    return parser


def _apply_threads(threads):
    if threads is None:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(threads)
    except ImportError:
        print("warning: threadpoolctl unavailable; --threads ignored",
              file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    try:
        return args.func(args)
    except ConstructionFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (ConfigurationError, DomainError, ResourceError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LithomaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
