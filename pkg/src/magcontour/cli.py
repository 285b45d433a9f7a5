"""Command-line entry point: ``magcontour <subcommand> [options]``.

Exit status 0 on success, 1 when a computation fails, 2 on usage errors.
Every output file starts with a header carrying the tool version and the
SHA-256 of the canonical run configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .errors import NumericalError

SUBCOMMANDS = ("constants", "curve", "geometry", "band", "quantize", "predict", "validate")
DEFAULT_SURFACE = "ellipsoid"
SIG_DIGITS = 12


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    surface: object = DEFAULT_SURFACE
    resolution: int = 4000
    samples: int = 256
    epsilon: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    h: list = field(default_factory=lambda: [1e-2, 1e-3, 1e-4])
    n_max: int = 4
    quantize_points: int = 256
    out: str = "."
    deterministic: bool = True

    def validate(self):
        if self.resolution < 100 or self.samples < 16 or self.n_max < 1:
            raise UsageError("resolution >= 100, samples >= 16 and nmax >= 1 are required")
        for name in ("epsilon", "h"):
            values = getattr(self, name)
            if not values:
                raise UsageError(f"{name} list is empty")
            if any(not (isinstance(v, (int, float)) and v > 0) for v in values):
                raise UsageError(f"{name} values must be positive numbers")
            setattr(self, name, sorted((float(v) for v in values), reverse=True))
        if any(h >= 1 for h in self.h):
            raise UsageError("h values must lie in (0, 1)")
        if any(e > 0.3 for e in self.epsilon):
            raise UsageError("epsilon values must lie in (0, 0.3]")

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "out"}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _round(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return [_round(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    return x


class Writer:
    def __init__(self, config: RunConfig, command: str):
        self.config, self.command = config, command
        self.digest = config.digest()
        os.makedirs(config.out, exist_ok=True)
        self.written: list[str] = []

    def _path(self, name):
        path = os.path.join(self.config.out, name)
        self.written.append(path)
        return path

    def json(self, name: str, payload: dict):
        doc = {"_meta": {"tool": "magcontour", "version": __version__, "command": self.command,
                         "config_sha256": self.digest}}
        doc.update(_round(payload))
        with open(self._path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=False)
            fh.write("\n")

    def csv(self, name: str, columns, rows, notes=()):
        with open(self._path(name), "w", newline="") as fh:
            fh.write(f"# magcontour {__version__} {self.command}\n")
            fh.write(f"# config_sha256 {self.digest}\n")
            for note in notes:
                fh.write(f"# {note}\n")
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(columns)
            for row in rows:
                out.writerow([f"{v + 0.0:.{SIG_DIGITS}g}" if isinstance(v, (float, np.floating)) else v
                              for v in row])


def _surface(config: RunConfig):
    from .surfaces import surface_from_spec

    try:
        return surface_from_spec(config.surface)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad surface spec: {exc}") from exc


def _constants(config):
    from .model_operators import default_constants

    return default_constants(config.resolution)


def _frame(config, consts):
    from .geometry import gamma_frame

    return gamma_frame(_surface(config), config.samples, constants=consts)


def cmd_constants(config, w: Writer):
    consts = _constants(config)
    w.json("constants.json", {"resolution": config.resolution, **consts.as_dict()})


def cmd_curve(config, w: Writer):
    from .model_operators import SpectralCurve

    dg = SpectralCurve("de_gennes", config.resolution)
    mg = SpectralCurve("montgomery", config.resolution)
    xs = np.round(np.arange(-40, 121) * 0.025, 10)
    w.csv("curve.csv", ["xi", "mu_de_gennes", "mu_montgomery"],
          ([x, dg(x), mg(x)] for x in xs))


def cmd_geometry(config, w: Writer):
    from .geometry import mean_circulation, verify_assumptions

    consts = _constants(config)
    surface = _surface(config)
    frame = _frame(config, consts)
    cols, data = frame.rows()
    w.csv("geometry.csv", list(cols), data.tolist())
    report = verify_assumptions(frame)
    summary = {"surface": surface.to_spec(), "L": frame.half_length, "length": frame.period,
               "s_min": report.s_min, "K_min": report.K_min, "assumptions_report": report.as_dict()}
    if surface.z_symmetric:
        summary["mean_circulation"] = mean_circulation(surface)
    w.json("geometry.json", summary)


def _analysis(frame, consts):
    from .geometry import verify_assumptions
    from .reduced_operators import minimize_band

    report = verify_assumptions(frame)
    unique = report.K_unique_nondegenerate_min
    return minimize_band(frame, consts, require_unique=unique), unique


def cmd_band(config, w: Writer):
    from .reduced_operators import BandFunction

    consts = _constants(config)
    frame = _frame(config, consts)
    an, unique = _analysis(frame, consts)
    band = BandFunction.from_frame(frame, consts)
    s = frame.period * np.arange(64) / 64
    sigma = an.sigma_min + np.linspace(-1.0, 1.0, 41) * max(1.0, 2 * an.sigma_min)
    values = band(s[:, None], sigma[None, :])
    w.csv("band.csv", ["s", "sigma", "b"],
          ([s[i], sigma[j], values[i, j]] for i in range(s.size) for j in range(sigma.size)))
    doc = an.as_dict()
    doc["unique_minimum"] = unique
    if not unique:
        doc["warning"] = "K has several global minima on Gamma: the first one is reported"
    w.json("band.json", doc)


def cmd_quantize(config, w: Writer):
    from .reduced_operators import harmonic_levels, quantize_band

    consts = _constants(config)
    frame = _frame(config, consts)
    an, unique = _analysis(frame, consts)
    runs = []
    for eps in config.epsilon:
        q = quantize_band(frame, consts, eps, config.quantize_points)
        k = config.n_max
        runs.append({"epsilon": eps, "eigenvalues": q.eigenvalues[:k],
                     "harmonic_levels": [harmonic_levels(an, eps, n) for n in range(1, k + 1)],
                     "asymmetry_before_symmetrization": q.asymmetry})
    w.json("quantize.json", {"num_points": config.quantize_points, "b_min": an.b_min,
                             "sqrt_det_hess": an.harmonic_gap_coefficient,
                             "unique_minimum": unique, "runs": runs,
                             "note": "levels exclude the unknown subprincipal shifts"})


def cmd_predict(config, w: Writer):
    from .asymptotics import UNKNOWN_TERMS, eigenfunction_profile, predict_eigenvalue

    consts = _constants(config)
    frame = _frame(config, consts)
    an, _ = _analysis(frame, consts)
    rows = []
    for h in config.h:
        for n in range(1, config.n_max + 1):
            p = predict_eigenvalue(n, h, consts, frame, an)
            rows.append([n, h, p.term_h, p.term_h43, p.term_h53, p.gap_to_next])
    w.csv("predict.csv", ["n", "h", "term_h", "term_h43", "term_h53", "gap"], rows,
          notes=[f"true levels {UNKNOWN_TERMS}"])
    h = config.h[-1]
    for n in range(1, min(config.n_max, 10) + 1):
        prof = eigenfunction_profile(n, h, consts, frame, an)
        rows = [[axis, x, v] for axis, fac in (("t", prof.t), ("r", prof.r), ("s", prof.s))
                for x, v in zip(fac.grid, fac.values)]
        header = json.dumps(_round({"n": n, "h": h, "s_min": prof.s_min,
                                    "shape": [prof.t.grid.size, prof.r.grid.size, prof.s.grid.size],
                                    "hermite_scale": prof.hermite_scale,
                                    "hermite_scale_full_hessian": prof.hermite_scale_full,
                                    "values": "outer product of the t, r and s factors"}))
        w.csv(f"profile_n{n}.csv", ["axis", "coordinate", "value"], rows, notes=[header])


def cmd_validate(config, w: Writer):
    from .validation import run_validation

    checks = run_validation(_surface(config), config.resolution, config.samples,
                            progress=lambda m: print(f"[validate] {m}", file=sys.stderr))
    cols = ["module", "check", "status", "value", "tolerance", "detail"]
    rows = [c.row() for c in checks]
    widths = [max(len(str(r[i])) for r in rows + [cols]) for i in range(len(cols))]
    for r in [cols] + rows:
        print("  ".join(str(v).ljust(wd) for v, wd in zip(r, widths)).rstrip())
    w.csv("validate.csv", cols, rows)
    failed = [c for c in checks if c.status == "fail"]
    counts = {s: sum(c.status == s for c in checks) for s in ("pass", "fail", "skip")}
    print(f"{counts['pass']} passed, {counts['fail']} failed, {counts['skip']} skipped")
    return 1 if failed else 0


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _surface_arg(text: str):
    if os.path.isfile(text):
        with open(text) as fh:
            return json.load(fh)
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"bad surface JSON: {exc}") from exc
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magcontour", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"magcontour {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface", type=_surface_arg,
                        help="preset name (sphere, ellipsoid, egg, tilted), JSON spec or JSON file")
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--resolution", type=int, help="grid intervals for the model operators")
    common.add_argument("--epsilon", type=_float_list, help="comma-separated epsilon values")
    common.add_argument("--h", type=_float_list, help="comma-separated semiclassical h values")
    common.add_argument("--nmax", type=int, help="number of levels")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    return parser


def load_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if "h_list" in data:
            data["h"] = data.pop("h_list")
        unknown = set(data) - set(asdict(config))
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for k, v in data.items():
            setattr(config, k, v)
    overrides = {"surface": args.surface, "out": args.out, "resolution": args.resolution,
                 "epsilon": args.epsilon, "h": args.h, "n_max": args.nmax}
    for k, v in overrides.items():
        if v is not None:
            setattr(config, k, v)
    config.validate()
    return config


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
        writer = Writer(config, args.command)
        _surface(config)
        status = COMMANDS[args.command](config, writer) or 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"magcontour: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ValueError, ArithmeticError) as exc:
        print(f"magcontour: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in writer.written:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
