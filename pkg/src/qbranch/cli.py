"""Command-line front end.

Subcommands: frequency, degree, excess-decay, bv-track, hardt-simon,
intervals, selfcheck.  Exit codes: 0 ok, 2 configuration error, 3 numeric
degeneracy, 4 internal error.  Every run validates its configuration before
any computation, computes everything in memory, and only then writes its
output files through a temporary name and an atomic rename, so a failing
run leaves no partial files.  Identical configuration and seed produce
byte-identical outputs for any --threads value: worker threads only spread
independent per-radius and per-step computations, and results are assembled
in index order.

Options may come from a flat key-value config file (one `key value` pair
per line, '#' comments) with command-line `--key value` overrides.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import ConfigError, NumericError, QBranchError
from .grids import default_grid
from .qvalue import QPoint, brute_force_metric, metric_g
from .curves import (CurveSpec, homogeneous_map, load_qfunction,
                     make_multigraph)
from .frequency import (Cutoff, frequency_limit, frequency_profile,
                        default_profile_radii)
from .blowup import (BlowupConfig, average_free_part, hardt_simon_check,
                     singularity_degree)
from .excess import excess_decay_fit, excess_table_csv
from .scaletrack import (ScaleTrackConfig, bv_budget, intervals_of_flattening,
                         universal_frequency)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INTERNAL = 4

#: worker pool size when --threads is not given; any value produces
#: byte-identical outputs
DEFAULT_THREADS = max(1, os.cpu_count() or 1)

_COMMANDS = ("frequency", "degree", "excess-decay", "bv-track",
             "hardt-simon", "intervals", "selfcheck")

#: every recognized config key with (type, validator, help)
_KEYS = {
    "curve": (str, None, "curve spec 'Q,p'"),
    "perturb": (str, None, "perturbation, e.g. 'z^2' or '0.5z^3'"),
    "homogeneous": (float, lambda v: v > 0, "homogeneity degree"),
    "input": (str, None, "QFunction file"),
    "radii": (str, None, "radius window 'A..B' (supports 2^-k)"),
    "cutoff": (str, lambda v: v in ("ramp", "paper_phi", "sharp"),
               "cutoff kind"),
    "out": (str, None, "output directory"),
    "threads": (int, lambda v: v >= 1, "worker threads"),
    "seed": (int, lambda v: v >= 0, "seed for randomized suites"),
    "eps3": (float, lambda v: 0 < v <= 1, "excess threshold eps3^2"),
    "eps-bar": (float, lambda v: 0 < v <= 1, "floor amplitude"),
    "delta2": (float, lambda v: 0 < v < 0.5, "floor exponent parameter"),
    "ce": (float, lambda v: v >= 1, "concentration budget constant"),
    "tilt-jump": (float, lambda v: v > 0, "plane drift allowance"),
    "rho": (float, lambda v: v > 0, "inner radius for hardt-simon"),
    "scale-factor": (float, lambda v: 0 < v < 1, "blow-up step ratio"),
    "max-steps": (int, lambda v: v >= 1, "blow-up step count"),
    "norm-mode": (str, lambda v: v in ("l2_norm", "excess_sqrt"),
                  "blow-up normalization"),
    "n-theta": (int, lambda v: v >= 64, "angular samples"),
    "r-min": (float, lambda v: 0 < v < 1, "grid floor radius"),
    "points-per-octave": (int, lambda v: 1 <= v <= 8, "profile density"),
    "config": (str, None, "config file path"),
}


def _parse_number(text: str) -> float:
    text = text.strip()
    if "^" in text:
        base, expo = text.split("^", 1)
        return float(base) ** float(expo)
    return float(text)


def _parse_radii(spec: str, grid) -> list:
    if ".." not in spec:
        raise ConfigError(f"radii must look like 'A..B', got {spec!r}")
    lo_s, hi_s = spec.split("..", 1)
    lo, hi = _parse_number(lo_s), _parse_number(hi_s)
    if not (0 < lo < hi):
        raise ConfigError("radii window must satisfy 0 < A < B")
    r = grid.radii
    sel = r[(r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))]
    if sel.size == 0:
        raise ConfigError("radius window contains no grid radii")
    return [float(v) for v in sel]


def _parse_perturbation(text: str):
    """Accept 'z^k', 'c z^k' products joined by '+', or a coefficient list
    'c0,c1,c2,...'."""
    text = text.strip()
    if not text:
        return ()
    if "z" not in text:
        return tuple(complex(tok) for tok in text.split(","))
    coeffs: dict[int, complex] = {}
    for term in text.replace("-", "+-").split("+"):
        term = term.strip()
        if not term:
            continue
        if "z" not in term:
            raise ConfigError(f"cannot parse perturbation term {term!r}")
        head, _, tail = term.partition("z")
        power = 1
        if tail.startswith("^"):
            power = int(tail[1:])
        elif tail:
            raise ConfigError(f"cannot parse perturbation term {term!r}")
        head = head.strip().rstrip("*").strip()
        coef = complex(head) if head not in ("", "-") else \
            (-1 + 0j if head == "-" else 1 + 0j)
        coeffs[power] = coeffs.get(power, 0j) + coef
    top = max(coeffs)
    return tuple(coeffs.get(k, 0j) for k in range(top + 1))


def _load_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key value'")
                out[parts[0]] = parts[1].strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    return out


def _coerce(options: dict) -> dict:
    out = {}
    for key, val in options.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        typ, check, _ = _KEYS[key]
        try:
            if typ is float:
                coerced = _parse_number(str(val))
            else:
                coerced = typ(val)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key!r}: {val!r}")
        if check is not None and not check(coerced):
            raise ConfigError(f"value for {key!r} out of range: {val!r}")
        out[key] = coerced
    return out


class Run:
    """Validated options plus deferred, atomic output writing."""

    def __init__(self, options: dict):
        self.opt = _coerce(options)
        self._outputs: dict[str, str] = {}

    def get(self, key, default=None):
        return self.opt.get(key, default)

    def grid(self):
        r_min = self.get("r-min", 2.0 ** -16)
        n_theta = self.get("n-theta", 512)
        n_oct = np.log2(1.0 / r_min)
        if abs(n_oct - round(n_oct)) > 1e-9:
            raise ConfigError("r-min must be a power of 1/2")
        return default_grid(r_min=r_min, n_theta=n_theta)

    def build_input(self):
        """Materialize the test object named by the options."""
        named = [k for k in ("curve", "homogeneous", "input") if k in self.opt]
        if len(named) != 1:
            raise ConfigError(
                "exactly one of curve, homogeneous, input is required")
        if "input" in self.opt:
            return load_qfunction(self.opt["input"])
        grid = self.grid()
        if "curve" in self.opt:
            try:
                q_s, p_s = self.opt["curve"].split(",")
                q, p = int(q_s), int(p_s)
            except ValueError:
                raise ConfigError("curve must look like 'Q,p'")
            coeffs = _parse_perturbation(self.get("perturb", ""))
            return make_multigraph(CurveSpec(q=q, p=p, h_coeffs=coeffs), grid)
        alpha = self.opt["homogeneous"]
        return homogeneous_map(alpha, grid=grid)

    def stage(self, filename: str, content: str):
        self._outputs[filename] = content

    def flush(self) -> list:
        out_dir = self.get("out", ".")
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for name, content in sorted(self._outputs.items()):
            final = os.path.join(out_dir, name)
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            try:
                with os.fdopen(fd, "w") as fh:
                    fh.write(content)
                os.replace(tmp, final)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            written.append(final)
        return written


# ----------------------------------------------------------------------------
# subcommands


def cmd_frequency(run: Run) -> int:
    f = run.build_input()
    cutoff = Cutoff(run.get("cutoff", "ramp"))
    if "radii" in run.opt:
        radii = _parse_radii(run.opt["radii"], f.grid)
    else:
        radii = default_profile_radii(f.grid)
    prof = frequency_profile(f, radii=radii, cutoff=cutoff,
                             threads=run.get("threads", DEFAULT_THREADS))
    lim = frequency_limit(prof)
    run.stage("frequency_profile.csv", prof.to_csv())
    run.stage("frequency_limit.json", json.dumps(lim, sort_keys=True,
                                                 indent=1) + "\n")
    run.flush()
    return EXIT_OK


def cmd_degree(run: Run) -> int:
    f = run.build_input()
    cfg = BlowupConfig(scale_factor=run.get("scale-factor", 0.5),
                       max_steps=run.get("max-steps", 14),
                       normalization=run.get("norm-mode", "l2_norm"))
    est = singularity_degree(f, cfg)
    run.stage("degree.json", est.to_json() + "\n")
    run.flush()
    return EXIT_OK


def cmd_excess_decay(run: Run) -> int:
    f = run.build_input()
    if "radii" in run.opt:
        radii = _parse_radii(run.opt["radii"], f.grid)
    else:
        radii = [2.0 ** -k for k in range(9, 2, -1)]
    fit = excess_decay_fit(f, radii)
    run.stage("excess_decay.csv", excess_table_csv(fit["records"]))
    run.stage("excess_decay.json", json.dumps(
        {k: fit[k] for k in ("exponent", "constant", "r2")},
        sort_keys=True, indent=1) + "\n")
    run.flush()
    return EXIT_OK


def _scaletrack_config(run: Run) -> ScaleTrackConfig:
    kw = {}
    if "eps3" in run.opt:
        kw["eps3_sq"] = run.opt["eps3"]
    if "eps-bar" in run.opt:
        kw["eps_bar"] = run.opt["eps-bar"]
    if "delta2" in run.opt:
        kw["delta2"] = run.opt["delta2"]
    if "ce" in run.opt:
        kw["c_e"] = run.opt["ce"]
    if "tilt-jump" in run.opt:
        kw["tilt_jump"] = run.opt["tilt-jump"]
    return ScaleTrackConfig(**kw)


def cmd_bv_track(run: Run) -> int:
    f = run.build_input()
    cfg = _scaletrack_config(run)
    intervals = intervals_of_flattening(f, cfg=cfg)
    prof = universal_frequency(
        f, intervals, points_per_octave=run.get("points-per-octave", 1))
    report = bv_budget(prof)
    run.stage("universal_profile.csv", prof.records_csv())
    run.stage("jumps.csv", prof.jumps_csv())
    run.stage("bv.json", json.dumps(report, sort_keys=True, indent=1) + "\n")
    run.flush()
    return EXIT_OK


def cmd_hardt_simon(run: Run) -> int:
    f = run.build_input()
    if f.q > 1:
        f = average_free_part(f)
    rho = run.get("rho", 64 * f.grid.r_min)
    res = hardt_simon_check(f, rho)
    run.stage("hardt_simon.json", res.to_json() + "\n")
    run.flush()
    return EXIT_OK


def cmd_intervals(run: Run) -> int:
    f = run.build_input()
    cfg = _scaletrack_config(run)
    intervals = intervals_of_flattening(f, cfg=cfg)
    run.stage("intervals.csv", intervals.to_csv())
    run.stage("intervals.json", json.dumps({
        "empty": intervals.empty,
        "gaps": intervals.gaps,
        "min_ratio": None if intervals.empty else intervals.min_ratio(),
        "reaches_floor": any(r.reaches_floor for r in intervals.intervals),
    }, sort_keys=True, indent=1) + "\n")
    run.flush()
    return EXIT_OK


def cmd_selfcheck(run: Run) -> int:
    """Run the built-in oracle suites on a reduced grid and write a
    canonical report; byte-identical for any --threads value."""
    threads = run.get("threads", DEFAULT_THREADS)
    seed = run.get("seed", 0)
    lines = [f"qbranch selfcheck v{__version__} seed={seed}"]
    ok = True

    def check(name, value, passed):
        nonlocal ok
        ok = ok and passed
        lines.append(f"{name} {value:.17g} {'PASS' if passed else 'FAIL'}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for q in (1, 2, 3, 4):
        for _ in range(200):
            a = QPoint(rng.normal(size=(q, 2)))
            b = QPoint(rng.normal(size=(q, 2)))
            worst = max(worst, abs(metric_g(a, b) - brute_force_metric(a, b)))
    check("matching_oracle_gap", worst, worst == 0.0)

    grid = default_grid(r_min=2.0 ** -10, n_theta=256)
    f = make_multigraph(CurveSpec(2, 3), grid)
    prof = frequency_profile(f, radii=default_profile_radii(grid),
                             threads=threads)
    err = max(abs(rec.I - 1.5) for rec in prof.valid_records())
    check("curve23_frequency_error", err, err < 1e-3)

    est = singularity_degree(f, BlowupConfig(max_steps=6))
    check("curve23_degree_error", abs(est.value - 1.5),
          abs(est.value - 1.5) < 0.03)

    fit = excess_decay_fit(f, [2.0 ** -k for k in range(7, 2, -1)])
    check("curve23_excess_exponent_error", abs(fit["exponent"] - 1.0),
          abs(fit["exponent"] - 1.0) < 0.1)

    intervals = intervals_of_flattening(f, cfg=ScaleTrackConfig(
        eps3_sq=0.1, r_floor=2.0 ** -8))
    uprof = universal_frequency(f, intervals)
    bv = bv_budget(uprof)
    check("curve23_bv_total", bv["total"], bv["total"] < 0.01)

    lines.append("ALL " + ("PASS" if ok else "FAIL"))
    report = "\n".join(lines) + "\n"
    run.stage("selfcheck_report.txt", report)
    run.stage("selfcheck_profile.csv", prof.to_csv())
    run.stage("selfcheck_degree.json", est.to_json() + "\n")
    run.flush()
    sys.stdout.write(report)
    return EXIT_OK if ok else EXIT_NUMERIC


_HANDLERS = {
    "frequency": cmd_frequency,
    "degree": cmd_degree,
    "excess-decay": cmd_excess_decay,
    "bv-track": cmd_bv_track,
    "hardt-simon": cmd_hardt_simon,
    "intervals": cmd_intervals,
    "selfcheck": cmd_selfcheck,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qbranch",
        description="Q-valued multigraph laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        for key, (_, _, help_text) in _KEYS.items():
            p.add_argument(f"--{key}", help=help_text)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    options = {}
    cli_options = {k.replace("_", "-"): v for k, v in vars(ns).items()
                   if k != "command" and v is not None}
    if "config" in cli_options:
        options.update(_load_config_file(cli_options["config"]))
    options.update(cli_options)
    options.pop("config", None)
    try:
        run = Run(options)
        return _HANDLERS[ns.command](run)
    except ConfigError as exc:
        sys.stderr.write(f"config-error: {exc}\n")
        return EXIT_CONFIG
    except ValueError as exc:
        sys.stderr.write(f"config-error: {exc}\n")
        return EXIT_CONFIG
    except NumericError as exc:
        sys.stderr.write(f"numeric-error: {exc.__class__.__name__}: {exc}\n")
        return EXIT_NUMERIC
    except QBranchError as exc:
        sys.stderr.write(f"internal-error: {exc}\n")
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover
        sys.stderr.write(f"internal-error: {exc!r}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
