"""Command-line front end.

Subcommands: ``estimate``, ``variance``, ``stratified``, ``enumerate`` and
``simulate``. Settings may come from an INI config file (``--config``),
with keys taken from a ``[defaults]`` section and a section named after the
subcommand; command-line flags override the file, which overrides built-in
defaults. Failures print one line ``error: <code>: <message>`` on stderr
and exit nonzero.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import sys
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .calibrate import (
    CalibrationSpec,
    ConstraintMode,
    greg_weights,
    lr_weights,
)
from .design import DesignSample, read_population, read_rows
from .errors import ConfigError, ParseError, SurveyError
from .experiment import (
    DegeneratePolicy,
    Transformation,
    apply_transformation,
    default_workers,
    exact_enumeration_re,
    format_number,
    population_correlation,
    simulate_grid,
    write_reports,
)
from .stratified import (
    calibrated_combined_variance,
    combined_lr_mean,
    combined_lr_variance,
    combined_regression_slope,
    read_stratified,
    shy_calibrated_mean,
    stratified_mean,
)
from .variance import (
    calibrated_lr_variance,
    das_tripathi_variance,
    ds_variance_estimate,
    raw_y_residuals,
    residuals_through_origin,
    residuals_with_intercept,
    singh_horn_yu_variance,
    syg_variance_estimate,
)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).replace(";", ",").split(",") if v.strip()]


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Option:
    name: str
    type: Callable[[str], Any] = str
    default: Any = None
    help: str = ""
    choices: Sequence[str] | None = None
    required: bool = False
    flag: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


COMMON = [
    Option("output", help="write the report here instead of stdout"),
    Option("delimiter", default=",", help="field delimiter for input and output"),
    Option("format", default="machine", choices=("machine", "human"),
           help="machine: 17 significant digits; human: 2 decimals"),
]

SAMPLE = [
    Option("input", required=True, help="sample file with columns y, x"),
    Option("population-size", type=int, help="population size N (default: census, N = n)"),
    Option("n", type=int, help="expected sample size (checked against the input)"),
]

SUBCOMMANDS: dict[str, list[Option]] = {
    "estimate": SAMPLE + [
        Option("method", default="greg", choices=("ht", "greg", "lr")),
        Option("q", default="1", help="tuning weight: a number or a file with one value per unit"),
        Option("aux-total", type=float, help="known population total X of x"),
    ],
    "variance": SAMPLE + [
        Option("method", default="syg", choices=("syg", "ds", "shy", "calibrated", "das-tripathi")),
        Option("q", default="1", help="tuning weight: a number or a file with one value per unit"),
        Option("aux-total", type=float, help="known population total X of x"),
        Option("z", default="y", choices=("y", "x"), help="variable for --method syg"),
        Option("qij", type=float, default=1.0, help="uniform pair tuning weight"),
        Option("known-v", type=float, help="known variance of the HT estimator of the x total"),
        Option("pop-x-variance", type=float, help="known population variance S_x^2 of x"),
        Option("raw-y", type=_flag, default=False, flag=True,
               help="use design weights and raw y in place of calibrated weights and residuals"),
    ],
    "stratified": [
        Option("input", required=True, help="file with columns stratum, y, x"),
        Option("sizes", required=True, help="INI file with a [sizes] section: label = N_h"),
        Option("q", type=float, default=1.0, help="uniform stratum tuning weight"),
        Option("xbar", type=float, required=True, help="known population mean of x"),
        Option("variance", type=_flag, default=False, flag=True, help="also estimate variances"),
        Option("known-vx", type=float, help="known variance of the stratified x mean"),
        Option("b-st", type=float, help="override the pooled residual slope"),
    ],
    "enumerate": [
        Option("input", required=True, help="population file with columns y, x"),
        Option("n", type=int, required=True),
        Option("transform", default="id:y", help="{id|sqrt|log}:{y|x}"),
        Option("policy", default="skip", choices=("skip", "fallback")),
        Option("cap", type=int, default=10**8, help="maximum number of samples"),
        Option("workers", type=int, help="parallel partitions (default: CALWEIGHT_WORKERS or cores)"),
    ],
    "simulate": [
        Option("rho", type=_float_list, default=[0.1, 0.3, 0.5, 0.7, 0.9]),
        Option("n", type=_int_list, default=[25, 50, 75, 100]),
        Option("replicates", type=int, default=15000),
        Option("seed", type=int, default=13031963),
        Option("sy2", type=float, default=50.0),
        Option("sx2", type=float, default=50.0),
        Option("mu-y", type=float, default=100.0),
        Option("mu-x", type=float, default=90.0),
        Option("policy", default="skip", choices=("skip", "fallback")),
        Option("workers", type=int, help="parallel partitions (default: CALWEIGHT_WORKERS or cores)"),
    ],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one machine-readable line instead of usage text
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="calweight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, options in SUBCOMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS, help="INI config file")
        for opt in options + COMMON:
            kwargs: dict[str, Any] = {"dest": opt.dest, "default": argparse.SUPPRESS,
                                      "help": opt.help}
            if opt.flag:
                kwargs["action"] = "store_const"
                kwargs["const"] = True
            else:
                kwargs["type"] = opt.type
                if opt.choices:
                    kwargs["choices"] = opt.choices
            p.add_argument(f"--{opt.name}", **kwargs)
    return parser


def resolve_config(command: str, cli: dict[str, Any]) -> dict[str, Any]:
    """Merge built-in defaults, the config file and command-line values."""
    options = {o.dest: o for o in SUBCOMMANDS[command] + COMMON}
    values = {dest: o.default for dest, o in options.items()}
    path = cli.pop("config", None)
    if path:
        cp = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {str(exc).splitlines()[0]}") from None
        for section in ("defaults", command):
            if not cp.has_section(section):
                continue
            for key, raw in cp.items(section):
                dest = key.replace("-", "_")
                if dest not in options:
                    raise ConfigError(f"unknown key {key!r} in [{section}] of {path}")
                opt = options[dest]
                try:
                    value = opt.type(raw)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {key!r} in {path}: {exc}") from None
                if opt.choices and value not in opt.choices:
                    raise ConfigError(f"{key!r} must be one of {', '.join(opt.choices)}")
                values[dest] = value
        unknown = set(cp.sections()) - {"defaults", *SUBCOMMANDS}
        if unknown:
            raise ConfigError(f"unknown section(s) in {path}: {', '.join(sorted(unknown))}")
    values.update(cli)
    missing = [f"--{o.name}" for o in options.values() if o.required and values.get(o.dest) is None]
    if missing:
        raise ConfigError(f"{command}: missing required {', '.join(missing)}")
    return values


# -- subcommand bodies -----------------------------------------------------------


def _table(rows: list[tuple[str, Any]], cfg: dict) -> str:
    human = cfg["format"] == "human"
    out = io.StringIO()
    out.write(cfg["delimiter"].join(name for name, _ in rows) + "\n")
    cells = []
    for _, v in rows:
        cells.append(format_number(v, human) if isinstance(v, float) else str(v))
    out.write(cfg["delimiter"].join(cells) + "\n")
    return out.getvalue()


def _load_sample(cfg: dict) -> DesignSample:
    rows = np.array(read_rows(cfg["input"], 2, cfg["delimiter"]), dtype=float)
    n = rows.shape[0]
    if cfg.get("n") is not None and cfg["n"] != n:
        raise ConfigError(f"--n {cfg['n']} does not match the {n} rows in {cfg['input']}")
    N = cfg.get("population_size") or n
    if N < n:
        raise ConfigError(f"--population-size {N} is smaller than the sample size {n}")
    pi = n / N
    pij = n * (n - 1) / (N * (N - 1))
    return DesignSample(np.arange(n), rows[:, 0], rows[:, 1], np.full(n, pi), np.full((n, n), pij))


def _q_values(text: str, n: int, delimiter: str) -> tuple[float, ...]:
    try:
        return (float(text),) * n
    except ValueError:
        pass
    q = [r[0] for r in read_rows(text, 1, delimiter)]
    if len(q) != n:
        raise ConfigError(f"q file {text} has {len(q)} values, sample has {n} units")
    return tuple(q)


def _need(cfg: dict, key: str, why: str) -> Any:
    if cfg.get(key) is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required {why}")
    return cfg[key]


def cmd_estimate(cfg: dict) -> str:
    s = _load_sample(cfg)
    method = cfg["method"]
    rows: list[tuple[str, Any]] = [("method", method), ("n", s.n),
                                   ("N", int(round(float(np.sum(s.d)))))]
    if method == "ht":
        total = float(np.dot(s.d, s.y))
        return _table(rows + [("total", total), ("slope", math.nan)], cfg)
    X = _need(cfg, "aux_total", f"for --method {method}")
    q = _q_values(cfg["q"], s.n, cfg["delimiter"])
    if method == "greg":
        cw = greg_weights(s, CalibrationSpec(X, q, ConstraintMode.AUX_ONLY))
    else:
        cw = lr_weights(s, CalibrationSpec(X, q, ConstraintMode.AUX_AND_WEIGHT_SUM))
    return _table(rows + [("total", float(np.dot(cw.w, s.y))), ("slope", cw.slope),
                          ("weight_sum", float(cw.w.sum())),
                          ("negative_weights", cw.negative_count)], cfg)


def cmd_variance(cfg: dict) -> str:
    s = _load_sample(cfg)
    method = cfg["method"]
    rows: list[tuple[str, Any]] = [("method", method), ("n", s.n)]
    extra: list[tuple[str, Any]] = []
    if method == "syg":
        z = s.y if cfg["z"] == "y" else s.x
        value = syg_variance_estimate(s, z)
    elif method == "das-tripathi":
        value = das_tripathi_variance(s, _need(cfg, "pop_x_variance", "for das-tripathi"))
    else:
        q = _q_values(cfg["q"], s.n, cfg["delimiter"])
        if method == "ds":
            X = _need(cfg, "aux_total", "for --method ds")
            cw = greg_weights(s, CalibrationSpec(X, q, ConstraintMode.AUX_ONLY))
            value = ds_variance_estimate(s, cw, residuals_through_origin(s, q))
        else:
            if cfg["raw_y"]:
                w, e = s.d, raw_y_residuals(s)
            else:
                X = _need(cfg, "aux_total", f"for --method {method}")
                w = lr_weights(s, CalibrationSpec(X, q, ConstraintMode.AUX_AND_WEIGHT_SUM))
                e = residuals_with_intercept(s, q)
            if method == "shy":
                value = singh_horn_yu_variance(s, w, e)
            else:
                known = cfg.get("known_v")
                if known is None:
                    Sx2 = _need(cfg, "pop_x_variance", "(or --known-v) for --method calibrated")
                    N = float(np.sum(s.d))
                    known = N * N * (1.0 - s.n / N) / s.n * Sx2
                value, b2 = calibrated_lr_variance(s, w, e, cfg["qij"], known)
                extra = [("known_v", float(known)), ("B2", b2)]
    return _table(rows + [("estimate", value)] + extra, cfg)


def cmd_stratified(cfg: dict) -> str:
    s = read_stratified(cfg["input"], cfg["sizes"], cfg["delimiter"])
    xbar = cfg["xbar"]
    mean, calib = combined_lr_mean(s, cfg["q"], xbar)
    rows: list[tuple[str, Any]] = [
        ("strata", s.L),
        ("stratified_mean", stratified_mean(s)),
        ("shy_mean", shy_calibrated_mean(s, cfg["q"], xbar)),
        ("combined_lr_mean", mean),
        ("beta_st", calib.beta_st),
    ]
    if cfg["variance"]:
        b_st = cfg.get("b_st")
        b_st = combined_regression_slope(s) if b_st is None else b_st
        rows += [("b_st", b_st), ("combined_lr_variance", combined_lr_variance(s, calib, b_st))]
        if cfg.get("known_vx") is not None:
            est, B = calibrated_combined_variance(s, calib, b_st, cfg["q"], cfg["known_vx"])
            rows += [("calibrated_variance", est), ("B_st", B)]
    return _table(rows, cfg)


def _workers(cfg: dict) -> int:
    w = cfg.get("workers")
    if w is None:
        return default_workers()
    if w < 1:
        raise ConfigError("--workers must be at least 1")
    return w


def cmd_enumerate(cfg: dict) -> str:
    pop = read_population(cfg["input"], cfg["delimiter"])
    t = Transformation.parse(cfg["transform"])
    tpop = apply_transformation(pop, t)
    report = exact_enumeration_re(tpop, cfg["n"], policy=DegeneratePolicy(cfg["policy"]),
                                  cap=cfg["cap"], workers=_workers(cfg), label=t.label)
    out = io.StringIO()
    write_reports([report], out, cfg["delimiter"], human=cfg["format"] == "human")
    rho = format_number(population_correlation(tpop), cfg["format"] == "human")
    return out.getvalue() + f"# rho_xy{cfg['delimiter']}{rho}\n"


def cmd_simulate(cfg: dict) -> str:
    reports = simulate_grid(cfg["rho"], cfg["n"], replicates=cfg["replicates"], seed=cfg["seed"],
                            workers=_workers(cfg), policy=DegeneratePolicy(cfg["policy"]),
                            Sy2=cfg["sy2"], Sx2=cfg["sx2"], mu_y=cfg["mu_y"], mu_x=cfg["mu_x"])
    out = io.StringIO()
    write_reports(reports, out, cfg["delimiter"], human=cfg["format"] == "human")
    return out.getvalue()


COMMANDS = {
    "estimate": cmd_estimate,
    "variance": cmd_variance,
    "stratified": cmd_stratified,
    "enumerate": cmd_enumerate,
    "simulate": cmd_simulate,
}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Execute one command; returns the process exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise ConfigError("no subcommand given (estimate, variance, stratified, enumerate, simulate)")
        cli = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = resolve_config(ns.command, cli)
        text = COMMANDS[ns.command](cfg)
        if cfg.get("output"):
            with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            stdout.write(text)
    except SurveyError as exc:
        stderr.write(f"error: {exc.tag}: {_one_line(exc)}\n")
        return 2 if isinstance(exc, (ConfigError, ParseError)) else 1
    except OSError as exc:
        stderr.write(f"error: io: {_one_line(exc)}\n")
        return 1
    return 0


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
