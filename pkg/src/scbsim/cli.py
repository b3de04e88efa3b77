"""Command-line interface: feasibility | table2 | simulate | analytic | validate | dump.

Exit codes: 0 ok, 2 config error, 3 golden-table mismatch, 4 output I/O
error, 5 closed-form assumption violated at some sweep point, 6 validation
check failed.

All numeric CSV fields use repr() formatting ('.' decimal separator, no
locale), so a fixed seed yields byte-identical files for any --threads.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import beamforming as bf
from . import montecarlo as mc
from . import validation
from .analytics import (
    ClosedFormInputs,
    InfeasibleRatesError,
    er_user_K,
    op_closed_form,
    op_oma,
)
from .channel import draw_realization
from .montecarlo import METRICS, SweepSpec
from .pathloss import (
    TABLE2_GOLDEN,
    compute_gains,
    diffuse_applicability_warning,
    min_ris_power_bound,
    min_ris_overall,
    solvability_bound,
    table2,
)
from .scenario import (
    AGGREGATE,
    ANOMALOUS,
    DIFFUSE,
    PER_SYMBOL,
    ConfigError,
    fingerprint,
    load_config,
)

CSV_HEADER = ("sweep_var,sweep_value,cluster,user,metric,estimate,stderr,"
              "trials,mode,cancellation_mode,scenario,config_fingerprint")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GOLDEN = 3
EXIT_IO = 4
EXIT_ASSUMPTION = 5
EXIT_VALIDATION = 6


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_row(sweep_var, sweep_value, m, k, metric, estimate, stderr, trials,
            cfg, fp):
    mode = "ideal" if cfg.resolution_bits is None else f"{cfg.resolution_bits}-bit"
    cells = (sweep_var, sweep_value, m, k, metric, estimate, stderr, trials,
             mode, cfg.cancellation_mode, cfg.ris_scenario, fp)
    return ",".join(_fmt(c) for c in cells)


def _write_lines(path, lines):
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise _OutputError(str(exc)) from exc


class _OutputError(Exception):
    pass


def _load_cfg(args):
    if not getattr(args, "config", None):
        raise ConfigError("--config PATH is required for this command")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = load_config(text)
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        updates["trials"] = args.trials
    if getattr(args, "cancellation", None):
        updates["cancellation_mode"] = args.cancellation
    if getattr(args, "scenario", None):
        updates["ris_scenario"] = args.scenario
    if getattr(args, "mode", None):
        if args.mode == "ideal":
            updates["resolution_bits"] = None
        elif args.mode.startswith("bits="):
            try:
                updates["resolution_bits"] = int(args.mode[5:])
            except ValueError:
                raise ConfigError(f"bad --mode value {args.mode!r}") from None
        else:
            raise ConfigError("--mode must be 'ideal' or 'bits=B'")
    return cfg.with_updates(**updates) if updates else cfg


def parse_sweep(text):
    """'VAR=a:b:step' or 'VAR=v1,v2,...' -> (variable, values tuple)."""
    if "=" not in text:
        raise ConfigError("--sweep expects VAR=START:STOP:STEP or VAR=v1,v2,...")
    var, _, spec = text.partition("=")
    var = var.strip()
    spec = spec.strip()
    try:
        if ":" in spec:
            parts = [float(p) for p in spec.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step == 0 or (stop - start) * step < 0:
                raise ValueError
            n = int(abs(stop - start) / abs(step) + 1e-9) + 1
            values = tuple(start + i * step for i in range(n))
        else:
            values = tuple(float(p) for p in spec.split(",") if p.strip())
        if not values:
            raise ValueError
    except ValueError:
        raise ConfigError(f"cannot parse sweep spec {spec!r}") from None
    return var, values


def _default_sweep(cfg):
    return "tx_power_dbm", (cfg.tx_power_dbm,)


# -- subcommands -------------------------------------------------------------

def cmd_table2(args):
    lines = ["scenario,alpha1,alpha2,alpha3,min_N"]
    got = []
    for scenario, a1, a2, a3, n in table2():
        got.append(n)
        lines.append(f"{scenario},{_fmt(a1)},{_fmt(a2)},{_fmt(a3)},{n}")
    _write_lines(args.out, lines)
    if not args.no_golden and tuple(got) != TABLE2_GOLDEN:
        print(f"golden mismatch: computed {tuple(got)}, expected {TABLE2_GOLDEN}",
              file=sys.stderr)
        return EXIT_GOLDEN
    return EXIT_OK


def cmd_feasibility(args):
    cfg = _load_cfg(args)
    lines = [f"scenario: {cfg.ris_scenario}, cancellation: {cfg.cancellation_mode}"]
    power_bounds = {}
    for m in range(cfg.M):
        for k in range(cfg.K):
            power_bounds[(m, k)] = min_ris_power_bound(cfg, m, k)
            lines.append(f"cluster {m} user {k}: amplitude bound N >= {power_bounds[(m, k)]}")
    rank = solvability_bound(cfg)
    overall = min_ris_overall(cfg)
    binding = "rank" if rank >= max(power_bounds.values()) else "amplitude"
    lines.append(f"rank bound ({cfg.cancellation_mode}): N >= {rank}")
    lines.append(f"overall minimal N: {overall} (binding constraint: {binding})")
    lines.append(f"configured N = {cfg.N}: "
                 + ("satisfies the bound" if cfg.N >= overall else "BELOW the bound"))
    warning = diffuse_applicability_warning(cfg)
    if warning:
        lines.append(f"warning: {warning}")
    _write_lines(args.out, lines)
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load_cfg(args)
    var, values = parse_sweep(args.sweep) if args.sweep else _default_sweep(cfg)
    metrics = tuple(m.strip() for m in args.metrics.split(",")) if args.metrics \
        else ("OP_user", "ER_user")
    sweep = SweepSpec(variable=var, values=values, metrics=metrics)
    lines = [CSV_HEADER]
    total = len(values)
    all_failures = []
    for i, value in enumerate(values):
        print(f"[{i + 1}/{total}] {var}={_fmt(value)} "
              f"({cfg.trials} trials)", file=sys.stderr, flush=True)
        rows, failures = mc.run_sweep(
            cfg, SweepSpec(variable=var, values=(value,), metrics=metrics),
            threads=args.threads, feasible_only=args.feasible_only,
        )
        all_failures.extend(failures)
        for val, r in rows:
            lines.append(csv_row(var, val, r.m, r.k, r.metric, r.estimate,
                                 r.stderr, r.trials, mc.sweep_config(cfg, var, val),
                                 r.fingerprint))
    for value, msg in all_failures:
        print(f"point {var}={_fmt(value)} failed: {msg}", file=sys.stderr)
    _write_lines(args.out, lines)
    return EXIT_OK


def cmd_analytic(args):
    cfg = _load_cfg(args)
    var, values = parse_sweep(args.sweep) if args.sweep else _default_sweep(cfg)
    metrics = tuple(m.strip() for m in args.metrics.split(",")) if args.metrics \
        else ("OP_user", "ER_user")
    allowed = ("OP_user", "OP_pair", "OP_oma", "ER_user")
    bad = [m for m in metrics if m not in allowed]
    if bad:
        raise ConfigError(f"analytic supports metrics {allowed}, got {bad}")
    lines = [CSV_HEADER]
    assumption_violated = False
    for value in values:
        point = mc.sweep_config(cfg, var, value)
        fp = fingerprint(point)

        def emit(m, k, metric, estimate):
            lines.append(csv_row(var, value, m, k, metric, estimate, 0.0, 0,
                                 point, fp))

        for metric in metrics:
            if metric == "ER_user":
                for m in range(point.M):
                    emit(m, point.K - 1, metric,
                         er_user_K(ClosedFormInputs.from_config(point, m, point.K - 1)))
            elif metric == "OP_pair":
                for m in range(point.M):
                    try:
                        pair = 1.0
                        for k in range(point.K):
                            pair *= op_closed_form(
                                ClosedFormInputs.from_config(point, m, k), k)
                        emit(m, None, metric, pair)
                    except InfeasibleRatesError:
                        assumption_violated = True
                        emit(m, None, metric + "_infeasible", 1.0)
            else:
                fn = op_closed_form if metric == "OP_user" else op_oma
                for m in range(point.M):
                    for k in range(point.K):
                        try:
                            emit(m, k, metric,
                                 fn(ClosedFormInputs.from_config(point, m, k), k))
                        except InfeasibleRatesError:
                            assumption_violated = True
                            emit(m, k, metric + "_infeasible", 1.0)
    _write_lines(args.out, lines)
    return EXIT_ASSUMPTION if assumption_violated else EXIT_OK


def cmd_validate(args):
    cfg = _load_cfg(args)
    names = [c.strip() for c in args.checks.split(",")] if args.checks else None
    scale = 0.1 if args.quick else 1.0
    print(f"validating config {fingerprint(cfg)} "
          f"(scale={scale}, threads={args.threads or 'auto'})", file=sys.stderr)
    results = validation.run_checks(cfg, names=names, scale=scale,
                                    threads=args.threads, trials=args.trials)
    failed = False
    for r in results:
        print(f"{r.status} {r.name} ({r.seconds:.1f}s): {r.detail}")
        failed |= r.status == validation.FAIL
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_dump(args):
    """Debug dump of one trial: channels, stacked system, solution, residues."""
    cfg = _load_cfg(args)
    gains = compute_gains(cfg)
    rng = mc.trial_rng(cfg.master_seed, args.trial)
    ch = draw_realization(cfg, rng)
    system = bf.build_effective_matrix(ch, gains, cfg.cancellation_mode)
    pb = bf.solve_passive(system)
    if cfg.resolution_bits is not None:
        pb = bf.quantize(pb, cfg.resolution_bits)
    lines = ["block,row,col,re,im"]

    def emit_matrix(name, mat):
        mat = np.atleast_2d(mat)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                z = complex(mat[i, j])
                lines.append(f"{name},{i},{j},{_fmt(z.real)},{_fmt(z.imag)}")

    emit_matrix("H", ch.h)
    for m in range(cfg.M):
        for k in range(cfg.K):
            emit_matrix(f"W[{m}][{k}]", ch.w[m, k])
            emit_matrix(f"G[{m}][{k}]", ch.g[m, k])
    emit_matrix("H_tilde", system.h_tilde)
    emit_matrix("B", system.b_target.reshape(-1, 1))
    emit_matrix("phi", pb.phi.reshape(-1, 1))
    for m in range(cfg.M):
        for k in range(cfg.K):
            r = bf.residue(ch, gains, pb, m, k)
            lines.append(f"residue,{m},{k},{_fmt(r)},{_fmt(0.0)}")
    _write_lines(args.out, lines)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_common(p, config_required=True):
    p.add_argument("--config", help="path to a scenario config file",
                   required=config_required)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=int, help="override montecarlo.master_seed")
    p.add_argument("--trials", type=int, help="override montecarlo.trials")
    p.add_argument("--threads", type=int, help="worker threads (results identical)")
    p.add_argument("--mode", help="ideal | bits=B (override ris.resolution_bits)")
    p.add_argument("--cancellation", choices=(AGGREGATE, PER_SYMBOL),
                   help="override ris.cancellation_mode")
    p.add_argument("--scenario", choices=(DIFFUSE, ANOMALOUS),
                   help="override ris.ris_scenario")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="scbsim",
        description="Signal-cancellation passive beamforming simulator "
                    "for RIS-aided MIMO-NOMA downlinks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table2", help="print the reference feasibility table")
    p.add_argument("--out")
    p.add_argument("--no-golden", action="store_true",
                   help="skip the golden-value regression check")
    p.set_defaults(fn=cmd_table2)

    p = sub.add_parser("feasibility", help="minimal element-count report")
    _add_common(p)
    p.set_defaults(fn=cmd_feasibility)

    p = sub.add_parser("simulate", help="Monte Carlo sweep to CSV")
    _add_common(p)
    p.add_argument("--sweep", help="VAR=START:STOP:STEP or VAR=v1,v2,...")
    p.add_argument("--metrics", help=f"comma list from {METRICS}")
    p.add_argument("--feasible-only", action="store_true",
                   help="condition estimates on amplitude-feasible trials")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("analytic", help="closed-form sweep to CSV")
    _add_common(p)
    p.add_argument("--sweep", help="VAR=START:STOP:STEP or VAR=v1,v2,...")
    p.add_argument("--metrics", help="comma list from OP_user,OP_pair,OP_oma,ER_user")
    p.set_defaults(fn=cmd_analytic)

    p = sub.add_parser("validate", help="simulation-vs-closed-form check suite")
    _add_common(p)
    p.add_argument("--checks", help="comma list of check names (default: all)")
    p.add_argument("--quick", action="store_true",
                   help="reduce trial counts 10x (tolerances unchanged)")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("dump", help="debug dump of one trial as CSV")
    _add_common(p)
    p.add_argument("--trial", type=int, default=0, help="trial index to dump")
    p.set_defaults(fn=cmd_dump)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
