"""Command-line front end.

    samplesum --pop pop.json --cmd {moments,approx,chf,exact,mc,tail,compare} [options]

Exit codes: 0 success, 2 bad input (spec file, flags, grid), 3 a computation
refused the input (zero variance, n = N where q > 0 is needed, ...), 4 the
exact oracle is over its state-space budget.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .charfn import ChfEvaluator
from .deviations import exact_tail_ratio, tail_model, tail_ratio
from .diagnostics import diagnostics_report
from .errors import BudgetExceeded, SampleSumError, SpecError
from .expansion import edgeworth, score_cdf_approximant
from .oracle import (
    DP_BUDGET,
    dkw_epsilon,
    ecdf_sup_distance,
    exact_distribution,
    exact_moments,
    sample_srswor,
)
from .population import load_spec, moment_summary, ratio_summary, score_summary

SCHEMA = "samplesum.report/1"
COMMANDS = ("moments", "approx", "chf", "exact", "mc", "tail", "compare")
DEFAULT_GRIDS = {"approx": "-4:4:0.5", "tail": "0:2.5:0.25", "compare": "0:2.5:0.25"}
DEFAULT_T_GRID = "0:5:0.25"

EPILOG = """\
CSV columns:
  approx   u, W_j(u) [, t, Re W_j(t), Im W_j(t) when --t-grid is given]
  chf      t, Re/Im phi_n(t) by the tau-integral, Re/Im by the von Bahr series, Re/Im W_j(t)
  exact    value, probability (values as exact decimal strings)
  tail     x, exact and approximate upper and lower tail ratios
  moments, mc, compare   key, value (nested keys joined by '.')
Every output starts with the library version and a hash of the run configuration.
"""


class GridError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``"a:b:step"`` -> ``a, a + step, ... <= b`` (inclusive up to rounding)."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise GridError(f"grid {text!r} is not of the form a:b:step") from None
    if not all(map(math.isfinite, (a, b, step))) or step <= 0:
        raise GridError(f"grid {text!r} needs finite bounds and a positive step")
    if b < a:
        raise GridError(f"grid {text!r} is empty")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="samplesum", description=__doc__.splitlines()[0],
                                 epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--pop", required=True, help="population spec (JSON)")
    ap.add_argument("--cmd", required=True, choices=COMMANDS)
    ap.add_argument("--order", type=int, default=3, help="approximant order j (1, 2, 3)")
    ap.add_argument("--delta", type=float, default=1.0, help="moment exponent in (0, 1]")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mc-count", type=int, default=0, help="Monte Carlo sample count (0 disables)")
    ap.add_argument("--grid", help="u (approx) or x (tail, compare) grid 'a:b:step'")
    ap.add_argument("--t-grid", help="t grid 'a:b:step' for ch.f. output")
    ap.add_argument("--budget", type=int, default=DP_BUDGET, help="exact-oracle state-space budget")
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    ap.add_argument("--out", help="output path (default stdout)")
    return ap


# ---------------------------------------------------------------------------
# output


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj) -> str:
    """JSON with every float at 17 significant digits; non-finite floats become null."""
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)) and any(isinstance(v, (dict, list, tuple)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}.{i}")
    else:
        yield prefix, obj


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(report) + "\n"
    lines = [f"# version={report['version']}", f"# config_hash={report['config_hash']}"]
    body = {k: v for k, v in report.items() if k not in ("version", "config_hash", "schema")}
    table = body.pop("table", None)
    if table is not None:
        cols = list(table)
        lines.append(",".join(cols))
        for row in zip(*(table[c] for c in cols)):
            lines.append(",".join(_cell(v) for v in row))
        if body:
            lines.append("")
    if body:
        lines.append("key,value")
        lines.extend(f"{k},{_cell(v)}" for k, v in _flatten(body))
    return "\n".join(lines) + "\n"


def config_hash(args: argparse.Namespace, pop_bytes: bytes) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("pop", "out")}
    if args.cmd != "mc" and args.mc_count == 0:
        cfg.pop("seed")  # the seed only matters when something is sampled
    h = hashlib.sha256()
    h.update(hashlib.sha256(pop_bytes).digest())
    h.update(json.dumps(cfg, sort_keys=True).encode())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# commands


def _columns(**cols) -> dict:
    return {k: [float(x) for x in v] for k, v in cols.items()}


def cmd_moments(pop, design, args) -> dict:
    s = moment_summary(pop, design)
    r = ratio_summary(pop, design, args.delta)
    out = {"moments": s.as_dict(), "ratios": r.as_dict()}
    if pop.is_score:
        sc = score_summary(pop)
        out["scores"] = {"abar": sc.abar, "b2": sc.b2, "A3": sc.A3, "A4": sc.A4, "B3": sc.B3}
    return out


def cmd_approx(pop, design, args) -> dict:
    s = moment_summary(pop, design)
    u = parse_grid(args.grid or DEFAULT_GRIDS["approx"])
    ap = edgeworth(s, args.order)
    table = {"u": u, f"W{args.order}": ap.cdf(u)}
    out = {"order": args.order}
    if args.order == 3 and pop.is_score:
        table["score_closed_form"] = score_cdf_approximant(pop, design)(u)
    if args.t_grid:
        t = parse_grid(args.t_grid)
        w = ap.chf(t)
        out["chf"] = {"t": t.tolist(), "re": w.real.tolist(), "im": w.imag.tolist()}
    out["table"] = _columns(**table)
    return out


def cmd_chf(pop, design, args) -> dict:
    t = parse_grid(args.t_grid or args.grid or DEFAULT_T_GRID)
    ev = ChfEvaluator(pop, design)
    phi = ev.phi_n(t)
    vb = ev.phi_vonbahr(t)
    w = edgeworth(ev.summary, args.order).chf(t)
    return {"order": args.order, "theta0": ev.theta0,
            "table": _columns(t=t, phi_re=phi.real, phi_im=phi.imag, vonbahr_re=vb.real,
                              vonbahr_im=vb.imag, W_re=w.real, W_im=w.imag)}


def cmd_exact(pop, design, args) -> dict:
    ex = exact_distribution(pop, design, args.budget)
    v, w = ex.atoms()
    out = {"mean": ex.mean(), "variance": exact_moments(ex, 2), "third_central": exact_moments(ex, 3)}
    if args.format == "csv":
        return out | {"pmf_csv": ex.to_csv()}
    return out | {"value": v.tolist(), "probability": w.tolist()}


def cmd_mc(pop, design, args) -> dict:
    if args.mc_count < 1:
        raise GridError("--mc-count must be positive for --cmd mc")
    sample = sample_srswor(pop, design, args.mc_count, args.seed)
    ex = exact_distribution(pop, design, args.budget)
    vals = sample.values
    return {"count": args.mc_count, "seed": args.seed, "sample_mean": float(vals.mean()),
            "exact_mean": ex.mean(), "sup_distance": ecdf_sup_distance(sample, ex),
            "dkw_99": dkw_epsilon(args.mc_count, 0.01)}


def _tail_table(pop, design, grid, s, ex) -> dict:
    x = parse_grid(grid)
    if np.any(x < 0):
        raise GridError("tail grid must be non-negative")
    model = tail_model(s, is_score=pop.is_score)
    return {"l0": model.l0, "l1": model.l1, "l1_verified": model.verified,
            "table": _columns(x=x, exact_upper=exact_tail_ratio(ex, s, x, "upper"),
                              approx_upper=tail_ratio(model, x, "upper"),
                              exact_lower=exact_tail_ratio(ex, s, x, "lower"),
                              approx_lower=tail_ratio(model, x, "lower"))}


def cmd_tail(pop, design, args) -> dict:
    s = moment_summary(pop, design)
    ex = exact_distribution(pop, design, args.budget)
    return _tail_table(pop, design, args.grid or DEFAULT_GRIDS["tail"], s, ex)


def cmd_compare(pop, design, args) -> dict:
    s = moment_summary(pop, design)
    ex = exact_distribution(pop, design, args.budget)
    rep = diagnostics_report(pop, design, args.delta, exact=ex).as_dict()
    ev = ChfEvaluator(pop, design, s)
    t = parse_grid(args.t_grid or DEFAULT_T_GRID)
    phi = ev.phi_n(t)
    rep["chf_agreement"] = {
        "max_abs_phi_vs_vonbahr": float(np.abs(phi - ev.phi_vonbahr(t)).max()),
        "max_abs_phi_vs_exact": float(np.abs(phi - ex.chf(t, s.gamma, s.sigma)).max()),
    }
    tail = _tail_table(pop, design, args.grid or DEFAULT_GRIDS["compare"], s, ex)
    rep["tail"] = {k: v for k, v in tail.items() if k != "table"} | {
        k: list(v) for k, v in tail["table"].items()}
    if args.mc_count > 0:
        sample = sample_srswor(pop, design, args.mc_count, args.seed)
        rep["monte_carlo"] = {"count": args.mc_count, "seed": args.seed,
                              "sup_distance": ecdf_sup_distance(sample, ex),
                              "dkw_99": dkw_epsilon(args.mc_count, 0.01)}
    return rep


HANDLERS = {"moments": cmd_moments, "approx": cmd_approx, "chf": cmd_chf, "exact": cmd_exact,
            "mc": cmd_mc, "tail": cmd_tail, "compare": cmd_compare}


def run(args: argparse.Namespace) -> str:
    pop_bytes = Path(args.pop).read_bytes()
    pop, design = load_spec(args.pop)
    if not 0 < args.delta <= 1:
        raise GridError(f"--delta must lie in (0, 1], got {args.delta}")
    body = HANDLERS[args.cmd](pop, design, args)
    report = {"schema": SCHEMA, "version": __version__, "config_hash": config_hash(args, pop_bytes),
              "command": args.cmd, "N": pop.N, "n": design.n} | body
    pmf = report.pop("pmf_csv", None)
    text = render(report, args.format)
    if pmf is not None:
        text += "\n" + pmf
    return text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = run(args)
    except (OSError, SpecError, GridError) as exc:
        print(f"samplesum: input error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"samplesum: {exc} (state-space size {exc.size})", file=sys.stderr)
        return 4
    except SampleSumError as exc:
        print(f"samplesum: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
