"""``icin`` command line front end.

Each mode reads its inputs, runs one pipeline and writes CSV/JSON outputs plus
a ``manifest.json`` recording the full configuration, input digests and
defaults.  Exit codes: 0 success, 2 bad input, 3 numeric failure,
4 infeasible model or refuted assumption.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .categorical import (
    MISSING,
    CategoricalSpace,
    build_full_data,
    event_probability,
    item_marginal,
    loglinear_decomposition,
    simulate,
)
from .continuous import GridSpec, fit_bivariate, missingness_curves, summary_table, weighted_quantile
from .diagnostics import convex_feasibility, hausman_wise_closed_form
from .errors import IcinError, InfeasibleError, InvalidArgumentError, NumericError
from .monotone import build_monotone, dropout_records, pattern_for_time, sequential_log_odds
from .posterior import (
    DirichletSpec,
    ObservedCounts,
    complete_case_functionals,
    push_forward,
    sample_posterior,
    summarize,
)
from .sensitivity import SensitivityGrid, build_full_data_xi, run_grid
from . import io as fio

log = logging.getLogger("icin")

MODES = ("categorical", "posterior", "sensitivity", "continuous", "monotone", "diagnose", "simulate")
EXIT_INPUT, EXIT_NUMERIC, EXIT_INFEASIBLE = 2, 3, 4


@dataclass
class RunConfig:
    """Everything a run depends on; serialised verbatim into the manifest."""

    mode: str
    input: str
    out: str
    schema: str | None = None
    weights: str | None = None
    prior: float | None = None
    draws: int | None = None
    seed: int = 0
    jobs: int = 1
    xi: str | None = None
    grid: str | None = None
    functionals: list[str] = field(default_factory=list)
    baseline: bool = False
    n: int = 1000
    j: str | None = None
    k: str | None = None
    tol: float = 1e-9
    hausman_wise: bool = False
    columns: tuple[str, str] = ("x1", "x2")
    where: str | None = None
    grid_points: int = 256
    curve_points: int = 101
    quantiles: tuple[float, ...] = (0.025, 0.5, 0.975)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        if self.mode == "sensitivity" and not (self.grid or self.xi):
            raise InvalidArgumentError("sensitivity mode needs --grid or --xi")
        if self.mode == "diagnose" and (self.j is None or self.k is None) and not self.hausman_wise:
            raise InvalidArgumentError("diagnose mode needs --j and --k")
        if self.draws is not None and self.draws < 1:
            raise InvalidArgumentError("--draws must be positive")


# --------------------------------------------------------------------------
# Input helpers


def _schema(cfg: RunConfig) -> dict:
    if not cfg.schema:
        return {}
    with open(cfg.schema, encoding="utf-8") as fh:
        return json.load(fh)


def _load_categorical(cfg: RunConfig):
    """Observed distribution or counts from a JSON document or CSV microdata."""
    if cfg.input.endswith(".json"):
        return fio.read_distribution(cfg.input)
    schema = _schema(cfg)
    levels = schema.get("items")
    table = fio.read_microdata(
        cfg.input,
        items=list(levels) if levels else None,
        levels=levels,
        missing=schema.get("missing", fio.DEFAULT_MISSING),
        recode=schema.get("recode"),
        weight=cfg.weights,
    )
    return fio.aggregate(table)


def _prior(cfg: RunConfig) -> DirichletSpec:
    return DirichletSpec(cfg.prior)


def _as_distribution(obj, cfg: RunConfig):
    if isinstance(obj, ObservedCounts):
        if cfg.prior is not None:
            return obj.posterior_mean(_prior(cfg))
        return obj.to_distribution()
    return obj


def _functionals(cfg: RunConfig) -> dict:
    out = {}
    for text in cfg.functionals:
        name, event = fio.parse_functional(text)
        out[name] = event
    return out or {"total": {}}


def _where(expr: str | None):
    if not expr:
        return None
    for op in (">=", "<=", "==", "!=", ">", "<"):
        if op in expr:
            col, value = (s.strip() for s in expr.split(op, 1))
            break
    else:
        raise InvalidArgumentError(f"cannot parse filter {expr!r}; use column<op>value")
    compare = {
        ">=": lambda a, b: a >= b, "<=": lambda a, b: a <= b, ">": lambda a, b: a > b,
        "<": lambda a, b: a < b, "==": lambda a, b: a == b, "!=": lambda a, b: a != b,
    }[op]
    try:
        target = float(value)
    except ValueError:
        return lambda row: compare(row.get(col, "").strip(), value)

    def keep(row):
        try:
            return compare(float(row[col]), target)
        except (KeyError, ValueError):
            return False

    return keep


# --------------------------------------------------------------------------
# Pipelines; each returns (written paths, exit code)


def _run_categorical(cfg, out):
    observed = _as_distribution(_load_categorical(cfg), cfg)
    g = build_full_data(observed)
    space = g.space
    paths = [
        fio.write_csv(out / "full_data.csv", [*space.names, "m", "g"], fio.full_data_rows(g)),
        fio.write_csv(
            out / "marginal.csv",
            [*space.names, "probability"],
            ([space.labels[j][k] for j, k in enumerate(c)] + [v] for c, v in np.ndenumerate(item_marginal(g))),
        ),
        fio.write_csv(
            out / "functionals.csv",
            ["functional", "value"],
            ([n, event_probability(g, ev)] for n, ev in _functionals(cfg).items()),
        ),
    ]
    if space.p <= 6:
        dec = loglinear_decomposition(g)
        paths.append(
            fio.write_csv(
                out / "loglinear.csv",
                ["term", "x_items", "m_items", "levels", "coefficient"],
                (
                    [
                        t.label(space),
                        " ".join(space.names[j] for j in t.x_items),
                        " ".join(space.names[j] for j in t.m_items),
                        " ".join(space.labels[j][k] for j, k in zip(t.x_items, t.levels)),
                        v,
                    ]
                    for t, v in dec.terms.items()
                ),
            )
        )
    return paths, 0


def _counts(cfg):
    obj = _load_categorical(cfg)
    if not isinstance(obj, ObservedCounts):
        raise InvalidArgumentError("posterior sampling needs counts, not a distribution")
    return obj


def _run_posterior(cfg, out):
    counts = _counts(cfg)
    funcs = _functionals(cfg)
    draws = sample_posterior(counts, _prior(cfg), cfg.draws or 5000, cfg.seed, cfg.jobs)
    table = push_forward(draws, funcs)
    paths = [
        fio.write_csv(out / "draws.csv", ["draw", "functional", "value"], table.rows()),
        _write_summary(out / "summary.csv", summarize(table, cfg.quantiles)),
    ]
    if cfg.baseline:
        cc = complete_case_functionals(draws, funcs)
        paths.append(fio.write_csv(out / "baseline_draws.csv", ["draw", "functional", "value"], cc.rows()))
        paths.append(_write_summary(out / "baseline_summary.csv", summarize(cc, cfg.quantiles)))
    return paths, 0


def _write_summary(path, rows):
    header = list(rows[0])
    return fio.write_csv(path, header, ([r[h] for h in header] for r in rows))


def _run_sensitivity(cfg, out):
    data = _load_categorical(cfg)
    space = data.space
    if cfg.grid:
        with open(cfg.grid, encoding="utf-8") as fh:
            grid = fio.grid_from_json(json.load(fh), space)
    else:
        with open(cfg.xi, encoding="utf-8") as fh:
            grid = SensitivityGrid(((0.0,),), (fio.xi_from_json(json.load(fh), space),))
    dims = list(grid.dims) or ["point"]
    funcs = _functionals(cfg)
    paths = []
    if cfg.draws:
        if not isinstance(data, ObservedCounts):
            raise InvalidArgumentError("posterior sampling needs counts, not a distribution")
        draws = sample_posterior(data, _prior(cfg), cfg.draws, cfg.seed, cfg.jobs)
        long_rows, summary_rows = [], []
        for label, xi in grid:
            table = push_forward(draws, funcs, xi)
            long_rows.extend([*label, i, n, v] for i, n, v in table.rows())
            for row in summarize(table, cfg.quantiles):
                summary_rows.append({**dict(zip(dims, label)), **row})
        paths.append(fio.write_csv(out / "sensitivity_draws.csv", [*dims, "draw", "functional", "value"], long_rows))
        paths.append(_write_summary(out / "sensitivity_summary.csv", summary_rows))
    else:
        observed = _as_distribution(data, cfg)
        rows = run_grid(observed, grid, funcs)
        paths.append(
            fio.write_csv(
                out / "sensitivity.csv",
                [*dims, "functional", "value", "error"],
                ([*r["label"], r["functional"], r["value"], r["error"] or ""] for r in rows),
            )
        )
    return paths, 0


def _run_continuous(cfg, out):
    sample = fio.read_weighted_sample(cfg.input, cfg.columns, cfg.weights or "weight", _where(cfg.where))
    model = fit_bivariate(sample)
    if cfg.grid_points != model.grid.n[0]:
        model = fit_bivariate(sample, GridSpec(model.grid.lo, model.grid.hi, (cfg.grid_points,) * 2))
    rows = summary_table(model)
    paths = [
        fio.write_csv(
            out / "table1.csv",
            ["pattern", "n", "pi", "pr_x1_gt_x2", "mean_x1", "mean_x2", "corr"],
            ([r["pattern"], r["n"], r["pi"], r["pr_x1_gt_x2"], r["mean_x1"], r["mean_x2"], r["corr"]] for r in rows),
        )
    ]
    curve_rows = []
    for axis, values in ((1, sample.x1), (2, sample.x2)):
        keep = ~np.isnan(values)
        lo, hi = weighted_quantile(values[keep], sample.weights[keep], [0.05, 0.95])
        pts = np.linspace(lo, hi, cfg.curve_points)
        curve_rows.extend([axis, x, pr] for x, pr in zip(pts, missingness_curves(model, axis, pts)))
    paths.append(fio.write_csv(out / "curves.csv", ["axis", "x", "probability"], curve_rows))
    paths.append(
        fio.write_json(
            out / "model.json",
            {
                "bandwidths": {
                    "f00": model.f00.bandwidths,
                    "f01": None if model.f01 is None else model.f01.bandwidths,
                    "f10": None if model.f10 is None else model.f10.bandwidths,
                },
                "grid": {"lo": model.grid.lo, "hi": model.grid.hi, "n": model.grid.n},
                "pi": {str(m): v for m, v in model.pi.items()},
                "log_z11": model.log_z11,
            },
        )
    )
    return paths, 0


def _run_monotone(cfg, out):
    if cfg.input.endswith(".json"):
        data = fio.read_distribution(cfg.input)
    else:
        header, rows = fio._read_rows(cfg.input)
        schema = _schema(cfg)
        levels = schema.get("items") or {
            h: sorted({r[j].strip() for _, r in rows if j < len(r) and r[j].strip() not in fio.DEFAULT_MISSING})
            for j, h in enumerate(header)
        }
        space = CategoricalSpace.from_labels(levels)
        records = dropout_records([r for _, r in rows], space, tuple(schema.get("missing", fio.DEFAULT_MISSING)))
        data = ObservedCounts.from_records(space, records)
    observed = _as_distribution(data, cfg)
    g = build_monotone(observed)
    space = g.space
    odds_rows = []
    for t in range(1, space.p + 1):
        if pattern_for_time(t, space.p) not in g.patterns or pattern_for_time(t + 1, space.p) not in g.patterns:
            continue
        for prefix in np.ndindex(*space.levels[: t - 1]):
            cell = prefix + (0,) * (space.p - t + 1)
            labels = " ".join(space.labels[j][k] for j, k in enumerate(prefix))
            odds_rows.append([t, labels, sequential_log_odds(g, t, cell)])
    return [
        fio.write_csv(out / "full_data.csv", [*space.names, "m", "g"], fio.full_data_rows(g)),
        fio.write_csv(out / "sequential_odds.csv", ["time", "history", "log_odds"], odds_rows),
    ], 0


def _run_diagnose(cfg, out):
    observed = _as_distribution(_load_categorical(cfg), cfg)
    doc, code = {}, 0
    if cfg.j is not None and cfg.k is not None:
        j, k = (int(v) if str(v).isdigit() else v for v in (cfg.j, cfg.k))
        report = convex_feasibility(observed, j, k, cfg.tol)
        doc = report.to_dict(observed.space)
        if not report.feasible:
            code = EXIT_INFEASIBLE
    if cfg.hausman_wise:
        try:
            masses = hausman_wise_closed_form(observed)
            doc["hausman_wise"] = {"status": "ok", "masses": {str(m): a for m, a in masses.items()}}
        except InfeasibleError as exc:
            doc["hausman_wise"] = {"status": type(exc).__name__, "message": str(exc), "value": exc.value}
            code = EXIT_INFEASIBLE
    return [fio.write_json(out / "report.json", doc)], code


def _run_simulate(cfg, out):
    observed = _as_distribution(_load_categorical(cfg), cfg)
    g = build_full_data(observed)
    records = simulate(g, cfg.n, cfg.seed)
    space = g.space
    rows = ([("NA" if k == MISSING else space.labels[j][k]) for j, k in enumerate(r)] for r in records)
    return [fio.write_csv(out / "records.csv", list(space.names), rows)], 0


PIPELINES = {
    "categorical": _run_categorical,
    "posterior": _run_posterior,
    "sensitivity": _run_sensitivity,
    "continuous": _run_continuous,
    "monotone": _run_monotone,
    "diagnose": _run_diagnose,
    "simulate": _run_simulate,
}


def _manifest(cfg: RunConfig, paths, code) -> dict:
    inputs = {}
    for p in (cfg.input, cfg.schema, cfg.xi, cfg.grid):
        if p:
            inputs[p] = fio.file_digest(p)
    return {
        "version": __version__,
        "config": asdict(cfg),
        "inputs": inputs,
        "outputs": [str(Path(p).name) for p in paths],
        "exit_code": code,
        "defaults": {
            "prior": "1/C (C = number of observed cells)" if cfg.prior is None else cfg.prior,
            "draws": cfg.draws or (5000 if cfg.mode == "posterior" else None),
            "quantile_method": "type 7 (linear)",
            "bandwidth": "Silverman, weighted, Kish effective size",
            "grid": "data range padded by 4 max bandwidths" if cfg.mode == "continuous" else None,
        },
        "numpy": np.__version__,
    }


def run(cfg: RunConfig) -> int:
    """Execute a configured run; returns the process exit code."""
    out = Path(cfg.out)
    try:
        paths, code = PIPELINES[cfg.mode](cfg, out)
    except InfeasibleError as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except NumericError as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except (IcinError, OSError, json.JSONDecodeError, KeyError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    fio.write_json(out / "manifest.json", _manifest(cfg, paths, code))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--input", required=True, help="CSV microdata or JSON distribution/counts")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--schema", help="JSON with item levels, missing tokens and recode map")
        p.add_argument("--weights", help="weight column name")
        p.add_argument("--prior", type=float, help="symmetric Dirichlet concentration")
        p.add_argument("--draws", type=int, help="number of posterior draws")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--xi", help="sensitivity function JSON")
        p.add_argument("--grid", help="sensitivity grid JSON")
        p.add_argument("--functional", action="append", default=[], dest="functionals",
                       metavar="NAME=ITEM:LEVEL,...")
        p.add_argument("--baseline", action="store_true", help="also emit complete-case functionals")
        p.add_argument("--n", type=int, default=1000, help="records to simulate")
        p.add_argument("--j", help="item whose indicator is assumed independent of item k")
        p.add_argument("--k")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--hausman-wise", action="store_true")
        p.add_argument("--columns", nargs=2, default=("x1", "x2"))
        p.add_argument("--where", help="row filter such as 'age>=18'")
        p.add_argument("--grid-points", type=int, default=256)
        p.add_argument("--curve-points", type=int, default=101)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = vars(build_parser().parse_args(argv))
    args["columns"] = tuple(args["columns"])
    try:
        cfg = RunConfig(**args)
    except IcinError as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
