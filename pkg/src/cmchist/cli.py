"""Command-line front end.

Subcommands: ``simulate`` draws a trajectory from a named family,
``fit`` runs the penalized histogram selector on saved data, ``assess``
scores a saved model against a trajectory, ``diagnose`` produces
occupation / recurrence / mixing / remainder reports for a chain spec,
and ``experiment`` drives the replicated studies from a JSON config.

Reports are CSV files; commands that write them also render companion
PNG figures next to the CSV unless ``--no-figures`` is passed.  Usage
errors exit 2 (argparse's convention); package error classes map to
distinct exit codes, printed as ``error: ...`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .counts import CountTree
from .diagnostics import (
    GridOccupation,
    dyadic_foot_boxes,
    occupation_measures,
    remainder_term,
    rho_star,
    weak_mixing_products,
)
from .errors import CmchistError, ConfigError, DiagnosticsError
from .harness import (
    ExperimentConfig,
    kac_rows,
    run_covering_experiment,
    run_kac_experiment,
    run_projection_check,
    run_rate_experiment,
    run_risk_experiment,
)
from .histogram import PiecewiseKernel, fit_histogram
from .losses import empirical_hellinger_sq
from .selector import gamma_of, select_partition
from .simulate import FAMILY_NAMES, FiniteCMCSpec, InidChain, build_family
from .trajectory import load, save


def _parse_params(items) -> dict:
    """key=value pairs; values parse as JSON, falling back to strings."""
    params = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {item!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return obj


def _write_rows(path, rows: list[dict]) -> None:
    if not rows:
        raise DiagnosticsError("nothing to report")
    fieldnames = list(rows[0])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)


def _figure_path(out, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_{suffix}.png")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    family_seed, path_seed = np.random.SeedSequence(args.seed).spawn(2)
    truth = build_family(args.family, seed=family_seed, **_parse_params(args.param))
    if isinstance(truth, InidChain):
        traj = truth.simulate(args.n)
    else:
        traj = truth.simulate(args.n, seed=path_seed)
    save(traj, args.out)
    print(f"wrote {traj.n_transitions} transitions to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    traj = load(args.data)
    mapping = None
    if args.rescale:
        traj, mapping = traj.rescale_to_unit()
    tree = CountTree(traj, args.depth)
    result = select_partition(tree, args.penalty_scale)
    kernel = result.kernel
    kernel.meta.update(
        {
            "gamma": result.gamma,
            "penalty_scale": args.penalty_scale,
            "depth_bound": args.depth,
            "n_transitions": traj.n_transitions,
            "selection_runtime_seconds": result.runtime_seconds,
        }
    )
    if mapping is not None:
        kernel.meta["domain_map"] = mapping
    kernel.save(args.out)
    if not args.no_figures and traj.d1 == 1 and traj.d2 == 1:
        from .figures import partition_figure

        partition_figure(kernel, _figure_path(args.out, "bands"))
    print(
        f"selected {len(kernel.partition)} leaves, gamma={result.gamma:.6g}, "
        f"model saved to {args.out}"
    )
    return 0


def _cmd_assess(args) -> int:
    traj = load(args.data)
    kernel = PiecewiseKernel.load(args.model)
    depth = max((leaf.depth for leaf in kernel.partition), default=0)
    tree = CountTree(traj, depth)
    refit = fit_histogram(tree, kernel.partition)
    scale = float(kernel.meta.get("penalty_scale", 64.0))
    rows = []
    mass_ok = 0
    for leaf in kernel.partition:
        foot = leaf.box(kernel.shape.full_axes)
        mid_x = [(lo + hi) / 2 for lo, hi in zip(foot.lo[: traj.d1], foot.hi[: traj.d1])]
        mid_a = [
            (lo + hi) / 2
            for lo, hi in zip(
                foot.lo[traj.d1 : traj.d1 + traj.d2],
                foot.hi[traj.d1 : traj.d1 + traj.d2],
            )
        ]
        mass = refit.next_state_mass(mid_x, mid_a, exact=True)
        mass_ok += mass == 1
        rows.append(
            {
                "cell": str(leaf),
                "depth": leaf.depth,
                "n_pairs": tree.n_pairs(leaf.footprint(kernel.shape)),
                "n_triples": tree.n_triples(leaf),
                "value_model": kernel.values.get(leaf, 0.0),
                "value_refit": refit.values.get(leaf, 0.0),
            }
        )
    _write_rows(args.out, rows)
    if not args.no_figures and traj.d1 == 1 and traj.d2 == 1:
        from .figures import partition_figure

        partition_figure(refit, _figure_path(args.out, "bands"), title="refit kernel")
    summary = {
        "n_transitions": traj.n_transitions,
        "n_leaves": len(kernel.partition),
        "gamma": gamma_of(tree, kernel.partition, scale),
        "drift_hellinger_sq": empirical_hellinger_sq(kernel, refit, tree),
        "unit_mass_fraction": mass_ok / len(kernel.partition),
    }
    print(json.dumps(summary, indent=2))
    return 0


def _diagnose_kac(spec_obj, truth, args) -> list[dict]:
    boxes = dyadic_foot_boxes(int(spec_obj.get("max_depth", 2)))
    n_values = spec_obj.get("n_values", [100, 1000, 10000])
    return kac_rows(spec_obj["family"], truth, boxes, n_values)


def _diagnose_mixing(spec_obj, truth, args) -> list[dict]:
    if not isinstance(truth, FiniteCMCSpec):
        raise DiagnosticsError("mixing products need a finite grid chain")
    return weak_mixing_products(truth, max_gap=int(spec_obj.get("max_gap", 6)))


def _diagnose_rho_star(spec_obj, truth, args) -> list[dict]:
    if not isinstance(truth, FiniteCMCSpec):
        raise DiagnosticsError("the visit-mass exponent needs a finite grid chain")
    rows = []
    for cell, box in dyadic_foot_boxes(int(spec_obj.get("max_depth", 2))):
        rows.append({"set": str(cell), "rho_star": rho_star(truth, box)})
    return rows


def _diagnose_remainder(spec_obj, truth, args) -> list[dict]:
    block = spec_obj.get("remainder")
    if not isinstance(block, dict):
        raise ConfigError("the spec needs a 'remainder' object for this report")
    block = dict(block)
    flavor = block.pop("flavor", "return-time")
    n_values = block.pop("n_values", [100, 1000, 10000])
    t_values = block.pop("t_values", None)
    rows = []
    if flavor == "return-time" and t_values:
        for n in n_values:
            for t in t_values:
                value = remainder_term(flavor, n=n, t_star=t, **block)
                rows.append({"flavor": flavor, "n": n, "t": t, "remainder": value})
    else:
        for n in n_values:
            value = remainder_term(flavor, n=n, **block)
            rows.append({"flavor": flavor, "n": n, "remainder": value})
    return rows


def _diagnose_occupation(spec_obj, truth, args) -> list[dict]:
    n_values = spec_obj.get("n_values", [100, 1000, 10000])
    rows = []
    if isinstance(truth, InidChain):
        for n in n_values:
            rows.append(
                {
                    "n": n,
                    "set": "(+,+) pair cell",
                    "formula_mass": float(truth.closed_form_occupation(n)),
                    "realized_mass": float(truth.realized_occupation(n)),
                }
            )
        return rows
    if not isinstance(truth, FiniteCMCSpec):
        raise DiagnosticsError("occupation tables need a finite grid chain")
    for n in n_values:
        measures = occupation_measures(truth, n)
        running = measures["nu_n"].masses
        limit = measures["nu"].masses
        for i in range(running.shape[0]):
            for j in range(running.shape[1]):
                rows.append(
                    {
                        "n": n,
                        "state_cell": i,
                        "control_cell": j,
                        "running_mass": float(running[i, j]),
                        "limit_mass": float(limit[i, j]),
                        "r_n": measures["r_n"],
                    }
                )
    return rows


_DIAGNOSE = {
    "kac": _diagnose_kac,
    "mixing": _diagnose_mixing,
    "rho-star": _diagnose_rho_star,
    "remainder": _diagnose_remainder,
    "occupation": _diagnose_occupation,
}


def _cmd_diagnose(args) -> int:
    spec_obj = _load_json(args.spec)
    if "family" not in spec_obj:
        raise ConfigError("the chain spec needs a 'family' field")
    if args.seed is not None:
        spec_obj["seed"] = args.seed
    seed = np.random.SeedSequence(int(spec_obj.get("seed", 0)))
    truth = build_family(
        spec_obj["family"], seed=seed, **spec_obj.get("params", {})
    )
    rows = _DIAGNOSE[args.what](spec_obj, truth, args)
    _write_rows(args.out, rows)
    if not args.no_figures:
        from . import figures

        if args.what == "kac":
            figures.kac_margin_figure(rows, _figure_path(args.out, "margins"))
        elif args.what == "remainder" and any("t" in r for r in rows):
            figures.remainder_grid_figure(rows, _figure_path(args.out, "grid"))
        elif args.what == "occupation" and isinstance(truth, FiniteCMCSpec):
            last_n = max(r["n"] for r in rows)
            figures.occupation_figure(
                GridOccupation.running(truth, last_n).masses,
                _figure_path(args.out, "heatmap"),
                title=f"running occupation, n={last_n}",
            )
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_experiment(args) -> int:
    cfg_obj = _load_json(args.config)
    kind = cfg_obj.pop("kind", "risk")
    if args.seed is not None:
        cfg_obj["seed"] = args.seed
    out = Path(args.out)
    from . import figures

    if kind == "risk":
        cfg = ExperimentConfig(**cfg_obj)
        table = run_risk_experiment(cfg)
        table.save_csv(out)
        summary = table.summary()
        if not args.no_figures and summary:
            figures.risk_curve_figure(summary, _figure_path(out, "risk"))
        print(json.dumps(summary, indent=2))
    elif kind == "rate":
        report = run_rate_experiment(**cfg_obj)
        report["table"].save_csv(out)
        fit = report["fit"]
        with open(out.with_name(f"{out.stem}_fit.json"), "w") as fh:
            json.dump(fit, fh, indent=2)
        if not args.no_figures:
            figures.rate_fit_figure(fit, _figure_path(out, "fit"))
            figures.risk_curve_figure(report["summary"], _figure_path(out, "risk"))
        print(json.dumps({k: fit[k] for k in ("slope", "slope_ci", "constant")}))
    elif kind == "projection":
        report = run_projection_check(
            **{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_obj.items()}
        )
        _write_rows(out, report["rows"])
        print(
            f"{sum(r['ok'] for r in report['rows'])}/{len(report['rows'])} bounds hold "
            f"({report['runtime_seconds']:.1f}s)"
        )
    elif kind == "kac":
        rows = run_kac_experiment(
            **{k: tuple(v) if isinstance(v, list) else v for k, v in cfg_obj.items()}
        )
        _write_rows(out, rows)
        if not args.no_figures:
            figures.kac_margin_figure(rows, _figure_path(out, "margins"))
        print(f"{sum(r['ok'] for r in rows)}/{len(rows)} inequalities hold")
    elif kind == "covering":
        report = run_covering_experiment(**cfg_obj)
        _write_rows(out, [report])
        print(json.dumps(report))
    else:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmchist",
        description="histogram estimation for controlled Markov chains",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a trajectory from a named family")
    p.add_argument("--family", required=True, choices=sorted(FAMILY_NAMES))
    p.add_argument("--n", type=int, required=True, help="number of transitions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="family parameter (repeatable), value parsed as JSON",
    )
    p.add_argument("--out", required=True, help="output path (.jsonl or .csv)")
    p.set_defaults(run=_cmd_simulate)

    p = sub.add_parser("fit", help="fit the penalized histogram selector")
    p.add_argument("--data", required=True, help="trajectory file (.jsonl or .csv)")
    p.add_argument("--depth", type=int, default=3, help="maximum split depth")
    p.add_argument("--penalty-scale", type=float, default=64.0)
    p.add_argument("--rescale", action="store_true", help="rescale data to the unit cube")
    p.add_argument("--out", required=True, help="model output path (.json)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(run=_cmd_fit)

    p = sub.add_parser("assess", help="score a saved model on a trajectory")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="model file from `fit`")
    p.add_argument("--out", required=True, help="per-leaf report CSV")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(run=_cmd_assess)

    p = sub.add_parser("diagnose", help="occupation and recurrence reports")
    p.add_argument("--what", required=True, choices=sorted(_DIAGNOSE))
    p.add_argument("--spec", required=True, help="chain spec JSON")
    p.add_argument("--out", required=True, help="report CSV")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(run=_cmd_diagnose)

    p = sub.add_parser("experiment", help="replicated studies from a JSON config")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="results CSV")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(run=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.run(args)
    except CmchistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
