"""Command-line front end.

Subcommands: bounds, simulate, verify, apps-cov, apps-pca.  Each loads a JSON
experiment config, runs the requested pipeline, and writes a JSON report
(constants snapshot, seeds, certificates) plus a CSV ledger with the fixed
column set check_id, lhs, rhs, slack, passed, seed, n, p, delta.

Exit codes: 0 all-pass, 1 any verification failure, 2 config error.
MCBOUND_THREADS caps worker count without affecting results.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as bounds_mod
from ._kernels import BACKEND
from .apps import covariance_experiment, pca_experiment
from .bounds import BoundInput, BoundReport, ConstantsRegistry
from .chains import (
    FiniteChain,
    center_and_norms,
    chain_from_json,
    table_from_json,
    v_ergodicity_kappa,
)
from .poisson import solve_poisson
from .simulate import empirical_lp, simulate_martingale, simulate_sums
from .verify import (
    LEDGER_COLUMNS,
    check_bennett_empirical,
    check_good_lambda,
    check_inequality,
)


class ConfigError(ValueError):
    """Anything wrong with the experiment configuration (exit code 2)."""


_OVERRIDE_NAMES = {
    "C_R1": "c_r1",
    "C_R2": "c_r2",
    "C_R1_LARGE_P": "c_r1_large_p",
    "C_R2_LARGE_P": "c_r2_large_p",
    "D1": "d1",
    "D2": "d2",
    "D4": "d4",
    "D5": "d5",
    "PCA_C": "pca_display_constant",
}


def _load_config(path):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _registry_from(config, overrides):
    params = dict(config.get("constants", {}))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        key = _OVERRIDE_NAMES.get(name.strip().upper(), name.strip().lower())
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"override value for {name} is not a number: {value!r}") from exc
    try:
        return ConstantsRegistry(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad constants: {exc}") from exc


def _build_chain(config):
    spec = config.get("chain")
    if spec is None:
        raise ConfigError("config requires a 'chain' entry")
    if "path" in spec:
        spec = _load_config(spec["path"])
    try:
        return chain_from_json(spec)
    except ValueError as exc:
        raise ConfigError(f"bad chain: {exc}") from exc


def _build_table(config, chain):
    spec = config.get("table")
    if spec is None:
        raise ConfigError("config requires a 'table' entry")
    if "path" in spec:
        spec = _load_config(spec["path"])
    try:
        if "scalars" in spec:
            vals = np.asarray(spec["scalars"], dtype=np.float64).reshape(-1, 1, 1)
            from .chains import MatrixFunctionTable

            table = MatrixFunctionTable(vals.astype(np.complex128), hermitian=True)
        else:
            table = table_from_json(spec)
    except ValueError as exc:
        raise ConfigError(f"bad table: {exc}") from exc
    if table.n_states != chain.n_states:
        raise ConfigError(
            f"inconsistent dimensions: table has {table.n_states} states, "
            f"chain has {chain.n_states}"
        )
    return table


def _seed_of(config, args):
    if args.seed is not None:
        return int(args.seed)
    return int(config.get("seed", 0))


def _ledger_row(report):
    md = report.metadata
    return [
        report.check_id, repr(report.lhs), repr(report.rhs), repr(report.slack),
        int(report.passed),
        md.get("seed", ""), md.get("n", ""), md.get("p", ""), md.get("delta", ""),
    ]


def _write_outputs(out_dir, command, payload, ledger_rows):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"{command}_report.json"
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    csv_path = out / f"{command}_ledger.csv"
    lines = [",".join(LEDGER_COLUMNS)]
    for row in ledger_rows:
        lines.append(",".join(str(c) for c in row))
    csv_path.write_text("\n".join(lines) + "\n")
    return report_path, csv_path


def _derive_inputs(config, chain, table, registry, p, n, delta):
    """Fill a BoundInput from the chain and centered table."""
    centered = center_and_norms(table, chain, alphas=(1.0 / p,) if chain.lyapunov is not None else ())
    sol = solve_poisson(chain, centered)
    profile = chain.mixing()
    sigma_norm = float(np.abs(np.linalg.eigvalsh(sol.sigma)).max())
    kwargs = dict(
        p=p, n=n, dim_factor=max(1.0, float(table.shape[0])), t_mix=profile.t_mix,
        sup_norm=centered.sup_norm, sigma_norm=sigma_norm, delta=delta,
    )
    if chain.lyapunov is not None:
        vp = v_ergodicity_kappa(chain, chain.lyapunov, profile.t_mix)
        kwargs.update(
            kappa=vp.kappa,
            pi_v=float(chain.pi @ chain.lyapunov),
            v_norm=centered.v_norms[1.0 / p],
        )
    return BoundInput(**kwargs), centered, sol, profile


_BOUND_EVALUATORS = {
    "crude_rosenthal": lambda inp, reg: bounds_mod.crude_rosenthal_rhs(inp, registry=reg),
    "markov_rosenthal": lambda inp, reg: bounds_mod.markov_rosenthal_rhs(inp, registry=reg),
    "hoeffding": lambda inp, reg: bounds_mod.hoeffding_rhs(inp, registry=reg),
    "bernstein": lambda inp, reg: bounds_mod.bernstein_rhs(inp, registry=reg),
    "geo_v_crude": lambda inp, reg: bounds_mod.geo_v_rosenthal_rhs(inp, crude=True, registry=reg),
    "geo_v_rosenthal": lambda inp, reg: bounds_mod.geo_v_rosenthal_rhs(inp, registry=reg),
}


def _dimension_free_factor(params, inp, profile):
    """Resolve the dimension-free toggle: replace dim_factor by the
    effective-rank factor of the configured envelope.

    The envelope bounds F^2 pointwise; the factor clamps at the long-run
    variance norm (its large-n limit).  The same factor is used in every
    term and the evaluated RHS doubles, matching the dimension-free variants
    of the chain bounds (the residual-term factor is not separately
    specified, so this single-factor convention is documented here).
    """
    if "upsilon" not in params:
        raise ConfigError("dimension_free requires an 'upsilon' envelope matrix")
    ups = np.asarray(params["upsilon"], dtype=np.float64)
    clamp = inp.sigma_norm if inp.sigma_norm else float(params.get("clamp_level", 1.0))
    try:
        factor = bounds_mod.dimension_factor(ups, profile.t_mix if profile else inp.t_mix,
                                             clamp_level=clamp)
    except ValueError as exc:
        raise ConfigError(f"bad dimension-free envelope: {exc}") from exc
    return max(1.0, factor)


def _run_bounds(config, args, registry, out_dir):
    params = config.get("params", {})
    p = float(params.get("p", 2.0))
    n_grid = params.get("n_grid") or [params.get("n", 100)]
    delta = params.get("delta")
    theorems = params.get("theorems", ["crude_rosenthal"])
    dimension_free = bool(params.get("dimension_free", False))
    explicit = params.get("inputs")
    reports = []
    rows = []
    certificates = {}
    chain = table = None
    if explicit is None:
        chain = _build_chain(config)
        table = _build_table(config, chain)
    for n in n_grid:
        n = int(n)
        if explicit is not None:
            try:
                inp = BoundInput(**dict(explicit, n=int(explicit.get("n", n))))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad explicit inputs: {exc}") from exc
            profile = None
        else:
            inp, _, sol, profile = _derive_inputs(config, chain, table, registry,
                                                  p, n, delta)
            certificates = {
                "t_mix": profile.t_mix,
                "tail_certificate": profile.certificate,
                "poisson_residual": sol.residual,
                "sigma_route_gap": sol.sigma_route_gap(),
            }
        if dimension_free:
            factor = _dimension_free_factor(params, inp, profile)
            inp = BoundInput(**dict(
                {k: v for k, v in vars(inp).items()}, dim_factor=factor
            ))
            certificates["dimension_free_factor"] = factor
        for name in theorems:
            if name not in _BOUND_EVALUATORS:
                raise ConfigError(f"unknown theorem id {name!r}")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                value = _BOUND_EVALUATORS[name](inp, registry)
            if dimension_free:
                value *= 2.0
            notes = [str(w.message) for w in caught]
            reports.append(
                BoundReport(
                    theorem=name, value=float(value),
                    inputs={k: v for k, v in vars(inp).items() if v is not None},
                    constants=registry.snapshot(), warnings=notes,
                ).to_json()
            )
            rows.append([name, "", repr(float(value)), "", "",
                         _seed_of(config, args), inp.n, inp.p,
                         inp.delta if inp.delta is not None else ""])
    payload = {
        "command": "bounds",
        "version": __version__,
        "backend": BACKEND,
        "seed": _seed_of(config, args),
        "constants": registry.snapshot(),
        "certificates": certificates,
        "dimension_free": dimension_free,
        "reports": reports,
    }
    return payload, rows, True


def _run_simulate(config, args, registry, out_dir):
    chain = _build_chain(config)
    table = _build_table(config, chain)
    params = config.get("params", {})
    n_grid = [int(n) for n in (params.get("n_grid") or [params.get("n", 100)])]
    trials = int(params.get("trials", 100))
    seed = _seed_of(config, args)
    centered = center_and_norms(table, chain)
    rows = []
    p_grid = params.get("p_grid", [2.0])
    runs = []
    for n in n_grid:
        stats = simulate_sums(chain, centered, n=n, trials=trials, seed=seed)
        suffix = f"_n{n}" if len(n_grid) > 1 else ""
        stats.to_csv(Path(out_dir) / f"simulate_trials{suffix}.csv")
        moments = []
        for p in p_grid:
            moment = empirical_lp(stats.sup_s / n, p)
            moments.append({
                "p": p, "empirical_lp": moment.point, "upper_0.99": moment.upper,
                "trials": trials,
            })
            rows.append([f"simulate_lp_p{p:g}_n{n}", repr(moment.point), "", "", "",
                         seed, n, p, ""])
        run = {"n": n, "moments": moments, "sup_mean": float(stats.sup_s.mean())}
        if params.get("martingale", False):
            sol = solve_poisson(chain, centered)
            mstats = simulate_martingale(chain, sol, n=n, trials=trials, seed=seed)
            run["martingale"] = {
                "decomposition_max_err": mstats.decomposition_max_err,
                "sup_m_mean": float(mstats.sup_m.mean()),
                "qv_norm_mean": float(mstats.qv_norm.mean()),
            }
        runs.append(run)
    payload = {
        "command": "simulate",
        "version": __version__,
        "backend": BACKEND,
        "seed": seed,
        "constants": registry.snapshot(),
        "trials": trials,
        "runs": runs,
    }
    if len(runs) == 1:
        payload.update(runs[0])
    return payload, rows, True


def _run_verify(config, args, registry, out_dir):
    params = config.get("params", {})
    checks = params.get("checks")
    if not checks:
        raise ConfigError("verify requires params.checks")
    seed = _seed_of(config, args)
    reports = []
    for spec in checks:
        kind = spec.get("kind")
        if kind == "chain_inequality":
            reports.extend(_chain_inequality_check(config, spec, seed, registry))
        elif kind == "good_lambda":
            reports.append(_good_lambda_check(spec))
        elif kind == "bennett":
            reports.extend(_bennett_check(spec, seed))
        else:
            raise ConfigError(f"unknown check kind {kind!r}")
    rows = [_ledger_row(r) for r in reports]
    all_pass = all(r.passed for r in reports)
    payload = {
        "command": "verify",
        "version": __version__,
        "backend": BACKEND,
        "seed": seed,
        "constants": registry.snapshot(),
        "all_pass": all_pass,
        "checks": [
            {
                "check_id": r.check_id, "lhs": r.lhs, "lhs_upper": r.lhs_upper,
                "rhs": r.rhs, "passed": r.passed, "slack": r.slack,
                "metadata": {k: _jsonable(v) for k, v in r.metadata.items()},
            }
            for r in reports
        ],
    }
    return payload, rows, all_pass


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _chain_inequality_check(config, spec, seed, registry):
    chain = _build_chain(config)
    table = _build_table(config, chain)
    bound_name = spec.get("bound", "crude_rosenthal")
    if bound_name not in _BOUND_EVALUATORS:
        raise ConfigError(f"unknown bound {bound_name!r}")
    p = float(spec.get("p", 2.0))
    n = int(spec.get("n", 100))
    trials = int(spec.get("trials", 200))
    delta = spec.get("delta")
    if chain.lyapunov is None and bound_name.startswith("geo_v"):
        chain = FiniteChain(chain.q, labels=chain.labels,
                            lyapunov=np.full(chain.n_states, math.e))
    inp, centered, sol, profile = _derive_inputs(config, chain, table, registry, p, n, delta)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rhs = _BOUND_EVALUATORS[bound_name](inp, registry)
    stats = simulate_sums(chain, centered, n=n, trials=trials, seed=seed)
    moment = empirical_lp(stats.sup_s / n, p)
    return [
        check_inequality(
            f"{bound_name}_p{p:g}_n{n}", moment, rhs,
            seed=seed, n=n, p=p, delta=delta if delta is not None else "",
        )
    ]


def _good_lambda_check(spec):
    steps = spec.get("steps_scalar")
    if steps is None:
        raise ConfigError("good_lambda check requires steps_scalar")
    p = float(spec.get("p", 2.0))
    c = float(spec.get("c", p))
    lam = float(spec.get("lam", 1.0))
    d = int(spec.get("d", 1))
    params = bounds_mod.good_lambda_params(p, d, c)
    mats = [np.array([[s]], dtype=np.complex128) for s in steps]
    report = check_good_lambda(mats, lam, params.beta, params.delta1, params.delta2)
    report.metadata.update(p=p, n=len(steps))
    return report


def _bennett_check(spec, seed):
    scale = float(spec.get("step_scale", 0.1))
    n_steps = int(spec.get("n_steps", 20))
    trials = int(spec.get("trials", 10000))
    steps = [np.array([[scale]], dtype=np.complex128)] * n_steps
    qv_bound = float(spec.get("qv_bound", n_steps * scale**2))
    diff_bound = float(spec.get("diff_bound", scale))
    sigma = math.sqrt(qv_bound)
    eps_grid = spec.get("eps_grid", [0.5 * sigma, sigma, 2 * sigma, 4 * sigma])
    return check_bennett_empirical(
        steps, qv_bound, diff_bound, eps_grid, trials=trials, seed=seed,
    )


def _run_apps(config, args, registry, out_dir, with_pca):
    chain = _build_chain(config)
    spec = config.get("table", {})
    if "vectors" not in spec:
        raise ConfigError("apps configs require table.vectors (per-state real vectors)")
    from .apps import VectorFunctionTable

    f = VectorFunctionTable(np.asarray(spec["vectors"], dtype=np.float64))
    params = config.get("params", {})
    n = int(params.get("n", 1000))
    trials = int(params.get("trials", 100))
    delta = float(params.get("delta", 0.1))
    seed = _seed_of(config, args)
    upsilon = None
    if "upsilon" in params:
        upsilon = np.asarray(params["upsilon"], dtype=np.float64)
    try:
        result = covariance_experiment(
            chain, f, n=n, trials=trials, delta=delta, seed=seed,
            upsilon=upsilon, registry=registry,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    reports = [
        check_inequality(
            "cov_realized_le_bernstein",
            float(result.realized_sup_error.max()),
            result.bernstein_bound,
            seed=seed, n=n, delta=delta,
        )
    ]
    if with_pca:
        result = pca_experiment(result)
        worst = int(np.argmax(result.sin2 - result.sin2_bound))
        reports.append(
            check_inequality(
                "pca_sin2_le_davis_kahan",
                float(result.sin2[worst]),
                float(result.sin2_bound[worst]) + 1e-12,
                seed=seed, n=n, delta=delta,
            )
        )
    trial_csv = Path(out_dir) / ("apps-pca_trials.csv" if with_pca else "apps-cov_trials.csv")
    trial_csv.parent.mkdir(parents=True, exist_ok=True)
    trial_rows = result.csv_rows()
    header = ["trial", "n", "trials", "realized_error", "bound", "sin2", "sin2_bound", "dim_factor"]
    lines = [",".join(header)]
    for row in trial_rows:
        lines.append(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k])
                              for k in header))
    trial_csv.write_text("\n".join(lines) + "\n")
    rows = [_ledger_row(r) for r in reports]
    all_pass = all(r.passed for r in reports)
    payload = {
        "command": "apps-pca" if with_pca else "apps-cov",
        "version": __version__,
        "backend": BACKEND,
        "seed": seed,
        "constants": registry.snapshot(),
        "all_pass": all_pass,
        "n": n,
        "trials": trials,
        "delta": delta,
        "bernstein_bound": result.bernstein_bound,
        "sigma_pi_norm": result.sigma_pi_norm,
        "eigen_gap": result.eigen_gap,
        "realized_error_max": float(result.realized_sup_error.max()),
        "dim_free_factor": result.dim_free_factor,
    }
    if with_pca:
        payload["sin2_max"] = float(result.sin2.max())
    return payload, rows, all_pass


def main(argv=None):
    parser = argparse.ArgumentParser(prog="mcbound", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("bounds", "simulate", "verify", "apps-cov", "apps-pca"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="experiment config JSON")
        sp.add_argument("--seed", type=int, default=None, help="master seed override")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument(
            "--override", action="append", default=[], metavar="NAME=VALUE",
            help="constants override, e.g. C_R1=87 (repeatable)",
        )
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        registry = _registry_from(config, args.override)
        out_dir = args.out or config.get("out", ".")
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        runner = {
            "bounds": _run_bounds,
            "simulate": _run_simulate,
            "verify": _run_verify,
            "apps-cov": lambda c, a, r, o: _run_apps(c, a, r, o, with_pca=False),
            "apps-pca": lambda c, a, r, o: _run_apps(c, a, r, o, with_pca=True),
        }[args.command]
        payload, rows, all_pass = runner(config, args, registry, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report_path, csv_path = _write_outputs(out_dir, args.command, payload, rows)
    print(f"wrote {report_path} and {csv_path}")
    return 0 if all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
