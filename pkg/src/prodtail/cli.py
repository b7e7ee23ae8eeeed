"""Command-line interface: fit, compare, test-moments, scaling, simulate.

Every stochastic command takes an explicit seed (default 0) that is
recorded in the output; per-group work uses seeds derived by stable
hashing of the group key, so reruns with identical inputs are
byte-identical.  Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, aep, gof, mcculloch, moment_test, panel, scaling, stable
from .errors import (
    DataError,
    InvalidParameterError,
    NumericalError,
    ProdtailError,
    SampleSizeError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

_FLOAT_FMT = "%.12g"


def derive_seed(seed: int, label: str) -> int:
    """Stable per-group seed: hash of the global seed and the group label."""
    digest = hashlib.sha256(f"{seed}|{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63 - 1)


def config_hash(args: argparse.Namespace) -> str:
    skip = {"func", "out", "grid_cache"}  # output locations don't affect content
    payload = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _meta(args: argparse.Namespace) -> dict:
    return {
        "tool_version": __version__,
        "config_hash": config_hash(args),
        "seed": args.seed,
    }


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n")


def _write_table(path: Path, columns: list[str], rows: list[list], meta: dict,
                 fmt: str) -> None:
    sep = {"tsv": "\t", "csv": ","}.get(fmt, "\t")
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {k}={v}" for k, v in sorted(meta.items())]
    lines.append(sep.join(columns))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append(_FLOAT_FMT % v)
            else:
                cells.append(str(v))
        lines.append(sep.join(cells))
    path.write_text("\n".join(lines) + "\n")


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in label)


# ---------------------------------------------------------------------------
# shared pipeline
# ---------------------------------------------------------------------------

def _load_groups(args) -> list[panel.PanelGroup]:
    config = panel.IngestConfig(year_min=args.year_min, year_max=args.year_max)
    result = panel.ingest(args.input, config)
    out = Path(args.out)
    meta = _meta(args)
    _write_table(out / "rejections.csv",
                 ["row", "firm_id", "year", "reason_code"],
                 result.rejections.values.tolist(), meta, "csv")
    _write_json(out / "ingest_summary.json", {
        "meta": meta,
        "records": int(len(result.records)),
        "rejected": int(len(result.rejections)),
        "nulled_counts": result.nulled_counts,
    })
    if result.records.empty:
        raise DataError("no records survived ingestion")
    deflators = panel.load_deflators(args.deflators) if args.deflators else None
    records, coverage = panel.deflate(result.records, deflators)
    if args.deflators:
        _write_json(out / "deflator_coverage.json", {"meta": meta} | coverage)
    records = panel.compute_lp(records)
    records = panel.compute_dlp(records)
    records = panel.add_log_variables(records)
    groups = panel.group_records(records, args.group_by, args.variable,
                                 config, min_n=args.min_n)
    if not groups:
        raise DataError("no groups found")
    return groups


def _fittable(groups: list[panel.PanelGroup]) -> list[panel.PanelGroup]:
    usable = [g for g in groups if not g.below_threshold]
    if not usable:
        raise DataError("no group meets the observation threshold")
    return usable


def _grid(args) -> mcculloch.McCullochGrid:
    return mcculloch.build_grid(cache_path=args.grid_cache)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    groups = _load_groups(args)
    grid = _grid(args)
    out = Path(args.out)
    meta = _meta(args)
    rows = []
    fitted_any = False
    for g in sorted(groups, key=lambda g: g.label):
        if g.below_threshold:
            continue
        fitted_any = True
        seed = derive_seed(args.seed, g.label)
        fit = mcculloch.fit_quantile(g.values, grid, min_n=max(args.min_n or 0, 4))
        if args.mle:
            fit = mcculloch.fit_mle(g.values, fit.params)
        se = mcculloch.bootstrap_se(
            g.values,
            lambda v: mcculloch.fit_quantile(v, grid, min_n=4),
            reps=args.bootstrap,
            seed=seed,
        )
        p = fit.params
        disp = panel.dispersion_metrics(g.values, fitted_alpha=p.alpha)
        payload = {
            "meta": meta,
            "group": {"key": list(g.key), "dimension": g.dimension,
                      "variable": g.variable, "currency": g.currency},
            "n": g.n,
            "negative_share": g.negative_share,
            "method": fit.method,
            "params": {"alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "delta": p.delta},
            "se": {"alpha": se[0], "beta": se[1], "gamma": se[2], "delta": se[3]},
            "seed": seed,
            "dispersion": disp.to_dict(),
        }
        _write_json(out / f"fit_{_slug(g.label)}.json", payload)
        rows.append([g.label, g.n, p.alpha, p.beta, p.gamma, p.delta,
                     se[0], se[1], se[2], se[3]])
    if not fitted_any:
        raise DataError("no group meets the observation threshold")
    _write_table(out / "params.tsv",
                 ["group", "n", "alpha", "beta", "gamma", "delta",
                  "se_alpha", "se_beta", "se_gamma", "se_delta"],
                 rows, meta, "tsv")
    return EXIT_OK


def _stable_fitter(grid):
    def fitter(train: np.ndarray) -> gof.FittedModel:
        fit = mcculloch.fit_quantile(train, grid, min_n=4)
        p = mcculloch.likelihood_safe(fit.params)
        return gof.FittedModel(
            logpdf=lambda x: stable.logpdf(p, x),
            cdf=lambda x: np.array([stable.cdf(p, float(v)) for v in np.atleast_1d(x)]),
            label="levy",
        )
    return fitter


def _aep_fitter():
    def fitter(train: np.ndarray) -> gof.FittedModel:
        fit = aep.aep_fit_lmoments(train, min_n=4)
        p = fit.params
        return gof.FittedModel(
            logpdf=lambda x: aep.aep_logpdf(p, np.asarray(x, dtype=float)),
            cdf=lambda x: np.asarray(aep.aep_cdf(p, np.asarray(x, dtype=float))),
            label="aep",
        )
    return fitter


def cmd_compare(args) -> int:
    groups = _fittable(_load_groups(args))
    grid = _grid(args)
    out = Path(args.out)
    meta = _meta(args)
    fitters = {}
    if args.model in ("levy", "both"):
        fitters["levy"] = _stable_fitter(grid)
    if args.model in ("aep", "both"):
        fitters["aep"] = _aep_fitter()
    rows = []
    for g in sorted(groups, key=lambda g: g.label):
        seed = derive_seed(args.seed, g.label)
        models = {name: f(g.values) for name, f in fitters.items()}
        stats = {}
        for name, model in models.items():
            loglik = float(np.sum(model.logpdf(g.values)))
            stats[name] = {
                "soofi": gof.soofi_id(g.values, model.cdf, trim=args.trim, bins=args.bins),
                "aic": gof.aic(loglik, 4),
                "mean_loglik": loglik / g.n,
            }
        cv = gof.kfold_cv(g.values, fitters, k=args.kfold, reps=args.reps, seed=seed)
        reports = {
            name: gof.GofReport(
                soofi_id=stats[name]["soofi"],
                aic=stats[name]["aic"],
                mean_loglik=stats[name]["mean_loglik"],
                cv_loglik=cv.cv_loglik[name],
                n=g.n,
            ).to_dict()
            for name in stats
        }
        _write_json(out / f"gof_{_slug(g.label)}.json", {
            "meta": meta,
            "group": {"key": list(g.key), "dimension": g.dimension,
                      "variable": g.variable, "currency": g.currency},
            "models": reports,
            "seed": seed,
        })
        row = [g.label, g.n]
        for name in ("levy", "aep"):
            if name in stats:
                row += [cv.cv_loglik[name], stats[name]["soofi"], stats[name]["aic"]]
            else:
                row += ["", "", ""]
        if len(stats) == 2:
            rl_cv = cv.relative_likelihood("levy", "aep")
            rl_aic = gof.relative_likelihood_aic(stats["levy"]["aic"], stats["aep"]["aic"], g.n)
            row += [rl_cv, rl_aic]
        else:
            row += ["", ""]
        row.append(seed)
        rows.append(row)
    ext = "csv" if args.format == "csv" else "tsv"
    _write_table(out / f"comparison.{ext}",
                 ["group", "n",
                  "cv_loglik_levy", "soofi_levy", "aic_levy",
                  "cv_loglik_aep", "soofi_aep", "aic_aep",
                  "rel_likelihood_cv", "rel_likelihood_aic", "seed"],
                 rows, meta, args.format)
    return EXIT_OK


def cmd_test_moments(args) -> int:
    groups = _load_groups(args)
    out = Path(args.out)
    meta = _meta(args)
    orders = [float(p) for p in args.moment_p.split(",")]
    rows = []
    for g in sorted(groups, key=lambda g: g.label):
        for p_order in orders:
            if g.below_threshold:
                rows.append([g.label, g.n, p_order, "", "", "", "skipped"])
                continue
            seed = derive_seed(args.seed, f"{g.label}|p={p_order}")
            config = moment_test.MomentTestConfig(p=p_order, seed=seed)
            res = moment_test.trapani_test(g.values, config, min_n=10)
            rows.append([g.label, g.n, p_order, res.theta, res.p_value, res.seed, "ok"])
    ext = "csv" if args.format == "csv" else "tsv"
    _write_table(out / f"moment_tests.{ext}",
                 ["group", "n", "p", "statistic", "p_value", "seed", "status"],
                 rows, meta, args.format)
    return EXIT_OK


def cmd_scaling(args) -> int:
    groups = _load_groups(args)
    pool = np.concatenate([g.values for g in groups])
    if pool.size < 10 * max(2, args.min_size):
        raise DataError("pooled sample too small for the scaling experiment")
    grid = _grid(args)
    fit = mcculloch.fit_quantile(pool, grid, min_n=4)
    alpha_hat = fit.params.alpha
    sizes = [int(round(s)) for s in np.geomspace(args.min_size, min(args.max_size, pool.size),
                                                 args.n_sizes)]
    sizes = sorted(set(sizes))
    rows_data = scaling.subsample_std_curve(pool, sizes, reps=args.reps_scaling,
                                            seed=args.seed)
    theory = scaling.theory_curve(alpha_hat, fit.params, sizes,
                                  reps=args.theory_reps, seed=derive_seed(args.seed, "theory"))
    meta = dict(_meta(args), alpha_hat=f"{alpha_hat:.6f}")
    rows = [[r.n, r.mean_std, r.q05_std, r.q95_std, float(t)]
            for r, t in zip(rows_data, theory)]
    _write_table(Path(args.out) / "scaling.tsv",
                 ["n", "mean_std", "q05_std", "q95_std", "theory_std"],
                 rows, meta, "tsv")
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = stable.StableParams(args.alpha, args.beta, args.gamma, args.delta_)
    countries = args.countries.split(",")
    y0, y1 = (int(v) for v in args.years.split(":"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nace_pool = ["0111", "2511", "3511", "4120", "4711", "6420", "6201", "8610", "9001"]
    sizes = ["S", "M", "L", "V"]
    rows = []
    for country in countries:
        rng = np.random.default_rng(derive_seed(args.seed, f"sim|{country}"))
        for firm_idx in range(args.firms):
            firm_id = f"{country}{firm_idx:07d}"
            nace = nace_pool[int(rng.integers(len(nace_pool)))]
            size = sizes[int(rng.integers(len(sizes)))]
            for year in range(y0, y1 + 1):
                if rng.random() < args.gap_prob:
                    continue
                lp = stable.sample(params, 1, int(rng.integers(2**62)))[0]
                emp = int(rng.integers(1, 200))
                wages = round(60.0 * emp, 6)
                ebit = round(lp * emp - wages, 6)
                rows.append([firm_id, year, country, "unconsolidated", size, nace,
                             wages, ebit, emp])
    rng = np.random.default_rng(derive_seed(args.seed, "sim|dirty"))
    n_clean = len(rows)
    n_dirty = int(args.dirty_frac * n_clean)
    for _ in range(n_dirty):
        kind = rng.integers(4)
        src = rows[int(rng.integers(n_clean))]
        if kind == 0:      # duplicate firm-year
            rows.append(list(src))
        elif kind == 1:    # negative employment
            r = list(src)
            r[0] = "BAD" + r[0]
            r[8] = -int(rng.integers(1, 10))
            rows.append(r)
        elif kind == 2:    # out-of-window year
            r = list(src)
            r[0] = "OLD" + r[0]
            r[1] = 1980
            rows.append(r)
        else:              # missing firm id
            r = list(src)
            r[0] = ""
            rows.append(r)
    df = pd.DataFrame(rows, columns=["firm_id", "year", "country", "account_type",
                                     "size_class", "nace4", "wages", "ebit", "employment"])
    path = out / "panel.csv"
    df.to_csv(path, index=False)
    _write_json(out / "simulate_meta.json", {
        "meta": _meta(args),
        "params": {"alpha": params.alpha, "beta": params.beta,
                   "gamma": params.gamma, "delta": params.delta},
        "rows": len(df),
        "clean_rows": n_clean,
        "dirty_rows": n_dirty,
        "negative_lp_prob": stable.cdf(params, 0.0),
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prodtail",
        description="Heavy-tailed distribution toolkit for firm productivity panels",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="panel CSV path")
            p.add_argument("--deflators", default=None, help="deflator CSV path")
            p.add_argument("--group-by", default="country-year",
                           choices=sorted(panel.GROUP_THRESHOLDS),
                           help="grouping dimension")
            p.add_argument("--variable", default="lp", choices=panel.VARIABLES)
            p.add_argument("--min-n", type=int, default=None,
                           help="override the group observation threshold")
            p.add_argument("--year-min", type=int, default=2006)
            p.add_argument("--year-max", type=int, default=2015)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", default="tsv", choices=["json", "csv", "tsv"])
        p.add_argument("--grid-cache", default=None,
                       help="path for the quantile-grid cache file")

    p_fit = sub.add_parser("fit", help="fit stable parameters per group")
    add_common(p_fit)
    p_fit.add_argument("--bootstrap", type=int, default=1000,
                       help="bootstrap repetitions for standard errors")
    p_fit.add_argument("--mle", action="store_true",
                       help="refine the quantile fit by maximum likelihood")
    p_fit.set_defaults(func=cmd_fit)

    p_cmp = sub.add_parser("compare", help="model comparison (stable vs AEP)")
    add_common(p_cmp)
    p_cmp.add_argument("--model", default="both", choices=["levy", "aep", "both"])
    p_cmp.add_argument("--kfold", type=int, default=10)
    p_cmp.add_argument("--reps", type=int, default=10,
                       help="independent K-fold repetitions")
    p_cmp.add_argument("--trim", type=float, default=gof.DEFAULT_TRIM)
    p_cmp.add_argument("--bins", type=int, default=gof.DEFAULT_BINS)
    p_cmp.set_defaults(func=cmd_compare)

    p_mom = sub.add_parser("test-moments", help="moment-infiniteness tests per group")
    add_common(p_mom)
    p_mom.add_argument("--moment-p", default="1,2",
                       help="comma-separated moment orders")
    p_mom.set_defaults(func=cmd_test_moments)

    p_sc = sub.add_parser("scaling", help="subsample std curve with theory overlay")
    add_common(p_sc)
    p_sc.add_argument("--reps-scaling", type=int, default=20000,
                      help="subsamples per size")
    p_sc.add_argument("--min-size", type=int, default=100)
    p_sc.add_argument("--max-size", type=int, default=100000)
    p_sc.add_argument("--n-sizes", type=int, default=7)
    p_sc.add_argument("--theory-reps", type=int, default=200,
                      help="simulations calibrating the theory intercept")
    p_sc.set_defaults(func=cmd_scaling)

    p_sim = sub.add_parser("simulate", help="generate a synthetic panel CSV")
    add_common(p_sim, needs_input=False)
    p_sim.add_argument("--alpha", type=float, default=1.36)
    p_sim.add_argument("--beta", type=float, default=0.89)
    p_sim.add_argument("--gamma", type=float, default=14.9)
    p_sim.add_argument("--delta", dest="delta_", type=float, default=42.0)
    p_sim.add_argument("--countries", default="FR")
    p_sim.add_argument("--years", default="2010:2012", help="y0:y1 inclusive")
    p_sim.add_argument("--firms", type=int, default=5000, help="firms per country")
    p_sim.add_argument("--gap-prob", type=float, default=0.0,
                       help="chance a firm-year is missing")
    p_sim.add_argument("--dirty-frac", type=float, default=0.0,
                       help="share of extra malformed/duplicate rows to inject")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError,) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameterError, SampleSizeError, ProdtailError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
