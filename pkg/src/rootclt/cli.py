"""Command-line driver.

Subcommands: ``simulate``, ``kacrice``, ``limits``, ``chaos``, ``report``.
Exit codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import chaos, correlations, kacrice, montecarlo
from .errors import InvalidParameterError, RootCLTError
from .orthopoly import equilibrium_mass, make_family

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# keys written to JSON; execution-only settings (workers, out_dir) are left
# out so reruns are byte-identical across worker counts
_FAMILY_KEYS = ("family", "alpha", "beta", "lambda")
CONFIG_KEYS = {
    "simulate": _FAMILY_KEYS + ("n", "interval", "trials", "seed", "grid_factor", "reference"),
    "kacrice": _FAMILY_KEYS + ("n", "interval"),
    "limits": _FAMILY_KEYS + ("n", "theta", "tau"),
    "chaos": _FAMILY_KEYS + ("n", "interval", "qmax", "tol", "seed", "samples", "contraction_n"),
    "report": ("inputs",),
}
REQUIRED = {
    "simulate": ("family", "n", "interval", "trials", "seed"),
    "kacrice": ("family", "n", "interval"),
    "limits": ("family", "n"),
    "chaos": ("family", "n", "interval"),
    "report": (),
}
DEFAULTS = {
    "family": None, "alpha": 0.0, "beta": 0.0, "lambda": 0.5, "n": None, "interval": None,
    "trials": None, "seed": 0, "workers": os.cpu_count() or 1, "grid_factor": 8,
    "out_dir": ".", "qmax": 8, "tol": 1e-3, "theta": [0.0, 0.3, -0.3],
    "tau": [0.0, 0.5, 1.0, 2.0], "samples": 1_000_000, "contraction_n": [100, 10000],
    "reference": False, "inputs": [],
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing

def _pair(text):
    try:
        lo, hi = (float(v) for v in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}") from None
    return [lo, hi]


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", default=S, help="JSON file mirroring the flags (flags win)")
    common.add_argument("--family", default=S,
                        choices=["chebyshev1", "legendre", "jacobi", "gegenbauer"])
    common.add_argument("--alpha", type=float, default=S)
    common.add_argument("--beta", type=float, default=S)
    common.add_argument("--lambda", dest="lambda", type=float, default=S)
    common.add_argument("--interval", type=_pair, default=S, help="lo,hi")
    common.add_argument("--seed", type=_seed, default=S)
    common.add_argument("--workers", type=int, default=S)
    common.add_argument("--out-dir", dest="out_dir", default=S)
    common.add_argument("--tol", type=float, default=S)

    p = argparse.ArgumentParser(prog="rootclt", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo root counts")
    s.add_argument("--n", type=int, default=S)
    s.add_argument("--trials", type=int, default=S)
    s.add_argument("--grid-factor", dest="grid_factor", type=int, default=S)
    s.add_argument("--reference", action="store_true", default=S,
                   help="also standardize by the Kac-Rice mean and variance")

    k = sub.add_parser("kacrice", parents=[common], help="Kac-Rice mean and variance")
    k.add_argument("--n", type=int, default=S)

    li = sub.add_parser("limits", parents=[common], help="sinc-limit convergence table")
    li.add_argument("--n", type=_int_list, default=S, help="comma-separated degrees")
    li.add_argument("--theta", type=_float_list, default=S)
    li.add_argument("--tau", type=_float_list, default=S)

    c = sub.add_parser("chaos", parents=[common], help="per-level chaos variances")
    c.add_argument("--n", type=int, default=S)
    c.add_argument("--qmax", type=int, default=S)
    c.add_argument("--samples", type=int, default=S, help="contraction Monte Carlo samples")
    c.add_argument("--contraction-n", dest="contraction_n", type=_int_list, default=S)

    r = sub.add_parser("report", parents=[common], help="acceptance summary from prior outputs")
    r.add_argument("inputs", nargs="+", help="JSON outputs of other commands")
    return p


def resolve(args):
    """Merge defaults, the optional config file and explicit flags (in that order)."""
    cfg = dict(DEFAULTS)
    flags = vars(args).copy()
    path = flags.pop("config", None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(loaded.get("interval"), str):
            loaded["interval"] = _pair(loaded["interval"])
        cfg.update(loaded)
    cfg.update(flags)
    missing = [k for k in REQUIRED[cfg["command"]] if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-")
                                                                     for m in missing))
    return cfg


def _family_params(cfg):
    fam = cfg["family"]
    if fam == "jacobi":
        return {"alpha": float(cfg["alpha"]), "beta": float(cfg["beta"])}
    if fam == "gegenbauer":
        return {"lam": float(cfg["lambda"])}
    return {}


def _public_config(cfg):
    keep = {k: cfg[k] for k in CONFIG_KEYS[cfg["command"]] if k in cfg}
    if cfg.get("family") not in ("jacobi",):
        keep.pop("alpha", None), keep.pop("beta", None)
    if cfg.get("family") != "gegenbauer":
        keep.pop("lambda", None)
    return keep


# ---------------------------------------------------------------- output

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".17g")  # + 0.0 turns -0.0 into 0.0
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(path, command, cfg, results, checks=()):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _public_config(cfg),
        "results": results,
        "checks": list(checks),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_clean(doc), indent=2, ensure_ascii=False, allow_nan=False))
        fh.write("\n")


def _check(name, value, target, passed):
    return {"name": name, "value": value, "target": target, "passed": bool(passed)}


def _mass_mean(n, a, b):
    return n * equilibrium_mass(a, b) / math.sqrt(3.0)


# ---------------------------------------------------------------- commands

def cmd_simulate(cfg, out):
    params = _family_params(cfg)
    a, b = cfg["interval"]
    config = montecarlo.SimulationConfig(cfg["family"], cfg["n"], (a, b), cfg["trials"],
                                         cfg["seed"], params, cfg["grid_factor"])
    reference = None
    kr = None
    if cfg["reference"]:
        kr = kacrice.variance_count(config.basis(), cfg["n"], a, b, workers=cfg["workers"])
        reference = (kr.mean, kr.variance)
    run = montecarlo.run_experiment(config, cfg["workers"], reference)
    res = run.summary()
    res.pop("config")
    res["variance_bootstrap_se"] = (
        montecarlo.bootstrap_variance_se(run.counts, cfg["seed"]) if run.variance else None
    )
    if kr is not None:
        res["reference"] = kr.to_dict()
    target = _mass_mean(cfg["n"], a, b)
    checks = [_check("mean within 3% of n nu([a,b])/sqrt(3)", run.mean, target,
                     abs(run.mean - target) <= 0.03 * target)]
    if run.ks_pvalue is not None:
        checks += [
            _check("KS p-value >= 0.01", run.ks_pvalue, 0.01, run.ks_pvalue >= 0.01),
            _check("|skewness| <= 0.15", run.skewness, 0.15, abs(run.skewness) <= 0.15),
            _check("|excess kurtosis| <= 0.3", run.excess_kurtosis, 0.3,
                   abs(run.excess_kurtosis) <= 0.3),
        ]
    write_json(out / "simulate.json", "simulate", cfg, res, checks)
    z = run.standardized if run.standardized is not None else np.full(len(run.counts), np.nan)
    write_csv(out / "simulate_counts.csv", ["trial", "count", "standardized"],
              ((i, int(c), "" if not np.isfinite(s) else float(s))
               for i, (c, s) in enumerate(zip(run.counts, z))))
    var = run.variance
    print(f"mean      {run.mean:.6g}")
    print(f"variance  {var:.6g}" if var is not None else "variance  n/a (one trial)")
    if var is not None:
        print(f"Var/n     {var / cfg['n']:.6g}")
    if run.ks_pvalue is not None:
        print(f"KS p      {run.ks_pvalue:.4g}")
    print(f"wall_time {run.wall_time:.2f}s")
    return EXIT_OK


def cmd_kacrice(cfg, out):
    basis = make_family(cfg["family"], **_family_params(cfg))
    a, b = cfg["interval"]
    res = kacrice.variance_count(basis, cfg["n"], a, b, workers=cfg["workers"])
    checks = []
    if res.mean > 0:
        checks.append(_check("quad_error < 0.01 mean", res.quad_error, 0.01 * res.mean,
                             res.quad_error < 0.01 * res.mean))
    write_json(out / "kacrice.json", "kacrice", cfg, res.to_dict(), checks)
    print(f"mean      {res.mean:.8g}")
    print(f"variance  {res.variance:.8g}")
    print(f"Var/n     {res.c_ab:.8g}")
    print(f"quad_err  {res.quad_error:.3g}")
    return EXIT_OK


LIMIT_FIELDS = ("rbar", "rtilde_prime", "rtilde_doubleprime")


def limits_rows(basis, ns, thetas, taus):
    rows = []
    for n in ns:
        for th in thetas:
            v = correlations.v_n(basis, n, n * th)
            for tau in taus:
                lim = correlations.sinc_limits(th, tau).limits
                # pair centred on the bulk point
                bd = correlations.correlation_bundle(basis, n, n * th - tau / 2, n * th + tau / 2)
                vals = (float(bd.rbar), float(bd.rtp), float(bd.rtpp))
                for name, val, lv in zip(LIMIT_FIELDS, vals, lim):
                    rows.append((n, th, tau, name, val, lv, abs(val - lv)))
            lv = correlations.sinc_limits(th, 0.0).limits[3]
            rows.append((n, th, 0.0, "v", v, lv, abs(v - lv)))
    return rows


def cmd_limits(cfg, out):
    basis = make_family(cfg["family"], **_family_params(cfg))
    ns = cfg["n"] if isinstance(cfg["n"], list) else [cfg["n"]]
    rows = limits_rows(basis, ns, cfg["theta"], cfg["tau"])
    header = ["n", "theta", "tau", "quantity", "computed", "limit", "abs_error"]
    write_csv(out / "limits.csv", header, rows)
    top = max(ns)
    worst = max(r[6] for r in rows if r[0] == top and r[3] != "v")
    vrel = max(r[6] / r[5] for r in rows if r[0] == top and r[3] == "v")
    checks = [
        _check(f"max correlation error at n={top} <= 0.02", worst, 0.02, worst <= 0.02),
        _check(f"max relative v error at n={top} <= 2%", vrel, 0.02, vrel <= 0.02),
    ]
    results = {"rows": [dict(zip(header, r)) for r in rows], "max_abs_error": worst,
               "max_v_relative_error": vrel}
    write_json(out / "limits.json", "limits", cfg, results, checks)
    for n in ns:
        e = max(r[6] for r in rows if r[0] == n and r[3] != "v")
        print(f"n={n:<6d} max |error| {e:.3g}")
    return EXIT_OK


def cmd_chaos(cfg, out):
    basis = make_family(cfg["family"], **_family_params(cfg))
    a, b = cfg["interval"]
    qmax = int(cfg["qmax"])
    levels = list(range(2, qmax + 1))
    sp = chaos.chaos_spectrum(basis, cfg["n"], levels, a, b, tol=cfg["tol"],
                              workers=cfg["workers"])
    partial = np.cumsum(sp.values)
    cb = [chaos.contraction_bound(int(m), b - a, cfg["samples"], cfg["seed"])
          for m in cfg["contraction_n"]]
    rows = [(q, v, e, ps, c) for q, v, e, ps, c in
            zip(levels, sp.values, sp.errors, partial, sp.cutoffs)]
    write_csv(out / "chaos.csv", ["q", "normalized_variance", "quad_error", "partial_sum",
                                  "tau_cutoff"], rows)
    total = float(partial[-1])
    checks = [_check(f"sum q=2..{qmax} in [0.85, 1.05]", total, [0.85, 1.05],
                     0.85 <= total <= 1.05)]
    if len(cb) >= 2:
        checks.append(_check("contraction bound decreasing in n", cb[-1].closed_form,
                             cb[0].closed_form, cb[-1].closed_form < cb[0].closed_form))
    for m, c in zip(cfg["contraction_n"], cb):
        lim = c.closed_form * (1 + 3 * c.mc_std_error)
        checks.append(_check(f"contraction MC <= bound (n={m})", c.mc_estimate, lim,
                             c.mc_estimate <= lim))
    results = {
        "spectrum": sp.to_dict(),
        "partial_sums": partial,
        "contraction": [{"n": int(m), "closed_form": c.closed_form, "mc_estimate": c.mc_estimate,
                         "mc_std_error": c.mc_std_error} for m, c in zip(cfg["contraction_n"], cb)],
    }
    write_json(out / "chaos.json", "chaos", cfg, results, checks)
    for q, v, ps in zip(levels, sp.values, partial):
        print(f"q={q}  {v:.6f}  cumulative {ps:.6f}")
    return EXIT_OK


def _load_inputs(paths):
    docs = []
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(p)
        with open(p, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise RootCLTError(f"{p}: unsupported schema_version {doc.get('schema_version')!r}")
        docs.append((str(p), doc))
    return docs


def _key(cfg, *fields):
    return tuple(json.dumps(cfg.get(f), sort_keys=True) for f in fields)


def report_rows(docs):
    """``(source, check, value, target, passed)`` rows: embedded and cross-file checks."""
    rows = []
    for src, doc in docs:
        for c in doc.get("checks", []):
            rows.append((src, c["name"], c["value"], c["target"], c["passed"]))
    sims = [(s, d) for s, d in docs if d["command"] == "simulate"]
    krs = [(s, d) for s, d in docs if d["command"] == "kacrice"]
    fam = ("family", "alpha", "beta", "lambda")
    for ss, sd in sims:
        for ks, kd in krs:
            if _key(sd["config"], *fam, "n", "interval") != _key(kd["config"], *fam, "n", "interval"):
                continue
            r, k = sd["results"], kd["results"]
            src = f"{ss} + {ks}"
            if r.get("mean_std_error"):
                z = abs(r["mean"] - k["mean"]) / r["mean_std_error"]
                rows.append((src, "MC mean vs quadrature (s.e.)", z, 3.0, z <= 3.0))
            if r.get("variance_bootstrap_se"):
                z = abs(r["variance"] - k["variance"]) / r["variance_bootstrap_se"]
                rows.append((src, "MC variance vs quadrature (bootstrap s.e.)", z, 3.0, z <= 3.0))

    def spread(group, getter, limit, label):
        by = {}
        for s, d in group:
            by.setdefault(_key(d["config"], *fam, "interval"), []).append((s, d))
        for members in by.values():
            ns = {d["config"]["n"] for _, d in members}
            if len(ns) < 2:
                continue
            vals = [getter(d) for _, d in members]
            ratio = max(vals) / min(vals)
            rows.append((" + ".join(s for s, _ in members), label, ratio, limit, ratio <= limit))

    spread([x for x in sims if x[1]["results"].get("variance")],
           lambda d: d["results"]["variance_over_n"], 1.15, "MC Var/n max/min")
    spread(krs, lambda d: d["results"]["c_ab"], 1.10, "quadrature Var/n max/min")

    by_n = {}
    for s, d in krs:
        by_n.setdefault(_key(d["config"], *fam, "n"), []).append((s, d))
    for members in by_n.values():
        for i, (s1, d1) in enumerate(members):
            for s2, d2 in members[i + 1:]:
                (a1, b1), (a2, b2) = d1["config"]["interval"], d2["config"]["interval"]
                if d2["results"]["variance"] <= 0 or equilibrium_mass(a2, b2) <= 0:
                    continue
                got = d1["results"]["variance"] / d2["results"]["variance"]
                want = equilibrium_mass(a1, b1) / equilibrium_mass(a2, b2)
                rel = abs(got / want - 1.0)
                rows.append((f"{s1} + {s2}", "variance ratio vs equilibrium-mass ratio (rel.)",
                             rel, 0.10, rel <= 0.10))
    return rows


def cmd_report(cfg, out):
    try:
        docs = _load_inputs(cfg["inputs"])
    except FileNotFoundError as exc:
        print(f"error: missing input file {exc.args[0]}", file=sys.stderr)
        return EXIT_FAIL
    rows = report_rows(docs)
    write_csv(out / "report.csv", ["source", "check", "value", "target", "passed"],
              [(s, c, json.dumps(_clean(v)), json.dumps(_clean(t)), "PASS" if p else "FAIL")
               for s, c, v, t, p in rows])
    lines = ["# Acceptance report", "", "| source | check | value | target | result |",
             "|---|---|---|---|---|"]
    for s, c, v, t, p in rows:
        lines.append(f"| {s} | {c} | {json.dumps(_clean(v))} | {json.dumps(_clean(t))} | "
                     f"{'PASS' if p else 'FAIL'} |")
    (out / "report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    failed = [r for r in rows if not r[4]]
    for s, c, v, t, p in rows:
        print(f"{'PASS' if p else 'FAIL'}  {c}  [{s}]")
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


_NUMERIC_LIST = re.compile(r"^-[0-9.][0-9eE.+\-,]*$")


def _attach_negative_values(argv):
    """``--interval -0.5,0.5`` -> ``--interval=-0.5,0.5`` (argparse would read a flag)."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NUMERIC_LIST.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


COMMANDS = {"simulate": cmd_simulate, "kacrice": cmd_kacrice, "limits": cmd_limits,
            "chaos": cmd_chaos, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(sys.argv[1:] if argv is None else list(argv))
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        cfg = resolve(args)
        if cfg.get("workers") is not None and int(cfg["workers"]) < 1:
            raise UsageError("--workers must be >= 1")
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg["command"]](cfg, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rootclt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameterError as exc:
        parser.print_usage(sys.stderr)
        print(f"rootclt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RootCLTError, ArithmeticError, ValueError, OSError) as exc:
        print(f"rootclt: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
