"""Batch driver: ``schwinger {plan,verify,estimate,compare} --config FILE``.

Config files are flat ``key = value`` text (an optional ``[sweep]`` header
is accepted).  Lists are comma separated.  Command-line flags override
file values.  Exit codes: 0 success, 2 configuration error, 3 infeasible
plan or failed verification.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .costs import CSV_COLUMNS, SynthesisModel, compare, ip_total, pf2_total
from .dyson import LN2, certify_segment, dyson_series_matrix, truncation_tail_bound
from .errors import CapacityError, DomainError, InfeasiblePlanError, SchwingerError
from .model import (
    ModelParams,
    build_gauss_operator,
    build_hamiltonian,
    build_quench_state,
    norm_bounds,
    split_interaction,
)
from .oracle import (
    exact_evolution,
    expectation_trajectory,
    interaction_picture_unitary,
    leakage_norm,
    spectral_norm,
    unitarity_residual,
)
from .planner import cutoff_at_time, gamma_bounds, lambda0_sweep, leakage_bound, make_plan, t_min
from .trotter import measured_trotter_error, pf2_operator, trotter_bound

EXIT_OK, EXIT_CONFIG, EXIT_FAIL = 0, 2, 3
# measured errors are compared with bounds up to this floating-point floor
NUMERIC_FLOOR = 1e-12
VERIFY_SCHEMA = "schwinger-verify/1"
VERIFY_COLUMNS = ("schema", "n_sites", "lambda", "x", "mu", "t", "check", "detail", "measured", "bound",
                  "status")


class ConfigError(SchwingerError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SweepConfig:
    x: tuple = (0.1,)
    mu: tuple = (1.0,)
    rho: tuple = (0.5,)
    t: tuple = (1.0,)
    t_absolute: bool = False
    eps: tuple = (1e-2,)
    n0: int = 8
    lambda0: tuple | None = None
    method: str = "both"
    variant: str = "both"
    sorted: str = "both"
    alpha_mode: str = "sites"
    collisions: bool = True
    synthesis_a: float = 3.067
    synthesis_b: float = 9.2
    # verification grid (absolute times, small lattices)
    n_sites: tuple = (2,)
    lam: tuple = (2,)
    r: tuple = (1, 2, 4, 8, 16)
    gamma: int = 0
    k_override: int | None = None
    checks: tuple = ("trotter", "dyson", "leakage", "gauss", "unitarity")
    max_dim: int = 4096
    workers: int = 1
    out: str | None = None

    @property
    def synthesis(self) -> SynthesisModel:
        return SynthesisModel(self.synthesis_a, self.synthesis_b)


_FLOAT_LISTS = {"x", "mu", "rho", "t", "eps"}
_INT_LISTS = {"lambda0", "n_sites", "r"}
_CHOICES = {"method": ("pf2", "ip", "both"), "variant": ("pga", "mult", "both"),
            "sorted": ("true", "false", "both"), "alpha_mode": ("sites", "exact")}
_KEY_ALIASES = {"rho_density": "rho", "lambda": "lam", "t_abs": "t"}


def _floats(raw: str, key: str, allow_zero: bool = False) -> tuple:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: empty list")
    try:
        vals = tuple(float(s) for s in items)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if any(not ((v > 0 or (allow_zero and v == 0)) and math.isfinite(v)) for v in vals):
        raise ConfigError(f"{key}: values must be positive and finite")
    return vals


def _ints(raw: str, key: str) -> tuple:
    vals = _floats(raw, key)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{key}: values must be integers")
    return tuple(int(v) for v in vals)


def _bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def parse_config(text: str) -> SweepConfig:
    """Parse flat ``key = value`` text into a validated :class:`SweepConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if not text.lstrip().startswith("["):
        text = "[sweep]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    if parser.sections() != ["sweep"]:
        raise ConfigError("config must contain a single [sweep] section")
    kw = {}
    for key, raw in parser["sweep"].items():
        if key == "t_abs":
            kw["t_absolute"] = True
        name = _KEY_ALIASES.get(key, key)
        if name in _FLOAT_LISTS:
            # x = 0 is meaningful for verification (no interaction); planning rejects it later
            kw[name] = _floats(raw, key, allow_zero=(name == "x"))
        elif name in _INT_LISTS or name == "lam":
            kw[name] = _ints(raw, key)
        elif name in _CHOICES:
            val = raw.strip().lower()
            if val not in _CHOICES[name]:
                raise ConfigError(f"{key}: expected one of {_CHOICES[name]}, got {raw!r}")
            kw[name] = val
        elif name in ("collisions", "t_absolute"):
            kw[name] = _bool(raw, key)
        elif name in ("n0", "gamma", "k_override", "max_dim", "workers"):
            try:
                kw[name] = int(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
        elif name in ("synthesis_a", "synthesis_b"):
            try:
                kw[name] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
        elif name == "checks":
            kw[name] = tuple(s.strip() for s in raw.split(",") if s.strip())
        elif name == "out":
            kw[name] = raw.strip()
        else:
            raise ConfigError(f"unknown key {key!r}")
    cfg = SweepConfig(**kw)
    return validate_config(cfg)


def validate_config(cfg: SweepConfig) -> SweepConfig:
    if any(e >= 1 for e in cfg.eps):
        raise ConfigError("eps: values must be below 1")
    if any(r > 1 for r in cfg.rho):
        raise ConfigError("rho: values must lie in (0, 1]")
    if cfg.n0 < 2:
        raise ConfigError("n0 must be at least 2")
    if cfg.workers < 1 or cfg.max_dim < 1:
        raise ConfigError("workers and max_dim must be positive")
    unknown = set(cfg.checks) - {"trotter", "dyson", "leakage", "gauss", "unitarity"}
    if unknown:
        raise ConfigError(f"unknown checks {sorted(unknown)}")
    try:
        cfg.synthesis
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# execution helpers


def _run_pool(fn, tasks, workers: int) -> list:
    """Map ``fn`` over ``tasks``; results come back in task order regardless of scheduling."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _methods(cfg):
    return ("pf2", "ip") if cfg.method == "both" else (cfg.method,)


def _variants(cfg):
    return ("pga", "mult") if cfg.variant == "both" else (cfg.variant,)


def _sorts(cfg):
    return {"both": (True, False), "true": (True,), "false": (False,)}[cfg.sorted]


def _grid_points(cfg: SweepConfig):
    """Planner grid points ``(x, mu, rho, t, eps, lambda0)`` in deterministic order."""
    for x, mu, rho, eps in itertools.product(sorted(cfg.x), sorted(cfg.mu), sorted(cfg.rho), sorted(cfg.eps)):
        lams = cfg.lambda0 if cfg.lambda0 is not None else lambda0_sweep(mu)
        for lam in sorted(lams):
            for tv in sorted(cfg.t):
                t = tv if cfg.t_absolute else tv * t_min(rho, x)
                yield (x, mu, rho, t, eps, lam, gamma_bounds(rho, mu, lam).empty)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _plan_kwargs(cfg):
    return {"alpha_mode": cfg.alpha_mode, "collisions": cfg.collisions}


# ---------------------------------------------------------------------------
# plan


def _plan_task(args):
    point, method, cfg = args
    x, mu, rho, t, eps, lam, _ = point
    base = {"x": x, "mu": mu, "rho_density": rho, "t": t, "eps": eps, "lambda0": lam, "method": method}
    try:
        plan = make_plan(x, mu, rho, t, eps, cfg.n0, method, lam, **_plan_kwargs(cfg))
    except (InfeasiblePlanError, DomainError) as exc:
        return dict(base, status="infeasible", reason=str(exc))
    return dict(base, status="ok", plan=plan.to_record())


def cmd_plan(cfg: SweepConfig) -> tuple[int, str]:
    tasks = [(pt, m, cfg) for pt in _grid_points(cfg) for m in _methods(cfg)]
    records = _run_pool(_plan_task, tasks, cfg.workers)
    text = "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
    ok = any(r["status"] == "ok" for r in records)
    return (EXIT_OK if ok else EXIT_FAIL), text


# ---------------------------------------------------------------------------
# estimate / compare


def _estimate_task(args):
    point, cfg = args
    x, mu, rho, t, eps, lam, _ = point
    reports = []
    try:
        if "pf2" in _methods(cfg):
            reports.append(pf2_total(make_plan(x, mu, rho, t, eps, cfg.n0, "pf2", lam, **_plan_kwargs(cfg)),
                                     cfg.synthesis))
        if "ip" in _methods(cfg):
            ip = make_plan(x, mu, rho, t, eps, cfg.n0, "ip", lam, **_plan_kwargs(cfg))
            reports += [ip_total(ip, v, s, cfg.synthesis) for v in _variants(cfg) for s in _sorts(cfg)]
    except (InfeasiblePlanError, DomainError):
        return []
    winner = ""
    pf2 = [r for r in reports if r.method == "pf2"]
    ips = [r for r in reports if r.method != "pf2"]
    if pf2 and ips:
        winner = "ip" if min(r.total_t for r in ips) < pf2[0].total_t else "pf2"
    return [r.csv_row(winner) for r in reports]


def cmd_estimate(cfg: SweepConfig) -> tuple[int, str]:
    points = list(_grid_points(cfg))
    chunks = _run_pool(_estimate_task, [(pt, cfg) for pt in points], cfg.workers)
    rows = [row for chunk in chunks for row in chunk]
    return (EXIT_OK if rows else EXIT_FAIL), _csv_text(CSV_COLUMNS, rows)


def _compare_task(args):
    (x, mu, rho, eps), cfg = args
    ts = cfg.t
    try:
        return compare([x], mu, ts, [eps], cfg.n0, rho, t_in_units_of_tmin=not cfg.t_absolute,
                       lambda0_grid=cfg.lambda0, model=cfg.synthesis, plan_kwargs=_plan_kwargs(cfg))
    except (InfeasiblePlanError, DomainError):
        return None


def cmd_compare(cfg: SweepConfig) -> tuple[int, str, list]:
    keys = list(itertools.product(sorted(cfg.x), sorted(cfg.mu), sorted(cfg.rho), sorted(cfg.eps)))
    results = _run_pool(_compare_task, [(k, cfg) for k in keys], cfg.workers)
    rows, diags = [], []
    for k, res in zip(keys, results):
        if res is None:
            continue
        rows += res.csv_rows()
        diags += [dict(d, mu=k[1], rho_density=k[2]) for d in res.diagnostics]
    return (EXIT_OK if rows else EXIT_FAIL), _csv_text(CSV_COLUMNS, rows), diags


# ---------------------------------------------------------------------------
# verify


def _verify_point(args):
    """All requested checks at one ``(N, Lambda, x, mu, t)``; returns report rows.

    The Dyson check works on one segment of length ``min(t, ln 2 / ||V||)``,
    the longest segment the segmented algorithm would use.
    """
    (n, lam, x, mu, t), cfg = args
    base = {"schema": VERIFY_SCHEMA, "n_sites": n, "lambda": lam, "x": x, "mu": mu, "t": t}
    rows = []

    def add(check, detail, measured, bound, ok=None):
        if ok is None:
            ok = measured <= bound + NUMERIC_FLOOR
        rows.append(dict(base, check=check, detail=detail, measured=f"{measured:.6e}",
                         bound="" if bound is None else f"{bound:.6e}", status="PASS" if ok else "FAIL"))

    def skip(check, reason):
        rows.append(dict(base, check=check, detail=reason, measured="", bound="", status="SKIP"))

    try:
        p = ModelParams(x, mu, n, lam)
    except DomainError as exc:
        skip("params", str(exc))
        return rows
    if p.hilbert_dim > cfg.max_dim:
        skip("all", f"capacity: dim {p.hilbert_dim} > max_dim {cfg.max_dim}")
        return rows
    terms = split_interaction(p)
    if "trotter" in cfg.checks:
        for r in sorted(cfg.r):
            err = measured_trotter_error(p, t, r, cfg.max_dim, terms)
            bound = trotter_bound(p, t, r)
            add("trotter", f"r={r}", err, bound)
    if "unitarity" in cfg.checks:
        res = unitarity_residual(exact_evolution(terms.full(), t, cfg.max_dim))
        add("unitarity", "exact", res, 1e-10)
        res = unitarity_residual(pf2_operator(terms, t, max(cfg.r), max_dim=cfg.max_dim))
        add("unitarity", f"pf2 r={max(cfg.r)}", res, 1e-10)
    if "dyson" in cfg.checks:
        nb = norm_bounds(p)
        t_seg = min(t, LN2 / nb.v_norm) if nb.v_norm > 0 else t
        u_i = interaction_picture_unitary(p, t_seg, cfg.max_dim)
        for eps in sorted(cfg.eps):
            for col in (False, True):
                label = f"t_seg={t_seg:.6g} eps1=eps2={eps:g} {'collisions' if col else 'no-collisions'}"
                try:
                    c = certify_segment(nb.v_norm, nb.h0_norm, t_seg, eps, eps, col)
                    if cfg.k_override is not None:
                        c = replace(c, K=cfg.k_override, k_branch="override")
                    err = spectral_norm(u_i - dyson_series_matrix(p, c, max_dim=cfg.max_dim))
                except CapacityError as exc:
                    skip("dyson", f"{label}: {exc}")
                    continue
                add("dyson", f"{label} K={c.K} M={c.M}", err, 2 * eps)
                if cfg.k_override is not None:
                    tail = truncation_tail_bound(nb.v_norm, t_seg, c.K)
                    add("dyson_truncation", f"K={c.K}", err, tail + eps)
    if "leakage" in cfg.checks:
        eps_cut = min(cfg.eps)
        cut = cutoff_at_time(lam, x, t, eps_cut)
        big = p.replace(lambda_cutoff=cut.lambda_t + 1)
        try:
            leak = leakage_norm(p, big, t, cut.lambda_t, cfg.max_dim)
            bound = leakage_bound(x, t, cut.delta)
            add("leakage", f"Delta={cut.delta} Lambda(t)={cut.lambda_t}", leak, bound)
        except CapacityError as exc:
            skip("leakage", f"capacity: {exc}")
    if "gauss" in cfg.checks and n >= 3:
        try:
            state = build_quench_state(p, cfg.gamma)
        except DomainError as exc:
            skip("gauss", str(exc))
        else:
            h = build_hamiltonian(p)
            times = np.linspace(0.0, t, 11)
            drift = max(float(np.max(np.abs(expectation_trajectory(h, build_gauss_operator(p, r), state, times,
                                                                    cfg.max_dim))))
                        for r in range(1, n - 1))
            add("gauss", f"gamma={cfg.gamma}", drift, 1e-8)
    return rows


def cmd_verify(cfg: SweepConfig) -> tuple[int, str]:
    points = list(itertools.product(sorted(cfg.n_sites), sorted(cfg.lam), sorted(cfg.x), sorted(cfg.mu),
                                    sorted(cfg.t)))
    chunks = _run_pool(_verify_point, [(pt, cfg) for pt in points], cfg.workers)
    rows = [row for chunk in chunks for row in chunk]
    failed = any(r["status"] == "FAIL" for r in rows)
    return (EXIT_FAIL if failed else EXIT_OK), _csv_text(VERIFY_COLUMNS, rows)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schwinger", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "verify", "estimate", "compare"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="flat key = value config file")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--max-dim", type=int, dest="max_dim")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--method", choices=_CHOICES["method"])
        sp.add_argument("--variant", choices=_CHOICES["variant"])
        sp.add_argument("--sorted", choices=_CHOICES["sorted"], dest="sorted_flag")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        overrides = {k: v for k, v in (("out", args.out), ("max_dim", args.max_dim), ("workers", args.workers),
                                       ("method", args.method), ("variant", args.variant),
                                       ("sorted", args.sorted_flag)) if v is not None}
        cfg = validate_config(replace(cfg, **overrides))
    except (OSError, ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "plan":
        code, text = cmd_plan(cfg)
    elif args.command == "estimate":
        code, text = cmd_estimate(cfg)
    elif args.command == "verify":
        code, text = cmd_verify(cfg)
    else:
        code, text, diags = cmd_compare(cfg)
        diag_text = json.dumps(diags, sort_keys=True, indent=1) + "\n"
        if cfg.out and cfg.out != "-":
            _write(diag_text, cfg.out + ".diagnostics.json")
        else:
            sys.stderr.write(diag_text)
    _write(text, cfg.out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
