"""
Command-line interface: ``lpflux {build,flux,verify,norms,report}``.

Settings come from built-in defaults, then an optional YAML file
(``--config``), then the ``LPFLUX_OUT`` / ``LPFLUX_CACHE`` environment
variables, then command-line flags.  Every command writes a CSV table and a
JSON document into the output directory; wall-clock times go to a separate
``timings.json`` so that the other outputs are reproducible byte for byte.

Exit codes: 0 success, 1 a check failed, 2 bad configuration or missing
input, 3 a work budget was exceeded.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import itertools
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import yaml

log = logging.getLogger("lpflux")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

ENV_OUT = "LPFLUX_OUT"
ENV_CACHE = "LPFLUX_CACHE"

DEFAULTS = {
    "field": {
        "eps": "1/16",
        "eps0": "1/16",
        "q_min": None,
        "q_max": 13,
        "amplitude_scale": 1.0,
        "cutoff_order": 1,
        "negative_control": None,
    },
    "flux": {"q_list": None, "max_eps_lam": 32, "target_c": None, "delta": 0.3},
    "verify": {"windows": None, "max_eps_lam": 64},
    "norms": {"q_list": None, "p_list": [2, 3], "oversample": 1.0, "max_grid": 1024, "max_eps_lam": 64},
    "output_dir": "lpflux-out",
    "cache_dir": ".lpflux-cache",
    "threads": None,
    "budget": None,
}


class ConfigError(ValueError):
    pass


class MissingInput(FileNotFoundError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise ConfigError(f"unknown config key {k!r}")
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {k!r} must be a mapping")
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _rat(x, what: str) -> Fraction:
    if isinstance(x, float):
        raise ConfigError(f"{what} must be an exact rational such as '1/16', got float {x!r}")
    try:
        return Fraction(str(x).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad rational for {what}: {x!r}") from exc


@dataclass
class RunConfig:
    raw: dict
    spec: object  # FieldSpec
    flux_q_list: list
    max_eps_lam: int
    target_c: Optional[float]
    delta: float
    verify_windows: list
    norm_q_list: list
    norm_p_list: list
    norm_oversample: float
    norm_max_grid: int
    output_dir: Path
    cache_dir: Path
    threads: Optional[int]
    budget: Optional[int]
    config_hash: str = ""

    def echo(self) -> dict:
        """Resolved settings that determine results (paths and threads excluded)."""
        return {
            "field": self.spec.key(),
            "flux": {"q_list": self.flux_q_list, "max_eps_lam": self.max_eps_lam, "target_c": self.target_c, "delta": self.delta},
            "verify": {"windows": self.verify_windows},
            "norms": {
                "q_list": self.norm_q_list,
                "p_list": self.norm_p_list,
                "oversample": self.norm_oversample,
                "max_grid": self.norm_max_grid,
            },
            "budget": self.budget,
        }


def load_config(args: argparse.Namespace) -> RunConfig:
    from .construction import FieldSpec, InvalidSpec, lam
    from .flux import feasible_qs

    raw = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a mapping")
        raw = _merge(raw, data)
    if os.environ.get(ENV_OUT):
        raw["output_dir"] = os.environ[ENV_OUT]
    if os.environ.get(ENV_CACHE):
        raw["cache_dir"] = os.environ[ENV_CACHE]
    flags = {
        ("field", "eps"): args.eps,
        ("field", "q_min"): args.qmin,
        ("field", "q_max"): args.qmax,
        ("field", "negative_control"): args.negative_control,
        ("flux", "target_c"): args.target_c,
        ("flux", "delta"): args.delta,
    }
    for (sect, key), v in flags.items():
        if v is not None:
            raw[sect][key] = v
    for key, v in (("output_dir", args.out), ("cache_dir", args.cache), ("threads", args.threads), ("budget", args.budget)):
        if v is not None:
            raw[key] = v

    f = raw["field"]
    eps = _rat(f["eps"], "eps")
    eps0 = _rat(f["eps0"], "eps0")
    try:
        spec = FieldSpec(
            eps=eps,
            eps0=eps0,
            q_min=f["q_min"],
            q_max=int(f["q_max"]),
            amplitude_scale=float(f["amplitude_scale"]),
            cutoff_order=int(f["cutoff_order"]),
            negative_control=f["negative_control"],
        )
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from exc

    fx = raw["flux"]
    target_c = None if fx["target_c"] is None else float(fx["target_c"])
    delta = float(fx["delta"])
    if target_c is not None and not delta > 0:
        raise ConfigError("delta must be positive when target_c is set")
    mel = int(fx["max_eps_lam"])
    flux_qs = fx["q_list"]
    flux_qs = feasible_qs(spec, max_eps_lam=mel) if flux_qs is None else [int(q) for q in flux_qs]

    vmax = int(raw["verify"]["max_eps_lam"])
    windows = raw["verify"]["windows"]
    if windows is None:
        hi = max([q for q in spec.qs if spec.eps * lam(q) <= vmax], default=spec.q_min - 1)
        windows = [[spec.q_min, hi]]
    windows = [[int(a), int(b)] for a, b in windows]

    nm = raw["norms"]
    nmax = int(nm["max_eps_lam"])
    norm_qs = nm["q_list"]
    norm_qs = [q for q in spec.qs if spec.eps * lam(q) <= nmax] if norm_qs is None else [int(q) for q in norm_qs]
    p_list = [float(p) for p in nm["p_list"]]

    for q in list(flux_qs) + list(norm_qs) + [v for w in windows for v in w if w[0] <= w[1]]:
        if q not in spec.qs:
            raise ConfigError(f"q = {q} outside field range [{spec.q_min}, {spec.q_max}]")
    if any(not p > 1 for p in p_list):
        raise ConfigError("norm p values must exceed 1")

    threads = None if raw["threads"] is None else int(raw["threads"])
    if threads is not None and threads < 1:
        raise ConfigError("threads must be >= 1")
    budget = None if raw["budget"] is None else int(raw["budget"])
    cfg = RunConfig(
        raw=raw,
        spec=spec,
        flux_q_list=flux_qs,
        max_eps_lam=mel,
        target_c=target_c,
        delta=delta,
        verify_windows=windows,
        norm_q_list=norm_qs,
        norm_p_list=p_list,
        norm_oversample=float(nm["oversample"]),
        norm_max_grid=int(nm["max_grid"]),
        output_dir=Path(raw["output_dir"]),
        cache_dir=Path(raw["cache_dir"]),
        threads=threads,
        budget=budget,
    )
    cfg.config_hash = hashlib.sha256(json.dumps(cfg.echo(), sort_keys=True).encode()).hexdigest()
    return cfg


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return x.item()
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n")


def write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])


def _record_timing(cfg: RunConfig, cmd: str, seconds: float) -> None:
    p = cfg.output_dir / "timings.json"
    try:
        data = json.loads(p.read_text())
    except (OSError, ValueError):
        data = {}
    data[cmd] = seconds
    p.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")


def _field(cfg: RunConfig, spec=None):
    from .cache import BlockCache
    from .construction import build_field

    spec = spec or cfg.spec
    cache = BlockCache(cfg.cache_dir)
    for q in spec.qs:
        cache.warm(spec, q)
    return build_field(spec), cache


# ---------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig) -> int:
    from .cache import BlockCache
    from .construction import build_field, lam

    spec = cfg.spec
    cache = BlockCache(cfg.cache_dir)
    fld = build_field(spec)
    rows, status = [], {}
    for q in spec.qs:
        st = cache.warm(spec, q)
        gen = fld.generation(q)
        e = spec.eps * lam(q)
        counts = [gen.region(i).count for i in (1, 2, 3)]
        side = [spec.side(i) * lam(q) for i in (1, 2, 3)]
        ok = all((s - 1) ** 3 <= n <= (s + 1) ** 3 for s, n in zip(side, counts))
        rows.append([q, gen.j, str(e), *counts, gen.n_modes, ok, "hit" if all(v == "hit" for v in st.values()) else "miss"])
        status[q] = st
        print(f"q={q:3d} plane={gen.j} eps*lam={str(e):>6s} |A1|={counts[0]:8d} |A2|={counts[1]:8d} |A3|={counts[2]:9d} modes={gen.n_modes:10d} cache={rows[-1][-1]}")
    header = ["q", "plane", "eps_lam", "A1", "A2", "A3", "n_modes", "counts_in_bracket", "cache"]
    write_csv(cfg.output_dir / "build.csv", header, rows)
    write_json(
        cfg.output_dir / "build.json",
        {"config_hash": cfg.config_hash, "config": cfg.echo(), "rows": [dict(zip(header[:-1], r[:-1])) for r in rows]},
    )
    print(f"cache: {cache.hits} hits, {cache.misses} misses")
    return EXIT_OK if all(r[7] for r in rows) else EXIT_FAIL


def cmd_flux(cfg: RunConfig) -> int:
    from .construction import build_field
    from .flux import DEFAULT_BUDGET, DecompositionMismatch, decomposition_check

    spec = cfg.spec
    if cfg.target_c is not None:
        spec = spec.with_(target_c=cfg.target_c)
    _field(cfg)  # warm the cache for the unscaled data
    fld = build_field(spec)
    budget = cfg.budget or DEFAULT_BUDGET
    rows, out, ok = [], [], True
    for q in cfg.flux_q_list:
        try:
            fb = decomposition_check(fld, q, max_eps_lam=cfg.max_eps_lam, budget=budget)
            dec_ok = True
        except DecompositionMismatch as exc:
            fb, dec_ok = exc.breakdown, False
        row = fb.as_row()
        row["decomposition_ok"] = dec_ok
        if cfg.target_c is not None:
            row["inside_band"] = cfg.target_c - cfg.delta < fb.pi_total < cfg.target_c + cfg.delta
            ok &= row["inside_band"]
        ok &= dec_ok
        out.append(row)
        print(
            f"q={q:3d} Pi={fb.pi_total:+.6e} local={fb.pi_local:+.6e} nonlocal={fb.pi_nonlocal:+.6e} "
            f"residual={fb.residual:+.2e} trunc<={fb.truncation_bound:.3e}"
            + (f" inside={row['inside_band']}" if cfg.target_c is not None else "")
        )
    header = list(out[0].keys()) if out else ["q"]
    rows = [[r.get(k) for k in header] for r in out]
    write_csv(cfg.output_dir / "flux.csv", header, rows)
    write_json(
        cfg.output_dir / "flux.json",
        {
            "config_hash": cfg.config_hash,
            "config": cfg.echo(),
            "amplitude_scale": spec.amplitude_scale if cfg.target_c is None else fld.spec.amplitude_scale,
            "target_c": cfg.target_c,
            "delta": cfg.delta,
            "rows": out,
            "passed": bool(ok),
        },
    )
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(cfg: RunConfig) -> int:
    from . import verify as V
    from .construction import Field

    spec = cfg.spec
    reports = []
    for lo, hi in cfg.verify_windows:
        if lo > hi:
            log.warning("empty verification window [%d, %d]; nothing to check", lo, hi)
            continue
        wspec = spec.with_(q_min=lo, q_max=hi)
        _field(cfg, wspec)
        fld = Field(wspec)
        qs = list(range(lo, hi + 1))
        reports.append(V.check_bounds(fld))
        reports.extend(V.check_sumset(fld, q) for q in qs)
        for a, b, c in itertools.combinations(qs, 3):
            if len({a % 3, b % 3, c % 3}) == 3:
                reports.append(V.check_windmill(fld, a, b, c))
        reports.append(V.check_near_field(fld, (lo, hi)))
        reports.extend(V.check_sq(fld, q) for q in qs[1:-1])
    passed = all(r.passed for r in reports)
    rows = [[r.name, json.dumps(_jsonable(r.params), sort_keys=True), r.passed, len(r.witnesses)] for r in reports]
    write_csv(cfg.output_dir / "verify.csv", ["check", "params", "passed", "n_witnesses"], rows)
    write_json(
        cfg.output_dir / "verify.json",
        {"config_hash": cfg.config_hash, "config": cfg.echo(), "reports": [r.as_dict() for r in reports], "passed": passed},
    )
    by_name = {}
    for r in reports:
        t = by_name.setdefault(r.name, [0, 0])
        t[0] += 1
        t[1] += not r.passed
    for name, (n, bad) in by_name.items():
        print(f"{name:12s} {n - bad}/{n} passed")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_norms(cfg: RunConfig) -> int:
    from .analysis import GridTooCoarse, besov_seminorm, norm_table
    from .flux import MIN_EPS_LAM

    fld, _ = _field(cfg)
    tab = norm_table(fld, cfg.norm_q_list, cfg.norm_p_list, oversample=cfg.norm_oversample, max_grid=cfg.norm_max_grid)
    tab.to_csv(cfg.output_dir / "norms.csv")
    besov_rows, summary = [], {}
    for p in cfg.norm_p_list:
        s = 3.0 / p - 2.0 / 3.0
        for q in cfg.norm_q_list:
            try:
                _, vals = besov_seminorm(fld, p, s, qs=[q], oversample=cfg.norm_oversample, max_grid=cfg.norm_max_grid)
            except GridTooCoarse:
                log.warning("besov p=%s q=%d skipped: grid over cap", p, q)
                continue
            besov_rows.append([q, p, s, vals[q]])
        feas = [r.q for r in tab.rows if r.p == p and r.eps_lam >= MIN_EPS_LAM]
        sp = tab.spread(p, feas)
        summary[repr(p)] = {"feasible_q": feas, "spread": sp, "spread_below_0.1": sp < 0.1}
    errs = [r.l2_grid_relerr for r in tab.rows if r.l2_grid_relerr is not None]
    l2_ok = all(e < 1e-10 for e in errs)
    write_csv(cfg.output_dir / "besov.csv", ["q", "p", "s", "scaled_shell_norm"], besov_rows)
    rows = [dict(zip(r.FIELDS, [getattr(r, k) for k in r.FIELDS])) for r in tab.rows]
    write_json(
        cfg.output_dir / "norms.json",
        {
            "config_hash": cfg.config_hash,
            "config": cfg.echo(),
            "rows": rows,
            "besov": [dict(zip(["q", "p", "s", "value"], r)) for r in besov_rows],
            "summary": summary,
            "l2_grid_max_relerr": max(errs) if errs else None,
            "passed": l2_ok,
        },
    )
    for r in tab.rows:
        print(f"q={r.q:3d} p={r.p:g} norm={r.norm:.6e} scaled={r.scaled:.6e} ({r.method})")
    for p, sm in summary.items():
        print(f"p={p}: spread over feasible q {sm['feasible_q']} = {sm['spread']:.3f}")
    return EXIT_OK if l2_ok else EXIT_FAIL


def cmd_report(cfg: RunConfig) -> int:
    from . import plots

    out = cfg.output_dir
    parts = {}
    for name in ("build", "flux", "verify", "norms"):
        p = out / f"{name}.json"
        if p.exists():
            parts[name] = json.loads(p.read_text())
    if not parts:
        raise MissingInput(f"no command outputs in {out}; run build/flux/verify/norms first")
    hashes = sorted({v.get("config_hash") for v in parts.values()})
    if len(hashes) > 1:
        log.warning("inputs come from different configurations: %s", hashes)
    pdir = plots.ensure_dir(out / "plots")
    files = []
    if "flux" in parts and parts["flux"]["rows"]:
        rows = parts["flux"]["rows"]
        qs = [r["q"] for r in rows]
        ser = {k: [r[k] for r in rows] for k in ("pi_total", "pi_local", "lower_bracket", "upper_bracket")}
        for k, v in ser.items():
            plots.write_series(pdir / f"flux_{k}.dat", qs, v)
            files.append(f"plots/flux_{k}.dat")
        c, d = parts["flux"].get("target_c"), parts["flux"].get("delta")
        band = None if c is None else (c - d, c + d)
        plots.flux_figure(pdir / "flux.png", qs, ser["pi_total"], ser["pi_local"], ser["lower_bracket"], ser["upper_bracket"], band)
        files.append("plots/flux.png")
    if "norms" in parts and parts["norms"]["besov"]:
        series = {}
        for r in parts["norms"]["besov"]:
            series.setdefault(f"p={r['p']:g}", ([], []))
            series[f"p={r['p']:g}"][0].append(r["q"])
            series[f"p={r['p']:g}"][1].append(r["value"])
        for label, (qs, vals) in sorted(series.items()):
            fn = f"besov_{label.replace('=', '')}.dat"
            plots.write_series(pdir / fn, qs, vals)
            files.append(f"plots/{fn}")
        plots.besov_figure(pdir / "besov.png", series)
        files.append("plots/besov.png")
    summary = {k: bool(v.get("passed", True)) for k, v in parts.items() if k != "build"}
    report = {
        "schema": 1,
        "config_hash": cfg.config_hash,
        "input_config_hashes": hashes,
        "config": cfg.echo(),
        "results": {k: {kk: vv for kk, vv in v.items() if kk not in ("config", "config_hash")} for k, v in parts.items()},
        "summary": summary,
        "passed": all(summary.values()),
        "plot_files": files,
    }
    write_json(out / "report.json", report)
    print(f"report: {out / 'report.json'} ({'PASS' if report['passed'] else 'FAIL'})")
    return EXIT_OK if report["passed"] else EXIT_FAIL


COMMANDS = {"build": cmd_build, "flux": cmd_flux, "verify": cmd_verify, "norms": cmd_norms, "report": cmd_report}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpflux", description="Energy-flux experiments on lattice-supported divergence-free fields.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", metavar="PATH", help="YAML configuration file")
    ap.add_argument("--eps", metavar="RAT", help="blur parameter as an exact rational, e.g. 1/16")
    ap.add_argument("--qmin", type=int, metavar="INT")
    ap.add_argument("--qmax", type=int, metavar="INT")
    ap.add_argument("--target-c", type=float, metavar="REAL", help="calibrate amplitudes to this flux level")
    ap.add_argument("--delta", type=float, metavar="REAL", help="tolerance band around --target-c")
    ap.add_argument("--threads", type=int, metavar="INT", help="worker threads for the triad engine")
    ap.add_argument("--budget", type=int, metavar="INT", help="cap on triad evaluations per flux sum")
    ap.add_argument("--out", metavar="DIR", help=f"output directory (env {ENV_OUT})")
    ap.add_argument("--cache", metavar="DIR", help=f"cache directory (env {ENV_CACHE})")
    ap.add_argument("--negative-control", metavar="NAME", help="test hook: no-rotation, no-leray or shrink-a3")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _set_threads(n: Optional[int]) -> None:
    if n is None:
        return
    if "numba" not in sys.modules:
        os.environ["NUMBA_NUM_THREADS"] = str(n)
        return
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _early_threads(args) -> Optional[int]:
    if args.threads is not None:
        return args.threads
    if args.config:
        try:
            with open(args.config) as fh:
                data = yaml.safe_load(fh) or {}
            t = data.get("threads") if isinstance(data, dict) else None
            return None if t is None else int(t)
        except (OSError, yaml.YAMLError, ValueError, TypeError):
            return None
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    # the thread count must reach numba before its first import
    _set_threads(_early_threads(args))
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _set_threads(cfg.threads)
    from .flux import BudgetExceeded

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](cfg)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _record_timing(cfg, args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
