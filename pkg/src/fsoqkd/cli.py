"""Batch front end: channel distributions, saturation, key rates and sweeps as CSV.

Every output file starts with ``#`` provenance lines (package and library
versions, config hash, seed, command options). Results do not depend on
``--jobs``; reruns with equal headers are byte-identical.
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import io
import math
import multiprocessing
import os
from pathlib import Path
import sys

import numpy as np
import scipy

from . import __version__, atmosphere
from .channel import CASE_TABLE, ChannelModel, case_study, channel_distribution, optimize_receiver_diameter
from .beam import LinkGeometry
from .config import ConfigError, load_config, task_seed
from .detection import SATURATION_STUDY, saturation_overestimation_db, saturation_sweep
from .distribution import parse_grid_spec
from .optimize import (
    ParamSpace,
    block_length_sweep,
    optimize_gating,
    optimize_protocol,
)
from .security import SKR_FIELDS, ProtocolParams
from .smf import AoLoop

__all__ = ["main", "build_parser"]

FULL_SPACE = ("p_z", "p_mu", "mu", "nu_ratio", "t_gat_over_j")


# --------------------------------------------------------------------------
# argument helpers

def _case_list(text):
    text = text.strip().lower()
    if text == "all":
        return sorted(CASE_TABLE)
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            ids = range(int(a), int(b) + 1)
        else:
            ids = [int(part)] if part else []
        out.extend(ids)
    bad = [c for c in out if c not in CASE_TABLE]
    if not out or bad:
        raise argparse.ArgumentTypeError(f"case ids must lie in 1..8 or be 'all' (got {text!r})")
    return sorted(set(out))


def _name_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise argparse.ArgumentTypeError("empty list")
    return names


def _float_list(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _log_range(text):
    """``a:b:n`` -> n log-spaced values from a to b; otherwise a comma list."""
    if ":" in text:
        try:
            a, b, n = text.split(":")
            vals = np.logspace(math.log10(float(a)), math.log10(float(b)), int(n))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:count, got {text!r}") from None
        return [float(f"{v:.6g}") for v in vals]
    return _float_list(text)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="run seed (overrides [run] seed)")
    common.add_argument("--jobs", type=int, help="worker processes (overrides [run] jobs)")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--atmosphere", help="absorption table CSV (wavelength_nm,value in 1/km)")
    common.add_argument("--radiance", help="sky radiance table CSV; sets the background rate of every scenario")

    p = argparse.ArgumentParser(prog="fsoqkd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fsoqkd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("channel", parents=[common], help="composed channel distributions per case")
    c.add_argument("--case", type=_case_list, default=_case_list("all"))
    c.add_argument("--grid", help="override grid spec, e.g. 10^[-8:0.1:0]")

    s = sub.add_parser("saturation", parents=[common], help="mean-only vs distribution-aware detection rates")
    s.add_argument("--case", type=_case_list, default=_case_list("all"))
    s.add_argument("--points", type=int, default=181, help="mean-shift sweep points over 1e-9..1")

    k = sub.add_parser("skr", parents=[common], help="optimized finite-key SKR per scenario and case")
    k.add_argument("--case", type=_case_list, default=_case_list("all"))
    k.add_argument("--scenario", type=_name_list, default=["A", "B"])
    k.add_argument("--block", type=float, help="key-basis block length (overrides [protocol] block_n_z)")

    w = sub.add_parser("sweep", parents=[common], help="finite-key block-length sweep")
    w.add_argument("--case", type=_case_list, default=[1])
    w.add_argument("--scenario", type=_name_list, default=["A", "B"])
    w.add_argument("--lengths", type=_log_range, default=_log_range("1e5:1e10:11"))
    w.add_argument("--reference", type=float, default=1e7, help="block length of the fixed parameters")

    g = sub.add_parser("gating", parents=[common], help="optimal gate width over SNR and coding error")
    g.add_argument("--case", type=_case_list, default=[1])
    g.add_argument("--scenario", type=_name_list, default=["A"])
    g.add_argument("--snr", type=_float_list, default=[10, 30, 100, 1000])
    g.add_argument("--coding-error", type=_float_list, default=[0.005, 0.0075, 0.01, 0.015])

    d = sub.add_parser("optimize-diameter", parents=[common], help="receiver diameter maximizing mean efficiency")
    d.add_argument("--case", type=_case_list, help="use the link of these cases")
    d.add_argument("--z-km", type=float, help="explicit link: distance")
    d.add_argument("--w0-mm", type=float, help="explicit link: transmit waist")
    d.add_argument("--cn2", type=float, help="explicit link: C_n^2 in m^-2/3")
    d.add_argument("--lambda-nm", type=float, default=1550.0)
    d.add_argument("--n-max", type=int, help="AO correction order (default: the case's)")
    d.add_argument("--d-min-mm", type=float, default=10.0)
    d.add_argument("--d-max-mm", type=float, default=1000.0)
    d.add_argument("--objective", choices=("closed_form", "distribution"), default="closed_form")
    return p


# --------------------------------------------------------------------------
# shared context

class Context:
    def __init__(self, args):
        cfg = load_config(args.config)
        for key in ("seed", "jobs", "out", "atmosphere", "radiance"):
            val = getattr(args, key, None)
            if val is not None:
                setattr(cfg, key, val)
        if cfg.jobs < 1:
            raise ConfigError("jobs: must be >= 1")
        for key in ("atmosphere", "radiance"):
            path = getattr(cfg, key)
            if path and not Path(path).is_file():
                raise ConfigError(f"run.{key}: file not found: {path}")
        if cfg.radiance:
            rad = atmosphere.load_spectral_table(cfg.radiance, "radiance")
            for name, hw in list(cfg.scenarios.items()):
                fov = atmosphere.smf_fov(hw.lambda_nm, 0.1)
                bg = atmosphere.sky_background_rate(rad, hw.lambda_nm, 1.0, fov, 0.1)
                cfg.scenarios[name] = hw.replace(background_rate_hz=bg)
        self.cfg = cfg
        self.args = args
        self.out = Path(cfg.out)

    def header(self, extra=()):
        try:
            import numba
            nb = numba.__version__
        except ImportError:
            nb = "none"
        lines = [
            f"fsoqkd={__version__}",
            f"numpy={np.__version__}",
            f"scipy={scipy.__version__}",
            f"numba={nb}",
            f"command={self.args.command}",
            f"config_sha256={self.cfg.digest}",
            f"seed={self.cfg.seed}",
            f"atmosphere={self.cfg.atmosphere or 'bundled synthetic'}",
            f"radiance={self.cfg.radiance or 'scenario default'}",
            f"options={self.options()}",
        ]
        lines.extend(extra)
        return "".join(f"# {ln}\n" for ln in lines)

    def options(self):
        skip = {"command", "config", "jobs", "out", "seed", "atmosphere", "radiance"}
        return ";".join(f"{k}={v}" for k, v in sorted(vars(self.args).items()) if k not in skip)

    def base_protocol(self, hw):
        p = dict(self.cfg.protocol)
        ratio = p.pop("t_gat_over_j")
        return ProtocolParams(t_gat_s=ratio * hw.jitter_sigma_s, **p)

    def scenario(self, name):
        return self.cfg.scenario(name)

    def run(self, fn, tasks):
        """Ordered map; uses a process pool when ``jobs > 1``."""
        tasks = list(tasks)
        if self.cfg.jobs == 1 or len(tasks) < 2:
            return [fn(*t) for t in tasks]
        # spawn: forking after the OpenMP runtime has started is unsafe
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(self.cfg.jobs, len(tasks)), mp_context=ctx) as pool:
            return list(pool.map(fn, *zip(*tasks)))

    def write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return path


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return v


def _case_dist(case_id, atmosphere_path, grid=None):
    table = atmosphere.load_spectral_table(atmosphere_path) if atmosphere_path else None
    model = case_study(case_id, table)
    if grid:
        model = ChannelModel(model.geom, model.cn2, model.loop, model.eta0, model.atmosphere,
                             parse_grid_spec(grid), model.wind_speed, model.label)
    return model, channel_distribution(model)


def _distributions(ctx, cases):
    res = ctx.run(_case_dist, [(c, ctx.cfg.atmosphere) for c in cases])
    return {c: d for c, (_, d) in zip(cases, res)}


# --------------------------------------------------------------------------
# commands

def cmd_channel(ctx):
    a = ctx.args
    res = ctx.run(_case_dist, [(c, ctx.cfg.atmosphere, a.grid) for c in a.case])
    rows = []
    for c, (model, dist) in zip(a.case, res):
        ref = CASE_TABLE[c][6]
        extra = [f"case={c}", f"channel={model.describe()}", "ao_bandwidth=infinite"]
        ctx.write(f"channel_case{c}.csv", ctx.header(extra) + dist.to_csv_text())
        g = model.geom
        rows.append((c, model.cn2, g.w0_m * 1e3, g.d_rx_m * 1e3, g.z_m / 1e3, model.loop.n_max,
                     model.grid.spec, dist.mean_db(), ref))
        print(f"case {c}: <eta_CH> = {dist.mean_db():7.2f} dB  (reference {ref:g} dB)  grid {model.grid.spec}")
    head = ("case", "cn2", "w0_mm", "d_rx_mm", "z_km", "n_max", "grid", "mean_db", "reference_db")
    ctx.write("channel_summary.csv", ctx.header() + _table(head, rows))


def _saturation_case(dist, hw, proto, points):
    targets = np.logspace(-9, 0, points)
    sweep = saturation_sweep(dist, hw, proto, targets)
    at_mean = saturation_overestimation_db(dist, hw, proto)
    return sweep, at_mean


def cmd_saturation(ctx):
    a = ctx.args
    hw = SATURATION_STUDY
    proto = ctx.base_protocol(hw)
    dists = _distributions(ctx, a.case)
    res = ctx.run(_saturation_case, [(dists[c], hw, proto, a.points) for c in a.case])
    extra = [f"hardware={hw}", f"protocol={proto}"]
    summary = []
    for c, (sweep, at_mean) in zip(a.case, res):
        over = np.array([r[4] for r in sweep])
        i = int(np.argmax(over))
        t, r0, r_mean, r_dist, _ = sweep[i]
        summary.append((c, dists[c].mean_db(), at_mean, over[i], t, r0, r_mean, r_dist))
        ctx.write(f"saturation_case{c}.csv", ctx.header(extra + [f"case={c}"]) + _table(
            ("mean_eta", "r0_over_rsat", "rate_mean_only_hz", "rate_distribution_hz", "overestimation_db"), sweep))
        print(f"case {c}: overestimation {at_mean:.3f} dB at the channel mean, peak {over[i]:.2f} dB "
              f"at R0/Rsat = {r0:.3g}")
    head = ("case", "mean_db", "overestimation_at_mean_db", "peak_overestimation_db", "peak_mean_eta",
            "peak_r0_over_rsat", "peak_rate_mean_only_hz", "peak_rate_distribution_hz")
    ctx.write("saturation_summary.csv", ctx.header(extra) + _table(head, summary))


def _skr_task(dist, hw, base, seed, schedule, starts=()):
    opt = optimize_protocol(dist, hw, base, ParamSpace(free=FULL_SPACE), seed=seed,
                            schedule=schedule, starts=starts)
    return opt.proto, opt.result


def cmd_skr(ctx):
    a = ctx.args
    hws = {s: ctx.scenario(s) for s in a.scenario}
    dists = _distributions(ctx, a.case)
    bases = {}
    for s, hw in hws.items():
        b = ctx.base_protocol(hw)
        bases[s] = b.with_(block_n_z=a.block) if a.block else b
    keys = [(s, c) for s in a.scenario for c in a.case]
    tasks = [(dists[c], hws[s], bases[s], task_seed(ctx.cfg.seed, f"skr/{s}/{c}"), ctx.cfg.anneal)
             for s, c in keys]
    first = dict(zip(keys, ctx.run(_skr_task, tasks)))
    # second pass: polish every case from its neighbours' optima
    tasks = []
    for s, c in keys:
        i = a.case.index(c)
        nb = [first[(s, n)][0] for n in a.case[max(i - 1, 0):i + 2] if n != c]
        tasks.append((dists[c], hws[s], bases[s], first[(s, c)], nb))
    second = dict(zip(keys, ctx.run(_polish_task, tasks)))
    rows = []
    for s, c in keys:
        proto, res = second[(s, c)]
        rows.append((s, c, dists[c].mean_db(), *res.row(), proto.p_z, proto.p_mu, proto.mu, proto.nu,
                     proto.t_gat_s / hws[s].jitter_sigma_s, proto.block_n_z))
        print(f"scenario {s} case {c}: SKR = {res.skr_bps:.4g} b/s  (QBER {res.qber_z:.4f})")
    head = ("scenario", "case", "mean_db", *SKR_FIELDS, "p_z", "p_mu", "mu", "nu", "t_gat_over_j", "block_n_z")
    ctx.write("skr.csv", ctx.header([f"anneal={ctx.cfg.anneal}"]) + _table(head, rows))


def _polish_task(dist, hw, base, current, starts):
    proto, res = current
    if not starts:
        return current
    opt = optimize_protocol(dist, hw, base, ParamSpace(free=FULL_SPACE), method="nelder_mead",
                            starts=tuple(starts) + (proto,))
    return (opt.proto, opt.result) if opt.result.raw_rate > res.raw_rate else current


def _sweep_task(dist, hw, base, lengths, mode, seed, schedule, reference):
    rows, inf_opt = block_length_sweep(dist, hw, base, lengths, mode=mode, seed=seed,
                                       schedule=schedule, reference_length=reference,
                                       space=ParamSpace(free=FULL_SPACE))
    return rows


def cmd_sweep(ctx):
    a = ctx.args
    dists = _distributions(ctx, a.case)
    keys = [(s, c, m) for s in a.scenario for c in a.case for m in ("per_length_opt", "fixed_params")]
    tasks = []
    for s, c, m in keys:
        hw = ctx.scenario(s)
        # both modes share a seed so they start from the same infinite-key optimum
        tasks.append((dists[c], hw, ctx.base_protocol(hw), a.lengths, m,
                      task_seed(ctx.cfg.seed, f"sweep/{s}/{c}") % 2**31, ctx.cfg.anneal, a.reference))
    results = ctx.run(_sweep_task, tasks)
    fields = ("block_n_z", "skr_bps", "skr_inf_bps", "ratio", "p_z", "p_mu", "mu", "nu", "t_gat_s", "feasible")
    rows = []
    for (s, c, m), res in zip(keys, results):
        for r in res:
            rows.append((s, c, m, *(r[f] for f in fields)))
        print(f"scenario {s} case {c} {m}: ratio " + " ".join(f"{r['ratio']:.3f}" for r in res))
    ctx.write("sweep.csv", ctx.header([f"reference_block={a.reference:g}", f"anneal={ctx.cfg.anneal}"])
              + _table(("scenario", "case", "mode", *fields), rows))


def _gating_task(dist, hw, proto, snr, e):
    return optimize_gating(dist, hw, proto, [snr], [e])[0]


def gating_trends(rows):
    """Check both monotone trends on a gating table; returns (snr_ok, error_ok)."""
    table = {(r[0], r[1]): r[2] for r in rows}
    snrs = sorted({r[0] for r in rows})
    errs = sorted({r[1] for r in rows})
    tol = 1e-3
    snr_ok = all(table[(a, e)] <= table[(b, e)] * (1 + tol) for e in errs for a, b in zip(snrs, snrs[1:]))
    err_ok = all(table[(s, b)] <= table[(s, a)] * (1 + tol) for s in snrs for a, b in zip(errs, errs[1:]))
    return snr_ok, err_ok


def cmd_gating(ctx):
    a = ctx.args
    dists = _distributions(ctx, a.case)
    head = ("scenario", "case", "snr", "coding_error", "t_gat_over_j", "skr_bps")
    rows, status = [], []
    for s in a.scenario:
        hw = ctx.scenario(s)
        proto = ctx.base_protocol(hw)
        for c in a.case:
            tasks = [(dists[c], hw, proto, snr, e) for e in a.coding_error for snr in a.snr]
            res = ctx.run(_gating_task, tasks)
            rows.extend((s, c, *r) for r in res)
            snr_ok, err_ok = gating_trends(res)
            status.append(f"trend_{s}_case{c}=snr:{'ok' if snr_ok else 'violated'},"
                          f"coding_error:{'ok' if err_ok else 'violated'}")
            print(f"scenario {s} case {c}: SNR trend {'ok' if snr_ok else 'VIOLATED'}, "
                  f"coding-error trend {'ok' if err_ok else 'VIOLATED'}")
    ctx.write("gating.csv", ctx.header([f"protocol={ctx.base_protocol(ctx.scenario(a.scenario[0]))}",
                                        "noise=dark counts only, gated to 6 J for the SNR"] + status)
              + _table(head, rows))


def _diameter_task(model, d_range, objective):
    return optimize_receiver_diameter(model, d_range, objective=objective)


def cmd_optimize_diameter(ctx):
    a = ctx.args
    explicit = [a.z_km, a.w0_mm, a.cn2]
    d_range = (a.d_min_mm * 1e-3, a.d_max_mm * 1e-3)
    if any(v is not None for v in explicit):
        if a.case or any(v is None for v in explicit):
            raise ConfigError("optimize-diameter: give either --case or all of --z-km, --w0-mm, --cn2")
        table = (atmosphere.load_spectral_table(ctx.cfg.atmosphere) if ctx.cfg.atmosphere
                 else atmosphere.bundled_table("absorption"))
        geom = LinkGeometry(a.lambda_nm * 1e-9, a.z_km * 1e3, a.w0_mm * 1e-3, d_range[0], 0.0)
        template = case_study(1, table)
        models = [("link", ChannelModel(geom, a.cn2, AoLoop(a.n_max if a.n_max is not None else 1),
                                        template.eta0, table, template.grid, label="link"))]
    else:
        table = atmosphere.load_spectral_table(ctx.cfg.atmosphere) if ctx.cfg.atmosphere else None
        models = []
        for c in (a.case or sorted(CASE_TABLE)):
            m = case_study(c, table)
            if a.n_max is not None:
                m = m.with_loop(AoLoop(a.n_max))
            models.append((f"case{c}", m))
    res = ctx.run(_diameter_task, [(m, d_range, a.objective) for _, m in models])
    rows = []
    for (label, m), r in zip(models, res):
        rows.append((label, m.loop.n_max, r.d_opt_m * 1e3, r.mean_db, r.collection_db, r.coupling_db, r.at_boundary))
        print(f"{label}: D_opt = {r.d_opt_m * 1e3:.1f} mm, <eta> = {r.mean_db:.2f} dB"
              + ("  (at search boundary)" if r.at_boundary else ""))
    head = ("link", "n_max", "d_opt_mm", "mean_db", "collection_db", "coupling_db", "at_boundary")
    extra = [f"d_range_mm={a.d_min_mm:g}:{a.d_max_mm:g}", f"objective={a.objective}"]
    ctx.write("diameter.csv", ctx.header(extra) + _table(head, rows))


COMMANDS = {
    "channel": cmd_channel,
    "saturation": cmd_saturation,
    "skr": cmd_skr,
    "sweep": cmd_sweep,
    "gating": cmd_gating,
    "optimize-diameter": cmd_optimize_diameter,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = Context(args)
    except (ConfigError, atmosphere.SpectralTableError) as exc:
        parser.error(str(exc))
    try:
        COMMANDS[args.command](ctx)
    except ConfigError as exc:
        parser.error(str(exc))
    except Exception as exc:  # noqa: BLE001 - report and signal failure
        print(f"fsoqkd {args.command}: error: {exc}", file=sys.stderr)
        if os.environ.get("FSOQKD_TRACEBACK"):
            raise
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
