"""Command-line front end: config parsing, experiment orchestration, and
persistence of tables, traces and reports.

Exit codes: 0 ok, 1 usage/config, 2 IO, 3 invalid cache table,
4 incompatible inputs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import _pure
from ._backend import BACKEND
from .analysis import band_energy_curve, paired_feature_error, snr_curve, speedup_report
from .bias import bias_report, simulate_correlated_errors
from .cache import (
    CacheMissError,
    IntervalBoth,
    IntervalSeparate,
    InvalidTableError,
    NoCache,
    TableDriven,
    load_table,
    save_table,
)
from .model import AnalyticDenoiser, GaussianMixturePrior, ToyDiT, ToyDiTConfig
from .numerics import SeededRng
from .sampler import Trace, run_trajectory
from .schedule import ScalingSchedule, ThresholdSchedule, build_linear_schedule
from .tablegen import TableGenConfig, generate_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_TABLE = 3
EXIT_INCOMPATIBLE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


DEFAULT_CONFIG = {
    "schema": 1,
    "model": {
        "kind": "toy-dit",
        "grid": [8, 8, 1],
        "patch": 2,
        "d_model": 32,
        "n_heads": 4,
        "n_blocks": 2,
        "seed": 0,
    },
    "schedule": {"T": 50, "beta_start": 1e-4, "beta_end": 0.02},
    "sampler": {"kind": "ddpm", "steps": None},
    "policy": {"kind": "none", "n": 2, "n_attn": 2, "n_mlp": 2, "path": None},
    "scaling": {"enabled": True, "b_h": 0.98, "b_l": 0.96, "t_thre": 0.4},
    "tablegen": {"n": 8, "a": 0.05, "b": 0.15, "t_thre_norm": 0.4},
    "seeds": {"base": 0, "count": 4},
    "output": {"dir": "out", "snapshot_stride": 1},
}


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()[:16]


def _deep_update(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides: list[str]) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = _deep_update(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        keys = dotted.split(".")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: dict) -> None:
    sch = cfg["schedule"]
    if sch["T"] < 2:
        raise UsageError(f"schedule.T must be >= 2, got {sch['T']}")
    if not 0 < sch["beta_start"] <= sch["beta_end"] < 1:
        raise UsageError("schedule betas must satisfy 0 < start <= end < 1")
    if cfg["sampler"]["kind"] not in ("ddpm", "ddim"):
        raise UsageError(f"unknown sampler kind {cfg['sampler']['kind']!r}")
    if cfg["sampler"]["kind"] == "ddim":
        steps = cfg["sampler"]["steps"]
        if steps is None or not 2 <= int(steps) <= sch["T"]:
            raise UsageError("ddim needs sampler.steps in [2, schedule.T]")
    if cfg["policy"]["kind"] not in ("none", "interval-both", "interval-separate", "table"):
        raise UsageError(f"unknown policy kind {cfg['policy']['kind']!r}")
    if cfg["seeds"]["count"] < 1:
        raise UsageError("seeds.count must be >= 1")
    sc = cfg["scaling"]
    if sc["enabled"] and not 0 < sc["b_l"] <= sc["b_h"] <= 1:
        raise UsageError("scaling requires 0 < b_l <= b_h <= 1")


def build_predictor(cfg: dict, schedule):
    m = cfg["model"]
    grid = tuple(m["grid"])
    if m["kind"] == "toy-dit":
        return ToyDiT(
            ToyDiTConfig(
                grid=grid,
                patch=m["patch"],
                d_model=m["d_model"],
                n_heads=m["n_heads"],
                n_blocks=m["n_blocks"],
                seed=m["seed"],
            )
        )
    if m["kind"] == "analytic":
        p = m.get("prior", {"kind": "standard-normal"})
        if p["kind"] == "standard-normal":
            prior = GaussianMixturePrior.standard_normal(grid)
        elif p["kind"] == "point-mass":
            prior = GaussianMixturePrior.point_mass(np.full(grid, float(p.get("mean", 0.0))))
        elif p["kind"] == "mixture":
            comps = p["components"]
            prior = GaussianMixturePrior(
                weights=tuple(c["weight"] for c in comps),
                means=tuple(np.full(grid, float(c["mean"])) for c in comps),
                variances=tuple(float(c["variance"]) for c in comps),
            )
        else:
            raise UsageError(f"unknown prior kind {p['kind']!r}")
        return AnalyticDenoiser(prior, schedule)
    raise UsageError(f"unknown model kind {m['kind']!r}")


def build_policy(cfg: dict):
    p = cfg["policy"]
    if p["kind"] == "none":
        return NoCache()
    if p["kind"] == "interval-both":
        return IntervalBoth(n=int(p["n"]))
    if p["kind"] == "interval-separate":
        return IntervalSeparate(n_attn=int(p["n_attn"]), n_mlp=int(p["n_mlp"]))
    table_path = p.get("path")
    if not table_path:
        raise UsageError("policy.kind=table requires policy.path")
    try:
        return TableDriven(load_table(table_path))
    except OSError as exc:
        raise OSError(f"cannot read table {table_path}: {exc}") from exc
    except ValueError as exc:
        raise InvalidTableError(str(exc), step=-1) from exc


def build_scaling(cfg: dict) -> ScalingSchedule | None:
    sc = cfg["scaling"]
    if not sc["enabled"]:
        return None
    return ScalingSchedule(b_h=sc["b_h"], b_l=sc["b_l"], t_thre=sc["t_thre"])


def _out_dir(cfg: dict, override: str | None) -> Path:
    out = Path(override if override else cfg["output"]["dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output dir {out} is not writable: {exc}") from exc
    return out


def cmd_gen_table(args) -> int:
    cfg = load_config(args.config, args.set)
    chash = config_hash(cfg)
    schedule = build_linear_schedule(
        cfg["schedule"]["T"], cfg["schedule"]["beta_start"], cfg["schedule"]["beta_end"]
    )
    predictor = build_predictor(cfg, schedule)
    tg = cfg["tablegen"]
    gen_cfg = TableGenConfig(
        T=cfg["schedule"]["T"],
        n=int(tg["n"]),
        scaling=build_scaling(cfg),
        threshold=ThresholdSchedule(a=float(tg["a"]), b=float(tg["b"])),
        t_thre_norm=float(tg["t_thre_norm"]),
        seed=int(cfg["seeds"]["base"]),
    )
    table, provenance = generate_table(predictor, schedule, gen_cfg, workers=args.workers)
    out = _out_dir(cfg, args.out)
    save_table(table, out / "table.json")
    provenance["config_hash"] = chash
    provenance["config"] = cfg
    (out / "provenance.json").write_text(json.dumps(provenance, indent=1))
    hist = table.histogram()
    print(f"wrote {out / 'table.json'} (config {chash})")
    print("tag histogram: " + ", ".join(f"{k}={v}" for k, v in hist.items()))
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = load_config(args.config, args.set)
    chash = config_hash(cfg)
    schedule = build_linear_schedule(
        cfg["schedule"]["T"], cfg["schedule"]["beta_start"], cfg["schedule"]["beta_end"]
    )
    predictor = build_predictor(cfg, schedule)
    policy = build_policy(cfg)
    scaling = build_scaling(cfg)
    out = _out_dir(cfg, args.out)
    base, count = int(cfg["seeds"]["base"]), int(cfg["seeds"]["count"])
    stride = cfg["output"]["snapshot_stride"]

    def one(seed: int) -> Trace:
        return run_trajectory(
            predictor,
            policy,
            scaling,
            cfg["schedule"]["T"],
            seed,
            schedule,
            sampler_kind=cfg["sampler"]["kind"],
            ddim_steps=cfg["sampler"]["steps"],
            snapshot_stride=stride,
        )

    seeds = list(range(base, base + count))
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            traces = list(pool.map(one, seeds))
    else:
        traces = [one(sd) for sd in seeds]
    names = []
    for sd, tr in zip(seeds, traces):
        name = f"seed_{sd}"
        tr.config_hash = chash
        tr.save(out / name)
        names.append(name)
    manifest = {"schema": 1, "config_hash": chash, "config": cfg, "traces": names}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    print(f"wrote {count} traces under {out} (config {chash})")
    return EXIT_OK


def _write_csv(path: Path, header: str, rows, chash: str) -> None:
    lines = [f"# config={chash}", header]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def cmd_analyze(args) -> int:
    trace = Trace.load(args.trace)
    schedule_fp = trace.schedule_fp.split(":")
    T = int(schedule_fp[1].split("=")[1])
    b1, bT = float(schedule_fp[2].split("=")[1]), float(schedule_fp[3].split("=")[1])
    schedule = build_linear_schedule(T, b1, bT)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "snr":
        rows = snr_curve(trace, schedule)
        _write_csv(out, "step,snr", rows, trace.config_hash)
    elif args.kind == "bands":
        rows = band_energy_curve(trace, args.cutoff)
        _write_csv(out, "step,low_l2,high_l2", rows, trace.config_hash)
    elif args.kind == "paired":
        if args.trace2 is None:
            raise UsageError("analyze --kind paired needs --trace2")
        other = Trace.load(args.trace2)
        if trace.pair_key() != other.pair_key():
            print("error: traces are not pairable (seed/shape/schedule differ)", file=sys.stderr)
            return EXIT_INCOMPATIBLE
        steps = (
            [args.step]
            if args.step is not None
            else sorted(set(trace.snapshots) & set(other.snapshots), reverse=True)
        )
        rows = []
        for t in steps:
            _, l1, l2n = paired_feature_error(trace, other, t)
            rows.append((t, l1, l2n))
        _write_csv(out, "step,err_l1,err_l2", rows, trace.config_hash)
    elif args.kind == "speedup":
        if args.trace2 is None:
            raise UsageError("analyze --kind speedup needs --trace2 (the baseline)")
        baseline = Trace.load(args.trace2)
        try:
            rows = speedup_report([trace], baseline, labels=[Path(args.trace).name])
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INCOMPATIBLE
        _write_csv(
            out,
            "label,total_macs,wall_time,speedup,mac_ratio",
            [(r.label, r.total_macs, r.wall_time, r.speedup, r.mac_ratio) for r in rows],
            trace.config_hash,
        )
    else:
        raise UsageError(f"unknown analysis kind {args.kind!r}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_bias_sweep(args) -> int:
    rhos = [float(v) for v in args.rho.split(",")]
    ns = [int(v) for v in args.n.split(",")]
    rows = []
    for rho in rhos:
        for n in ns:
            emp = None
            if args.trials > 0:
                rng = SeededRng(args.seed, stream=len(rows))
                emp = simulate_correlated_errors(rho, n, args.trials, rng)
            r = bias_report(rho, n, emp)
            row = [r.rho, r.N, r.covariance_sum, r.total_var, r.std, r.amplification_ratio]
            if emp is not None:
                row.append(r.empirical_var)
            rows.append(tuple(row))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    header = "rho,N,covariance_sum,total_var,std,amplification"
    if args.trials > 0:
        header += ",empirical_var"
    chash = config_hash({"rho": rhos, "N": ns, "trials": args.trials, "seed": args.seed})
    _write_csv(out, header, rows, chash)
    print(f"wrote {out}")
    return EXIT_OK


def _bench_kernels(out: Path | None) -> list[tuple]:
    rows = []
    key = _pure.derive_key(0, 0)
    backends = [("pure", _pure)]
    if BACKEND == "compiled":
        from . import _kernels

        backends.append(("compiled", _kernels))
    for name, mod in backends:
        n = 200_000 if name == "pure" else 2_000_000
        t0 = time.perf_counter()
        mod.gaussian_block(key, 0, n)
        dt = time.perf_counter() - t0
        rows.append(("gaussian", name, n, n / dt))
    rng = SeededRng(1)
    field = rng.normal((64, 64, 1)).astype(np.complex128)
    for name, mod in backends:
        reps = 20 if name == "pure" else 200
        t0 = time.perf_counter()
        for _ in range(reps):
            ch = np.ascontiguousarray(field[:, :, 0])
            mod.fft1d_batch(ch, False)
        dt = time.perf_counter() - t0
        rows.append(("fft64x64_rows", name, reps, reps / dt))
    return rows


def cmd_bench(args) -> int:
    if args.kind == "kernels":
        rows = _bench_kernels(None)
        print(f"{'kernel':<16}{'backend':<10}{'n':>10}{'ops/s':>16}")
        for kernel, backend, n, rate in rows:
            print(f"{kernel:<16}{backend:<10}{n:>10}{rate:>16.0f}")
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            _write_csv(out, "kernel,backend,n,ops_per_s", rows, config_hash({"bench": "kernels"}))
            print(f"wrote {out}")
        return EXIT_OK
    if args.kind == "policies":
        cfg = load_config(args.config, args.set)
        schedule = build_linear_schedule(
            cfg["schedule"]["T"], cfg["schedule"]["beta_start"], cfg["schedule"]["beta_end"]
        )
        predictor = build_predictor(cfg, schedule)
        T = cfg["schedule"]["T"]
        seed = int(cfg["seeds"]["base"])
        policies = [("no-cache", NoCache()), ("interval-2", IntervalBoth(2)), ("interval-4", IntervalBoth(4))]
        traces = [
            run_trajectory(predictor, pol, build_scaling(cfg), T, seed, schedule, snapshot_stride=0)
            for _, pol in policies
        ]
        rows = speedup_report(traces, traces[0], labels=[name for name, _ in policies])
        print(f"{'policy':<14}{'macs':>14}{'time(s)':>10}{'speedup':>9}{'mac_ratio':>11}")
        for r in rows:
            print(f"{r.label:<14}{r.total_macs:>14}{r.wall_time:>10.4f}{r.speedup:>9.2f}{r.mac_ratio:>11.3f}")
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            _write_csv(
                out,
                "label,total_macs,wall_time,speedup,mac_ratio",
                [(r.label, r.total_macs, r.wall_time, r.speedup, r.mac_ratio) for r in rows],
                config_hash(cfg),
            )
            print(f"wrote {out}")
        return EXIT_OK
    raise UsageError(f"unknown bench kind {args.kind!r}")


def make_parser() -> _Parser:
    p = _Parser(prog="sepcache", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run config; omitted fields use defaults")
        sp.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override a config field, e.g. --set schedule.T=20")
        sp.add_argument("--out", help="output directory override")
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("gen-table", help="generate a cache table (greedy, n samples)")
    common(sp)
    sp.set_defaults(fn=cmd_gen_table)

    sp = sub.add_parser("sample", help="run seeded trajectories, write traces")
    common(sp)
    sp.set_defaults(fn=cmd_sample)

    sp = sub.add_parser("analyze", help="compute a CSV report from traces")
    sp.add_argument("--kind", required=True, choices=["snr", "bands", "paired", "speedup"])
    sp.add_argument("--trace", required=True, help="trace directory")
    sp.add_argument("--trace2", help="second trace dir (paired/speedup)")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--step", type=int, help="restrict paired error to one step")
    sp.add_argument("--cutoff", type=float, default=0.25, help="band split radius")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("bias-sweep", help="closed-form (rho, N) variance table")
    sp.add_argument("--rho", default="0,0.8", help="comma-separated rho values")
    sp.add_argument("--n", default="1,5", help="comma-separated N values")
    sp.add_argument("--trials", type=int, default=0, help="Monte-Carlo trials (0 = closed form only)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_bias_sweep)

    sp = sub.add_parser("bench", help="kernel backend or cache policy benchmark")
    sp.add_argument("--kind", required=True, choices=["kernels", "policies"])
    sp.add_argument("--config", help="run config for --kind policies")
    sp.add_argument("--set", action="append", default=[])
    sp.add_argument("--out", help="optional CSV output")
    sp.set_defaults(fn=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidTableError as exc:
        print(f"invalid cache table at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_TABLE
    except CacheMissError as exc:
        print(f"cache miss at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_TABLE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
