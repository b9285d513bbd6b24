"""Command-line interface: generate, run, stats, compare, bench.

Machine-readable output goes only to the paths given on the command line;
logs go to stderr. Exit codes: 0 ok, 2 usage, 3 data/format, 4 runtime
(queue overflow or channel deadlock).
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time

import numpy as np

from . import kernels, netgen, netio, stats as stats_mod
from .engine import (EngineConfig, RunResult, SpikeTrain, read_spikes, run,
                     write_spikes)
from .errors import (ConfigError, DeadlockError, NetworkFormatError,
                     PdmcError, QueueOverflowError, StatsError)
from .params import default_exception, default_params, load_config, validate
from .transfer import TransferConfig

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_params(args):
    if getattr(args, "config", None):
        return load_config(args.config)
    sp, pops, conn = default_params()
    return sp, pops, conn, default_exception()


def _pow2(value: str) -> int:
    x = int(value)
    if x < 1 or x & (x - 1):
        raise argparse.ArgumentTypeError(f"{value} is not a power of two")
    return x


def cmd_generate(args) -> int:
    sp, pops, conn, exc = _load_params(args)
    problems = validate(sp, pops, conn)
    if problems:
        raise ConfigError("; ".join(problems))
    t0 = time.perf_counter()
    net = netgen.generate(sp, pops, conn, scale=args.scale, seed=args.seed,
                          n_classes=args.classes, bucket=args.bucket,
                          exception=exc)
    gen_s = time.perf_counter() - t0
    netio.write_network(net, args.out)
    _log(f"generated {net.n_neurons} neurons (incl. sink), "
         f"{net.store.n_real} synapses in {net.store.n_records} records, "
         f"occupancy {net.store.occupancy:.4f}, {gen_s:.1f}s -> {args.out}")
    return 0


def _engine_config(args, net) -> EngineConfig:
    sc = args.sc if args.sc is not None else net.store.n_classes
    tc = TransferConfig(algorithm=args.algo, h=args.h, sc=sc, lc=args.lc,
                        su=args.su, uw=args.uw, capacity=args.capacity)
    return EngineConfig(exec_mode=args.exec_mode, transfer=tc,
                        precision=args.precision, n_ticks=args.ticks,
                        warmup_ticks=args.warmup, record=True,
                        seed=args.seed, thalamic_mode=args.thalamic,
                        backend=args.backend)


def _bench_record(args, net, cfg: EngineConfig, res: RunResult) -> dict:
    return {
        "algorithm": cfg.transfer.algorithm,
        "exec": cfg.exec_mode,
        "precision": cfg.precision,
        "uw": cfg.transfer.uw,
        "su": cfg.transfer.su if cfg.transfer.algorithm == "gmem" else None,
        "h": cfg.transfer.h if cfg.transfer.algorithm == "horiz" else None,
        "sc": cfg.transfer.sc,
        "lc": cfg.transfer.lc if cfg.transfer.algorithm == "jit" else None,
        "scale": net.scale,
        "seed": cfg.seed,
        "ticks": cfg.n_ticks,
        "backend": res.backend,
        "rtf": res.rtf,
        "wall_seconds": res.wall_seconds,
        "synaptic_events": res.synaptic_events,
        "events_per_second": (res.synaptic_events / res.wall_seconds
                              if res.wall_seconds > 0 else None),
    }


def cmd_run(args) -> int:
    sp, pops, conn, _ = _load_params(args)
    net = netio.read_network(args.net, sim=sp, pops=pops)
    cfg = _engine_config(args, net)
    res = run(net, cfg)
    _log(f"ran {cfg.n_ticks} ticks in {res.wall_seconds:.2f}s "
         f"(rtf {res.rtf:.2f}, {res.spikes.n_events} spikes, "
         f"{res.synaptic_events} synaptic events, backend {res.backend})")
    spike_path = args.out + (".txt" if args.text else ".spk")
    write_spikes(spike_path, res.spikes, text=args.text)
    meta = {"seed": cfg.seed, "scale": net.scale, "net_seed": net.seed,
            "algorithm": cfg.transfer.algorithm, "exec": cfg.exec_mode,
            "precision": cfg.precision, "thalamic": cfg.thalamic_mode}
    report = stats_mod.build_report(res.spikes, meta=meta, bin_ms=args.bin_ms,
                                    sample_size=args.sample,
                                    stats_seed=args.stats_seed)
    with open(args.out + ".stats.json", "w", encoding="utf-8") as fh:
        fh.write(stats_mod.report_to_json(report))
    with open(args.out + ".bench.json", "w", encoding="utf-8") as fh:
        json.dump(_bench_record(args, net, cfg, res), fh)
        fh.write("\n")
    _log(f"wrote {spike_path}, {args.out}.stats.json, {args.out}.bench.json")
    return 0


def _train_from_file(args, net) -> SpikeTrain:
    ticks, neurons = read_spikes(args.spikes)
    n_ticks = args.ticks
    if n_ticks is None:
        n_ticks = int(ticks.max()) + 1 if ticks.size else 1
    return SpikeTrain(ticks=ticks, neurons=neurons, n_ticks=n_ticks,
                      dt=net.sim.dt, warmup_ticks=args.warmup,
                      pop_bounds=list(net.pop_bounds),
                      pop_names=list(net.pop_names))


def cmd_stats(args) -> int:
    sp, pops, conn, _ = _load_params(args)
    net = netio.read_network(args.net, sim=sp, pops=pops)
    train = _train_from_file(args, net)
    meta = {"source": args.spikes}
    report = stats_mod.build_report(train, meta=meta, bin_ms=args.bin_ms,
                                    sample_size=args.sample,
                                    stats_seed=args.stats_seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(stats_mod.report_to_json(report))
    _log(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    with open(args.report_a, "r", encoding="utf-8") as fh:
        a = stats_mod.report_from_json(fh.read())
    with open(args.report_b, "r", encoding="utf-8") as fh:
        b = stats_mod.report_from_json(fh.read())
    table = stats_mod.compare_runs(a, b)
    doc = {"kl": table, "median_by_stat": stats_mod.median_kl_by_stat(table)}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    _log(f"wrote {args.out}")
    return 0


def _csv(value: str) -> list[str]:
    return [v for v in value.split(",") if v]


def cmd_bench(args) -> int:
    sp, pops, conn, _ = _load_params(args)
    net = netio.read_network(args.net, sim=sp, pops=pops)
    algos = _csv(args.algos)
    execs = _csv(args.execs)
    precisions = _csv(args.precisions)
    backends = _csv(args.backends)
    cells = []
    for algo, ex, prec, backend in itertools.product(algos, execs, precisions,
                                                     backends):
        hs = [int(h) for h in _csv(args.hs)] if algo == "horiz" else [args.h]
        lcs = [int(v) for v in _csv(args.lcs)] if algo == "jit" else [args.lc]
        sus = [int(v) for v in _csv(args.sus)] if algo == "gmem" else [1]
        uws = [int(v) for v in _csv(args.uws)]
        for h, lc, su, uw in itertools.product(hs, lcs, sus, uws):
            cells.append((algo, ex, prec, backend, h, lc, su, uw))
    if not cells:
        raise ConfigError("bench grid is empty")
    records = []
    with open(args.out, "w", encoding="utf-8") as fh:
        for algo, ex, prec, backend, h, lc, su, uw in cells:
            tc = TransferConfig(algorithm=algo, h=h,
                                sc=args.sc if args.sc is not None
                                else net.store.n_classes,
                                lc=lc, su=su, uw=uw, capacity=args.capacity)
            cfg = EngineConfig(exec_mode=ex, transfer=tc, precision=prec,
                               n_ticks=args.ticks, warmup_ticks=0,
                               record=False, seed=args.seed,
                               thalamic_mode=args.thalamic, backend=backend)
            res = run(net, cfg)
            rec = _bench_record(args, net, cfg, res)
            records.append(rec)
            fh.write(json.dumps(rec) + "\n")
            fh.flush()
            _log(f"bench {algo}/{ex}/{prec}/{backend} h={h} lc={lc} "
                 f"uw={uw} su={su}: rtf {res.rtf:.3f}")
    records.sort(key=lambda r: r["rtf"])
    _log(f"{'algorithm':>10} {'exec':>6} {'prec':>5} {'backend':>9} "
         f"{'rtf':>8} {'events/s':>12}")
    for rec in records:
        eps = rec["events_per_second"]
        eps_txt = f"{eps:>12.3e}" if eps else f"{'n/a':>12}"
        _log(f"{rec['algorithm']:>10} {rec['exec']:>6} {rec['precision']:>5} "
             f"{rec['backend']:>9} {rec['rtf']:>8.3f} {eps_txt}")
    _log(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pdmc",
                                 description="Cortical microcircuit simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a network and write a PDNET1 file")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--classes", type=_pow2, default=1)
    g.add_argument("--bucket", type=_pow2, default=1)
    g.add_argument("--config")
    g.add_argument("-o", "--out", required=True)
    g.set_defaults(func=cmd_generate)

    def sim_flags(p, bench=False):
        p.add_argument("--net", required=True)
        p.add_argument("--ticks", type=int, default=100_000)
        p.add_argument("--thalamic", choices=("poisson", "dc"), default="poisson")
        p.add_argument("--capacity", type=_pow2, default=65_536)
        p.add_argument("--sc", type=int, default=None,
                       help="expected synapse classes; must match the file")
        p.add_argument("--config")

    r = sub.add_parser("run", help="simulate and write spikes, stats, and a bench record")
    sim_flags(r)
    r.add_argument("--algo", choices=("gmem", "jit", "horiz", "pull"),
                   default="gmem")
    r.add_argument("--h", type=_pow2, default=16)
    r.add_argument("--lc", type=_pow2, default=16)
    r.add_argument("--su", type=int, default=1)
    r.add_argument("--uw", type=int, default=1)
    r.add_argument("--exec", dest="exec_mode", choices=("mono", "multi"),
                   default="mono")
    r.add_argument("--precision", choices=("f32", "f64"), default="f32")
    r.add_argument("--warmup", type=int, default=10_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--backend", choices=("auto", "pure", "compiled"),
                   default="auto")
    r.add_argument("--text", action="store_true",
                   help="write spikes as tick<TAB>neuron text")
    r.add_argument("--bin-ms", type=float, default=2.0)
    r.add_argument("--sample", type=int, default=200)
    r.add_argument("--stats-seed", type=int, default=0)
    r.add_argument("-o", "--out", required=True,
                   help="output prefix (.spk/.txt, .stats.json, .bench.json)")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="compute statistics from a spike file")
    s.add_argument("--spikes", required=True)
    s.add_argument("--net", required=True)
    s.add_argument("--ticks", type=int, default=None,
                   help="run length; default max tick + 1")
    s.add_argument("--warmup", type=int, default=10_000)
    s.add_argument("--bin-ms", type=float, default=2.0)
    s.add_argument("--sample", type=int, default=200)
    s.add_argument("--stats-seed", type=int, default=0)
    s.add_argument("--config")
    s.add_argument("-o", "--out", required=True)
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("compare", help="KL table between two stats reports")
    c.add_argument("report_a")
    c.add_argument("report_b")
    c.add_argument("-o", "--out", required=True)
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="sweep configurations and emit JSON lines")
    sim_flags(b, bench=True)
    b.add_argument("--algos", default="gmem,jit,horiz")
    b.add_argument("--execs", default="mono")
    b.add_argument("--precisions", default="f32")
    b.add_argument("--backends", default="auto")
    b.add_argument("--hs", default="16", help="horizon lengths for horiz")
    b.add_argument("--lcs", default="16", help="lane counts for jit")
    b.add_argument("--sus", default="1", help="synapse unroll hints for gmem")
    b.add_argument("--uws", default="1", help="update width hints")
    b.add_argument("--h", type=_pow2, default=16)
    b.add_argument("--lc", type=_pow2, default=16)
    b.add_argument("--seed", type=int, required=True,
                   help="run seed; explicit so sweeps are reproducible")
    b.add_argument("-o", "--out", required=True, help="JSON-lines output path")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        _log(f"usage error: {e}")
        return EXIT_USAGE
    except (NetworkFormatError, StatsError) as e:
        _log(f"data error: {e}")
        return EXIT_DATA
    except (QueueOverflowError, DeadlockError) as e:
        _log(f"runtime error: {e}")
        return EXIT_RUNTIME
    except OSError as e:
        _log(f"i/o error: {e}")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
