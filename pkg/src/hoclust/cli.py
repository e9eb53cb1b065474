"""Command line interface: ``hoclust {gen,detect,recover,reduce,mcmc,phase}``.

All randomness flows from ``--seed`` through per-subcommand streams, so a
repeated invocation writes byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from hoclust.detection import chc_detect, rohc_detect
from hoclust.errors import HoclustError
from hoclust.harness import ExperimentConfig, export, phase_grid
from hoclust.io import dump_json, read_tensor, write_ten
from hoclust.metropolis import ChainConfig, CliqueState, run_chain
from hoclust.models import (
    ChcParams,
    Hypergraph,
    RohcParams,
    Support,
    sample_chc,
    sample_hypergraph,
    sample_rohc,
)
from hoclust.recovery import aggregated_svd_recover, chc_search, power_iteration_recover, rohc_search, threshold_recover
from hoclust.reductions import hpc_to_chc_detection, hpc_to_rohc, hpds_to_chc
from hoclust.rng import RngStream

# stream ids per subcommand
_STREAM = {"gen": 1, "detect": 2, "recover": 3, "reduce": 4, "mcmc": 5, "phase": 6}


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _expand(values, d):
    if len(values) == 1 and d:
        return values * d
    return values


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def cli_default_W(shape) -> float:
    """Slowly diverging sum-test cutoff ``sqrt(2 log log prod n)`` (0 when ``prod n <= e``)."""
    return math.sqrt(2 * math.log(math.log(math.prod(shape)))) if math.prod(shape) > math.e else 0.0


def _read_graph(path) -> Hypergraph:
    return Hypergraph.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------- commands

def cmd_gen(a) -> int:
    stream = RngStream(a.seed, (_STREAM["gen"],))
    if a.model in ("er", "hpc", "hpds"):
        G = sample_hypergraph(a.model, a.N, a.d, stream, q=a.q, kappa=a.kappa, q1=a.q1, q2=a.q2)
        _emit(dump_json(G.to_json()), a.out)
        return 0
    if not a.out:
        raise HoclustError("tensor models need --out file.ten")
    n = _expand(_ints(a.n), a.d)
    k = _expand(_ints(a.k), len(n))
    if a.model == "chc":
        params = ChcParams(n, k, a.lam)
        Y, S = sample_chc(params, a.hypothesis, stream)
        meta = {"lam": a.lam}
    else:
        params = RohcParams(n, k, a.mu, style=a.style)
        Y, S = sample_rohc(params, a.hypothesis, stream)
        meta = {"mu": a.mu, "style": a.style}
    write_ten(a.out, Y)
    side = {"model": a.model, "hypothesis": a.hypothesis, "params": {"n": list(n), "k": list(k), **meta},
            "support": None if S is None else S.to_json(), "seed": a.seed}
    _sidecar(a.out).write_text(dump_json(side), encoding="utf-8")
    return 0


def cmd_detect(a) -> int:
    Y = read_tensor(a.inp)
    k = _expand(_ints(a.k), Y.ndim)
    stream = RngStream(a.seed, (_STREAM["detect"],))
    if a.model == "chc":
        W = a.W if a.W is not None else cli_default_W(Y.shape)
        out = chc_detect(Y, k, a.lam, W=W, regime=a.regime)
    else:
        out = rohc_detect(Y, k, a.mu, c_thresh=a.c_thresh, regime=a.regime, rng=stream)
    _emit(dump_json(out.to_json()), a.out)
    return 0


def cmd_recover(a) -> int:
    Y = read_tensor(a.inp)
    stream = RngStream(a.seed, (_STREAM["recover"],))
    k = _expand(_ints(a.k), Y.ndim) if a.k else None
    if a.alg in ("search", "rohc-search") and k is None:
        raise HoclustError("--k is required for search")
    if a.alg == "search":
        res = chc_search(Y, k)
    elif a.alg == "rohc-search":
        res = rohc_search(Y, k, a.mu, stream)
    elif a.alg == "threshold":
        res = threshold_recover(Y)
    elif a.alg == "power":
        res = power_iteration_recover(Y, a.model, a.t_max, stream)
    else:
        res = aggregated_svd_recover(Y, stream)
    obj = res.to_json()
    status = 0
    if a.truth:
        side = json.loads(Path(a.truth).read_text(encoding="utf-8"))
        truth = None if side.get("support") is None else Support.from_json(side["support"])
        obj["match"] = res.matches(truth)
        status = 0 if obj["match"] else 1
    _emit(dump_json(obj), a.out)
    return status


def cmd_reduce(a) -> int:
    G = _read_graph(a.inp)
    stream = RngStream(a.seed, (_STREAM["reduce"],))
    if a.map == "hpc-rohc":
        rep = hpc_to_rohc(G, a.ell, stream)
    elif a.map == "hpc-chc":
        if a.n_target is None:
            raise HoclustError("--n-target is required for hpc-chc")
        rep = hpc_to_chc_detection(G, a.n_target, a.ell, stream)
    else:
        rep = hpds_to_chc(G, a.rho, stream)
    write_ten(a.out, rep.tensor)
    report = a.report or _sidecar(a.out)
    Path(report).write_text(dump_json(rep.to_json()), encoding="utf-8")
    return 0


def _chain_task(args):
    G, cfg, init, seed, c = args
    return {"chain": c, **run_chain(G, cfg, init, RngStream(seed, (_STREAM["mcmc"], c)))}


def cmd_mcmc(a) -> int:
    G = _read_graph(a.inp)
    cfg = ChainConfig(a.fugacity, a.max_steps, a.target)
    init = CliqueState.of(G, _ints(a.init) if a.init else ())
    tasks = [(G, cfg, init, a.seed, c) for c in range(a.chains)]
    if a.jobs > 1 and a.chains > 1:
        with ProcessPoolExecutor(max_workers=a.jobs) as ex:
            runs = list(ex.map(_chain_task, tasks))
    else:
        runs = [_chain_task(t) for t in tasks]
    _emit(dump_json(runs), a.out)
    return 0


def cmd_phase(a) -> int:
    obj = json.loads(Path(a.config).read_text(encoding="utf-8"))
    if a.seed is not None:
        obj["seed"] = a.seed
    obj["jobs"] = a.jobs
    if a.force:
        obj["force"] = True
    D = phase_grid(ExperimentConfig.from_json(obj))
    fmt = a.format or ("json" if str(a.out).endswith(".json") else "csv")
    export(D, fmt, a.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hoclust", description="High-order clustering experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample a tensor instance or a hypergraph")
    g.add_argument("--model", required=True, choices=["chc", "rohc", "er", "hpc", "hpds"])
    g.add_argument("--n", default="20", help="comma-separated dims (one value repeats --d times)")
    g.add_argument("--k", default="3", help="comma-separated support sizes")
    g.add_argument("--d", type=int, default=3)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--mu", type=float, default=1.0)
    g.add_argument("--style", default="equal", choices=["equal", "perturbed"])
    g.add_argument("--hypothesis", default="planted", choices=["planted", "null"])
    g.add_argument("--N", type=int, default=20)
    g.add_argument("--kappa", type=int)
    g.add_argument("--q", type=float, default=0.5)
    g.add_argument("--q1", type=float)
    g.add_argument("--q2", type=float)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("detect", help="run a detection test on a tensor file")
    d.add_argument("--model", required=True, choices=["chc", "rohc"])
    d.add_argument("--regime", default="stat", choices=["stat", "poly", "statistical", "polynomial"])
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--k", required=True)
    d.add_argument("--lambda", dest="lam", type=float, default=1.0)
    d.add_argument("--mu", type=float, default=1.0)
    d.add_argument("--W", type=float, help="sum-test cutoff (default sqrt(2 log log prod n))")
    d.add_argument("--c-thresh", dest="c_thresh", type=float, default=1.0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_detect)

    r = sub.add_parser("recover", help="estimate the planted support of a tensor file")
    r.add_argument("--alg", required=True, choices=["search", "rohc-search", "threshold", "power", "agg-svd"])
    r.add_argument("--in", dest="inp", required=True)
    r.add_argument("--model", default="chc", choices=["chc", "rohc"])
    r.add_argument("--k")
    r.add_argument("--mu", type=float, default=1.0)
    r.add_argument("--t-max", dest="t_max", type=int)
    r.add_argument("--truth", help="sidecar JSON written by gen; sets the exit status")
    r.add_argument("--out")
    r.set_defaults(func=cmd_recover)

    rd = sub.add_parser("reduce", help="map a hypergraph to a tensor instance")
    rd.add_argument("--map", required=True, choices=["hpc-rohc", "hpc-chc", "hpds-chc"])
    rd.add_argument("--in", dest="inp", required=True)
    rd.add_argument("--ell", type=int, default=0)
    rd.add_argument("--n-target", dest="n_target", type=int)
    rd.add_argument("--rho", type=float, default=0.5)
    rd.add_argument("--out", required=True)
    rd.add_argument("--report")
    rd.set_defaults(func=cmd_reduce)

    m = sub.add_parser("mcmc", help="run Metropolis clique chains")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--fugacity", type=float, default=1.0)
    m.add_argument("--target", type=int, default=0)
    m.add_argument("--max-steps", dest="max_steps", type=int, default=10**5)
    m.add_argument("--chains", type=int, default=1)
    m.add_argument("--init", help="comma-separated initial clique")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mcmc)

    ph = sub.add_parser("phase", help="run a phase-diagram grid from a JSON config")
    ph.add_argument("--config", required=True)
    ph.add_argument("--out", required=True)
    ph.add_argument("--format", choices=["csv", "json"])
    ph.add_argument("--force", action="store_true")
    ph.set_defaults(func=cmd_phase)

    for sp in (g, d, r, rd, m, ph):
        sp.add_argument("--seed", type=int, default=None if sp is ph else 0)
        sp.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HoclustError as exc:
        print(f"hoclust: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
