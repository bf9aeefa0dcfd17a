"""Command-line front end: ``pinblock decompose | msf | simulate | batch``.

Every command writes ``summary.json`` (embedding the resolved run
configuration) and, where relevant, CSV tables into ``--out``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure,
4 invariant violation.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import hatdecomp, netmodel, report, sbdcore, stability
from .errors import InvariantViolation, PinblockError, ValidationError
from .numkernel import Tolerance

log = logging.getLogger("pinblock")

# synthetic scale-free network used by the ``sf`` preset
SF_NETWORK = {"n": 64, "mean_degree": 4.0, "alpha": 2.5, "seed": 1, "s": 7, "pin_seed": 1}


@dataclass
class RunConfig:
    command: str
    edges: str | None = None
    pins: list = field(default_factory=list)
    seed: int = 0
    tol_rank: float = 1e-10
    tol_zero: float = 1e-8
    preset: str | None = None
    oscillator: dict = field(default_factory=dict)
    gammas: list = field(default_factory=list)
    integration: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    out: str = "."

    def tol(self) -> Tolerance:
        return Tolerance(rank_rel=self.tol_rank, zero_abs=self.tol_zero)

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_seed(arg):
    if arg is not None:
        return int(arg)
    env = os.environ.get("PINBLOCK_SEED")
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValidationError(f"PINBLOCK_SEED must be an integer, got {env!r}") from None


def sf_network(s=None, **overrides):
    cfg = dict(SF_NETWORK, **overrides)
    net = netmodel.gen_static_scale_free(cfg["n"], cfg["mean_degree"], cfg["alpha"], seed=cfg["seed"])
    return netmodel.pick_pins(net, cfg["s"] if s is None else s, seed=cfg["pin_seed"])


def load_network(edges, pins, preset):
    """Network from an edge list and pins, or from a named preset."""
    pins = netmodel.parse_pins(pins) if pins else ()
    if edges:
        net = netmodel.read_edge_list(edges)
    elif preset == "fig2":
        net = netmodel.fixture_fig2()
    elif preset == "fig5":
        net = netmodel.fixture_fig5()
    elif preset == "sf":
        net = sf_network()
    else:
        raise ValidationError("give --edges (with --pins) or --preset fig2|fig5|sf")
    if edges or pins:
        if not pins:
            raise ValidationError("no pinned nodes given (--pins)")
        net = net.with_pins(pins)
    if net.s < 1:
        raise ValidationError("pin set is empty")
    return net


def compare_decompositions(pair, seed=0, tol=None):
    """Run both decompositions and compare their block-size multisets."""
    tol = tol or Tolerance()
    dec = sbdcore.sbd_transform(pair, seed=seed, tol=tol)
    hat = hatdecomp.hat_transform(pair, tol=tol, seed=seed)
    match = dec.size_multiset() == hat.size_multiset()
    return dec, hat, match


def _oscillator(preset):
    return stability.preset(preset if preset in stability.PRESETS else "fig2")


def _gammas(args):
    return stability.default_gammas(args.gamma_min, args.gamma_max, args.gamma_step)


def _params(args):
    return stability.IntegrationParams(dt=args.dt, t_transient=args.t_transient,
                                       t_measure=args.t_span if args.t_span else 20000.0)


def _base_config(args, command) -> RunConfig:
    return RunConfig(command=command, edges=args.edges, pins=list(netmodel.parse_pins(args.pins)),
                     seed=resolve_seed(args.seed), tol_rank=args.tol_rank, tol_zero=args.tol_zero,
                     preset=args.preset, out=str(args.out))


def cmd_decompose(args) -> int:
    cfg = _base_config(args, "decompose")
    tol = cfg.tol()
    net = load_network(args.edges, args.pins, args.preset)
    cfg.pins = list(net.pinned)
    pair = netmodel.build_pair(net)
    dec, hat, match = compare_decompositions(pair, cfg.seed, tol)
    summary = {
        "config": cfg.to_dict(),
        "n": net.n,
        "sbd": report.decomposition_dict(dec),
        "hat": hat.to_dict(),
        "hat_part_sizes": list(hat.sizes),
        "verdict": "MATCH" if match else "MISMATCH",
    }
    report.write_json(Path(args.out) / "summary.json", summary)
    print(f"sbd sizes {dec.sizes}  hat sizes {hat.block_sizes}  verdict {summary['verdict']}")
    if not match:
        raise InvariantViolation(f"block sizes differ: sbd {dec.size_multiset()} vs hat {hat.size_multiset()}")
    return 0


def cmd_msf(args) -> int:
    cfg = _base_config(args, "msf")
    tol = cfg.tol()
    net = load_network(args.edges, args.pins, args.preset)
    cfg.pins = list(net.pinned)
    osc = _oscillator(args.preset)
    gammas = _gammas(args)
    params = _params(args)
    cfg.oscillator, cfg.gammas, cfg.integration = asdict(osc), gammas.tolist(), params.to_dict()
    cfg.extra = {"blocks": args.blocks}
    pair = netmodel.build_pair(net)
    dec = sbdcore.sbd_transform(pair, seed=cfg.seed, tol=tol)
    blocks = stability.blocks_of(dec, undriven_only=args.blocks == "undriven-only",
                                 driven_only=args.blocks == "driven-only")
    if not blocks:
        raise ValidationError(f"no blocks selected by --blocks {args.blocks}")
    curve = stability.gamma_sweep(blocks, osc, gammas, params, jobs=args.jobs, seed=cfg.seed)
    report.write_csv(Path(args.out) / "msf.csv", ["gamma", "block_id", "mle"], report.msf_rows(curve))
    k = curve.largest_driven()
    g2 = None
    if k is not None:
        down = [x for x, d in curve.crossings(k) if d == "down"]
        g2 = down[0] if down else None
    summary = {
        "config": cfg.to_dict(),
        "blocks": [{"block_id": b.block_id, "size": b.size, "driven": b.driven, "class": b.cls}
                   for b in curve.blocks],
        "max_curve_crossings": [{"gamma": x, "direction": d} for x, d in curve.crossings("max")],
        "gamma_star_2": g2,
        "max_mle": curve.max_curve,
    }
    report.write_json(Path(args.out) / "summary.json", summary)
    print(f"crossings {summary['max_curve_crossings']}  gamma*_2 {g2}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _base_config(args, "simulate")
    net = load_network(args.edges, args.pins, args.preset)
    cfg.pins = list(net.pinned)
    osc = _oscillator(args.preset)
    t_span = args.t_span if args.t_span else 5000.0
    cfg.oscillator = asdict(osc)
    cfg.integration = {"dt": args.dt, "t_transient": args.t_transient, "t_span": t_span}
    cfg.extra = {"gamma": args.gamma, "threshold": args.threshold, "identical": args.identical,
                 "spread": args.spread}
    out = stability.simulate_network(net, osc, args.gamma, t_span=t_span, dt=args.dt,
                                     threshold=args.threshold, spread=args.spread, seed=cfg.seed,
                                     t_transient=args.t_transient, identical=args.identical)
    report.write_csv(Path(args.out) / "errors.csv", ["t", "node", "error"], report.sim_rows(out))
    summary = {"config": cfg.to_dict(), "synchronized": out.synchronized, "diverged": out.diverged,
               "tail_max_error": out.tail_max, "final_errors": out.errors[-1]}
    report.write_json(Path(args.out) / "summary.json", summary)
    print(f"synchronized {out.synchronized}  tail max error {out.tail_max:.3g}")
    return 0


def pin_count_sets(seed, trials, n, per_trial):
    """Random pin counts in ``1..n-1`` for each batch trial."""
    rng = np.random.default_rng(seed)
    k = min(per_trial, n - 1)
    return [sorted(rng.choice(np.arange(1, n), size=k, replace=False).tolist()) for _ in range(trials)]


def trial_pairs(index, base_seed, n, p, s_values):
    """Yield ``(s, seed, pair)`` for one batch trial: an ER graph and several pin sets."""
    seed = base_seed * 100003 + index
    net = netmodel.gen_erdos_renyi(n, p, seed=seed)
    for k, s in enumerate(s_values):
        pinned = netmodel.pick_pins(net, int(s), seed=seed * 31 + k)
        yield int(s), seed + k, netmodel.build_pair(pinned)


def _trial(index, base_seed, n, p, s_values, tol):
    rows = []
    pairs = trial_pairs(index, base_seed, n, p, s_values)
    for s in s_values:
        row = {"trial": index, "graph_seed": base_seed * 100003 + index, "s": int(s)}
        try:
            _, seed, pair = next(pairs)
            dec, hat, match = compare_decompositions(pair, seed=seed, tol=tol)
            row.update(sbd=list(dec.size_multiset()), hat=list(hat.size_multiset()), match=match,
                       flags=sorted(set(dec.flags) | set(hat.flags)))
        except PinblockError as exc:
            row.update(error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
            break
        rows.append(row)
    return rows


def cmd_batch(args) -> int:
    cfg = _base_config(args, "batch")
    tol = cfg.tol()
    if args.er_n < 2:
        raise ValidationError("--er-n must be at least 2")
    s_sets = pin_count_sets(cfg.seed, args.trials, args.er_n, args.pins_per_trial)
    cfg.extra = {"trials": args.trials, "er_n": args.er_n, "er_p": args.er_p,
                 "pins_per_trial": args.pins_per_trial, "gamma_stars": args.gamma_stars,
                 "s_values": args.s_values}
    jobs = max(1, args.jobs or (os.cpu_count() or 1))

    def run(i):
        return _trial(i, cfg.seed, args.er_n, args.er_p, s_sets[i], tol)

    if jobs == 1:
        results = [run(i) for i in range(args.trials)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, range(args.trials)))
    rows = [r for rs in results for r in rs]
    done = [r for r in rows if "match" in r]
    matched = sum(r["match"] for r in done)
    summary = {
        "config": cfg.to_dict(),
        "experiments": len(rows),
        "completed": len(done),
        "failed": len(rows) - len(done),
        "matched": matched,
        "match_rate": (matched / len(done)) if done else None,
        "trials": rows,
    }
    if args.gamma_stars:
        summary["gamma_stars"] = _gamma_star_table(args, cfg)
    report.write_json(Path(args.out) / "summary.json", summary)
    print(f"experiments {len(rows)}  matched {matched}/{len(done)}  failed {len(rows) - len(done)}")
    if done and matched != len(done):
        raise InvariantViolation(f"block sizes differ in {len(done) - matched} experiments")
    return 0


def _gamma_star_table(args, cfg):
    osc = stability.preset("sf")
    gammas = _gammas(args)
    params = _params(args)
    table = []
    s_values = [int(x) for x in netmodel.parse_pins(args.s_values)] if args.s_values else [SF_NETWORK["s"]]
    for s in s_values:
        net = sf_network(s=s)
        pair = netmodel.build_pair(net)
        try:
            dec = sbdcore.sbd_transform(pair, seed=cfg.seed, tol=cfg.tol())
            stars = stability.find_gamma_stars(pair, dec, osc, gammas, params, seed=cfg.seed, jobs=args.jobs)
            table.append({"s": s, "gamma_star_1": stars.gamma_star_1, "gamma_star_2": stars.gamma_star_2,
                          "diagnostics": stars.diagnostics})
        except PinblockError as exc:
            table.append({"s": s, "error": f"{type(exc).__name__}: {exc}"})
    return table


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--edges", help="edge list file: 'u v [w]' per line, 1-based")
    common.add_argument("--pins", help="pinned nodes: '1,2,6', a JSON array, or @file.json")
    common.add_argument("--preset", choices=["fig2", "fig5", "sf"],
                        help="built-in network and oscillator configuration")
    common.add_argument("--seed", type=int, default=None, help="random seed (default $PINBLOCK_SEED or 0)")
    common.add_argument("--tol-rank", type=float, default=1e-10, help="relative rank threshold")
    common.add_argument("--tol-zero", type=float, default=1e-8, help="relative structural-zero threshold")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default: logical cores)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--gamma-min", type=float, default=0.0)
    grid.add_argument("--gamma-max", type=float, default=3.0)
    grid.add_argument("--gamma-step", type=float, default=0.05)

    integ = argparse.ArgumentParser(add_help=False)
    integ.add_argument("--dt", type=float, default=0.005, help="RK4 step")
    integ.add_argument("--t-span", type=float, default=None,
                       help="measurement time (msf, default 20000) or run length (simulate, default 5000)")
    integ.add_argument("--t-transient", type=float, default=200.0)

    parser = argparse.ArgumentParser(prog="pinblock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="SBD and four-block decomposition")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("msf", parents=[common, grid, integ], help="per-block MLE sweep over gamma")
    p.add_argument("--blocks", choices=["all", "driven-only", "undriven-only"], default="all")
    p.set_defaults(func=cmd_msf)

    p = sub.add_parser("simulate", parents=[common, integ], help="integrate the full network")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--spread", type=float, default=1.0, help="initial perturbation half-width")
    p.add_argument("--identical", action="store_true", help="start every node on the target")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", parents=[common, grid, integ], help="seeded decomposition trials")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--er-n", type=int, default=20)
    p.add_argument("--er-p", type=float, default=0.15)
    p.add_argument("--pins-per-trial", type=int, default=5, help="random pin counts per graph")
    p.add_argument("--gamma-stars", action="store_true", help="also compare gamma*_1 and gamma*_2 on the sf network")
    p.add_argument("--s-values", help="pin counts for --gamma-stars, e.g. '4,7,10'")
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "trials", 0) < 0:
            raise ValidationError("--trials must be non-negative")
        return args.func(args)
    except PinblockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
