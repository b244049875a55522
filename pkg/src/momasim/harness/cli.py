"""Command-line entry point.

Subcommands::

    simulate          run a scenario and emit aggregate metrics
    sweep-ld          LD capacity vs target rate with LoRa / narrow-band baselines
    sweep-hd          HD rate vs LD load per channel profile
    validate-theorem  interference diagnostics vs antenna count
    codes             dump codebook partition and per-user codes
    baselines         LoRa and narrow-band capacities
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from typing import List, Optional

from ..codes import generate_hadamard
from ..errors import MomaError
from ..metrics import baseline_lora, baseline_narrowband, narrowband_snr
from .config import load_scenario
from .emit import emit, metadata
from .runner import _draw, run_monte_carlo
from .sweeps import ld_gain_reference, sweep_hd_rate, sweep_ld_capacity, theorem_campaign

log = logging.getLogger("momasim")


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default="desk",
                   help="scenario JSON path or built-in name (full, desk); default desk")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--profile", choices=["EPA", "EVA", "FLAT", "IID", "IID_SC"])
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--detector", choices=["auto", "su", "sic"])
    p.add_argument("--combiner", choices=["mrc", "mmse"])
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momasim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario, emit aggregates")
    _common(p)

    p = sub.add_parser("sweep-ld", help="LD capacity vs target rate")
    _common(p)
    p.add_argument("--rates", type=_floats, help="comma-separated target rates (bit/s/Hz)")
    p.add_argument("--gain-policy", choices=["mean", "min"])
    p.add_argument("--verify", action="store_true", help="cross-check by simulation")

    p = sub.add_parser("sweep-hd", help="HD rate vs LD load")
    _common(p)
    p.add_argument("--loads", type=_ints, help="comma-separated LD users per instance")
    p.add_argument("--sic", action="store_true", help="also evaluate MMSE-SIC")

    p = sub.add_parser("validate-theorem", help="interference diagnostics vs M")
    _common(p)
    p.add_argument("--m-grid", type=_ints)
    p.add_argument("--alpha", type=float, help="LD users per antenna (K_LD = alpha*M)")

    p = sub.add_parser("codes", help="dump codebook and assignment")
    _common(p)

    p = sub.add_parser("baselines", help="LoRa and narrow-band capacities")
    _common(p)
    p.add_argument("--rates", type=_floats)
    return parser


def _scenario(args):
    sc = load_scenario(args.config)
    run = {}
    if args.seed is not None:
        run["seed"] = args.seed
    if args.trials is not None:
        run["trials"] = args.trials
    if args.detector is not None:
        run["detector"] = args.detector
    if args.workers is not None:
        run["workers"] = args.workers
    if run:
        sc = sc.with_run(**run)
    ch = {}
    if args.profile is not None:
        ch["profile"] = args.profile
    if args.combiner is not None:
        ch["combiner"] = args.combiner
    if ch:
        sc = sc.with_channel(**ch)
    return sc


def _codes_table(sc):
    pop, assignment, _, _ = _draw(sc, 0)
    n = sc.system.spreading_length
    header = ["user", "class", "code_index"] + [f"c{i}" for i in range(n)]
    rows = [[u.id, sc.plan.classes[u.class_index].label, u.code_index,
             *(float(x) for x in assignment.codes[u.id])] for u in pop.users]
    u = generate_hadamard(n).matrix
    part = assignment.partition
    owner = {c: "HD" for c in part.columns_hd}
    for spec, cols in zip(sc.plan.ld_classes, part.columns_ld):
        owner.update({c: spec.label for c in cols})
    rows += [[f"U{j}", owner[j], j, *(float(x) for x in u[:, j])] for j in range(n)]
    return header, rows


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = _scenario(args)
        if args.command == "simulate":
            obj = run_monte_carlo(sc)
        elif args.command == "sweep-ld":
            if args.gain_policy:
                sc = sc.replace(sweep=dataclasses.replace(sc.sweep, gain_policy=args.gain_policy))
            obj = sweep_ld_capacity(sc, args.rates, verify=args.verify or None)
        elif args.command == "sweep-hd":
            profiles = [args.profile] if args.profile else None
            obj = sweep_hd_rate(sc, args.loads, profiles, include_sic=args.sic)
        elif args.command == "validate-theorem":
            obj = theorem_campaign(sc, args.m_grid, args.alpha).to_table()
        elif args.command == "codes":
            obj = _codes_table(sc)
        else:
            rates = args.rates or list(sc.sweep.rate_grid)
            _, g_min = ld_gain_reference(sc)
            snr = narrowband_snr(sc.system, g_min, sc.sweep.narrowband_power_dbm)
            lora = baseline_lora(sc.sweep.lora_spatial_gain)
            obj = (["target_rate", "lora", "narrowband"],
                   [[r, lora, baseline_narrowband(r, sc.sweep.reserved_scs, sc.sweep.spatial_gain, snr)]
                    for r in rates])
        text = emit(obj, args.format, args.out, metadata(sc, args.command))
    except (MomaError, OSError) as e:
        print(f"momasim: error: {e}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
