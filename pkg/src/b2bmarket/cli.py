"""Command-line entry points.

Subcommands:
  simulate          run one scenario; write rounds.csv, result.json, figures,
                    the event ledger, and (protocol modes) the transcript
  classify          closed-form regime report for a scenario's sellers
  verify-theorems   sweep the closed-form claims and print a JSON verdict
  audit             structural audit of an exported protocol transcript

Exit codes: 0 on success, 1 on an audit or verification failure, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import equilibrium as eq
from . import harness
from . import pricing as pricing_mod
from .numeric import rat_str

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


def _cmd_simulate(args) -> int:
    config = harness.load_config_file(args.config)
    if args.seed is not None:
        raw = dict(config.raw)
        raw["market"] = dict(raw["market"], seed=args.seed)
        config = harness.load_config(raw)
    result = harness.run_scenario(config, mode=args.mode)
    os.makedirs(args.out, exist_ok=True)
    written = []
    written += harness.export_report(result, "csv", os.path.join(args.out, "rounds.csv"))
    written += harness.export_report(result, "json", os.path.join(args.out, "result.json"))
    ledger_path = os.path.join(args.out, "ledger.jsonl")
    with open(ledger_path, "w", encoding="utf-8") as fh:
        fh.write(result.ledger_jsonl)
    written.append(ledger_path)
    if result.transcript:
        written.append(
            harness.export_transcript(result, os.path.join(args.out, "transcript.jsonl"))
        )
    if not args.no_figures:
        from . import report

        written += report.render_run_figures(result, args.out)
    summary = {
        "mode": result.mode,
        "rounds": config.market.rounds,
        "equality_ok": result.equality_ok,
        "rounds_audited": len(result.audits),
        "leak_flags": len(result.leak_flags),
        "final_ratings": [rat_str(q) for q in result.final_ratings],
        "files": sorted(written),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if result.mode in ("protocol", "both") and not result.equality_ok:
        return EXIT_FAIL
    return EXIT_OK


def _cmd_classify(args) -> int:
    config = harness.load_config_file(args.config)
    rule = config.pricing
    if isinstance(rule, pricing_mod.Continuous):
        print("classification is not defined for continuous pricing", file=sys.stderr)
        return EXIT_CONFIG
    sellers = [(s["sigma"], s["cost"]) for s in config.sellers]
    if isinstance(rule, pricing_mod.Homogeneous):
        p = rule.p
        active = list(range(len(sellers)))
    else:
        if isinstance(rule, pricing_mod.BinaryAdaptive):
            # A seller dodges isolation at the high tier exactly when he can
            # sustain always-high there.
            avoids = {
                i: eq.always_high_condition(c, rule.p_high, sig)
                for i, (sig, c) in enumerate(sellers)
            }
            instance = pricing_mod.binary_reduction(
                rule, {}, config.market.xi, config.market.v_high, config.market.v_low,
                avoids_isolation=avoids,
            )
        else:
            sustain = {}
            for i, (sig, c) in enumerate(sellers):
                price = rule.p_high if rule.tier_of(i) == "H" else rule.p_low
                sustain[i] = eq.max_sustainable_utility(
                    sig, c, price, config.market.v_high, config.market.v_low,
                    config.market.n_buyers,
                )
            instance = pricing_mod.binary_reduction(
                rule, sustain, config.market.xi,
                config.market.v_high, config.market.v_low,
            )
        p = instance.p
        active = sorted(instance.sellers)
    report = eq.classify_equilibrium(
        [sellers[i] for i in active], p, config.policy, config.market.n_buyers
    )
    out = {
        "p": rat_str(p),
        "policy": config.policy.kind,
        "sellers": [
            {
                "seller_id": active[i],
                "regime": entry.regime,
                "sigma_p": rat_str(entry.sigma_p),
                "always_low_bound": rat_str(entry.l_bound),
                "cost": rat_str(entry.cost),
            }
            for i, entry in enumerate(report.per_seller)
        ],
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_verify_theorems(args) -> int:
    grid = None
    if args.grid:
        try:
            with open(args.grid, "r", encoding="utf-8") as fh:
                grid = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read grid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    verdict = harness.verify_theorems(grid)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "theorems.json"), "w", encoding="utf-8") as fh:
            json.dump(verdict, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if not args.no_figures:
            from . import report

            report.render_theorem_figures(args.out)
    print(json.dumps(verdict, indent=2, sort_keys=True))
    return EXIT_OK if verdict["passed"] else EXIT_FAIL


def _cmd_audit(args) -> int:
    verdict = harness.audit_transcript(args.transcript)
    print(json.dumps(verdict, indent=2, sort_keys=True))
    return EXIT_OK if verdict["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="b2bmarket",
        description="Deterministic rated-procurement market simulator and analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario end to end")
    sim.add_argument("--config", required=True, help="scenario JSON file")
    sim.add_argument("--mode", default="both", choices=["oracle", "protocol", "both"])
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sim.set_defaults(func=_cmd_simulate)

    cls = sub.add_parser("classify", help="closed-form regime report")
    cls.add_argument("--config", required=True, help="scenario JSON file")
    cls.set_defaults(func=_cmd_classify)

    ver = sub.add_parser("verify-theorems", help="sweep the closed-form claims")
    ver.add_argument("--grid", default=None, help="JSON grid override file")
    ver.add_argument("--out", default=None, help="directory for the verdict and figures")
    ver.add_argument("--no-figures", action="store_true")
    ver.set_defaults(func=_cmd_verify_theorems)

    aud = sub.add_parser("audit", help="audit an exported protocol transcript")
    aud.add_argument("--transcript", required=True, help="transcript JSONL file")
    aud.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
