"""Scenario configuration, orchestration, and result persistence.

A scenario is one JSON document: market sizes and valuations, per-buyer and
per-seller parameters, a pricing rule, a punishment policy, and regulation
settings.  Numbers are decimal strings parsed to exact rationals, so a
(config, seed) pair reproduces byte-identical output on any platform.

``run_scenario`` drives the round loop in one of three modes: oracle (the
trusted rating path only), protocol (the encrypted path runs alongside), or
both (ditto, plus the per-round equality audit is required to pass).
``verify_theorems`` sweeps the closed-form regime machinery and reports one
verdict per claim.  Results export to a fixed-schema CSV and a versioned
JSON document that round-trips through the loader.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction

from . import equilibrium as eq
from . import market as market_mod
from . import pricing as pricing_mod
from . import punishment as punishment_mod
from .numeric import ONE, ZERO, rat, rat_str
from .regulation import FeeSchedule, ProtocolBridge, dishonesty_fee

SCHEMA_VERSION = 1
CSV_HEADER = "t,seller_id,price,I_T,I_Q,Q,sales_count"


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

@dataclass
class ScenarioConfig:
    market: market_mod.MarketConfig
    buyers: list[dict]
    sellers: list[dict]
    pricing: object
    policy: object
    nu: Fraction
    raw: dict = field(default_factory=dict)


def _need(raw: dict, key: str, where: str):
    if key not in raw:
        raise ConfigError(f"{where}: missing field {key!r}")
    return raw[key]


def _rational(raw, where: str) -> Fraction:
    try:
        return rat(raw)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _strategy_from(raw: dict, where: str, rounds: int):
    kind = _need(raw, "kind", where)
    if kind == "always_high":
        return market_mod.AlwaysHigh()
    if kind == "always_low":
        return market_mod.AlwaysLow()
    if kind == "periodic":
        k = _need(raw, "k", where)
        if not isinstance(k, int) or k < 1:
            raise ConfigError(f"{where}.k: need an integer >= 1")
        return market_mod.Periodic(k)
    if kind == "scripted":
        qualities = _need(raw, "qualities", where)
        if len(qualities) < rounds:
            raise ConfigError(f"{where}.qualities: script shorter than the run ({rounds} rounds)")
        try:
            return market_mod.Scripted(qualities)
        except market_mod.MarketError as exc:
            raise ConfigError(f"{where}.qualities: {exc}") from None
    raise ConfigError(f"{where}.kind: unknown strategy {kind!r}")


def _pricing_from(raw: dict, where: str, n_sellers: int):
    kind = _need(raw, "kind", where)
    if kind == "homogeneous":
        return pricing_mod.Homogeneous(_rational(_need(raw, "p", where), f"{where}.p"))
    if kind in ("binary_nonadaptive", "binary_adaptive"):
        p_h = _rational(_need(raw, "p_high", where), f"{where}.p_high")
        p_l = _rational(_need(raw, "p_low", where), f"{where}.p_low")
        epsilon = _rational(_need(raw, "epsilon", where), f"{where}.epsilon")
        if kind == "binary_nonadaptive":
            assignment = _need(raw, "assignment", where)
            if len(assignment) != n_sellers or any(a not in ("H", "L") for a in assignment):
                raise ConfigError(f"{where}.assignment: need one 'H'/'L' per seller")
            return pricing_mod.BinaryNonAdaptive(p_h, p_l, epsilon, tuple(assignment))
        alpha = _need(raw, "alpha", where)
        if not isinstance(alpha, int) or alpha < 1:
            raise ConfigError(f"{where}.alpha: need an integer >= 1")
        return pricing_mod.BinaryAdaptive(p_h, p_l, epsilon, alpha)
    if kind == "continuous":
        return pricing_mod.Continuous(
            _rational(_need(raw, "p_high", where), f"{where}.p_high"),
            _rational(_need(raw, "p_low", where), f"{where}.p_low"),
        )
    raise ConfigError(f"{where}.kind: unknown pricing rule {kind!r}")


def _policy_from(raw: dict, where: str):
    kind = _need(raw, "kind", where)
    try:
        if kind == "grim":
            return punishment_mod.GrimTrigger()
        if kind == "tit_for_tat":
            return punishment_mod.TitForTat()
        if kind == "limited":
            return punishment_mod.Limited(_need(raw, "alpha", where))
        if kind == "threshold":
            return punishment_mod.Threshold(
                _rational(_need(raw, "threshold", where), f"{where}.threshold"),
                _need(raw, "alpha", where),
            )
    except punishment_mod.PunishmentError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.kind: unknown punishment policy {kind!r}")


def load_config(raw: dict) -> ScenarioConfig:
    """Validate a config document; every module invariant is re-checked."""
    if raw.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"version: expected {SCHEMA_VERSION}")
    m = _need(raw, "market", "config")
    try:
        config = market_mod.MarketConfig(
            n_buyers=_need(m, "n_buyers", "market"),
            n_sellers=_need(m, "n_sellers", "market"),
            xi=_rational(_need(m, "xi", "market"), "market.xi"),
            tau=_rational(_need(m, "tau", "market"), "market.tau"),
            tau_bar=_rational(_need(m, "tau_bar", "market"), "market.tau_bar"),
            v_high=_rational(_need(m, "v_high", "market"), "market.v_high"),
            v_low=_rational(_need(m, "v_low", "market"), "market.v_low"),
            rounds=_need(m, "rounds", "market"),
            seed=_need(m, "seed", "market"),
        )
    except market_mod.MarketError as exc:
        raise ConfigError(f"market: {exc}") from None
    buyers_raw = _need(raw, "buyers", "config")
    sellers_raw = _need(raw, "sellers", "config")
    if len(buyers_raw) != config.n_buyers:
        raise ConfigError(
            f"buyers: {len(buyers_raw)} entries for n_buyers={config.n_buyers}"
        )
    if len(sellers_raw) != config.n_sellers:
        raise ConfigError(
            f"sellers: {len(sellers_raw)} entries for n_sellers={config.n_sellers}"
        )
    buyers = []
    for i, b in enumerate(buyers_raw):
        where = f"buyers[{i}]"
        delta = _rational(_need(b, "delta", where), f"{where}.delta")
        theta = _rational(_need(b, "theta", where), f"{where}.theta")
        if not config.tau < delta < ONE:
            raise ConfigError(f"{where}.delta: must sit in (tau, 1)")
        if not ZERO <= theta <= ONE:
            raise ConfigError(f"{where}.theta: must sit in [0, 1]")
        buyers.append({"delta": delta, "theta": theta})
    sellers = []
    for i, s in enumerate(sellers_raw):
        where = f"sellers[{i}]"
        sigma = _rational(_need(s, "sigma", where), f"{where}.sigma")
        cost = _rational(_need(s, "cost", where), f"{where}.cost")
        if not ZERO < sigma < ONE:
            raise ConfigError(f"{where}.sigma: must sit in (0, 1)")
        if not cost > ZERO:
            raise ConfigError(f"{where}.cost: must be positive")
        strategy = _strategy_from(_need(s, "strategy", where), f"{where}.strategy", config.rounds)
        sellers.append({"sigma": sigma, "cost": cost, "strategy": strategy})
    pricing_rule = _pricing_from(_need(raw, "pricing", "config"), "pricing", config.n_sellers)
    try:
        pricing_mod.validate_rule(pricing_rule, config.v_high, config.v_low)
    except pricing_mod.PricingError as exc:
        raise ConfigError(f"pricing: {exc}") from None
    policy = _policy_from(_need(raw, "punishment", "config"), "punishment")
    reg = raw.get("regulation", {})
    nu = _rational(reg.get("nu", "0.05"), "regulation.nu")
    if not ZERO < nu <= ONE:
        raise ConfigError("regulation.nu: must sit in (0, 1]")
    return ScenarioConfig(config, buyers, sellers, pricing_rule, policy, nu, raw)


def load_config_file(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return load_config(raw)


# --------------------------------------------------------------------------
# Scenario execution
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    config: ScenarioConfig
    mode: str
    rows: list[dict]
    final_ratings: list[Fraction]
    outcomes: list
    audits: list
    equality_ok: bool
    leak_flags: list[str]
    fee: Fraction
    u_max: Fraction
    transcript: list
    seller_stats: list[dict]
    ledger_jsonl: str = ""


def build_market(config: ScenarioConfig) -> market_mod.MarketState:
    buyers = [
        market_mod.BuyerState(delta=b["delta"], theta=b["theta"])
        for b in config.buyers
    ]
    sellers = [
        market_mod.SellerState(sigma=s["sigma"], cost=s["cost"], strategy=s["strategy"])
        for s in config.sellers
    ]
    return market_mod.MarketState(
        config.market, buyers, sellers, config.pricing, config.policy
    )


def default_u_max(config: ScenarioConfig) -> Fraction:
    """Largest single-round buyer utility under the pricing rule."""
    rule = config.pricing
    if isinstance(rule, pricing_mod.Homogeneous):
        return config.market.v_high - rule.p
    return config.market.v_high - rule.p_low


def run_scenario(config: ScenarioConfig, mode: str = "both") -> RunResult:
    if mode not in ("oracle", "protocol", "both"):
        raise ConfigError(f"mode must be oracle, protocol, or both, not {mode!r}")
    state = build_market(config)
    if mode in ("protocol", "both"):
        state.protocol_bridge = ProtocolBridge(state)
    outcomes = state.run()
    rows = []
    for outcome in outcomes:
        counts = {}
        for p in outcome.purchases:
            counts[p.seller] = counts.get(p.seller, 0) + 1
        summary = outcome.summary
        for s in range(config.market.n_sellers):
            price = "" if s in outcome.isolated else rat_str(outcome.prices[s])
            iq = summary.rated_high[s]
            rows.append({
                "t": outcome.t,
                "seller_id": s,
                "price": price,
                "I_T": summary.sold[s],
                "I_Q": rat_str(iq) if iq is not None else "",
                "Q": rat_str(outcome.ratings[s]),
                "sales_count": counts.get(s, 0),
            })
    audits = [o.audit for o in outcomes if o.audit is not None]
    equality_ok = all(a.output_equal for a in audits) if audits else (mode == "oracle")
    leak_flags = [flag for a in audits for flag in a.corner_case_flags]
    u_max = default_u_max(config)
    fee = dishonesty_fee(FeeSchedule(config.nu, u_max))
    transcript = (
        state.protocol_bridge.session.transcript if state.protocol_bridge else []
    )
    seller_stats = []
    for s, seller in enumerate(state.sellers):
        sales = seller.sale_qualities
        seller_stats.append({
            "seller_id": s,
            "sales": len(sales),
            "high_sales": sum(1 for _, q in sales if q == "High"),
            "discounted_utility": seller.discounted_utility,
        })
    return RunResult(
        config=config, mode=mode, rows=rows,
        final_ratings=outcomes[-1].ratings if outcomes else [],
        outcomes=outcomes, audits=audits, equality_ok=equality_ok,
        leak_flags=leak_flags, fee=fee, u_max=u_max,
        transcript=transcript, seller_stats=seller_stats,
        ledger_jsonl=state.store.export_jsonl(),
    )


# --------------------------------------------------------------------------
# Exports
# --------------------------------------------------------------------------

def rows_to_csv(rows: list[dict]) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            f"{row['t']},{row['seller_id']},{row['price']},"
            f"{row['I_T']},{row['I_Q']},{row['Q']},{row['sales_count']}"
        )
    return "\n".join(lines) + "\n"


def result_to_json(result: RunResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "mode": result.mode,
        "config": result.config.raw,
        "rows": result.rows,
        "report": {
            "final_ratings": [rat_str(q) for q in result.final_ratings],
            "equality_ok": result.equality_ok,
            "rounds_audited": len(result.audits),
            "leak_flags": result.leak_flags,
            "dishonesty_fee": rat_str(result.fee),
            "u_max": rat_str(result.u_max),
            "seller_stats": [
                {**st, "discounted_utility": rat_str(st["discounted_utility"])}
                for st in result.seller_stats
            ],
        },
    }


def load_result(raw: dict) -> dict:
    """Round-trip loader for exported results; validates the schema."""
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError("schema_version: unsupported result document")
    load_config(raw["config"])
    for key in ("rows", "report", "mode"):
        if key not in raw:
            raise ConfigError(f"result document missing {key!r}")
    return raw


def export_report(result: RunResult, fmt: str, path: str) -> list[str]:
    """Write the result bundle; returns the file paths written."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(result.rows))
        return [path]
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(result_to_json(result), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return [path]
    raise ConfigError(f"unknown export format {fmt!r}")


def export_transcript(result: RunResult, path: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in result.transcript:
            fh.write(json.dumps({
                "step": entry.step,
                "sender": entry.sender,
                "receivers": list(entry.receivers),
                "kind": entry.kind,
                "payload_digest": entry.payload_digest,
                "public": entry.public,
            }, sort_keys=True))
            fh.write("\n")
    return path


TRANSCRIPT_KINDS = {
    "encrypted-feedback", "monitor-feedback", "consistency-reject",
    "aggregate", "threshold-decrypt", "consensus-failure",
    "perception-consensus",
}


def audit_transcript(path: str) -> dict:
    """Structural audit of an exported protocol transcript.

    Checks step ordering, known message kinds, and digest shape; reports
    protocol failures recorded in public payloads (consistency rejections,
    consensus failures) and the per-round buying-pattern corner cases
    visible from the public sale lists.
    """
    problems = []
    corner_flags = []
    last_step = 0
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                problems.append(f"line {i}: not valid JSON")
                continue
            step = entry.get("step")
            if not isinstance(step, int) or step <= last_step:
                problems.append(f"line {i}: step ordering broken")
            else:
                last_step = step
            if entry.get("kind") not in TRANSCRIPT_KINDS:
                problems.append(f"line {i}: unknown message kind {entry.get('kind')!r}")
            digest = entry.get("payload_digest", "")
            if not (isinstance(digest, str) and len(digest) == 64):
                problems.append(f"line {i}: malformed payload digest")
            if entry.get("kind") in ("consistency-reject", "consensus-failure"):
                problems.append(f"line {i}: protocol failure: {entry.get('public')}")
            if entry.get("kind") == "threshold-decrypt":
                sold = (entry.get("public") or {}).get("sold", [])
                if len(sold) in (1, 2):
                    corner_flags.append(
                        f"round {(entry.get('public') or {}).get('round')}: "
                        f"only sellers {sold} sold"
                    )
    return {"passed": not problems, "problems": problems, "corner_flags": corner_flags}


# --------------------------------------------------------------------------
# Theorem verification sweeps
# --------------------------------------------------------------------------

DEFAULT_GRID = {
    "sigmas": [Fraction(n, 100) for n in range(51, 100, 2)],
    "ks": list(range(1, 13)),
    "n_buyers": list(range(3, 11)),
    "n_sellers": list(range(3, 11)),
    "alphas": list(range(1, 11)),
}


def parse_grid(raw: dict | None) -> dict:
    grid = {k: list(v) for k, v in DEFAULT_GRID.items()}
    if raw:
        for key in grid:
            if key in raw:
                if key == "sigmas":
                    grid[key] = [rat(v) for v in raw[key]]
                else:
                    grid[key] = [int(v) for v in raw[key]]
        unknown = set(raw) - set(grid)
        if unknown:
            raise ConfigError(f"grid: unknown keys {sorted(unknown)}")
    if any(not v for v in grid.values()):
        raise ConfigError("grid: every axis needs at least one point")
    return grid


def verify_theorems(grid_raw: dict | None = None) -> dict:
    """Sweep every closed-form claim; one verdict entry each."""
    grid = parse_grid(grid_raw)
    results = {}

    started = time.perf_counter()
    sweep = eq.periodic_infeasibility_sweep(grid["sigmas"], grid["ks"], grid["n_buyers"])
    results["periodic_infeasibility"] = {
        "passed": sweep.passed,
        "points": sweep.points_checked,
        "counterexamples": [
            {**c, "sigma": rat_str(c["sigma"])} for c in sweep.counterexamples[:20]
        ],
        "seconds": round(time.perf_counter() - started, 3),
    }

    bad = []
    points = 0
    for sigma in grid["sigmas"]:
        for n_b in grid["n_buyers"]:
            for n_s in grid["n_sellers"]:
                points += 1
                tft = eq.always_low_bound(punishment_mod.TitForTat(), ONE, sigma, n_b, n_s)
                lim1 = eq.always_low_bound(punishment_mod.Limited(1), ONE, sigma, n_b, n_s)
                if tft != lim1:
                    bad.append({"sigma": rat_str(sigma), "n_buyers": n_b, "n_sellers": n_s})
    results["limited_one_equals_tit_for_tat"] = {
        "passed": not bad, "points": points, "counterexamples": bad[:20],
    }

    bad = []
    points = 0
    for sigma in grid["sigmas"]:
        for n_b in grid["n_buyers"]:
            for n_s in grid["n_sellers"]:
                previous = None
                for alpha in sorted(grid["alphas"]):
                    points += 1
                    bound = eq.always_low_bound(
                        punishment_mod.Limited(alpha), ONE, sigma, n_b, n_s
                    )
                    if previous is not None and not bound < previous:
                        bad.append({
                            "sigma": rat_str(sigma), "alpha": alpha,
                            "n_buyers": n_b, "n_sellers": n_s,
                        })
                    previous = bound
    results["limited_bound_decreasing_in_alpha"] = {
        "passed": not bad, "points": points, "counterexamples": bad[:20],
    }

    bad = []
    points = 0
    half = Fraction(1, 2)
    for alpha in grid["alphas"]:
        for n_b in grid["n_buyers"]:
            for n_s in grid["n_sellers"]:
                points += 1
                policy = punishment_mod.Threshold(half, alpha)
                proof = eq.always_low_bound(policy, ONE, half, n_b, n_s, "proof")
                statement = eq.always_low_bound(policy, ONE, half, n_b, n_s, "statement")
                if proof != statement:
                    bad.append({"alpha": alpha, "n_buyers": n_b, "n_sellers": n_s})
    results["threshold_variants_coincide_at_half"] = {
        "passed": not bad, "points": points, "counterexamples": bad[:20],
    }

    bad = []
    points = 0
    for sigma in grid["sigmas"]:
        for alpha in grid["alphas"]:
            for n_b in grid["n_buyers"]:
                for n_s in grid["n_sellers"]:
                    points += 1
                    diff = eq.compare_punishments(ONE, sigma, n_b, n_s, alpha)
                    if not diff > ZERO:
                        bad.append({
                            "sigma": rat_str(sigma), "alpha": alpha,
                            "n_buyers": n_b, "n_sellers": n_s,
                            "difference": rat_str(diff),
                        })
    results["threshold_beats_limited"] = {
        "passed": not bad, "points": points, "counterexamples": bad[:20],
    }

    results["classifier_simulation_agreement"] = classifier_agreement_sweep()
    return {
        "passed": all(entry["passed"] for entry in results.values()),
        "results": results,
    }


def classifier_agreement_sweep(tol: Fraction = Fraction(1, 10 ** 9)) -> dict:
    """Regime classifier against both one-deviation verifiers.

    Grid points are symmetric markets placed well off the regime boundaries;
    wherever the classifier announces a pure-profile regime, both the
    closed-form and the truncated replay verifier must confirm it, and the
    two verifiers must agree point by point.
    """
    policies = [
        punishment_mod.GrimTrigger(),
        punishment_mod.TitForTat(),
        punishment_mod.Limited(1),
        punishment_mod.Limited(2),
        punishment_mod.Limited(3),
        punishment_mod.Threshold(Fraction(2, 5), 2),
    ]
    sigmas = [Fraction(n, 100) for n in range(51, 76, 2)]
    multipliers = [Fraction(1, 2), Fraction(4, 5), Fraction(5, 4), Fraction(2)]
    p = ONE
    points = 0
    bad = []
    for policy in policies:
        always_low_ok = isinstance(policy, (punishment_mod.TitForTat, punishment_mod.Limited))
        for n in (3, 4):
            if isinstance(policy, punishment_mod.Limited) and policy.alpha >= n:
                continue
            for sigma in sigmas:
                for mult in multipliers:
                    cases = [("always_high", sigma * p * mult)]
                    if always_low_ok:
                        bound = eq.always_low_bound(policy, p, sigma, n, n)
                        cases.append(("always_low", bound * mult))
                    for shape, cost in cases:
                        if not ZERO < cost:
                            continue
                        points += 1
                        sellers = [(sigma, cost)] * n
                        strategy = market_mod.AlwaysHigh() if shape == "always_high" else market_mod.AlwaysLow()
                        profile = [strategy] * n
                        closed = eq.one_deviation_check(
                            profile, p, sellers, policy, n, mode="closed_form"
                        )
                        sim = eq.one_deviation_check(
                            profile, p, sellers, policy, n, mode="simulation", tol=tol
                        )
                        report = eq.classify_equilibrium(sellers, p, policy, n)
                        regime = report.per_seller[0].regime
                        expected_hold = (
                            (shape == "always_high" and regime == eq.ALWAYS_HIGH)
                            or (shape == "always_low" and regime == eq.ALWAYS_LOW)
                        )
                        ok = closed.holds == sim.holds and (
                            not expected_hold or (closed.holds and sim.holds)
                        )
                        if not ok:
                            bad.append({
                                "policy": policy.kind, "n": n,
                                "sigma": rat_str(sigma), "cost": rat_str(cost),
                                "shape": shape, "regime": regime,
                                "closed_form": closed.holds, "simulation": sim.holds,
                            })
    return {"passed": not bad, "points": points, "counterexamples": bad[:20]}
