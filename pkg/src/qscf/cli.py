"""Command line entry point: ``qscf <command> [options]``.

Exit codes: 0 success, 2 config error, 3 protocol/connection error,
4 entropy exhausted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from typing import Optional

from .config import ConfigError, RunConfig, bundled_config, load_config
from .net_harness import HandshakeRejected, run_alice, run_bob, serve_physics_endpoint
from .photon_source import SourceKind, SourceSpec
from .protocol_engine import (
    IoTableResult,
    ScenarioConfig,
    run_bob_cheat_session,
    run_session,
)
from .qubit_states import LABELS, expected_io_table
from .randomness import ALICE_STREAM, BOB_STREAM, EntropyExhausted, open_bit_source
from .security_analysis import (
    GainMap,
    InfeasibleFairness,
    alice_cheat_prob,
    bob_cheat_prob,
    minmax_a,
    multiphoton_exposure,
    quantum_gain,
    solve_fair_a,
    sweep_gain,
)
from .wire import ProtocolError, connect

EXIT_OK, EXIT_CONFIG, EXIT_PROTOCOL, EXIT_ENTROPY = 0, 2, 3, 4
DEFAULT_ENDPOINT = "127.0.0.1:47000"

log = logging.getLogger("qscf")


def _sig(x, digits: int = 4):
    """Round floats (recursively) to ``digits`` significant digits."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, float):
        if not math.isfinite(x) or x == 0.0:
            return x
        return float(f"{x:.{digits - 1}e}")
    if isinstance(x, dict):
        return {k: _sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v, digits) for v in x]
    return x


def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _load(args) -> RunConfig:
    cfg = load_config(args.config or bundled_config("baseline.cfg"))
    cfg = cfg.with_seed(args.seed)
    sc = cfg.scenario
    if getattr(args, "kind", None):
        try:
            src = SourceSpec(SourceKind(args.kind.upper()), sc.source.mu, sc.source.g2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        sc = replace(sc, source=src)
    if args.random_file:
        sc = replace(sc, rng=replace(sc.rng, alice_file=args.random_file))
    if getattr(args, "n_flips", None) is not None:
        if args.n_flips < 1:
            raise ConfigError("--n-flips must be >= 1")
        cfg = replace(cfg, n_flips=args.n_flips)
    return replace(cfg, scenario=sc)


def _scenario_block(sc: ScenarioConfig) -> dict:
    d = sc.physical_dict()
    d["seed"] = sc.rng.seed
    return d


# -- commands -----------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = _load(args)
    rep = quantum_gain(cfg.scenario)
    out = {
        "command": "analyze",
        "scenario": _scenario_block(cfg.scenario),
        "report": _sig(rep.to_dict()),
        "display": {
            "p_alice": _pct(rep.p_alice),
            "p_bob": _pct(rep.p_bob),
            "p_honest_abort": _pct(rep.p_honest_abort),
            "p_classical": _pct(rep.p_classical),
            "gain": f"{rep.gain_pp:.1f} pp ({rep.gain_rel:.1f}% relative)",
            "rate": f"{rep.rate_hz:.0f} flips/s",
        },
    }
    _emit(args, _json(out))
    return EXIT_OK


def _iotable_rows(name: str, table, sigma=None):
    rows = []
    for lab in LABELS:
        row = {"table": name, "sent": f"{lab.alpha}{lab.c}"}
        for det in LABELS:
            row[f"p_{det.alpha}{det.c}"] = f"{table[lab.index, det.index]:.4g}"
        rows.append(row)
    return rows


def _write_iotable_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["table", "sent", "p_00", "p_01", "p_10", "p_11"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    if args.cheat_target is not None:
        cs = run_bob_cheat_session(sc, args.cheat_target, cfg.n_flips)
        out = {
            "command": "simulate",
            "mode": "cheating_bob",
            "scenario": _scenario_block(sc),
            "cheat": _sig(cs.to_dict()),
            "analytic": _sig({"p_bob": bob_cheat_prob(sc.a, sc.stats, sc.K)}),
        }
        _emit(args, _json(out))
        return EXIT_OK
    outcomes = [] if args.iotable_out else None
    rng = sc.open_rng()
    try:
        st = run_session(sc, cfg.n_flips, rng, record=outcomes)
    except EntropyExhausted as exc:
        log.error("%s (alice consumed %d bits, bob %d bits)", exc, rng.alice.bits_consumed, rng.bob.bits_consumed)
        return EXIT_ENTROPY
    rep = quantum_gain(sc) if sc.a > 0.5 else None
    out = {"command": "simulate", "mode": "honest", "scenario": _scenario_block(sc), "session": _sig(st.to_dict())}
    if rep is not None:
        sigma = st.abort_sigma()
        z = (st.abort_rate - rep.p_honest_abort) / sigma if sigma > 0 else float("nan")
        out["analytic"] = _sig({
            "p_honest_abort": rep.p_honest_abort,
            "abort_rate_mc": st.abort_rate,
            "abort_sigma_mc": sigma,
            "z_score": z,
            "within_4sigma": bool(abs(z) <= 4) if math.isfinite(z) else st.abort_rate == rep.p_honest_abort,
            "rate_hz_model": rep.rate_hz,
        })
        out["display"] = {
            "p_honest_abort_mc": _pct(st.abort_rate),
            "p_honest_abort_analytic": _pct(rep.p_honest_abort),
            "p0": _pct(st.p0_hat),
            "p1": _pct(st.p1_hat),
        }
    if args.iotable_out:
        res = IoTableResult.from_outcomes(outcomes)
        rows = _iotable_rows("simulated", res.table)
        with open(args.iotable_out, "w", newline="") as fh:
            fh.write(_write_iotable_csv(rows))
        if res.insufficient_rows:
            out["iotable_insufficient_rows"] = [f"{LABELS[i].alpha}{LABELS[i].c}" for i in res.insufficient_rows]
    _emit(args, _json(out))
    return EXIT_OK


def cmd_iotable(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    tables = {"expected": expected_io_table(sc.a, sc.link.qber)}
    insufficient = []
    if args.simulate:
        res = IoTableResult.from_outcomes(_record(sc, cfg.n_flips))
        tables["simulated"] = res.table
        insufficient = res.insufficient_rows
    if args.format == "json":
        out = {k: [[float(f"{x:.4g}") for x in row] for row in v] for k, v in tables.items()}
        out["labels"] = [f"{l.alpha}{l.c}" for l in LABELS]
        if insufficient:
            out["insufficient_rows"] = [out["labels"][i] for i in insufficient]
        _emit(args, _json(out))
    else:
        rows = []
        for name, t in tables.items():
            rows += _iotable_rows(name, t)
        _emit(args, _write_iotable_csv(rows))
    for i in insufficient:
        log.warning("row %s%s has fewer than 1000 detections", LABELS[i].alpha, LABELS[i].c)
    return EXIT_OK


def _record(sc, n):
    rec = []
    run_session(sc, n, record=rec)
    return rec


def cmd_fairness(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    p_multi = multiphoton_exposure(sc.stats, sc.K)
    try:
        a = solve_fair_a(sc.stats, sc.K)
        feasible = True
    except InfeasibleFairness:
        a = minmax_a(p_multi)
        feasible = False
    pa, pb = alice_cheat_prob(a), bob_cheat_prob(a, sc.stats, sc.K)
    out = {
        "command": "fairness",
        "scenario": _scenario_block(sc),
        "feasible": feasible,
        "a_star": a,
        "p_alice": pa,
        "p_bob": pb,
        "residual": abs(pa - pb),
        "p_multi": p_multi,
    }
    # a_star keeps full precision; it is an input to later runs
    shown = _sig({k: v for k, v in out.items() if k not in ("a_star", "residual")})
    shown["a_star"] = a
    shown["residual"] = abs(pa - pb)
    _emit(args, _json(shown))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario
    K_grid, mu_grid = cfg.grids()
    if args.k_grid:
        K_grid = [int(float(t)) for t in args.k_grid.split(",")]
    if args.mu_grid:
        mu_grid = [float(t) for t in args.mu_grid.split(",")]
    fixed_a = args.fixed_a if args.fixed_a is not None else cfg.fixed_a
    try:
        gmap = sweep_gain(sc.source.kind, K_grid, mu_grid, sc.link, sc.source.g2, fixed_a, jobs=args.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.format == "json":
        cells = [_sig(dict(c.__dict__)) for c in gmap.cells]
        _emit(args, _json({"command": "sweep", "kind": gmap.kind.value, "cells": cells}))
        return EXIT_OK
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GainMap.COLUMNS)
    for c in gmap.cells:
        w.writerow([c.K, f"{c.mu:.4g}"] + [f"{getattr(c, k):.4g}" for k in GainMap.COLUMNS[2:-1]] + [c.reason])
    _emit(args, buf.getvalue())
    return EXIT_OK


def _party_bits(args, cfg: RunConfig, stream: int):
    sc = cfg.scenario
    spec = args.random_file or (sc.rng.alice_file if stream == ALICE_STREAM else sc.rng.bob_file) or sc.rng.seed
    return open_bit_source(spec, stream)


def cmd_alice(args) -> int:
    cfg = _load(args)
    bits = _party_bits(args, cfg, ALICE_STREAM)
    conn = connect(args.endpoint, "alice")
    summary = run_alice(conn, cfg.scenario, bits, cfg.n_flips)
    _emit(args, _json(_party_out(summary, args)))
    if summary.error and "entropy" in summary.error:
        return EXIT_ENTROPY
    return EXIT_OK if summary.complete else EXIT_PROTOCOL


def cmd_bob(args) -> int:
    cfg = _load(args)
    target = args.target if args.cheat else None
    if args.cheat and target is None:
        raise ConfigError("--cheat needs --target 0|1")
    bits = _party_bits(args, cfg, BOB_STREAM)
    conn = connect(args.endpoint, "bob")
    summary = run_bob(conn, cfg.scenario, bits, cfg.n_flips, cheat_target=target)
    out = _party_out(summary, args)
    if target is not None:
        n = summary.n_success + summary.n_abort_mismatch
        hits = summary.n_one if target == 1 else summary.n_success - summary.n_one
        out["cheat"] = _sig({
            "target": target,
            "forced_fraction": hits / n if n else float("nan"),
            "p_bob_bound": bob_cheat_prob(cfg.scenario.a, cfg.scenario.stats, cfg.scenario.K),
        })
    _emit(args, _json(out))
    return EXIT_OK if summary.complete else EXIT_PROTOCOL


def _party_out(summary, args) -> dict:
    out = summary.to_dict()
    if args.log_outcomes:
        out["outcomes"] = summary.outcomes
    return out


def cmd_physics(args) -> int:
    cfg = _load(args)
    try:
        summary = serve_physics_endpoint(cfg.scenario, cfg.n_flips, args.endpoint)
    except HandshakeRejected as exc:
        log.error("HELLO rejected: %s", exc)
        return EXIT_PROTOCOL
    _emit(args, _json(summary.to_dict()))
    return EXIT_OK if summary.complete else EXIT_PROTOCOL


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file (default: bundled baseline.cfg)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--random-file", help="raw random-byte file for Alice's (or the party's own) bits")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--jobs", type=int, default=1, help="worker processes (sweep only)")
    common.add_argument("--kind", help="override the source kind (SPS or WCP)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qscf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("analyze", parents=[common], help="analytic security report")

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo session")
    sp.add_argument("--n-flips", type=int)
    sp.add_argument("--iotable-out", help="also write the simulated I/O table as CSV")
    sp.add_argument("--cheat-target", type=int, choices=(0, 1), help="simulate a cheating Bob forcing this bit")

    sp = sub.add_parser("sweep", parents=[common], help="gain map over (K, mu)")
    sp.add_argument("--k-grid", help="comma separated K values")
    sp.add_argument("--mu-grid", help="comma separated mu values")
    sp.add_argument("--fixed-a", type=float, help="hold a fixed instead of solving for fairness")

    sp = sub.add_parser("iotable", parents=[common], help="expected (and optionally simulated) I/O table")
    sp.add_argument("--simulate", action="store_true")
    sp.add_argument("--n-flips", type=int)

    sub.add_parser("fairness", parents=[common], help="solve for the fair state parameter")

    for role in ("alice", "bob", "physics"):
        sp = sub.add_parser(role, parents=[common], help=f"run the {role} process")
        sp.add_argument("--endpoint", default=DEFAULT_ENDPOINT, help="host:port or unix socket path")
        sp.add_argument("--n-flips", type=int)
        if role != "physics":
            sp.add_argument("--log-outcomes", action="store_true", help="include per-flip outcomes in the summary")
        if role == "bob":
            sp.add_argument("--cheat", action="store_true")
            sp.add_argument("--target", type=int, choices=(0, 1))
    return p


_COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "iotable": cmd_iotable,
    "fairness": cmd_fairness,
    "alice": cmd_alice,
    "bob": cmd_bob,
    "physics": cmd_physics,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.format is None:
        args.format = "csv" if args.command in ("sweep", "iotable") else "json"
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except EntropyExhausted as exc:
        log.error("%s", exc)
        return EXIT_ENTROPY
    except (ProtocolError, ConnectionRefusedError) as exc:
        log.error("protocol error: %s", exc)
        return EXIT_PROTOCOL
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
