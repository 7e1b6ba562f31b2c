"""Alice, Bob and a trusted Physics process talking over byte streams.

Physics stands in for the quantum channel, so it is part of the trusted
computing base. Both parties connect to it; it also relays the classical
messages between them. Per flip the frames are::

    Alice -> Physics   PULSE_BLOCK  all K labels of the flip
    Physics -> Bob     DETECTION    {j, channel} or {j: null}
    Bob -> Alice       CHALLENGE    {j, b}          (skipped if no detection)
    Alice -> Bob       REVEAL       {alpha, c}      (skipped if no detection)
    Bob -> Alice       VERDICT      {accept, outcome, reason}

Bob never sees Alice's labels before the REVEAL of slot j, and Alice never
sees Bob's detection channel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .link_model import ClickModel
from .protocol_engine import ScenarioConfig, cheat_detection, first_detection
from .randomness import BitSource, EntropyExhausted, physics_rng
from .wire import (
    Connection,
    ConnectionClosed,
    FrameType,
    ProtocolError,
    PulseBlock,
    WireFrame,
    listen,
    pack_labels,
)

__all__ = [
    "HandshakeRejected",
    "PartySummary",
    "PhysicsSummary",
    "session_hash",
    "serve_physics",
    "serve_physics_endpoint",
    "run_alice",
    "run_bob",
]

log = logging.getLogger(__name__)

_HONEST = "honest"
_CHEAT = "cheat"


class HandshakeRejected(ProtocolError):
    pass


def session_hash(scenario: ScenarioConfig, n_flips: int) -> str:
    return scenario.digest({"n_flips": int(n_flips)})


@dataclass
class PartySummary:
    role: str
    outcomes: list = field(default_factory=list)
    n_success: int = 0
    n_abort_nodetect: int = 0
    n_abort_mismatch: int = 0
    n_one: int = 0
    bits_consumed: int = 0
    complete: bool = False
    error: Optional[str] = None
    stats: Optional[dict] = None

    def to_dict(self) -> dict:
        n_flips = self.n_success + self.n_abort_nodetect + self.n_abort_mismatch
        return {
            "role": self.role,
            "n_flips": n_flips,
            "n_success": self.n_success,
            "n_abort_nodetect": self.n_abort_nodetect,
            "n_abort_mismatch": self.n_abort_mismatch,
            "n_one": self.n_one,
            "n_zero": self.n_success - self.n_one,
            "bits_consumed": self.bits_consumed,
            "complete": self.complete,
            "error": self.error,
        }

    def _log(self, verdict: dict):
        if verdict["accept"]:
            self.n_success += 1
            self.n_one += verdict["outcome"]
            self.outcomes.append(verdict["outcome"])
        else:
            reason = verdict["reason"]
            if reason == "no_detection":
                self.n_abort_nodetect += 1
            else:
                self.n_abort_mismatch += 1
            self.outcomes.append(reason)


@dataclass
class PhysicsSummary:
    n_flips_planned: int
    rounds: int = 0
    n_success: int = 0
    n_abort_nodetect: int = 0
    n_abort_mismatch: int = 0
    n_one: int = 0
    complete: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _expect(frame: WireFrame, ftype, round_id: int, who: str) -> WireFrame:
    types = ftype if isinstance(ftype, tuple) else (ftype,)
    if frame.type is FrameType.ABORT:
        raise ConnectionClosed(f"{who} aborted: {frame.payload.get('reason')}")
    if frame.type not in types:
        raise ProtocolError(
            f"expected {'/'.join(t.value for t in types)} from {who} in round {round_id}, "
            f"got {frame.type.value}",
            tag=frame.type.value,
        )
    if frame.round_id != round_id:
        raise ProtocolError(f"{who} sent round_id {frame.round_id} during round {round_id}")
    return frame


def _validate_verdict(payload: dict) -> dict:
    accept = payload.get("accept")
    if accept is True:
        if payload.get("outcome") not in (0, 1):
            raise ProtocolError("accepting VERDICT without outcome bit")
    elif accept is False:
        if payload.get("reason") not in ("no_detection", "mismatch"):
            raise ProtocolError(f"bad abort reason {payload.get('reason')!r}")
    else:
        raise ProtocolError("VERDICT needs a boolean accept field")
    return payload


# -- Physics ------------------------------------------------------------------

def _handshake(conns: list[Connection], expected_hash: str) -> dict[str, tuple[Connection, dict]]:
    parties: dict[str, tuple[Connection, dict]] = {}
    for conn in conns:
        hello = conn.recv()
        if hello.type is not FrameType.HELLO:
            raise ProtocolError(f"expected HELLO, got {hello.type.value}", tag=hello.type.value)
        role = hello.payload.get("role")
        if role not in ("alice", "bob") or role in parties:
            conn.send(WireFrame(FrameType.ABORT, 0, {"reason": f"bad or duplicate role {role!r}"}))
            raise HandshakeRejected(f"bad or duplicate role {role!r}")
        if hello.payload.get("scenario_hash") != expected_hash:
            conn.send(WireFrame(FrameType.ABORT, 0, {"reason": "scenario hash mismatch"}))
            raise HandshakeRejected(
                f"{role}: scenario hash {hello.payload.get('scenario_hash')!r} != {expected_hash!r}"
            )
        conn.name = role
        parties[role] = (conn, hello.payload)
    return parties


def serve_physics(
    scenario: ScenarioConfig,
    n_flips: int,
    conns: list[Connection],
    seed: Optional[int] = None,
) -> PhysicsSummary:
    """Serve one Alice/Bob pair for ``n_flips`` rounds.

    ``conns`` are the two accepted connections in any order; roles come from
    their HELLO frames. Physics randomness uses ``seed`` (default: the
    scenario's seed) on the physics stream, matching :func:`run_session`.
    """
    summary = PhysicsSummary(n_flips)
    expected = session_hash(scenario, n_flips)
    try:
        parties = _handshake(conns, expected)
    except ProtocolError as exc:
        summary.error = str(exc)
        log.warning("physics: handshake rejected: %s", exc)
        for c in conns:
            c.close()
        raise
    alice, _ = parties["alice"]
    bob, bob_hello = parties["bob"]
    mode = bob_hello.get("mode", _HONEST)
    for conn in (alice, bob):
        conn.send(WireFrame(FrameType.HELLO, 0, {"accepted": True, "n_flips": n_flips, "K": scenario.K}))

    rng = physics_rng(scenario.rng.seed if seed is None else seed)
    model = scenario.click_model()
    stats = scenario.stats
    try:
        for r in range(1, n_flips + 1):
            block = PulseBlock(_expect(alice.recv(), FrameType.PULSE_BLOCK, r, "alice").payload)
            if block.K != scenario.K:
                raise ProtocolError(f"PULSE_BLOCK carries K={block.K}, scenario has K={scenario.K}")
            if mode == _CHEAT:
                res = cheat_detection(stats, scenario.K, scenario.a, block.label_at, rng)
                det = {"j": None} if res is None else {"j": res[0], "guess": res[1]}
            else:
                j = first_detection(model, scenario.K, rng)
                if j is None:
                    det = {"j": None}
                else:
                    ev = model.clicked_channel(block.label_at(j).index, rng)
                    det = {"j": j, "channel": [ev.channel.alpha, ev.channel.c]}
            bob.send(WireFrame(FrameType.DETECTION, r, det))

            msg = _expect(bob.recv(), (FrameType.CHALLENGE, FrameType.VERDICT), r, "bob")
            if msg.type is FrameType.CHALLENGE:
                if det["j"] is None:
                    raise ProtocolError("bob challenged a round without detection", tag="CHALLENGE")
                alice.send(msg)
                bob.send(_expect(alice.recv(), FrameType.REVEAL, r, "alice"))
                msg = _expect(bob.recv(), FrameType.VERDICT, r, "bob")
            verdict = _validate_verdict(msg.payload)
            alice.send(msg)
            summary.rounds = r
            if verdict["accept"]:
                summary.n_success += 1
                summary.n_one += verdict["outcome"]
            elif verdict["reason"] == "no_detection":
                summary.n_abort_nodetect += 1
            else:
                summary.n_abort_mismatch += 1
        summary.complete = True
    except ProtocolError as exc:
        summary.error = str(exc)
        log.warning("physics: session torn down after %d rounds: %s", summary.rounds, exc)
        for conn in (alice, bob):
            try:
                conn.send(WireFrame(FrameType.ABORT, summary.rounds, {"reason": str(exc)}))
            except ProtocolError:
                pass
    for conn in (alice, bob):
        try:
            conn.send(WireFrame(FrameType.STATS, summary.rounds, summary.to_dict()))
        except ProtocolError:
            pass
        conn.close()
    return summary


def serve_physics_endpoint(scenario: ScenarioConfig, n_flips: int, endpoint: str, seed: Optional[int] = None):
    srv = listen(endpoint)
    try:
        conns = []
        for _ in range(2):
            sock, _ = srv.accept()
            conns.append(Connection(sock, "party"))
    finally:
        srv.close()
    return serve_physics(scenario, n_flips, conns, seed)


# -- parties ------------------------------------------------------------------

def _hello(conn: Connection, role: str, scenario: ScenarioConfig, n_flips: int, **extra) -> dict:
    conn.send(WireFrame(FrameType.HELLO, 0, {"role": role, "scenario_hash": session_hash(scenario, n_flips), **extra}))
    reply = conn.recv()
    if reply.type is FrameType.ABORT:
        raise HandshakeRejected(f"{role}: rejected by physics: {reply.payload.get('reason')}")
    if reply.type is not FrameType.HELLO or not reply.payload.get("accepted"):
        raise ProtocolError(f"{role}: unexpected handshake reply {reply.type.value}")
    return reply.payload


def _finish(conn: Connection, summary: PartySummary):
    """Read frames until STATS or EOF."""
    try:
        while True:
            f = conn.recv()
            if f.type is FrameType.STATS:
                summary.stats = f.payload
                return
            if f.type is FrameType.ABORT and summary.error is None:
                summary.error = f.payload.get("reason")
    except ProtocolError:
        return


def run_alice(conn: Connection, scenario: ScenarioConfig, bits: BitSource, n_flips: int) -> PartySummary:
    summary = PartySummary("alice")
    K = scenario.K
    try:
        _hello(conn, "alice", scenario, n_flips)
        for r in range(1, n_flips + 1):
            try:
                labels = bits.draw_bits(2 * K)
            except EntropyExhausted as exc:
                summary.error = str(exc)
                conn.send(WireFrame(FrameType.ABORT, r, {"reason": "entropy exhausted"}))
                break
            conn.send(WireFrame(FrameType.PULSE_BLOCK, r, {"K": K, "labels": pack_labels(labels)}))
            msg = _expect(conn.recv(), (FrameType.CHALLENGE, FrameType.VERDICT), r, "bob")
            c_j = b = None
            if msg.type is FrameType.CHALLENGE:
                j, b = msg.payload.get("j"), msg.payload.get("b")
                if not isinstance(j, int) or isinstance(j, bool) or not 1 <= j <= K:
                    raise ProtocolError(f"CHALLENGE index {j!r} outside [1, {K}]", tag="CHALLENGE")
                if b not in (0, 1):
                    raise ProtocolError(f"CHALLENGE bit {b!r} is not 0/1", tag="CHALLENGE")
                alpha, c_j = int(labels[2 * (j - 1)]), int(labels[2 * j - 1])
                conn.send(WireFrame(FrameType.REVEAL, r, {"alpha": alpha, "c": c_j}))
                msg = _expect(conn.recv(), FrameType.VERDICT, r, "bob")
            elif msg.payload.get("reason") != "no_detection" or msg.payload.get("accept"):
                raise ProtocolError("only a no-detection abort may skip the challenge")
            verdict = _validate_verdict(msg.payload)
            if verdict["accept"] and verdict["outcome"] != c_j ^ b:
                raise ProtocolError("bob reported an outcome other than c xor b")
            summary._log(verdict)
        else:
            summary.complete = True
    except ProtocolError as exc:
        summary.error = str(exc)
        try:
            conn.send(WireFrame(FrameType.ABORT, 0, {"reason": str(exc)}))
        except ProtocolError:
            pass
        if isinstance(exc, HandshakeRejected):
            conn.close()
            raise
    summary.bits_consumed = bits.bits_consumed
    _finish(conn, summary)
    conn.close()
    return summary


def run_bob(
    conn: Connection,
    scenario: ScenarioConfig,
    bits: BitSource,
    n_flips: int,
    cheat_target: Optional[int] = None,
) -> PartySummary:
    """Honest Bob, or with ``cheat_target`` a measure-and-guess Bob that
    picks b so the outcome equals the target and never aborts."""
    summary = PartySummary("bob")
    mode = _HONEST if cheat_target is None else _CHEAT
    try:
        _hello(conn, "bob", scenario, n_flips, mode=mode)
        for r in range(1, n_flips + 1):
            det = _expect(conn.recv(), FrameType.DETECTION, r, "physics").payload
            if mode == _HONEST:
                b = bits.draw_bit()
            j = det.get("j")
            if j is None:
                verdict = {"accept": False, "outcome": None, "reason": "no_detection"}
                conn.send(WireFrame(FrameType.VERDICT, r, verdict))
                summary._log(verdict)
                continue
            if mode == _CHEAT:
                b = int(det["guess"]) ^ cheat_target
            conn.send(WireFrame(FrameType.CHALLENGE, r, {"j": j, "b": b}))
            rev = _expect(conn.recv(), FrameType.REVEAL, r, "alice").payload
            alpha, c = rev.get("alpha"), rev.get("c")
            if alpha not in (0, 1) or c not in (0, 1):
                raise ProtocolError("REVEAL needs alpha and c bits", tag="REVEAL")
            if mode == _HONEST:
                ch_alpha, ch_c = det["channel"]
                mismatch = ch_alpha == alpha and ch_c != c
            else:
                mismatch = False
            if mismatch:
                verdict = {"accept": False, "outcome": None, "reason": "mismatch"}
            else:
                verdict = {"accept": True, "outcome": c ^ b, "reason": None}
            conn.send(WireFrame(FrameType.VERDICT, r, verdict))
            summary._log(verdict)
        summary.complete = True
    except ProtocolError as exc:
        summary.error = str(exc)
        if isinstance(exc, HandshakeRejected):
            conn.close()
            raise
        try:
            conn.send(WireFrame(FrameType.ABORT, 0, {"reason": str(exc)}))
        except ProtocolError:
            pass
    summary.bits_consumed = bits.bits_consumed
    _finish(conn, summary)
    conn.close()
    return summary
