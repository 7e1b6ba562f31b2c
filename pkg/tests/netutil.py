"""Run the three networked roles on socketpairs inside one process."""
import socket
import threading

from qscf.net_harness import run_alice, run_bob, serve_physics
from qscf.wire import Connection


def socket_pair(name):
    a, b = socket.socketpair()
    return Connection(a, name, timeout=30), Connection(b, "party", timeout=30)


def run_three(scenario, n_flips, *, alice_bits=None, bob_bits=None, cheat_target=None,
              alice_fn=None, bob_fn=None, record=False, physics_scenario=None):
    """Returns (physics summary or exception, alice result, bob result, connections).

    ``alice_fn``/``bob_fn`` replace the honest party loops with a scripted
    callable taking the party's connection.
    """
    rng = scenario.open_rng()
    alice_bits = alice_bits or rng.alice
    bob_bits = bob_bits or rng.bob
    a_conn, pa_conn = socket_pair("alice")
    b_conn, pb_conn = socket_pair("bob")
    conns = {"alice": a_conn, "bob": b_conn, "physics_alice": pa_conn, "physics_bob": pb_conn}
    if record:
        for c in conns.values():
            c.record()
    results = {}

    def wrap(key, fn, *args, **kw):
        def target():
            try:
                results[key] = fn(*args, **kw)
            except Exception as exc:  # surfaced to the test
                results[key] = exc
        t = threading.Thread(target=target, daemon=True)
        t.start()
        return t

    threads = [
        wrap("physics", serve_physics, physics_scenario or scenario, n_flips, [pa_conn, pb_conn]),
        wrap("alice", alice_fn or run_alice, a_conn, *(() if alice_fn else (scenario, alice_bits, n_flips))),
        wrap("bob", bob_fn or run_bob, b_conn,
             *(() if bob_fn else (scenario, bob_bits, n_flips)),
             **({} if bob_fn else {"cheat_target": cheat_target})),
    ]
    for t in threads:
        t.join(60)
        assert not t.is_alive(), "networked session hung"
    return results["physics"], results["alice"], results["bob"], conns
