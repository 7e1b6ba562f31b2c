"""Print the operating-point table for SPS and WCP sources, analytic and Monte Carlo.

    python3 scripts/reproduce_operating_point.py --n-flips 100000
"""
import argparse
from dataclasses import replace

from qscf import SourceKind, SourceSpec, quantum_gain, run_session
from qscf.config import bundled_config, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-flips", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    base = load_config(bundled_config("baseline.cfg")).with_seed(args.seed).scenario
    print(f"{'source':6} {'P_A':>7} {'P_B':>7} {'H':>7} {'H (MC)':>7} {'P_cl':>7} {'gain':>8} {'rate':>8}")
    for kind in SourceKind:
        sc = replace(base, source=SourceSpec(kind, base.source.mu, base.source.g2))
        r = quantum_gain(sc)
        st = run_session(sc, args.n_flips)
        print(
            f"{kind.value:6} {r.p_alice:7.2%} {r.p_bob:7.2%} {r.p_honest_abort:7.2%} {st.abort_rate:7.2%} "
            f"{r.p_classical:7.2%} {r.gain_pp:6.2f}pp {r.rate_hz:6.0f}/s"
        )


if __name__ == "__main__":
    main()
