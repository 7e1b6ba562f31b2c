"""Gain and honest-abort probability versus channel loss, analytic and Monte Carlo.

    python3 scripts/loss_study.py --n-flips 50000
"""
import argparse

from qscf import quantum_gain, run_session
from qscf.config import bundled_config, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-flips", type=int, default=20_000)
    args = ap.parse_args()

    print(f"{'config':12} {'K':>7} {'QBER':>6} {'H':>8} {'H (MC)':>8} {'z':>6} {'P_cl':>7} {'gain':>8}")
    for name in ("baseline.cfg", "loss3db.cfg", "loss6db.cfg"):
        sc = load_config(bundled_config(name)).scenario
        r = quantum_gain(sc)
        st = run_session(sc, args.n_flips)
        z = (st.abort_rate - r.p_honest_abort) / st.abort_sigma()
        print(
            f"{name:12} {sc.K:7d} {sc.link.qber:6.1%} {r.p_honest_abort:8.3%} {st.abort_rate:8.3%} "
            f"{z:6.2f} {r.p_classical:7.2%} {r.gain_pp:6.2f}pp"
        )


if __name__ == "__main__":
    main()
