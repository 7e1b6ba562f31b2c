"""Gain maps over (K, mu) for both sources, written as CSV plus an optional heat map.

    python3 scripts/gain_map_sweep.py --out-dir results/ --plot
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from qscf import LinkBudget, SourceKind, sweep_gain
from qscf.config import default_grids
from qscf.security_analysis import GainMap


def write_csv(gmap, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GainMap.COLUMNS)
        for c in gmap.cells:
            w.writerow([getattr(c, k) for k in GainMap.COLUMNS])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--qber", type=float, default=0.028)
    ap.add_argument("--fixed-a", type=float)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--plot", action="store_true", help="needs matplotlib")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K, mu = default_grids()
    link = LinkBudget(qber=args.qber)
    maps = {kind: sweep_gain(kind, K, mu, link, fixed_a=args.fixed_a, jobs=args.jobs) for kind in SourceKind}
    for kind, gmap in maps.items():
        write_csv(gmap, out / f"gain_{kind.value.lower()}.csv")

    j = mu.index(0.0013)
    gs, gw = maps[SourceKind.SPS].gain_array()[:, j], maps[SourceKind.WCP].gain_array()[:, j]
    window = [k for k, s, w in zip(K, gs, gw) if w < 0 < s]
    if window:
        print(f"mu=0.0013: only the SPS shows a gain for K in [{window[0]}, {window[-1]}]")
    print(f"SPS >= WCP on every cell: {bool(np.all(maps[SourceKind.SPS].gain_array() >= maps[SourceKind.WCP].gain_array()))}")

    if args.plot:
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
        for ax, (kind, gmap) in zip(axes, maps.items()):
            g = gmap.gain_array()
            m = ax.pcolormesh(mu, K, g, shading="nearest", cmap="RdBu", vmin=-3, vmax=3)
            ax.contour(mu, K, g, levels=[0], colors="k", linewidths=0.8)
            ax.plot(0.0013, 50_000, "o", mfc="white", mec="k")
            ax.set(xscale="log", yscale="log", xlabel="mean photon number", title=kind.value)
        axes[0].set_ylabel("pulses per flip K")
        fig.colorbar(m, ax=axes, label="gain (pp)")
        fig.savefig(out / "gain_maps.png", dpi=150)


if __name__ == "__main__":
    main()
