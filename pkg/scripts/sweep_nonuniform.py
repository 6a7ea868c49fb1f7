"""Gaussian-beam sweep over chain length at a fixed 800 nm spot.

Writes per-point outputs plus sweep.csv and prints the absorbed-energy
ratios, the T=400 fs fidelities and the multipole error ordering.
"""

import argparse

from pzw import scenarios_cli as sc

N_VALUES = (80, 100, 150, 200, 250, 300, 400, 500, 600, 700)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=list(N_VALUES))
    ap.add_argument("--out", default="out/nonuniform")
    ap.add_argument("--e0", type=float, default=0.003)
    args = ap.parse_args()

    cfg = sc.scenario_a(field__e0=args.e0)
    cfg.interaction.kinds = ("pzw", "dipole", "multipole:3", "multipole:5")
    cfg.sweep = sc.SweepSpec(durations_fs=(120.0, 400.0))

    def show(r):
        if r["status"] != "ok":
            print(f"N={r['geometry.n_cells']}: {r['error']}", flush=True)
            return
        p = r["dH_pzw"]
        print(
            f"N={r['geometry.n_cells']:4d} L/s={r['L_over_s']:.3f} dH_pzw={p:.6f} dipole/pzw={r['dH_dipole'] / p:.4f} "
            f"|oct-pzw|={abs(r['dH_multipole:3'] - p):.2e} |32-pzw|={abs(r['dH_multipole:5'] - p):.2e} "
            f"|dip-pzw|={abs(r['dH_dipole'] - p):.2e} F400={r['fidelity_dipole_T400']:.4f}",
            flush=True,
        )

    sc.sweep(cfg, args.n, args.out, on_point=show)


if __name__ == "__main__":
    main()
