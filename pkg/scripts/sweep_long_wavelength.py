"""Plane-wave sweep of a chain tilted by pi/6: fidelity versus L_y / lambda."""

import argparse

from pzw import scenarios_cli as sc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[80, 100, 150, 200, 250, 300, 350, 410])
    ap.add_argument("--out", default="out/long_wavelength")
    ap.add_argument("--durations", type=float, nargs="+", default=[120.0, 400.0])
    args = ap.parse_args()

    cfg = sc.scenario_b()
    cfg.sweep.durations_fs = tuple(args.durations)

    def show(r):
        if r["status"] != "ok":
            print(f"N={r['geometry.n_cells']}: {r['error']}", flush=True)
            return
        fids = " ".join(f"F{T:g}={r[f'fidelity_dipole_T{T:g}']:.4f}" for T in args.durations)
        print(f"N={r['geometry.n_cells']:4d} Ly/lambda={r['L_y_over_lambda']:.3f} "
              f"dH_pzw={r['dH_pzw']:.6f} dH_dipole={r['dH_dipole']:.6f} {fids}", flush=True)

    sc.sweep(cfg, args.n, args.out, on_point=show)


if __name__ == "__main__":
    main()
