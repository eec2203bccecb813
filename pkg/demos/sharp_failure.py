"""Why the sharp maximal characterization needs the weighted integral condition.

Take w0 = |x|^(-qn/p) and f0 = 1.  Then M f0 = 1 and the sharp function of
f0 vanishes, yet M f0 has a positive finite Morrey norm on M^p_q(dx, w0).
A norm equivalence ||Mf|| ~ ||f^#|| therefore cannot hold for w0.  The
weighted-integral constant of w0 is the quantity that detects the failure:
on the grid it grows linearly with the depth L.

Run:  python demos/sharp_failure.py
"""

from morreylab.experiments import EXPERIMENTS, ExperimentConfig


def main():
    cfg = ExperimentConfig("sharp_failure_demo", levels=(3, 6, 9, 12), p=4.0, q=2.0)
    res = EXPERIMENTS[cfg.experiment](cfg)
    print(f"w0 = |x|^{-cfg.q / cfg.p}, p = {cfg.p}, q = {cfg.q}\n")
    print(f"{'L':>3} {'Mf0 == 1':>9} {'f0# == 0':>9} {'||Mf0||':>9} {'WIC const':>10}")
    rows = {}
    for a, L, m, v in res.rows:
        rows.setdefault(L, {})[m] = v
    for L in cfg.levels:
        r = rows[L]
        print(f"{L:>3} {bool(r['Mf0_is_one'])!s:>9} {bool(r['fs_sharp_is_zero'])!s:>9} "
              f"{r['norm_Mf0']:9.4f} {r['wic_const']:10.4f}")
    print("\nThe constant rises by one per level: it diverges as the grid refines,")
    print("so w0 fails the weighted integral condition although M is bounded for it.")


if __name__ == "__main__":
    main()
