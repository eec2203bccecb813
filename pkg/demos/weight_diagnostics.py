"""Weight-class constants of |x|^alpha under refinement.

On a finite grid every constant is finite, so membership is read from the
trend: a constant that stabilizes as L grows indicates membership, one that
keeps growing indicates failure.  The script prints A_2, the reverse Holder
exponent, the B_{4,2} constant and the weighted-integral constant for a few
exponents, next to the known analytic classes.

Run:  python demos/weight_diagnostics.py
"""

from morreylab.grid import build_grid, weight_from_power
from morreylab.weights import (aq_constant, bpq_check, power_weight_classifier,
                               reverse_holder_epsilon, weighted_integral_check)

P, Q = 4.0, 2.0
LEVELS = (6, 8, 10)


def main():
    for alpha in (-0.75, -0.5, 0.0, 0.5, 0.97):
        pc = power_weight_classifier(alpha, P, Q, 1)
        print(f"alpha = {alpha}: A_2 {pc.in_Aq}, weighted integral condition {pc.WIC}")
        for L in LEVELS:
            w = weight_from_power(build_grid(1, 0, L), alpha)
            print(f"  L={L:2d}  A_2 {aq_constant(w, 2):8.4f}  RH eps {reverse_holder_epsilon(w):.4f}"
                  f"  B_pq {bpq_check(w, P, Q):8.4f}  WIC {weighted_integral_check(w, P, Q):8.4f}")
        print()


if __name__ == "__main__":
    main()
