"""Exact removal versus surrogate replacement on a two-point ridge problem.

Prints how far each update moves the fitted parameter, over a grid of
surrogate labels (y_new = 1 is the unedited row), and the first label
that keeps the shift under half of exact removal.

    python3 demos/ridge_theory.py
"""
import numpy as np

from unprompt import ridge


def main():
    p, i = ridge.default_demo_problem()
    theta = ridge.ridge_fit(p)
    delta_exact, theta_exact = ridge.exact_unlearn(p, i)
    print(f"fit on all rows      theta* = {theta[0]:.4f}")
    print(f"row {i} removed        theta~ = {theta_exact[0]:.4f}  (shift {abs(delta_exact[0]):.4f})")
    print()
    print(f"{'y_new':>7} {'theta_dagger':>13} {'shift':>8} {'exact/surr':>11}")
    for row in ridge.ridge_demo_sweep(p, i, np.linspace(-2, 3, 11)):
        _, th = ridge.surrogate_unlearn(p, ridge.RowEdit.replace(i, p.X[i], row["y_new"]))
        print(f"{row['y_new']:7.2f} {th[0]:13.4f} {row['surrogate_shift']:8.4f} {row['ratio']:11.3f}")
    hit = ridge.find_preserving_surrogate(ridge.ridge_demo_sweep(p, i, np.linspace(-5, 5, 201)))
    print()
    print(f"first preserving surrogate label: y_new = {hit['y_new']:g} "
          f"(shift {hit['surrogate_shift']:.4f} vs exact {hit['exact_shift']:.4f})")


if __name__ == "__main__":
    main()
