"""Closed-form optima across the regimes.

For identity within-block covariance the minimax point (x*, y*) and the
support have exact expressions, with the regime decided by how t sits
relative to the block size p and by the grid proportions.  This sweeps
a ladder of shapes and prints the solution each falls into.
"""

from fractions import Fraction

from fielddesign.arrays import Shape
from fielddesign.optimality import solve_closed_form


def fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v) if v.denominator < 1000 else f"{float(v):.6f}"
    return f"{float(v):.6f}"


def main() -> None:
    shapes = [
        (2, 2, 2), (2, 2, 3), (2, 2, 5),
        (2, 3, 2), (2, 3, 4), (2, 3, 5), (2, 3, 6),
        (2, 4, 7), (3, 3, 7), (3, 3, 8), (3, 3, 10),
        (3, 4, 11), (4, 4, 15), (4, 5, 19),
    ]
    print(f"{'shape':>10} {'regime':>16} {'x*':>12} {'y*':>12}  support")
    for a, b, t in shapes:
        res = solve_closed_form(Shape(a, b, t))
        print(f"({a},{b},{t:>2}):{res.regime:>17}{fmt(res.x_star):>13}"
              f"{fmt(res.y_star):>13}  {res.q_support.describe()}")

    # a type-H kernel rescales y* and nothing else
    from fielddesign.model import TypeH
    res = solve_closed_form(Shape(2, 3, 5), TypeH(Fraction(1, 2)))
    print("\n(2,3,5) under type-H x=1/2: y* doubles to "
          f"{fmt(res.y_star)}, x* stays {fmt(res.x_star)}")


if __name__ == "__main__":
    main()
