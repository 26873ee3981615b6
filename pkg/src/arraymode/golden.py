"""Golden-section maximization on an interval."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_max(f, a, b, tol):
    """Maximize a unimodal f on [a, b] to within tol in the argument.

    Returns (x_best, f(x_best), n_evals).  Derivative-free; each probe is
    assumed expensive but noise-free, so no stochastic restarts.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    evals = 0
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x), 1
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    evals += 2
    best = (c, yc) if yc > yd else (d, yd)
    for _ in range(n - 1):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            yc = f(c)
            evals += 1
            if yc > best[1]:
                best = (c, yc)
        else:
            a, c, yc = c, d, yd
            h *= INV_PHI
            d = a + INV_PHI * h
            yd = f(d)
            evals += 1
            if yd > best[1]:
                best = (d, yd)
    return best[0], best[1], evals
