#!/usr/bin/env python3
"""Independent numeric oracles for the Rust test suite.

Every value printed here is frozen into test constants on the Rust side
(grep for "tools/oracle_constants.py" in the test sources). The point of
this script is independence: nothing below shares code or algorithms with
the Rust implementation. Acceptance probabilities come from adaptive
quadrature of the circle/rectangle geometry, mean-of-uniforms densities
and distribution values come from Richardson-extrapolated FFT convolution
grids, and chi-square critical values come from scipy's gamma machinery.

Run:  python3 tools/oracle_constants.py
"""

import numpy as np
from scipy import integrate, signal, stats


def circle_box_acceptance(cos_phi: float) -> float:
    """P(uniform draw from [-p,p] x [-s,s] lands in the disc p^2+q^2 <= s^2).

    With s = 1 and p = cos_phi * s the disc's y-extent never exceeds the
    box, so the intersection area is the integral of the full chord height
    2*sqrt(s^2 - x^2) over the box's x-range.
    """
    s = 1.0
    p = cos_phi * s
    area, err = integrate.quad(lambda x: 2.0 * np.sqrt(s * s - x * x), -p, p,
                               epsabs=1e-14, epsrel=1e-13)
    assert err < 1e-10
    return area / (4.0 * p * s)


def circle_box_acceptance_mc(cos_phi: float, n: int, seed: int) -> float:
    """Monte-Carlo cross-check of circle_box_acceptance."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-cos_phi, cos_phi, n)
    y = rng.uniform(-1.0, 1.0, n)
    return np.mean(x * x + y * y <= 1.0)


def sum_uniform_grid(n: int, m: int) -> np.ndarray:
    """Density of the sum of n independent U[0,1] on a grid of step 1/m.

    Built by repeated FFT convolution with trapezoid weighting (jump points
    carry the half-value midpoint convention, so convergence stays second
    order). Returns density values at grid points 0, 1/m, ..., n.
    """
    dx = 1.0 / m
    box = np.ones(m + 1)
    box[0] = box[-1] = 0.5
    f = box.copy()
    for _ in range(n - 1):
        f = signal.fftconvolve(f, box) * dx
    return f


def mean_uniform_pdf_grid(n: int, t: float, m: int) -> float:
    """Density of the mean of n U[0,1] at t, where n*t*m must be integral."""
    idx = n * t * m
    assert abs(idx - round(idx)) < 1e-9, (n, t, m)
    return n * sum_uniform_grid(n, m)[round(idx)]


def mean_uniform_pdf(t: float, n: int) -> float:
    """Density of the mean of n U[0,1] at t, Richardson-extrapolated.

    Two grid resolutions with second-order convergence combine to a
    fourth-order estimate; the coarse/fine gap doubles as an error bound.
    """
    coarse = mean_uniform_pdf_grid(n, t, 20_000)
    fine = mean_uniform_pdf_grid(n, t, 40_000)
    assert abs(fine - coarse) < 1e-7, (t, n, fine - coarse)
    return (4.0 * fine - coarse) / 3.0


def mean_uniform_cdf(t: float, n: int) -> float:
    """CDF of the mean of n U[0,1] at t: cumulative trapezoid of the grid."""
    def at(m):
        f = sum_uniform_grid(n, m)
        idx = round(n * t * m)
        assert abs(n * t * m - idx) < 1e-9
        dx = 1.0 / m
        inner = f[1:idx].sum()
        return (0.5 * f[0] + inner + 0.5 * f[idx]) * dx

    coarse, fine = at(20_000), at(40_000)
    assert abs(fine - coarse) < 1e-7
    return (4.0 * fine - coarse) / 3.0


def scaled_pdf(x: float, n: int, a: float, b: float) -> float:
    """Mean-of-uniforms density rescaled from [0,1] to [a,b]."""
    t = (x - a) / (b - a)
    return mean_uniform_pdf(t, n) / (b - a)


def marginal_x_deciles(cos_phi: float) -> list:
    """Deciles of the x-marginal of the uniform law on disc-cap-box.

    The marginal density is proportional to the chord height
    2*sqrt(1 - x^2) on [-p, p]; deciles are found by bisection on the
    quadrature CDF. Used to cross-check the Rust-side quantile helper that
    feeds the uniformity chi-square test.
    """
    p = cos_phi
    total, _ = integrate.quad(lambda x: 2.0 * np.sqrt(1.0 - x * x), -p, p,
                              epsabs=1e-14)

    def cdf(x):
        v, _ = integrate.quad(lambda u: 2.0 * np.sqrt(1.0 - u * u), -p, x,
                              epsabs=1e-14)
        return v / total

    qs = []
    for k in range(1, 10):
        lo, hi = -p, p
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if cdf(mid) < k / 10.0:
                lo = mid
            else:
                hi = mid
        qs.append(0.5 * (lo + hi))
    return qs


def main():
    np.set_printoptions(precision=15)

    print("# circle/box acceptance probability (cos_phi = 0.9)")
    p1 = circle_box_acceptance(0.9)
    p1_mc = circle_box_acceptance_mc(0.9, 20_000_000, seed=777)
    se = np.sqrt(p1 * (1 - p1) / 20_000_000)
    print(f"p1                = {p1:.15f}")
    print(f"p1 (MC, 2e7)      = {p1_mc:.15f}   |diff| = {abs(p1-p1_mc):.2e}"
          f"  (3 SE = {3*se:.2e})")
    assert abs(p1 - p1_mc) < 3 * se
    print(f"p1^27             = {p1**27:.15e}")
    print(f"redraw rate 1/p1-1= {1/p1 - 1:.15f}")
    print()

    print("# collapse estimate (1 - 1/3)^27")
    print(f"(2/3)^27          = {(2/3)**27:.15e}")
    print()

    print("# closed-form anchors for the convolution-grid method")
    anchors = [
        (1, 0.5, 1.0),            # uniform
        (3, 0.25, 0.84375),       # 3 * IrwinHall3(0.75) = 3 * (0.75^2)/2
        (3, 0.5, 2.25),           # 3 * IrwinHall3(1.5) = 3 * 0.75
    ]
    for n, t, exact in anchors:
        got = mean_uniform_pdf(t, n)
        print(f"pdf(n={n}, [0,1], t={t}) = {got:.12e}  exact {exact}"
              f"  |err| = {abs(got-exact):.2e}")
        assert abs(got - exact) < 1e-9
    print()

    print("# mean-of-n-uniforms densities (FFT convolution grid)")
    cases = [
        (3, -1.0, 1.0, 0.0),
        (3, 0.0, 1.0, 0.25),
        (9, 0.0, 1.0, 0.5),
        (9, 0.0, 1.0, 0.25),
        (27, 0.0, 1.0, 0.5),
        (27, 0.0, 1.0, 0.35),
        (30, 0.0, 1.0, 0.5),
        (27, -200.0, 200.0, 0.0),
        (27, -200.0, 200.0, 22.2),
        (27, -200.0, 200.0, 100.0),
    ]
    for n, a, b, x in cases:
        print(f"pdf(n={n:2d}, [{a:6.1f},{b:5.1f}], x={x:7.3f}) = "
              f"{scaled_pdf(x, n, a, b):.12e}")
    print()

    print("# mean-of-n-uniforms CDF spot values (convolution grid)")
    for n, t in [(9, 0.25), (27, 0.45), (27, 0.5)]:
        print(f"cdf(n={n:2d}, [0,1], t={t:4.2f}) = {mean_uniform_cdf(t, n):.12e}")
    print()

    print("# chi-square critical values (upper 1% tail)")
    for df in [99]:
        print(f"chi2_crit(0.99, df={df}) = {stats.chi2.ppf(0.99, df):.10f}")
    print()

    print("# x-marginal deciles on the disc/box intersection (cos_phi = 0.9)")
    for k, q in enumerate(marginal_x_deciles(0.9), start=1):
        print(f"decile {k}/10: x = {q:.12f}")


if __name__ == "__main__":
    main()
