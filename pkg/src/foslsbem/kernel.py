"""Heat kernel in 2D, the exponential integral E1, and closed-form time integrals.

With a = r^2 / 4 and z = a / tau, the time antiderivatives (all vanishing for
tau <= 0) of the heat kernel G(tau, r) = exp(-z) / (4 pi tau) are

    F1 = E1(z) / (4 pi)
    F2 = ((tau + a) E1(z) - tau exp(-z)) / (4 pi)

and those of the double-layer time kernel H = G / (2 tau) are

    K1 = exp(-z) / (8 pi a)
    K2 = (tau exp(-z) - a E1(z)) / (8 pi a)
    K3 = ((tau^2 + a tau) exp(-z) / 2 - (a tau + a^2 / 2) E1(z)) / (8 pi a)

so that grad_y G(t - s, x - y) . n_y = H(t - s, |x - y|) (x - y) . n_y.
"""

from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061
UNDERFLOW = 700.0
_SERIES_CUTOFF = 1.5


def heat_kernel(t, x):
    """G(t, x) = exp(-|x|^2 / 4t) / (4 pi t) for t > 0, else 0."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    z = r2 / (4.0 * ts)
    out = np.where(pos & (z <= UNDERFLOW), np.exp(-np.minimum(z, UNDERFLOW)) / (4.0 * np.pi * ts), 0.0)
    return out[()] if out.ndim == 0 else out


def _e1_series(x):
    term = x.copy()
    acc = x.copy()
    k = 1
    while True:
        k += 1
        term *= -x / k
        inc = term / k
        acc += inc
        if np.all(np.abs(inc) <= 1e-17 * np.abs(acc)) or k > 60:
            break
    return -EULER_GAMMA - np.log(x) + acc


def _e1_continued_fraction(x):
    # modified Lentz evaluation of exp(x) E1(x) = 1/(x+1-) 1/(x+3-) 4/(x+5-) ...
    tiny = 1e-300
    b = x + 1.0
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    result = np.empty_like(x)
    active = np.arange(len(x))
    i = 0
    while len(active):
        i += 1
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        done = np.abs(delta - 1.0) <= 1e-16
        if i > 500:
            done[:] = True
        if np.any(done):
            result[active[done]] = h[done]
            keep = ~done
            active, b, c, d, h = active[keep], b[keep], c[keep], d[keep], h[keep]
    return result * np.exp(-x)


def exp_integral_e1(x):
    """E1(x) = int_x^inf exp(-s) / s ds for x > 0.

    Power series below 1.5, continued fraction above, exact zero past the
    exp underflow threshold.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("E1 is only defined here for x > 0")
    flat = x.ravel()
    out = np.zeros_like(flat)
    small = flat < _SERIES_CUTOFF
    large = ~small & (flat <= UNDERFLOW)
    if np.any(small):
        out[small] = _e1_series(flat[small])
    if np.any(large):
        out[large] = _e1_continued_fraction(flat[large])
    out = out.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def _split(tau, a):
    """Mask of points with a nonnegligible kernel, and E1(z), exp(-z) there."""
    tau, a = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(a, dtype=float))
    live = tau > 0
    z = np.full(tau.shape, np.inf)
    z[live] = a[live] / tau[live]
    live &= z <= UNDERFLOW
    E = np.zeros(tau.shape)
    X = np.zeros(tau.shape)
    if np.any(live):
        E[live] = exp_integral_e1(z[live])
        X[live] = np.exp(-z[live])
    return tau, a, live, E, X


def single_layer_antiderivatives(tau, a):
    """F1, F2 for squared half-distances a = r^2 / 4 > 0."""
    tau, a, live, E, X = _split(tau, a)
    F1 = E / (4.0 * np.pi)
    F2 = np.where(live, ((tau + a) * E - tau * X) / (4.0 * np.pi), 0.0)
    return F1, F2


def double_layer_antiderivatives(tau, a):
    """K1, K2, K3 for a = r^2 / 4 > 0."""
    tau, a, live, E, X = _split(tau, a)
    c = np.where(live, 1.0 / (8.0 * np.pi * np.where(live, a, 1.0)), 0.0)
    K1 = c * X
    K2 = c * (tau * X - a * E)
    K3 = c * ((tau * tau + a * tau) * X / 2.0 - (a * tau + a * a / 2.0) * E)
    return K1, K2, K3


def layer_antiderivatives(tau, a):
    """F2, K2, K3 sharing one E1 evaluation (the quantities Galerkin entries need)."""
    tau, a, live, E, X = _split(tau, a)
    F2 = np.where(live, ((tau + a) * E - tau * X) / (4.0 * np.pi), 0.0)
    c = np.where(live, 1.0 / (8.0 * np.pi * np.where(live, a, 1.0)), 0.0)
    K2 = c * (tau * X - a * E)
    K3 = c * ((tau * tau + a * tau) * X / 2.0 - (a * tau + a * a / 2.0) * E)
    return F2, K2, K3


@dataclass(frozen=True)
class TimeMoments:
    """Double time integrals over a test interval [a, b] and trial interval [c, d].

    ``single``: int int G(t - s, r) ds dt (constant x constant).
    ``double_const``, ``double_lower``, ``double_upper``: int int H(t - s, r) w(s) ds dt
    with w = 1, the hat falling from c, and the hat rising to d respectively.
    Multiply the double-layer moments by (x - y) . n_y to get K-type kernels.
    """

    single: np.ndarray
    double_const: np.ndarray
    double_lower: np.ndarray
    double_upper: np.ndarray


def combine_time_moments(F2, K2, K3, a, b, c, d):
    """Assemble the moments from antiderivative callables of tau."""
    single = F2(b - c) - F2(b - d) - F2(a - c) + F2(a - d)
    k2c = K2(b - c) - K2(a - c)
    k2d = K2(b - d) - K2(a - d)
    k3 = (K3(b - c) - K3(a - c) - K3(b - d) + K3(a - d)) / (d - c)
    return TimeMoments(single, k2c - k2d, k2c - k3, -k2d + k3)


def panel_time_integrals(r2, a, b, c, d):
    """Exact double time integrals of the heat kernel for test [a, b], trial [c, d].

    ``r2`` is the squared spatial distance and must be positive: the r = 0
    limit is logarithmically singular and is handled by spatial quadrature.
    """
    if not (a < b and c < d):
        raise ValueError("time intervals must be nondegenerate")
    half = np.asarray(r2, dtype=float) / 4.0
    if np.any(half <= 0):
        raise ValueError("r2 = 0 is singular; route it through the singular spatial rules")

    def F2(tau):
        return single_layer_antiderivatives(tau, half)[1]

    def K2(tau):
        return double_layer_antiderivatives(tau, half)[1]

    def K3(tau):
        return double_layer_antiderivatives(tau, half)[2]

    return combine_time_moments(F2, K2, K3, a, b, c, d)
