"""Complex log-Gamma and integer-order Bessel functions of the first kind.

Both functions accept numpy arrays and broadcast elementwise.
"""

from __future__ import annotations

import math

import numpy as np

from .core import DomainError

# Lanczos approximation, g = 7, nine coefficients
_LANCZOS_G = 7.0
_LANCZOS_C = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_MAX_SHIFT = 10_000


def _lngamma_right(z):
    # valid for Re z >= 0.5
    zm1 = z - 1.0
    acc = np.full(z.shape, _LANCZOS_C[0], dtype=complex)
    for k in range(1, _LANCZOS_C.size):
        acc = acc + _LANCZOS_C[k] / (zm1 + k)
    t = zm1 + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm1 + 0.5) * np.log(t) - t + np.log(acc)


def ln_gamma_complex(z):
    """Logarithm of the Gamma function for complex arguments.

    Returns the principal branch: the analytic continuation of ``log Gamma``
    from the positive real axis with the cut along the negative real axis, so
    that ``lnG(z + 1) = lnG(z) + log(z)`` holds with the principal ``log``.
    ``Re z >= 0.5`` is evaluated directly with a Lanczos sum; smaller real
    parts are shifted up with that recurrence, which keeps the branch exact
    (the reflection formula only fixes the value modulo ``2*pi*i``).

    Raises
    ------
    DomainError
        If any argument is a non-positive integer.
    """
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    pole = (z_arr.imag == 0) & (z_arr.real <= 0) & (z_arr.real == np.round(z_arr.real))
    if np.any(pole):
        raise DomainError(f"Gamma has a pole at {z_arr[pole][0]!r}")
    out = np.empty(z_arr.shape, dtype=complex)
    right = z_arr.real >= 0.5
    if np.any(right):
        out[right] = _lngamma_right(z_arr[right])
    left = ~right
    if np.any(left):
        zl = z_arr[left]
        shift = np.ceil(0.5 - zl.real).astype(int)
        if shift.max() > _MAX_SHIFT:
            raise DomainError(f"Re z below {-_MAX_SHIFT} is not supported")
        acc = _lngamma_right(zl + shift)
        for j in range(int(shift.max())):
            active = j < shift
            acc[active] -= np.log(zl[active] + j)
        out[left] = acc
    return complex(out[0]) if scalar else out


def gamma_complex(z):
    return np.exp(ln_gamma_complex(z))


def _bessel_start_order(n, xmax):
    m = max(n, xmax) + 25 + int(6.0 * math.sqrt(max(n, xmax) + 1.0))
    return m + (m % 2)


def bessel_j(n, x):
    """Bessel function of the first kind J_n(x) for integer ``n >= 0``.

    Uses Miller's downward recurrence normalised with
    ``J_0 + 2 * sum_k J_{2k} = 1``; a two-term series covers ``|x| < 1e-8``.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"order must be a non-negative integer, got {n!r}")
    n = int(n)
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    ax = np.abs(x_arr)
    out = np.zeros(x_arr.shape)

    tiny = ax < 1e-8
    if np.any(tiny):
        h = 0.5 * ax[tiny]
        out[tiny] = h ** n / math.factorial(n) * (1.0 - h * h / (n + 1))

    big = ~tiny
    if np.any(big):
        xb = ax[big]
        m = _bessel_start_order(n, int(math.ceil(xb.max())))
        two_over_x = 2.0 / xb
        j_next = np.zeros_like(xb)
        j_cur = np.full_like(xb, 1e-30)
        norm = np.zeros_like(xb)
        keep = np.zeros_like(xb)
        for k in range(m, 0, -1):
            j_prev = k * two_over_x * j_cur - j_next
            j_next, j_cur = j_cur, j_prev
            # j_cur now holds J_{k-1} (unnormalised)
            if (k - 1) % 2 == 0 and k - 1 > 0:
                norm += 2.0 * j_cur
            if k - 1 == n:
                keep = j_cur.copy()
            huge = np.abs(j_cur) > 1e250
            if np.any(huge):
                scale = np.where(huge, 1e-250, 1.0)
                j_cur *= scale
                j_next *= scale
                norm *= scale
                keep *= scale
        norm += j_cur
        if n == 0:
            keep = j_cur
        out[big] = keep / norm

    if n % 2 == 1:
        out = np.where(x_arr < 0, -out, out)
    return float(out[0]) if scalar else out


def bessel_zero(n, k=1, step=0.05):
    """k-th positive zero of J_n, located by bisection on :func:`bessel_j`."""
    if k < 1:
        raise DomainError("zero index k must be >= 1")
    a = 1e-6 if n == 0 else float(n)
    fa = bessel_j(n, a)
    found = 0
    while True:
        b = a + step
        fb = bessel_j(n, b)
        if fa == 0.0:
            found += 1
            if found == k:
                return a
        elif fa * fb < 0:
            found += 1
            if found == k:
                break
        a, fa = b, fb
    lo, hi, flo = a, b, fa
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = bessel_j(n, mid)
        if fm == 0.0 or hi - lo < 4e-16 * mid:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)
