"""Log-gamma and digamma for real positive arguments.

Both functions accept scalars or arrays and evaluate elementwise in double
precision. Arguments must be positive; the evidential losses only ever call
them with ``alpha > 1``.
"""

import numpy as np

# Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993227684700473478,
    676.520368121885098567009190444019,
    -1259.13921672240287047156078755283,
    771.3234287776530788486528258894,
    -176.61502916214059906584551354,
    12.507343278686904814458936853,
    -0.13857109526572011689554707,
    9.984369578019570859563e-6,
    1.50563273514931155834e-7,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# Bernoulli-number coefficients B_2k / (2k) of the digamma asymptotic series.
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def _lgamma_lanczos(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def lgamma(x):
    """Natural log of the gamma function for ``x > 0``.

    Uses the Lanczos approximation with the reflection formula below 0.5.
    Absolute error stays below 1e-12 up to x of a few hundred; past that it
    is bounded by the float spacing of the result.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0) or np.any(~np.isfinite(arr)):
        raise ValueError("lgamma requires finite positive arguments")
    small = arr < 0.5
    out = np.empty_like(arr)
    if np.any(~small):
        out[~small] = _lgamma_lanczos(arr[~small])
    if np.any(small):
        xs = arr[small]
        # Gamma(x) Gamma(1-x) = pi / sin(pi x)
        out[small] = np.log(np.pi / np.sin(np.pi * xs)) - _lgamma_lanczos(1.0 - xs)
    return out if out.ndim else float(out)


def digamma(x):
    """Derivative of :func:`lgamma` for ``x > 0``.

    Shifts the argument upward with psi(x) = psi(x + 1) - 1/x until x >= 6,
    then sums the asymptotic series.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0) or np.any(~np.isfinite(arr)):
        raise ValueError("digamma requires finite positive arguments")
    z = arr.copy()
    shift = np.zeros_like(z)
    while True:
        low = z < 6.0
        if not np.any(low):
            break
        shift[low] -= 1.0 / z[low]
        z[low] += 1.0
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    power = inv2.copy()
    for c in _DIGAMMA_SERIES:
        series += c * power
        power *= inv2
    out = np.log(z) - 0.5 / z - series + shift
    return out if out.ndim else float(out)
