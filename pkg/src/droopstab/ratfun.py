"""Rational transfer functions in the Laplace variable s.

Coefficient lists are dense, ascending in powers of s.  All polynomial
algebra runs in exact rational arithmetic (floats are dyadic rationals, so
sums and products are exact and structural cancellations produce exact
zeros); coefficients are converted to float only for frequency evaluation.
No pole/zero cancellation is attempted beyond exact shared factors of s, so
repeated composition can grow degrees with common factors.  That is fine for
this package: every downstream comparison is frequency-sampled.

Exact assembly matters here: closed-loop impedance numerators routinely
cancel their extreme-order coefficients symbolically, and float-accumulated
residues at either end masquerade as spurious origin poles or corrupt the
high-frequency asymptote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "RationalTF",
    "ComplexResponse",
    "DegenerateParallel",
    "DegenerateLoop",
    "NearPole",
    "tf_add",
    "tf_sub",
    "tf_mul",
    "tf_div",
    "tf_scale",
    "tf_cancel_origin",
    "tf_parallel",
    "tf_feedback",
    "tf_eval",
    "freq_response",
    "tf_const",
    "tf_s",
]

# |den(jw)| below this (after max-coefficient normalisation) is "at a pole".
_POLE_ATOL = 1e-12

_ZERO = Fraction(0)
_ONE = Fraction(1)


class DegenerateParallel(ArithmeticError):
    """a + b is the zero polynomial: ideal anti-resonant pair, no parallel TF."""


class DegenerateLoop(ArithmeticError):
    """1 + forward*feedback is the zero polynomial: loop closure undefined."""


class NearPole(ArithmeticError):
    """Frequency-response evaluation requested too close to a pole."""


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(float(x))


def _trim(coeffs) -> tuple[Fraction, ...]:
    """Canonicalize: exact coefficients, trailing exact zeros dropped."""
    c = [_exact(x) for x in coeffs]
    if not c:
        return (_ZERO,)
    last = len(c) - 1
    while last > 0 and c[last] == 0:
        last -= 1
    return tuple(c[: last + 1])


def _is_zero_poly(coeffs: tuple[Fraction, ...]) -> bool:
    return len(coeffs) == 1 and coeffs[0] == 0


def _poly_mul(
    a: tuple[Fraction, ...], b: tuple[Fraction, ...]
) -> tuple[Fraction, ...]:
    out = [_ZERO] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            if y != 0:
                out[i + j] += x * y
    return _trim(out)


def _poly_add(
    a: tuple[Fraction, ...], b: tuple[Fraction, ...]
) -> tuple[Fraction, ...]:
    n = max(len(a), len(b))
    out = [_ZERO] * n
    for i, x in enumerate(a):
        out[i] += x
    for i, x in enumerate(b):
        out[i] += x
    return _trim(out)


@dataclass(frozen=True)
class RationalTF:
    """Ratio of two real polynomials in s, held as exact rationals."""

    num_exact: tuple[Fraction, ...]
    den_exact: tuple[Fraction, ...]

    def __init__(self, num, den=(1.0,)):
        num_t = _trim(num)
        den_t = _trim(den)
        if _is_zero_poly(den_t):
            raise ZeroDivisionError("denominator is the zero polynomial")
        object.__setattr__(self, "num_exact", num_t)
        object.__setattr__(self, "den_exact", den_t)

    # -- float views --------------------------------------------------------

    @property
    def num(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.num_exact)

    @property
    def den(self) -> tuple[float, ...]:
        return tuple(float(c) for c in self.den_exact)

    # -- algebra ----------------------------------------------------------

    def __add__(self, other: "RationalTF | float") -> "RationalTF":
        return tf_add(self, _as_tf(other))

    def __radd__(self, other: float) -> "RationalTF":
        return tf_add(_as_tf(other), self)

    def __sub__(self, other: "RationalTF | float") -> "RationalTF":
        return tf_sub(self, _as_tf(other))

    def __rsub__(self, other: float) -> "RationalTF":
        return tf_sub(_as_tf(other), self)

    def __mul__(self, other: "RationalTF | float") -> "RationalTF":
        return tf_mul(self, _as_tf(other))

    def __rmul__(self, other: float) -> "RationalTF":
        return tf_mul(_as_tf(other), self)

    def __truediv__(self, other: "RationalTF | float") -> "RationalTF":
        return tf_div(self, _as_tf(other))

    def __rtruediv__(self, other: float) -> "RationalTF":
        return tf_div(_as_tf(other), self)

    def __neg__(self) -> "RationalTF":
        return RationalTF(tuple(-c for c in self.num_exact), self.den_exact)

    # -- evaluation --------------------------------------------------------

    def at(self, f_hz: float) -> complex:
        """Complex value at s = j*2*pi*f_hz (scalar convenience wrapper)."""
        return tf_eval(self, f_hz).value

    def response(self, f_hz: np.ndarray) -> np.ndarray:
        return freq_response(self, f_hz)

    def degree(self) -> tuple[int, int]:
        return (len(self.num_exact) - 1, len(self.den_exact) - 1)

    def is_zero(self) -> bool:
        return _is_zero_poly(self.num_exact)

    def __repr__(self) -> str:
        return f"RationalTF(num={list(self.num)}, den={list(self.den)})"


@dataclass(frozen=True)
class ComplexResponse:
    """Single-frequency response sample with derived magnitude/phase."""

    frequency: float  # Hz
    value: complex
    magnitude_db: float = field(init=False)
    phase_deg: float = field(init=False)

    def __post_init__(self):
        mag = abs(self.value)
        db = 20.0 * math.log10(mag) if mag > 0.0 else -math.inf
        object.__setattr__(self, "magnitude_db", db)
        ph = math.degrees(math.atan2(self.value.imag, self.value.real))
        if ph <= -180.0:
            ph += 360.0
        object.__setattr__(self, "phase_deg", ph)


def _as_tf(x) -> RationalTF:
    if isinstance(x, RationalTF):
        return x
    return RationalTF((x,), (1.0,))


def tf_const(value: float) -> RationalTF:
    """Constant (frequency-independent) transfer function."""
    return RationalTF((value,), (1.0,))


def tf_s() -> RationalTF:
    """The Laplace variable s itself."""
    return RationalTF((0.0, 1.0), (1.0,))


def tf_add(a: RationalTF, b: RationalTF) -> RationalTF:
    num = _poly_add(
        _poly_mul(a.num_exact, b.den_exact), _poly_mul(b.num_exact, a.den_exact)
    )
    return RationalTF(num, _poly_mul(a.den_exact, b.den_exact))


def tf_sub(a: RationalTF, b: RationalTF) -> RationalTF:
    return tf_add(a, -b)


def tf_mul(a: RationalTF, b: RationalTF) -> RationalTF:
    return RationalTF(
        _poly_mul(a.num_exact, b.num_exact), _poly_mul(a.den_exact, b.den_exact)
    )


def tf_scale(a: RationalTF, factor: float) -> RationalTF:
    """Scale by a frequency-independent gain."""
    g = _exact(factor)
    return RationalTF(tuple(g * c for c in a.num_exact), a.den_exact)


def tf_cancel_origin(tf: RationalTF) -> RationalTF:
    """Strip shared exact zeros at s=0 from numerator and denominator.

    Closed-loop assembly of cascaded integrators often leaves both
    polynomials with an exact common factor of s; removing it keeps DC
    evaluation meaningful instead of reading 0/0 as a pole.
    """
    num, den = tf.num_exact, tf.den_exact
    k = 0
    while (
        k < len(num) - 1
        and k < len(den) - 1
        and num[k] == 0
        and den[k] == 0
    ):
        k += 1
    if k == 0:
        return tf
    return RationalTF(num[k:], den[k:])


def tf_div(a: RationalTF, b: RationalTF) -> RationalTF:
    if b.is_zero():
        raise ZeroDivisionError("division by the zero transfer function")
    return RationalTF(
        _poly_mul(a.num_exact, b.den_exact), _poly_mul(a.den_exact, b.num_exact)
    )


def tf_parallel(a: RationalTF, b: RationalTF) -> RationalTF:
    """Impedance-style parallel combination a*b/(a+b), built as na*nb/(na*db + nb*da)."""
    num = _poly_mul(a.num_exact, b.num_exact)
    den = _poly_add(
        _poly_mul(a.num_exact, b.den_exact), _poly_mul(b.num_exact, a.den_exact)
    )
    if _is_zero_poly(den):
        raise DegenerateParallel("a + b is identically zero")
    return RationalTF(num, den)


def tf_feedback(forward: RationalTF, feedback: RationalTF) -> RationalTF:
    """Closed loop forward/(1 + forward*feedback)."""
    num = _poly_mul(forward.num_exact, feedback.den_exact)
    den = _poly_add(
        _poly_mul(forward.den_exact, feedback.den_exact),
        _poly_mul(forward.num_exact, feedback.num_exact),
    )
    if _is_zero_poly(den):
        raise DegenerateLoop("1 + forward*feedback is identically zero")
    return RationalTF(num, den)


def _normalized(tf: RationalTF) -> tuple[np.ndarray, np.ndarray]:
    """num/den in float with den scaled so its largest-|coefficient| is 1."""
    den = np.asarray(tf.den, dtype=float)
    num = np.asarray(tf.num, dtype=float)
    scale = np.max(np.abs(den))
    if scale == 0.0 or not np.isfinite(scale):
        raise NearPole("denominator not representable in float")
    return num / scale, den / scale


def tf_eval(tf: RationalTF, f_hz: float) -> ComplexResponse:
    """Evaluate at s = j*2*pi*f_hz via Horner on the normalized polynomials."""
    num, den = _normalized(tf)
    s = 2j * math.pi * f_hz
    nv = complex(num[-1])
    for c in num[-2::-1]:
        nv = nv * s + c
    dv = complex(den[-1])
    for c in den[-2::-1]:
        dv = dv * s + c
    if abs(dv) < _POLE_ATOL:
        raise NearPole(f"denominator magnitude {abs(dv):.3e} at f={f_hz} Hz")
    return ComplexResponse(frequency=f_hz, value=nv / dv)


def freq_response(tf: RationalTF, f_hz) -> np.ndarray:
    """Vectorized complex response at an array of frequencies in Hz."""
    num, den = _normalized(tf)
    s = 2j * math.pi * np.asarray(f_hz, dtype=float)
    nv = np.full_like(s, num[-1], dtype=complex)
    for c in num[-2::-1]:
        nv = nv * s + c
    dv = np.full_like(s, den[-1], dtype=complex)
    for c in den[-2::-1]:
        dv = dv * s + c
    bad = np.abs(dv) < _POLE_ATOL
    if np.any(bad):
        f_bad = np.asarray(f_hz, dtype=float).ravel()[np.argmax(bad.ravel())]
        raise NearPole(f"denominator vanishes near f={f_bad} Hz")
    return nv / dv
