"""Explicit constants of the cone construction as functions of (n, M, gamma, eps).

In the plane every constant is rational and is kept as a ``Fraction`` or
``int``.  In R^3 the quantities involving sqrt(2) or pi are carried as
256-bit ``gmpy2.mpfr`` values; integer ceilings are still exact because
the margin to the nearest integer is checked.

The constants h1, h2 and h_final are astronomically large and are stored
as ``PowerOfTwo`` objects (coefficient * 2**exponent).  The round count R
behind h2 needs a logarithm with about log2(P) bits and is evaluated on
first access.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import gmpy2
from gmpy2 import mpfr, mpq, mpz

PREC = 256

def as_exact(x) -> Fraction | gmpy2.mpfr:
    """Read a user number; floats are taken at their decimal repr (0.1 -> 1/10)."""
    if isinstance(x, bool):
        raise TypeError("expected a number")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, type(mpfr(0))):
        return x
    return Fraction(str(x))


def _ctx(prec=PREC):
    return gmpy2.context(precision=prec)


def _to_mpfr(x, prec=PREC):
    with _ctx(prec):
        if isinstance(x, Fraction):
            return mpfr(mpq(x.numerator, x.denominator))
        return mpfr(x)


def _exact_ceil(x) -> int:
    if isinstance(x, (Fraction, int)):
        return math.ceil(x)
    c = int(gmpy2.ceil(x))
    with _ctx(x.precision):
        if abs(x - c) < mpfr(2) ** (-(x.precision // 2)) or abs(x - (c - 1)) < mpfr(2) ** (-(x.precision // 2)):
            raise ArithmeticError("ceiling too close to an integer at working precision")
    return c


def _ceil_log2(x) -> int:
    """Least p with 2**p >= x for x > 0."""
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        p = x.numerator.bit_length() - x.denominator.bit_length()
        while Fraction(2) ** p < x:
            p += 1
        while Fraction(2) ** (p - 1) >= x:
            p -= 1
        return p
    with _ctx(x.precision):
        lg = gmpy2.log2(x)
    return _exact_ceil(lg)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, int):
        return _int_str(x)
    return format(float(x), ".17g")


@dataclass(frozen=True)
class PowerOfTwo:
    """The number coefficient * 2**exponent with an exact integer exponent."""

    coefficient: Fraction | gmpy2.mpfr
    exponent: int

    @property
    def log2(self):
        """log2 of the value; an mpfr when the exponent is beyond float range."""
        if self.exponent.bit_length() < 1000:
            return self.exponent + math.log2(float(self.coefficient))
        with _ctx(self.exponent.bit_length() + 64):
            return mpfr(self.exponent) + math.log2(float(self.coefficient))

    def exact(self) -> Fraction:
        if not isinstance(self.coefficient, (Fraction, int)):
            raise ValueError("coefficient is not rational")
        return Fraction(self.coefficient) * Fraction(2) ** self.exponent

    def __str__(self) -> str:
        return f"{_fmt(self.coefficient)} * 2^{_int_str(self.exponent)}"

    def decimal(self, digits: int = 6) -> str:
        with _ctx(self.exponent.bit_length() + 64):
            lg10 = mpfr(self.exponent) * gmpy2.log10(mpfr(2)) + math.log10(float(self.coefficient))
            e = int(gmpy2.floor(lg10))
            mant = float(10 ** (lg10 - e))
        return f"{mant:.{digits - 1}f}e{_int_str(e)}"

    def _log2_cmp(self, other) -> int:
        if isinstance(other, PowerOfTwo):
            a, b = self, other
            shift = min(a.exponent, b.exponent)
            x = Fraction(a.coefficient) * Fraction(2) ** (a.exponent - shift) if a.exponent - shift < 4096 else None
            y = Fraction(b.coefficient) * Fraction(2) ** (b.exponent - shift) if b.exponent - shift < 4096 else None
            if x is None:
                return 1
            if y is None:
                return -1
            return (x > y) - (x < y)
        o = Fraction(other) if isinstance(other, (int, Fraction)) else other
        if self.exponent > 4096:
            return 1
        v = Fraction(self.coefficient) * Fraction(2) ** self.exponent if isinstance(self.coefficient, Fraction) else self.coefficient * mpfr(2) ** self.exponent
        return (v > o) - (v < o)

    def __gt__(self, other):
        return self._log2_cmp(other) > 0

    def __ge__(self, other):
        return self._log2_cmp(other) >= 0

    def __lt__(self, other):
        return self._log2_cmp(other) < 0

    def __le__(self, other):
        return self._log2_cmp(other) <= 0


def rounds_needed(P_exponent: int, n: int, delta) -> int:
    """Least positive integer R with (1 - P^(1-n))^R < delta, for P = 2**P_exponent.

    ``delta`` may be a Fraction, or a callable returning delta at a requested
    binary precision.
    """
    k = P_exponent * (n - 1)
    prec = k + 192
    while True:
        with _ctx(prec):
            d = delta(prec) if callable(delta) else mpfr(mpq(delta.numerator, delta.denominator))
            if d >= 1:
                return 1
            x = mpfr(2) ** (-k)
            q = gmpy2.log(d) / gmpy2.log1p(-x)
            fl = gmpy2.floor(q)
            frac = q - fl
            margin = mpfr(2) ** (-64)
        if margin < frac < 1 - margin:
            return int(fl) + 1
        prec *= 2


@dataclass(frozen=True)
class ParameterSchedule:
    n: int
    M: Fraction | gmpy2.mpfr
    gamma: Fraction
    eps: Fraction
    beta: object
    s_ratio: object
    h0: object
    psi: Fraction
    N: Fraction
    alpha: object
    zeta: int
    m0: int
    C1: PowerOfTwo
    C2: PowerOfTwo
    P_exponent: int
    delta_rounds: object
    h_final_source: str
    warnings: tuple = field(default=(), compare=False)

    @property
    def P(self) -> int:
        return 1 << self.P_exponent

    @property
    def exact(self) -> bool:
        return self.n == 2

    @cached_property
    def R_rounds(self) -> int:
        return rounds_needed(self.P_exponent, self.n, self._delta_source())

    def _delta_source(self):
        if isinstance(self.delta_rounds, Fraction):
            return self.delta_rounds
        return lambda prec: _delta_rounds(self.n, self.M, self.gamma, self.eps, self.zeta, prec)

    def h1(self, delta) -> PowerOfTwo:
        """Slope C1 * P^(R-1) with R the round count for ``delta``."""
        if isinstance(delta, (int, float, str)):
            delta = as_exact(delta)
        R = rounds_needed(self.P_exponent, self.n, delta)
        return PowerOfTwo(self.C1.coefficient, self.C1.exponent + self.P_exponent * (R - 1))

    @cached_property
    def h2(self) -> PowerOfTwo:
        return PowerOfTwo(self.C1.coefficient, self.C1.exponent + self.P_exponent * (self.R_rounds - 1))

    @property
    def h_final(self):
        return {"h0": self.h0, "h2": self.h2, "alpha*zeta": self.alpha * self.zeta}[self.h_final_source]

    def h_star(self, h):
        """h sqrt(n-1) for a slope h."""
        return h if self.n == 2 else h * _to_mpfr(Fraction(2)) ** mpfr(0.5)

    def as_dict(self, with_rounds: bool = True) -> dict:
        """Exact string forms (fractions, or c * 2^k) and decimals."""
        def pair(x):
            if isinstance(x, PowerOfTwo):
                lg = x.log2
                return {"exact": str(x), "decimal": x.decimal(),
                        "log2": lg if isinstance(lg, float) else _fmt_big(lg)}
            return {"exact": _fmt(x) if isinstance(x, (Fraction, int)) else None,
                    "decimal": format(float(x), ".12g")}

        out = {
            "n": self.n, "M": pair(self.M), "gamma": pair(self.gamma), "eps": pair(self.eps),
            "beta": pair(self.beta), "s_ratio": pair(self.s_ratio), "h0": pair(self.h0),
            "psi": pair(self.psi), "N": pair(self.N), "alpha": pair(self.alpha),
            "zeta": pair(self.zeta), "m0": pair(self.m0), "C1": pair(self.C1), "C2": pair(self.C2),
            "P": {"exact": f"2^{self.P_exponent}", "log2": self.P_exponent},
            "delta_rounds": pair(self.delta_rounds), "h_final_source": self.h_final_source,
        }
        if with_rounds:
            R = self.R_rounds
            out["R_rounds"] = {"exact": _int_str(R), "bits": R.bit_length(),
                               "decimal": _int_sci(R)}
            out["h1"] = out["h2"] = out["h_final"] = pair(self.h2)
        return out


def _int_str(v: int) -> str:
    return mpz(v).digits(10)


def _fmt_big(x) -> str:
    """Decimal string of an mpfr whose integer part may exceed float range."""
    ip = int(gmpy2.floor(x))
    return f"{_int_str(ip)}{format(float(x - ip), '.6f')[1:]}"


def _int_sci(v: int) -> str:
    s = _int_str(v)
    return f"{s[0]}.{s[1:7]}e{len(s) - 1}" if len(s) > 7 else s


def _delta_rounds(n, M, gamma, eps, zeta, prec=PREC):
    """(eps/2) (gamma + 1/(M sqrt(n-1)))^-1 omega_{n-1} / (6 zeta M)^(n-1)."""
    if n == 2 and all(isinstance(v, Fraction) for v in (M, gamma, eps)):
        return eps / 2 / (gamma + 1 / M) * 2 / (6 * zeta * M)
    with _ctx(prec):
        Mf, gf, ef = (_to_mpfr(v, prec) for v in (M, gamma, eps))
        omega = mpfr(2) if n == 2 else gmpy2.const_pi()
        root = gmpy2.sqrt(mpfr(n - 1))
        return ef / 2 / (gf + 1 / (Mf * root)) * omega / (6 * zeta * Mf) ** (n - 1)


def parameter_schedule(n: int, M, gamma, eps) -> ParameterSchedule:
    if n not in (2, 3):
        raise ValueError("n must be 2 or 3")
    M, gamma, eps = as_exact(M), as_exact(gamma), as_exact(eps)
    if not M > 1:
        raise ValueError("M must exceed 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    notes = []
    rational = n == 2 and isinstance(M, Fraction)
    if rational:
        beta = Fraction(2) / (M + 1)
        root = Fraction(1)
        s_ratio = 1 / (2 * M)
        h0 = 16 * M
        alpha = max(4 * M, 12 * M)
    else:
        with _ctx():
            Mf = _to_mpfr(M)
            omega = mpfr(2) if n == 2 else gmpy2.const_pi()
            beta = omega / (Mf + 1) ** (n - 1)
            root = gmpy2.sqrt(mpfr(n - 1))
            s_ratio = 1 / (2 * Mf * root)
            h0 = 16 * Mf * root
            # 4 M sqrt(n-1) < 12 M for n <= 3, so alpha = 12 M exactly
            alpha = 12 * M if isinstance(M, Fraction) else 12 * Mf
    if gamma < beta:
        msg = (f"gamma = {float(gamma):.6g} is below beta = {float(beta):.6g}; "
               "no boundary point has such low density")
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    # psi = (8 M sqrt(n-1))^(1-n); rational for n = 2, 3 whenever M is
    if isinstance(M, Fraction):
        psi = 1 / (8 * M) if n == 2 else Fraction(1, 128) / (M * M)
    else:
        with _ctx():
            psi = (8 * _to_mpfr(M) * gmpy2.sqrt(mpfr(n - 1))) ** (1 - n)
    N = 2 * Fraction(5) ** (n - 1) * gamma / eps
    if rational:
        binv = 1 / beta
        zeta = 4 * math.ceil(4 ** (n - 1) * binv * N)
        m0 = math.ceil(32 ** (n - 1) * binv * N)
        c2_coef = binv * N * M
    else:
        with _ctx():
            binv = 1 / _to_mpfr(beta)
            Nf = _to_mpfr(N)
            zeta = 4 * _exact_ceil(4 ** (n - 1) * binv * Nf)
            m0 = _exact_ceil(32 ** (n - 1) * binv * Nf)
            c2_coef = binv * Nf * _to_mpfr(M)
    C1 = PowerOfTwo(alpha, m0 + 3)
    C2 = PowerOfTwo(c2_coef, m0 + 2 * n + 3)
    P_exponent = C2.exponent + _ceil_log2(c2_coef)
    delta = _delta_rounds(n, M, gamma, eps, zeta)
    # h2 >= C1 = alpha 2^(m0+3); compare against the other two candidates exactly
    az = alpha * zeta
    if C1 > az and C1 > h0:
        source = "h2"
    else:  # pragma: no cover - impossible for M > 1, kept for completeness
        source = "alpha*zeta" if az >= h0 else "h0"
    return ParameterSchedule(n=n, M=M, gamma=gamma, eps=eps, beta=beta, s_ratio=s_ratio, h0=h0,
                             psi=psi, N=N, alpha=alpha, zeta=zeta, m0=m0, C1=C1, C2=C2,
                             P_exponent=P_exponent, delta_rounds=delta, h_final_source=source,
                             warnings=tuple(notes))
