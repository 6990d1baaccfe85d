"""Continued fractions and best rational approximations."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterator


def cf_terms(x, max_terms: int = 64) -> Iterator[int]:
    """Partial quotients of ``x``; exact for Fractions and (binary) floats."""
    r = Fraction(x)
    for _ in range(max_terms):
        a = math.floor(r)
        yield a
        r -= a
        if r == 0:
            return
        r = 1 / r


def convergents(x, max_terms: int = 64) -> Iterator[Fraction]:
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    for a in cf_terms(x, max_terms):
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield Fraction(h1, k1)


def approximate(x, eps: float) -> Fraction:
    """First convergent within ``eps`` of ``x`` (smallest such denominator
    among convergents)."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    target = Fraction(x)
    last = None
    for c in convergents(x):
        last = c
        if abs(c - target) <= eps:
            return c
    return last  # exact: the expansion of a float terminates


def lcm_denominators(row) -> int:
    n = 1
    for q in row:
        d = Fraction(q).denominator
        n = n * d // math.gcd(n, d)
    return n
