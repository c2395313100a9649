"""Finite trigonometric polynomials with exact term-by-term calculus."""
from __future__ import annotations

import numpy as np


class TrigPoly:
    """f(t) = sum_k c[k] cos(k t) + s[k] sin(k t), k = 0..N (s[0] unused)."""

    __slots__ = ("c", "s")

    def __init__(self, cos_coeffs=(), sin_coeffs=()):
        c = np.atleast_1d(np.asarray(cos_coeffs, dtype=float))
        s = np.atleast_1d(np.asarray(sin_coeffs, dtype=float))
        if c.size == 0:
            c = np.zeros(1)
        if s.size == 0:
            s = np.zeros(1)
        n = max(c.size, s.size)
        self.c = np.zeros(n)
        self.c[: c.size] = c
        self.s = np.zeros(n)
        self.s[: s.size] = s
        self.s[0] = 0.0

    @property
    def degree(self) -> int:
        return self.c.size - 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.arange(self.c.size)
        kt = np.multiply.outer(t, k)
        out = np.cos(kt) @ self.c + np.sin(kt) @ self.s
        return out if out.shape else float(out)

    def deriv(self, order: int = 1) -> "TrigPoly":
        c, s = self.c.copy(), self.s.copy()
        k = np.arange(c.size)
        for _ in range(order):
            c, s = k * s, -k * c
        return TrigPoly(c, s)

    def shift(self, delta: float) -> "TrigPoly":
        """Return g with g(t) = f(t + delta)."""
        k = np.arange(self.c.size)
        ck, sk = np.cos(k * delta), np.sin(k * delta)
        return TrigPoly(self.c * ck + self.s * sk, self.s * ck - self.c * sk)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        n = max(self.c.size, other.c.size)
        c = np.zeros(n)
        s = np.zeros(n)
        c[: self.c.size] += self.c
        c[: other.c.size] += other.c
        s[: self.s.size] += self.s
        s[: other.s.size] += other.s
        return TrigPoly(c, s)

    def __sub__(self, other: "TrigPoly") -> "TrigPoly":
        return self + other.scale(-1.0)

    def scale(self, a: float) -> "TrigPoly":
        return TrigPoly(a * self.c, a * self.s)

    def __repr__(self):
        return f"TrigPoly(c={self.c!r}, s={self.s!r})"
