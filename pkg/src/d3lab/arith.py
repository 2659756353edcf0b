"""Exact integer arithmetic kernel.

Everything in this module is exact: divisor-function sieves, prime
factorization, the multiplicative helpers phi/mu, Ramanujan sums
c_q(n) and Kloosterman sums S_{n,m}(q).  Complex floats appear only in
the brute-force oracle paths used to cross-check the integer formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "CapacityError",
    "DivisorTable",
    "Factorization",
    "ReducedFraction",
    "divisors",
    "euler_phi",
    "factorize",
    "kloosterman_sum",
    "kloosterman_table",
    "mobius",
    "mod_inverse",
    "ramanujan_sum",
    "ramanujan_sum_bruteforce",
    "sieve_dk",
    "sigma",
    "unit_phase",
]

# Two int64 work arrays; 16 bytes/entry keeps N = 10^7 under ~200 MB.
MAX_SIEVE_LIMIT = 50_000_000


class CapacityError(MemoryError):
    """Requested table would exceed the configured memory budget."""


@dataclass(frozen=True)
class DivisorTable:
    """Sieved values of d_k(n) for 1 <= n <= limit, immutable once built.

    d_k(n) counts ordered k-tuples with product n; values[0] is unused.
    """

    k: int
    limit: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)

    def __getitem__(self, n: int) -> int:
        return int(self.values[n])

    def prefix_sum(self, x: int) -> int:
        """Sum of d_k(n) for n <= x, exact."""
        if x > self.limit:
            raise ValueError(f"sieve holds n <= {self.limit}, asked for {x}")
        return int(self.values[1 : x + 1].sum())


def sieve_dk(k: int, limit: int, max_limit: int = MAX_SIEVE_LIMIT) -> DivisorTable:
    """Exact table of d_k(1..limit) by k-1 divisor-convolution passes.

    Each pass convolves the current table with the all-ones function:
    out[m] = sum_{d|m} vals[d], so after k-1 passes vals[n] = d_k(n).
    Integer arithmetic throughout (int64 cannot overflow at these sizes).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if limit > max_limit:
        raise CapacityError(
            f"sieve limit {limit} exceeds budget {max_limit} "
            f"(~{16 * limit / 1e6:.0f} MB of work arrays); "
            "raise max_limit explicitly if you really want this"
        )
    vals = np.ones(limit + 1, dtype=np.int64)
    vals[0] = 0
    for _ in range(k - 1):
        out = np.zeros(limit + 1, dtype=np.int64)
        for d in range(1, limit + 1):
            out[d::d] += vals[d]
        vals = out
    return DivisorTable(k=k, limit=limit, values=vals)


@dataclass(frozen=True)
class Factorization:
    """Prime factorization as ((p1, e1), (p2, e2), ...), primes increasing."""

    factors: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= p**e
        return out

    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)


def factorize(n: int) -> Factorization:
    """Trial-division factorization, adequate for n <= ~10^12."""
    if n < 1:
        raise ValueError("factorize requires n >= 1")
    factors = []
    m = n
    for p in (2, 3):
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        if e:
            factors.append((p, e))
    # 6k +- 1 wheel
    p = 5
    while p * p <= m:
        for cand in (p, p + 2):
            if m % cand == 0:
                e = 0
                while m % cand == 0:
                    m //= cand
                    e += 1
                factors.append((cand, e))
        p += 6
    if m > 1:
        factors.append((m, 1))
    factors.sort()
    return Factorization(tuple(factors))


def divisors(n: int) -> list[int]:
    """All positive divisors of n, sorted."""
    divs = [1]
    for p, e in factorize(n).factors:
        divs = [d * p**j for d in divs for j in range(e + 1)]
    return sorted(divs)


def euler_phi(n: int) -> int:
    phi = n
    for p, _ in factorize(n).factors:
        phi -= phi // p
    return phi


def mobius(n: int) -> int:
    mu = 1
    for _, e in factorize(n).factors:
        if e > 1:
            return 0
        mu = -mu
    return mu


def sigma(n: int) -> int:
    """Sum of divisors of n."""
    out = 1
    for p, e in factorize(n).factors:
        out *= (p ** (e + 1) - 1) // (p - 1)
    return out


def mod_inverse(a: int, q: int) -> int:
    """Inverse of a mod q by extended Euclid; loud failure if absent."""
    if q == 1:
        return 0
    r0, r1 = q, a % q
    s0, s1 = 0, 1
    while r1:
        t = r0 // r1
        r0, r1 = r1, r0 - t * r1
        s0, s1 = s1, s0 - t * s1
    if r0 != 1:
        raise ValueError(f"{a} is not invertible mod {q} (gcd = {r0})")
    return s0 % q


@dataclass(frozen=True)
class ReducedFraction:
    """A point h/q on the unit circle in lowest terms, 0 <= h < q."""

    h: int
    q: int

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("denominator must be >= 1")
        if not 0 <= self.h < max(self.q, 1 + self.h):
            raise ValueError("numerator must satisfy 0 <= h < q")
        if self.h == 0:
            if self.q != 1:
                raise ValueError("h = 0 requires q = 1")
        elif math.gcd(self.h, self.q) != 1:
            raise ValueError(f"{self.h}/{self.q} is not reduced")

    @classmethod
    def reduce(cls, a: int, q: int) -> "ReducedFraction":
        if q < 1:
            raise ValueError("denominator must be >= 1")
        a %= q
        if a == 0:
            return cls(0, 1)
        g = math.gcd(a, q)
        return cls(a // g, q // g)

    def __str__(self):
        return f"{self.h}/{self.q}"


def unit_phase(a: int, q: int) -> complex:
    """e(a/q) = exp(2*pi*i*a/q), evaluated from the reduced residue."""
    if q < 1:
        raise ValueError("q must be >= 1")
    r = a % q
    theta = 2.0 * math.pi * r / q
    return complex(math.cos(theta), math.sin(theta))


def ramanujan_sum(q: int, n: int) -> int:
    """c_q(n) via the divisor formula sum_{h | (q,n)} mu(q/h) * h.

    Exact integers; n may be negative or zero (c_q(0) = phi(q)).
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    g = math.gcd(q, n)
    total = 0
    for h in divisors(g):
        total += mobius(q // h) * h
    return total


def ramanujan_sum_bruteforce(q: int, n: int) -> int:
    """Oracle: c_q(n) = sum over a mod q, (a,q)=1, of e(an/q).

    Rejects the result unless it is numerically a real integer.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    total = 0j
    for a in range(1, q + 1):
        if math.gcd(a, q) == 1:
            total += unit_phase(a * n, q)
    if abs(total.imag) > 1e-6:
        raise ArithmeticError(f"c_{q}({n}) oracle has imaginary part {total.imag}")
    nearest = round(total.real)
    if abs(total.real - nearest) > 1e-6:
        raise ArithmeticError(f"c_{q}({n}) oracle {total.real} is not an integer")
    return nearest


def kloosterman_sum(n: int, m: int, q: int) -> complex:
    """S_{n,m}(q) = sum over a mod q, (a,q)=1, of e((n*a + m*abar)/q).

    Direct O(q) evaluation with modular inverses.  The value is real
    (a -> q - a pairs conjugate terms); returned as complex for uniform
    plumbing downstream.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return 1 + 0j
    total = 0j
    for a in range(1, q):
        if math.gcd(a, q) == 1:
            abar = mod_inverse(a, q)
            total += unit_phase(n * a + m * abar, q)
    return total


@lru_cache(maxsize=256)
def kloosterman_table(q: int) -> np.ndarray:
    """q x q table K[n, m] = S_{n,m}(q), via a 2-D inverse FFT.

    T[u, v] = 1 when v is the inverse of the unit u mod q; then
    S_{n,m}(q) = q^2 * ifft2(T)[n, m].
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if q == 1:
        return np.ones((1, 1), dtype=np.complex128)
    T = np.zeros((q, q))
    for a in range(1, q):
        if math.gcd(a, q) == 1:
            T[a, mod_inverse(a, q)] = 1.0
    return q * q * np.fft.ifft2(T)
