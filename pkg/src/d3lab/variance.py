"""Progression errors, Parseval checks, and variance scans.

For a modulus q and cutoff x the lab computes

    S_r      = sum_{n <= x, n = r mod q} d_k(n)            (exact integers)
    Delta(a/q) = sum_{n <= x} d_k(n) e(na/q) - f_{q/(a,q)}(x)
    E_x(q,a) = S_a - M_x(q,a)

where f_d(x) is the Moebius-paired main term of mainterm_expsum and the
per-class main term used in the aggregates is its exact Fourier dual

    M_x(q,r) = (1/q) sum_{d | q} c_d(r) f_d(x).

With this pairing the Parseval identity

    sum_a |E_x(q,a)|^2 = (1/q) sum_a |Delta(a/q)|^2

holds by DFT unitarity up to FFT roundoff (~1e-13), and the divisor
decomposition sum_a |Delta(a/q)|^2 = sum_{d|q} sum'_h |Delta(h/d)|^2
holds because the f_d values are shared between levels.  The agreement
of M_x(q,r) with the standalone residue formula mainterm_progression is
a measured invariant, not an assumption.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .arith import DivisorTable, ReducedFraction, divisors
from .expsum import cq_table
from .mainterm import mainterm_expsum, mainterm_progression

__all__ = [
    "VarianceReport",
    "bound_bhs",
    "bound_nguyen",
    "bound_second_moment",
    "bound_first_moment",
    "delta_all",
    "dft_direct",
    "divisor_decomposition_check",
    "exponent_scan",
    "fit_log_slopes",
    "fmt12",
    "progression_error",
    "progression_sums",
    "reports_to_csv",
    "reports_to_json",
    "variance_report",
    "CSV_COLUMNS",
]


def fmt12(v: float) -> str:
    """Stable 12-significant-digit rendering for regression fixtures."""
    return f"{v:.12g}"


def progression_sums(q: int, x: float, table: DivisorTable) -> np.ndarray:
    """S_r = sum_{n <= x, n = r mod q} d_k(n) for r = 0..q-1, exact int64."""
    xi = int(x)
    if xi > table.limit:
        raise ValueError(f"sieve limit {table.limit} < x = {xi}")
    n = np.arange(1, xi + 1, dtype=np.int64)
    # weighted bincount is exact: all partial sums are < 2^53
    out = np.bincount(n % q, weights=table.values[1 : xi + 1].astype(np.float64), minlength=q)
    return out.astype(np.int64)


def dft_direct(values: np.ndarray) -> np.ndarray:
    """O(q^2) direct transform sum_r v_r e(ra/q); oracle for the FFT path."""
    q = len(values)
    a = np.arange(q)
    return np.exp(2j * np.pi * np.outer(a, a % q) / q) @ values.astype(np.complex128)


@lru_cache(maxsize=200_000)
def _expsum_main_term(d: int, x: float, k: int) -> float:
    point = ReducedFraction(0, 1) if d == 1 else ReducedFraction(1, d)
    return mainterm_expsum(point, x, k)


def _class_main_terms(q: int, x: float, k: int) -> np.ndarray:
    """M_x(q, r) for r = 0..q-1 as the Fourier dual of the f_d values."""
    out = np.zeros(q)
    for d in divisors(q):
        fd = _expsum_main_term(d, x, k)
        out += cq_table(d)[np.arange(q) % d] * fd
    return out / q


def delta_all(q: int, x: float, table: DivisorTable, k: int = 3) -> np.ndarray:
    """Delta(a/q) for a = 0..q-1: length-q DFT of the residue sums minus
    the reduced-point main term f_{q/(a,q)}(x).

    The DFT runs through numpy's pocketfft, which is chirp-based
    (Bluestein) for prime lengths, O(q log q) for every q; dft_direct is
    the retained O(q^2) oracle.
    """
    S = progression_sums(q, x, table)
    D = q * np.fft.ifft(S.astype(np.float64))
    a = np.arange(q)
    g = np.gcd(a, q)
    f = np.array([_expsum_main_term(int(q // gv), float(x), k) for gv in g])
    return D - f


def progression_error(q: int, a: int, x: float, table: DivisorTable, k: int = 3) -> float:
    """E_x(q,a) = S_{a mod q} - mainterm_progression(q, a, x)."""
    S = progression_sums(q, x, table)
    return float(S[a % q]) - mainterm_progression(q, a, float(x), k)


# ---------------------------------------------------------------------------
# reference bounds
# ---------------------------------------------------------------------------


def bound_nguyen(x: float, q: int) -> float:
    """Piecewise first-moment reference bound for d_3 (display (2)).

    Branches: x^{11/12} for q <= x^{1/4}; x^{7/9} q^{1/2} for
    x^{1/4} < q <= x^{4/9}; x for x^{4/9} < q <= x^{1/2};
    x^{5/6} q^{1/4} for x^{1/2} < q <= x^{2/3}; +inf outside the stated
    validity range (no bound claimed there).
    """
    if q < 1:
        raise ValueError("q >= 1 required")
    if q <= x**0.25:
        return x ** (11.0 / 12.0)
    if q <= x ** (4.0 / 9.0):
        return x ** (7.0 / 9.0) * q**0.5
    if q <= x**0.5:
        return float(x)
    if q <= x ** (2.0 / 3.0):
        return x ** (5.0 / 6.0) * q**0.25
    return math.inf


def bound_bhs(x: float, q: int) -> float:
    """Piecewise first-moment reference bound for d_2 (display (1))."""
    if q < 1:
        raise ValueError("q >= 1 required")
    if q <= x ** (1.0 / 6.0):
        return x**0.75
    if q <= x ** (1.0 / 3.0):
        return x ** (2.0 / 3.0) * q**0.5
    if q <= x**0.5:
        return x**0.7 * q**0.4
    if q <= x:
        return x**0.8 * q**0.2
    return math.inf


def bound_second_moment(x: float, q: int, k: int) -> float:
    """Second-moment bound: x q^{3/2} for k=3, x for k=2 (Blomer form)."""
    if k == 3:
        return x * q**1.5
    if k == 2:
        return float(x)
    raise ValueError("k must be 2 or 3")


def bound_first_moment(x: float, q: int, k: int) -> float:
    """First-moment bound via Cauchy-Schwarz: x^{1/2} q^{3/4} (k=3), (xq)^{1/2} (k=2)."""
    if k == 3:
        return x**0.5 * q**0.75
    if k == 2:
        return (x * q) ** 0.5
    raise ValueError("k must be 2 or 3")


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

CSV_COLUMNS = [
    "x",
    "q",
    "V2_all",
    "V2_prim",
    "V2_E",
    "V1_prim",
    "bound_thm1",
    "bound_thm2",
    "bound_nguyen",
    "ratio2",
    "ratio1",
    "parseval_dev",
    "decomp_dev",
]


@dataclass(frozen=True)
class VarianceReport:
    """Aggregates, reference bounds, and identity deviations at one (x, q)."""

    x: float
    q: int
    k: int
    v2_all: float
    v2_prim: float
    v2_e: float
    v1_prim: float
    v1_all: float
    bound_thm1: float
    bound_thm2: float
    bound_nguyen: float
    ratio2: float
    ratio1: float
    parseval_dev: float
    decomp_dev: float = math.nan
    y_param: float = field(default=math.nan)

    def csv_row(self) -> list[str]:
        vals = [
            self.x,
            self.q,
            self.v2_all,
            self.v2_prim,
            self.v2_e,
            self.v1_prim,
            self.bound_thm1,
            self.bound_thm2,
            self.bound_nguyen,
            self.ratio2,
            self.ratio1,
            self.parseval_dev,
            self.decomp_dev,
        ]
        return [fmt12(v) if isinstance(v, float) else str(v) for v in vals]

    def json_record(self) -> dict:
        rec = {c: _round12(v) for c, v in zip(CSV_COLUMNS, [
            self.x, self.q, self.v2_all, self.v2_prim, self.v2_e, self.v1_prim,
            self.bound_thm1, self.bound_thm2, self.bound_nguyen,
            self.ratio2, self.ratio1, self.parseval_dev, self.decomp_dev,
        ])}
        rec["V1_all"] = _round12(self.v1_all)
        rec["k"] = self.k
        rec["Y_param"] = _round12(self.y_param)
        return rec


def _round12(v) -> float:
    if isinstance(v, (int, np.integer)):
        return int(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf"
    return float(fmt12(float(v)))


def variance_report(
    q: int,
    x: float,
    table: DivisorTable,
    k: int = 3,
    *,
    with_decomposition: bool = False,
) -> VarianceReport:
    """All aggregates at one (x, q), with the Parseval deviation recorded.

    Hermitian sanity (aggregates real and nonnegative) is asserted here;
    all reductions are fixed-order compensated sums.
    """
    S = progression_sums(q, x, table)
    M = _class_main_terms(q, float(x), k)
    E = S.astype(np.float64) - M
    delta = delta_all(q, x, table, k)
    a = np.arange(q)
    prim = np.gcd(a, q) == 1

    abs2 = delta.real**2 + delta.imag**2
    v2_all = math.fsum(abs2)
    v2_prim = math.fsum(abs2[prim])
    v2_e = math.fsum(E * E)
    v1_prim = math.fsum(np.abs(E[prim]))
    v1_all = math.fsum(np.abs(E))
    parseval_dev = abs(v2_e - v2_all / q) / max(v2_e, 1e-300)

    b1 = bound_second_moment(float(x), q, k)
    b2 = bound_first_moment(float(x), q, k)
    bn = bound_nguyen(float(x), q) if k == 3 else bound_bhs(float(x), q)
    return VarianceReport(
        x=float(x),
        q=q,
        k=k,
        v2_all=v2_all,
        v2_prim=v2_prim,
        v2_e=v2_e,
        v1_prim=v1_prim,
        v1_all=v1_all,
        bound_thm1=b1,
        bound_thm2=b2,
        bound_nguyen=bn,
        ratio2=v2_all / b1,
        ratio1=v1_prim / b2,
        parseval_dev=parseval_dev,
        decomp_dev=divisor_decomposition_check(q, x, table, k) if with_decomposition else math.nan,
        y_param=float(x) ** 0.5 * q**0.75,
    )


def divisor_decomposition_check(q: int, x: float, table: DivisorTable, k: int = 3) -> float:
    """Relative deviation of sum_a |Delta(a/q)|^2 from
    sum_{d|q} sum'_{h mod d} |Delta(h/d)|^2 (both sides independent)."""
    delta_q = delta_all(q, x, table, k)
    lhs = math.fsum(delta_q.real**2 + delta_q.imag**2)
    rhs_terms = []
    for d in divisors(q):
        dd = delta_all(d, x, table, k)
        h = np.arange(d)
        prim = np.gcd(h, d) == 1 if d > 1 else np.array([True])
        rhs_terms.extend((dd.real[prim] ** 2 + dd.imag[prim] ** 2).tolist())
    rhs = math.fsum(rhs_terms)
    return abs(lhs - rhs) / max(lhs, 1e-300)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


def default_grid(x_values=(10**4, 10**5, 10**6), dense_x: int | None = 10**5) -> list[tuple[int, int]]:
    """The acceptance grid q in {ceil(x^e)} for e in {1/3, 1/2, 2/3}, plus a
    dense modulus sweep 2..200 at one x."""
    grid = []
    for x in x_values:
        for e in (1.0 / 3.0, 0.5, 2.0 / 3.0):
            grid.append((int(x), math.ceil(x**e)))
    if dense_x is not None:
        for q in range(2, 201):
            grid.append((dense_x, q))
    return sorted(set(grid))


def exponent_scan(
    grid: list[tuple[int, int]],
    table: DivisorTable,
    k: int = 3,
    *,
    with_decomposition: bool = True,
    workers: int = 1,
) -> list[VarianceReport]:
    """VarianceReport per grid point, deterministic grid order.

    Grid points are independent; with workers > 1 they are dispatched to
    a process pool and merged back in sorted order, so output bytes do
    not depend on the worker count.
    """
    grid = sorted(set((int(x), int(q)) for x, q in grid))
    if workers <= 1:
        return [
            variance_report(q, float(x), table, k, with_decomposition=with_decomposition)
            for x, q in grid
        ]
    from concurrent.futures import ProcessPoolExecutor

    ctx_args = [(x, q, table.k, table.limit, k, with_decomposition) for x, q in grid]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_worker, ctx_args, chunksize=max(1, len(grid) // (4 * workers))))


_WORKER_TABLE: dict = {}


def _scan_worker(args) -> VarianceReport:
    x, q, table_k, table_limit, k, with_decomposition = args
    key = (table_k, table_limit)
    if key not in _WORKER_TABLE:
        from .arith import sieve_dk

        _WORKER_TABLE[key] = sieve_dk(table_k, table_limit)
    return variance_report(
        q, float(x), _WORKER_TABLE[key], k, with_decomposition=with_decomposition
    )


def fit_log_slopes(reports: list[VarianceReport]) -> dict:
    """Least-squares slopes of log ratio2 and log ratio1 against (log x, log q)."""
    X = np.array([[1.0, math.log(r.x), math.log(r.q)] for r in reports])
    out = {}
    for name, vals in (
        ("ratio2", [r.ratio2 for r in reports]),
        ("ratio1", [r.ratio1 for r in reports]),
    ):
        y = np.log(np.maximum(vals, 1e-300))
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
        out[name] = {"intercept": float(beta[0]), "slope_x": float(beta[1]), "slope_q": float(beta[2])}
    return out


def reports_to_csv(reports: list[VarianceReport], meta: dict | None = None) -> str:
    lines = []
    for key in sorted((meta or {}).keys()):
        lines.append(f"# {key}={meta[key]}")
    lines.append(",".join(CSV_COLUMNS))
    for r in reports:
        lines.append(",".join(r.csv_row()))
    return "\n".join(lines) + "\n"


def reports_to_json(reports: list[VarianceReport], meta: dict | None = None) -> str:
    doc = {"meta": meta or {}, "rows": [r.json_record() for r in reports]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
