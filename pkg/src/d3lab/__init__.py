"""Numerical laboratory for the ternary divisor function d_3(n) in
arithmetic progressions.

Subpackages:
    arith     exact integer kernel: sieves, factorization, Ramanujan and
              Kloosterman sums
    expsum    complete triple exponential sums R_{a,b,c}(h/q), correlation
              sums and their closed-form / bound checkers
    laurent   truncated Laurent expansions around s = 1, Stieltjes constants
    mainterm  residue engine for the progression main terms
    voronoi   Mellin-Barnes kernel U(X), smooth windows, dual-sum transforms
    variance  progression errors, Parseval checks, variance scans
    cli       command-line surface and the sieve cache
"""

__version__ = "0.1.0"
