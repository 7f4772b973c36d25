"""Mod-2 kernel defect of the sampled matrices: exact column-event probabilities,
a Bonferroni lower bound for the corank tail, and Monte Carlo estimation.

The driving event for column i is "some chosen row meets i exactly twice and
no other chosen row meets i at all": such a column reduces to zero mod 2, so
r simultaneous events force an F_2-corank of at least r. The probability of
r simultaneous events is exact and index-free:

    (2 k (k-1) (n-r)^(k-2))^r * C(n-r) / C(n)

with C(n) the Gram determinant of the (n, k) family.
"""

import itertools
import math
from fractions import Fraction

from .errors import InvalidInputError, SizeLimitError
from .intlinalg import int_det
from .sampling import DEFAULT_CONFIG, _as_rng, sample_matrix
from .snf import rank_mod_p
from .structured import gram_determinant, row_vector


def column_is_isolated_double(subset, i):
    """True iff exactly one tuple of the subset meets i, with multiplicity two."""
    hits = 0
    doubled = False
    for b in subset:
        c = sum(1 for x in b if x == i)
        if c:
            hits += 1
            doubled = c == 2
    return hits == 1 and doubled


def isolated_double_probability(n, k, r):
    """Exact probability that r given columns are each isolated doubles.

    The value does not depend on which r columns are named.
    """
    if not 1 <= r < n:
        raise InvalidInputError(f"need 1 <= r < n, got r={r}")
    factor = 2 * k * (k - 1) * (n - r) ** (k - 2)
    return Fraction(factor**r * gram_determinant(n - r, k), gram_determinant(n, k))


def doubled_block_count(n, k, r):
    """Number of r-row blocks realizing the isolated-double pattern on columns 1..r."""
    if r < 0:
        raise InvalidInputError("r must be >= 0")
    if r == 0:
        return 1
    return (math.comb(k, 2) * (n - r) ** (k - 2)) ** r


def bonferroni_lower(n, k, r):
    """Exact Bonferroni lower bound on P(F_2-corank of the sample >= r)."""
    if not 1 <= r <= n - 1:
        raise InvalidInputError(f"need 1 <= r <= n-1, got r={r}")
    first = math.comb(n, r) * isolated_double_probability(n, k, r)
    if r + 1 < n:
        second = r * math.comb(n, r + 1) * isolated_double_probability(n, k, r + 1)
    else:
        second = Fraction(0)
    return first - second


def corank_tail_floor(k, r):
    """Asymptotic floor (1 / (4 r!)) * (2 (k-1) / e^(k-1))^r of the corank tail."""
    if k < 3 or k % 2 == 0:
        raise InvalidInputError("need odd k >= 3")
    if r < 1:
        raise InvalidInputError("need r >= 1")
    return (2 * (k - 1) / math.exp(k - 1)) ** r / (4 * math.factorial(r))


def mc_corank_tail(n, k, r, trials, rng=None, config=DEFAULT_CONFIG):
    """Monte Carlo estimate of P(F_2-corank >= r) with its binomial standard error."""
    if r == 0:
        return 1.0, 0.0
    if trials < 100:
        raise InvalidInputError("need at least 100 trials")
    rng = _as_rng(rng, config)
    hits = 0
    for _ in range(trials):
        mat = sample_matrix(n, k, rng, config)
        _, corank = rank_mod_p(mat, 2)
        if corank >= r:
            hits += 1
    est = hits / trials
    return est, math.sqrt(est * (1.0 - est) / trials)


def subset_family_mass(n, k, predicate):
    """Exact probability mass of {Y : predicate(Y)} under the volume measure."""
    total_rows = n**k
    if math.comb(total_rows, n) > 10**6:
        raise SizeLimitError("subset enumeration guard exceeded")
    tuples = list(itertools.product(range(1, n + 1), repeat=k))
    denom = gram_determinant(n, k)
    mass = Fraction(0)
    for combo in itertools.combinations(tuples, n):
        if not predicate(combo):
            continue
        d = int_det([row_vector(b, n) for b in combo])
        if d:
            mass += Fraction(d * d, denom)
    return mass
