import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from rowsparse.errors import DegenerateHostError, InvalidInputError, SizeLimitError
from rowsparse.sampling import (
    BasisSumRows,
    BoundaryRows,
    MatrixRows,
    SamplerConfig,
    enumerate_distribution,
    exact_subset_probability,
    get_basis_family,
    get_boundary_family,
    marginal_leverage,
    sample_hypertree,
    sample_matrix,
    sample_volume,
)

DRAWS = 100_000
SEED = 20240901


@pytest.fixture(scope="module")
def b33_draws():
    """One shared batch of seeded draws from the (3, 3) family."""
    fam = get_basis_family(3, 3)
    rng = np.random.default_rng(SEED)
    counts = Counter()
    inclusions = Counter()
    for _ in range(DRAWS):
        subset = sample_volume(fam, rng)
        counts[subset] += 1
        for b in subset:
            inclusions[b] += 1
    return fam, counts, inclusions


def test_sampler_config_validation():
    with pytest.raises(InvalidInputError):
        SamplerConfig(precision_mode="float32")
    with pytest.raises(InvalidInputError):
        SamplerConfig(reorthogonalization_tolerance=1e-3)
    with pytest.raises(InvalidInputError):
        SamplerConfig(reorthogonalization_tolerance=0.0)


def test_enumeration_n2():
    fam = BasisSumRows(2, 3)
    dist = enumerate_distribution(fam)
    assert sum(p for _, p in dist) == 1
    probs = dict(dist)
    assert probs[((1, 1, 1), (2, 2, 2))] == Fraction(81, 432)
    # identical multiplicity maps have determinant zero: never listed
    assert ((1, 1, 2), (1, 2, 1)) not in probs
    assert all(p > 0 for p in probs.values())


def test_enumeration_n3_sums_to_one_exactly():
    dist = enumerate_distribution(get_basis_family(3, 3))
    assert sum(p for _, p in dist) == 1
    assert len(dist) == 1918  # of the 2925 3-subsets, these have nonzero determinant


def test_enumeration_guards():
    fam = BasisSumRows(4, 4)  # C(256, 4) is fine; C(4^4, 4) ~ 1.7e8 is not
    with pytest.raises(SizeLimitError):
        enumerate_distribution(BasisSumRows(5, 5))
    with pytest.raises(InvalidInputError):
        enumerate_distribution(fam, m=3)


def test_marginal_leverage_values():
    # closed-form kernel diagonal, pinned by the enumeration marginal below
    assert marginal_leverage((1, 1, 1), 2, 3) == Fraction(1, 2)
    fam = BasisSumRows(2, 3)
    total = sum(marginal_leverage(b, 2, 3) for b in fam.items())
    assert total == 2


def test_marginal_leverage_equals_enumeration_marginal():
    fam = BasisSumRows(2, 3)
    dist = enumerate_distribution(fam)
    for i in range(fam.n_items):
        b = fam.item(i)
        marginal = sum(p for subset, p in dist if b in subset)
        assert marginal == fam.leverage_exact(i)


def test_marginal_leverage_trace_n3():
    fam = get_basis_family(3, 3)
    assert sum(fam.leverage_exact(i) for i in range(fam.n_items)) == 3


def test_leverage_float_matches_exact():
    for fam in (BasisSumRows(3, 3), BoundaryRows(5, 2)):
        lev = fam.leverage_float()
        for i in range(0, fam.n_items, 5):
            assert lev[i] == pytest.approx(float(fam.leverage_exact(i)), abs=1e-12)


def test_empirical_tv_within_noise(b33_draws):
    fam, counts, _ = b33_draws
    dist = dict(enumerate_distribution(fam))
    assert all(subset in dist for subset in counts), "zero-probability subset emitted"
    tv = 0.5 * sum(abs(counts.get(ss, 0) / DRAWS - float(p)) for ss, p in dist.items())
    floor = sum(math.sqrt(p) for p in dist.values()) / math.sqrt(2 * math.pi * DRAWS)
    # a perfect sampler concentrates around `floor` (~0.048); gross bias would
    # push well past it
    assert tv <= 1.5 * floor


def test_empirical_marginals_within_noise(b33_draws):
    fam, _, inclusions = b33_draws
    zs = []
    for i in range(fam.n_items):
        p = float(fam.leverage_exact(i))
        se = math.sqrt(p * (1.0 - p) / DRAWS)
        zs.append(abs(inclusions[fam.item(i)] / DRAWS - p) / se)
    # simultaneous version of a per-row 3-sigma rule over 27 rows
    assert sum(z > 3.0 for z in zs) <= 1
    assert max(zs) <= 4.0
    assert sum(zs) / len(zs) <= 1.2


def test_emitted_subsets_have_positive_exact_probability(b33_draws):
    fam, counts, _ = b33_draws
    for subset in list(counts)[:50]:
        assert exact_subset_probability(fam, subset) > 0


def test_determinism_same_seed_same_sequence():
    fam = get_basis_family(3, 3)
    a = [sample_volume(fam, np.random.default_rng(7)) for _ in range(5)]
    b = [sample_volume(fam, np.random.default_rng(7)) for _ in range(5)]
    assert a == b
    cfg = SamplerConfig(precision_mode="exact")
    a = [sample_volume(fam, np.random.default_rng(7), cfg) for _ in range(3)]
    b = [sample_volume(fam, np.random.default_rng(7), cfg) for _ in range(3)]
    assert a == b


def test_exact_mode_matches_enumeration():
    fam = BasisSumRows(2, 3)
    dist = dict(enumerate_distribution(fam))
    cfg = SamplerConfig(precision_mode="exact")
    rng = np.random.default_rng(31)
    draws = 3000
    counts = Counter(sample_volume(fam, rng, cfg) for _ in range(draws))
    assert all(ss in dist for ss in counts)
    tv = 0.5 * sum(abs(counts.get(ss, 0) / draws - float(p)) for ss, p in dist.items())
    floor = sum(math.sqrt(p) for p in dist.values()) / math.sqrt(2 * math.pi * draws)
    assert tv <= 1.5 * floor + 0.01


def test_exact_mode_item_guard():
    cfg = SamplerConfig(precision_mode="exact")
    with pytest.raises(SizeLimitError):
        sample_volume(BasisSumRows(8, 7), np.random.default_rng(0), cfg)


def test_degenerate_host_raises():
    host = MatrixRows([[1, 0], [2, 0], [3, 0]])
    with pytest.raises(DegenerateHostError):
        sample_volume(host, np.random.default_rng(0))
    with pytest.raises(DegenerateHostError):
        sample_volume(host, np.random.default_rng(0), SamplerConfig(precision_mode="exact"))


def test_sample_matrix_shape_and_row_sums():
    mat = sample_matrix(6, 3, rng=4)
    assert len(mat) == 6 and all(len(r) == 6 for r in mat)
    assert all(sum(r) == 3 for r in mat)
    assert sample_matrix(1, 5, rng=0) == [[5]]


def test_hypertree_n4():
    faces, mat = sample_hypertree(4, np.random.default_rng(2))
    assert len(faces) == 3
    assert all(len(f) == 3 for f in faces)
    assert len(mat) == 3 and len(mat[0]) == 3
    assert all(x in (-1, 0, 1) for row in mat for x in row)
    with pytest.raises(InvalidInputError):
        sample_hypertree(3, np.random.default_rng(0))


def test_hypertree_n5_distribution():
    fam = get_boundary_family(5, 2)
    dist = dict(enumerate_distribution(fam))
    # 125 hypertrees on 5 vertices, all torsion free
    assert len(dist) == 125
    assert all(p == Fraction(1, 125) for p in dist.values())
    rng = np.random.default_rng(17)
    draws = 20_000
    counts = Counter()
    for _ in range(draws):
        faces, _ = sample_hypertree(5, rng)
        counts[faces] += 1
    assert all(ss in dist for ss in counts)
    tv = 0.5 * sum(abs(counts.get(ss, 0) / draws - float(p)) for ss, p in dist.items())
    floor = sum(math.sqrt(p) for p in dist.values()) / math.sqrt(2 * math.pi * draws)
    assert tv <= 1.5 * floor


def test_boundary_gram_det_matches_identity():
    # Cauchy-Binet: sum of squared determinants over all subsets
    assert BoundaryRows(4, 2).gram_det() == 4
    assert BoundaryRows(5, 2).gram_det() == 125


def test_hypertree_probability_is_squared_torsion_order():
    from rowsparse.snf import cokernel

    fam = get_boundary_family(6, 2)
    rng = np.random.default_rng(23)
    for _ in range(10):
        faces, mat = sample_hypertree(6, rng)
        cok = cokernel(mat)
        assert cok.free_rank == 0
        order = cok.order()
        assert exact_subset_probability(fam, faces) == Fraction(order**2, 6**6)


def test_exact_subset_probability_roundtrip():
    fam = BasisSumRows(2, 3)
    assert exact_subset_probability(fam, ((1, 1, 1), (2, 2, 2))) == Fraction(3, 16)
    with pytest.raises(InvalidInputError):
        exact_subset_probability(fam, ((1, 1, 1),))
