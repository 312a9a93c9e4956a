import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chaoskit.errors import (
    AsymmetricInput,
    EmptySpace,
    InvalidContractionOrder,
    NonPositiveWeight,
    OrderMismatch,
    SpaceMismatch,
)
from chaoskit.space_kernel import (
    KernelPair,
    basis_kernel,
    contract,
    inner,
    kernel_from_json,
    kernel_from_values,
    kernel_to_json,
    load_kernel,
    make_space,
    random_kernel,
    sym_array,
    sym_contract,
    symmetrize,
    symmetry_defect,
    zero_kernel,
)


def perm_average(arr):
    perms = list(itertools.permutations(range(arr.ndim)))
    return sum(np.transpose(arr, p) for p in perms) / len(perms)


def weighted_contraction(fv, gv, mu, r):
    """Pointwise-coordinate evaluation of the contraction integral."""
    p, q, n = fv.ndim, gv.ndim, len(mu)
    out = np.zeros((n,) * (p + q - 2 * r))
    for xs in itertools.product(range(n), repeat=p - r):
        for ys in itertools.product(range(n), repeat=q - r):
            out[xs + ys] = sum(
                fv[xs + zs] * gv[ys + zs] * np.prod([mu[z] for z in zs])
                for zs in itertools.product(range(n), repeat=r)
            )
    return out


weights_st = st.lists(st.floats(0.2, 5.0), min_size=1, max_size=4)


# -- make_space ---------------------------------------------------------------

def test_single_unit_atom():
    space = make_space([1.0])
    assert space.n == 1
    assert space.total_mass == 1.0


def test_uniform_three_atoms():
    assert make_space([1.0, 1.0, 1.0]).n == 3


def test_negative_weight_names_atom():
    with pytest.raises(NonPositiveWeight) as exc:
        make_space([1.0, -0.5])
    assert exc.value.index == 2


@pytest.mark.parametrize("bad", [0.0, float("inf"), float("nan")])
def test_other_bad_weights(bad):
    with pytest.raises(NonPositiveWeight):
        make_space([bad])


def test_empty_space():
    with pytest.raises(EmptySpace):
        make_space([])


# -- ingestion ----------------------------------------------------------------

def test_indicator_kernel_unit_mass():
    f = kernel_from_values(make_space([1.0]), 1, lambda i: 1.0)
    assert f.coeffs.tolist() == [1.0]


def test_constant_kernel():
    f = kernel_from_values(make_space([2.0, 3.0]), 0, 7.5)
    assert f.order == 0
    assert float(f.coeffs) == 7.5


def test_sqrt_weight_scaling():
    f = kernel_from_values(make_space([4.0]), 1, [1.0])
    assert f.coeffs.tolist() == [2.0]


def test_flat_values_row_major():
    space = make_space([1.0, 4.0])
    f = kernel_from_values(space, 2, [1.0, 2.0, 2.0, 3.0])
    assert np.allclose(f.coeffs, [[1.0, 4.0], [4.0, 12.0]])
    assert np.allclose(f.pointwise_values(), [[1.0, 2.0], [2.0, 3.0]])


def test_asymmetric_values_rejected():
    with pytest.raises(AsymmetricInput):
        kernel_from_values(make_space([1.0, 1.0]), 2, [[0.0, 1.0], [0.0, 0.0]])


def test_wrong_value_count():
    with pytest.raises(ValueError):
        kernel_from_values(make_space([1.0, 1.0]), 2, [1.0, 2.0, 3.0])


def test_coeffs_read_only():
    f = kernel_from_values(make_space([1.0]), 1, [1.0])
    with pytest.raises(ValueError):
        f.coeffs[0] = 3.0


def test_json_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    space = make_space([0.5, 2.0, 1.5])
    f = random_kernel(space, 3, rng)
    doc = kernel_to_json(f)
    g = kernel_from_json(json.loads(json.dumps(doc)))
    assert np.allclose(f.coeffs, g.coeffs, atol=1e-14)
    path = tmp_path / "k.json"
    path.write_text(json.dumps(doc))
    assert np.allclose(load_kernel(path).coeffs, f.coeffs, atol=1e-14)


# -- inner --------------------------------------------------------------------

def test_indicator_unit_norm():
    f = kernel_from_values(make_space([1.0]), 1, [1.0])
    assert inner(f, f) == 1.0


def test_inner_with_zero():
    space = make_space([1.0, 2.0])
    f = random_kernel(space, 2, np.random.default_rng(0))
    assert inner(f, zero_kernel(space, 2)) == 0.0


def test_inner_matches_weighted_double_loop():
    rng = np.random.default_rng(7)
    mu = [0.3, 1.0, 2.5]
    space = make_space(mu)
    f, g = random_kernel(space, 2, rng), random_kernel(space, 2, rng)
    fv, gv = f.pointwise_values(), g.pointwise_values()
    brute = sum(fv[i, j] * gv[i, j] * mu[i] * mu[j] for i in range(3) for j in range(3))
    assert math.isclose(inner(f, g), brute, rel_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(weights_st, st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_inner_bilinear_symmetric_psd(weights, order, seed):
    rng = np.random.default_rng(seed)
    space = make_space(weights)
    f, g, h = (random_kernel(space, order, rng) for _ in range(3))
    a, b = rng.normal(size=2)
    assert math.isclose(inner(a * f + b * g, h), a * inner(f, h) + b * inner(g, h), rel_tol=1e-10, abs_tol=1e-10)
    assert inner(f, g) == pytest.approx(inner(g, f), rel=1e-12, abs=1e-14)
    assert inner(f, f) >= 0.0


# -- symmetrize ---------------------------------------------------------------

def test_symmetrize_two_term():
    space = make_space([1.0, 1.0])
    raw = np.zeros((2, 2))
    raw[0, 1] = 1.0
    f = symmetrize(raw, space)
    assert np.allclose(f.coeffs, [[0.0, 0.5], [0.5, 0.0]])


def test_symmetrize_fixed_point():
    space = make_space([1.0, 2.0, 3.0])
    f = random_kernel(space, 3, np.random.default_rng(3))
    assert np.allclose(symmetrize(f.coeffs, space).coeffs, f.coeffs, atol=1e-15)


def test_symmetrize_matches_permutation_oracle():
    raw = np.random.default_rng(5).normal(size=(3, 3, 3))
    assert np.allclose(sym_array(raw), perm_average(raw), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_symmetrize_idempotent_and_norm_contracting(n, order, seed):
    raw = np.random.default_rng(seed).normal(size=(n,) * order)
    s = sym_array(raw)
    assert symmetry_defect(s) <= 1e-12
    assert np.allclose(sym_array(s), s, atol=1e-13)
    assert np.linalg.norm(s) <= np.linalg.norm(raw) * (1 + 1e-12)


# -- contractions -------------------------------------------------------------

def test_r0_is_tensor_product():
    rng = np.random.default_rng(2)
    space = make_space([1.0, 2.0])
    f, g = random_kernel(space, 2, rng), random_kernel(space, 1, rng)
    c = contract(f, g, 0)
    assert c.shape == (2, 2, 2)
    assert math.isclose(np.linalg.norm(c), f.norm() * g.norm(), rel_tol=1e-12)


def test_full_vector_contraction_is_inner():
    rng = np.random.default_rng(4)
    space = make_space([0.5, 1.0, 3.0])
    f, g = random_kernel(space, 1, rng), random_kernel(space, 1, rng)
    assert math.isclose(float(contract(f, g, 1)), inner(f, g), rel_tol=1e-12)


def test_order2_contraction_two_atoms():
    rng = np.random.default_rng(6)
    mu = [0.7, 2.0]
    space = make_space(mu)
    f, g = random_kernel(space, 2, rng), random_kernel(space, 2, rng)
    direct = weighted_contraction(f.pointwise_values(), g.pointwise_values(), mu, 1)
    sw = np.sqrt(mu)
    assert np.allclose(contract(f, g, 1), direct * np.outer(sw, sw), rtol=1e-12, atol=1e-14)


def test_contraction_matches_pointwise():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        mu = list(rng.uniform(0.3, 3.0, n))
        space = make_space(mu)
        p, q = (int(v) for v in rng.integers(1, 4, 2))
        r = int(rng.integers(0, min(p, q) + 1))
        f, g = random_kernel(space, p, rng), random_kernel(space, q, rng)
        direct = weighted_contraction(f.pointwise_values(), g.pointwise_values(), mu, r)
        scale = np.ones(())
        for _ in range(direct.ndim):
            scale = np.multiply.outer(scale, np.sqrt(mu))
        ortho = contract(f, g, r)
        assert math.isclose(np.linalg.norm(ortho), np.linalg.norm(direct * scale), rel_tol=1e-12)
        assert ortho.size == n ** (p + q - 2 * r)


def test_contraction_order_errors():
    space = make_space([1.0])
    f = basis_kernel(space, 0, 0)
    with pytest.raises(InvalidContractionOrder):
        contract(f, f, 3)
    with pytest.raises(InvalidContractionOrder):
        contract(f, f, -1)


def test_contraction_space_mismatch():
    f = basis_kernel(make_space([1.0]), 0)
    g = basis_kernel(make_space([2.0]), 0)
    with pytest.raises(SpaceMismatch):
        contract(f, g, 1)


def test_sym_contract_r0_vector_square():
    space = make_space([1.0, 2.0])
    f = random_kernel(space, 1, np.random.default_rng(8))
    assert np.allclose(sym_contract(f, f, 0).coeffs, np.outer(f.coeffs, f.coeffs))


def test_symmetrized_contraction_smaller():
    rng = np.random.default_rng(9)
    for _ in range(50):
        space = make_space(rng.uniform(0.5, 2.0, int(rng.integers(1, 4))))
        p, q = (int(v) for v in rng.integers(1, 4, 2))
        r = int(rng.integers(0, min(p, q) + 1))
        f, g = random_kernel(space, p, rng), random_kernel(space, q, rng)
        assert sym_contract(f, g, r).norm() <= np.linalg.norm(contract(f, g, r)) * (1 + 1e-12)


def test_w1_contraction_two_atoms():
    # f = e_0 + 2 e_1, g = e_0 (x) e_1 symmetrized: f (x)_1 g = (e_1 + 2 e_0)/2
    space = make_space([1.0, 1.0])
    f = kernel_from_values(space, 1, [1.0, 2.0])
    g = basis_kernel(space, 0, 1)
    assert np.allclose(sym_contract(f, g, 1).coeffs, [1.0, 0.5])
    assert math.isclose(sym_contract(f, g, 1).norm() ** 2, 1.25)


# -- pairs --------------------------------------------------------------------

def test_pair_needs_distinct_orders():
    space = make_space([1.0])
    with pytest.raises(OrderMismatch):
        KernelPair(basis_kernel(space, 0), basis_kernel(space, 0))


def test_pair_parity_flags():
    space = make_space([1.0])
    pair = KernelPair(basis_kernel(space, 0), basis_kernel(space, 0, 0))
    assert pair.odd_even and pair.opposite_parity
    flipped = KernelPair(basis_kernel(space, 0, 0), basis_kernel(space, 0))
    assert not flipped.odd_even and flipped.opposite_parity
