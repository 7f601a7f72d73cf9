import math

import numpy as np
import pytest
import sympy

from sdeident.basis import (
    BasisSizeError,
    TermBasis,
    basis_size,
    full_basis,
    grlex_exponents,
    parse_label,
    term_label,
)


def _rows(exps):
    return [tuple(int(v) for v in row) for row in exps]


def test_grlex_order_dim2():
    assert _rows(grlex_exponents(2, 2)) == [
        (0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)
    ]


def test_grlex_order_dim3_degree1():
    assert _rows(grlex_exponents(3, 1)) == [
        (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)
    ]


def test_grlex_degree_blocks_sorted():
    exps = _rows(grlex_exponents(3, 4))
    degrees = [sum(e) for e in exps]
    assert degrees == sorted(degrees)
    # within a degree block, earlier variables dominate
    block2 = [e for e in exps if sum(e) == 2]
    assert block2[0] == (2, 0, 0)
    assert block2[-1] == (0, 0, 2)


@pytest.mark.parametrize("dim,deg", [(1, 8), (2, 6), (3, 4), (4, 3)])
def test_basis_size_matches_enumeration(dim, deg):
    assert basis_size(dim, deg) == math.comb(dim + deg, dim)
    assert len(grlex_exponents(dim, deg)) == basis_size(dim, deg)


def test_size_guard():
    with pytest.raises(BasisSizeError):
        grlex_exponents(60, 10)
    with pytest.raises(BasisSizeError):
        full_basis("monomial", 60, 10)


def test_term_labels_monomial():
    assert term_label((0, 0, 0), "monomial") == "1"
    assert term_label((1, 0, 0), "monomial") == "x1"
    assert term_label((2, 0, 1), "monomial") == "x1^2*x3"
    assert term_label((0, 1, 1), "monomial") == "x2*x3"


def test_term_labels_trig():
    assert term_label((0,), "trig") == "1"
    assert term_label((1, 0), "trig") == "sin(x1)"
    assert term_label((2, 0, 1), "trig") == "sin(x1)^2*sin(x3)"


@pytest.mark.parametrize("family", ["monomial", "trig"])
def test_parse_label_round_trip(family):
    for exps in _rows(grlex_exponents(3, 4)):
        label = term_label(exps, family)
        assert parse_label(label, 3, family) == exps


def test_parse_label_rejects_garbage():
    with pytest.raises(ValueError):
        parse_label("x0", 2, "monomial")
    with pytest.raises(ValueError):
        parse_label("x3", 2, "monomial")
    with pytest.raises(ValueError):
        parse_label("sin(x1)", 2, "monomial")
    with pytest.raises(ValueError):
        parse_label("x1", 2, "trig")
    with pytest.raises(ValueError):
        parse_label("x1^", 2, "monomial")
    with pytest.raises(ValueError):
        parse_label("", 2, "monomial")


def _sympy_reference(basis, states):
    """Evaluate every basis term through sympy, one lambdify per term."""
    dim = basis.dim
    xs = sympy.symbols(f"x1:{dim + 1}")
    cols = []
    for exps in basis.exponents:
        expr = sympy.Integer(1)
        for var, e in zip(xs, exps):
            factor = sympy.sin(var) if basis.family == "trig" else var
            expr *= factor ** int(e)
        fn = sympy.lambdify(xs, expr, "numpy")
        col = fn(*(states[:, j] for j in range(dim)))
        cols.append(np.broadcast_to(col, (states.shape[0],)).astype(float))
    return np.column_stack(cols)


@pytest.mark.parametrize("family,deg", [("monomial", 5), ("trig", 3)])
def test_evaluate_matches_sympy(family, deg):
    basis = full_basis(family, 2, deg)
    rng = np.random.default_rng(314)
    states = rng.normal(scale=1.5, size=(40, 2))
    got = basis.evaluate(states)
    want = _sympy_reference(basis, states)
    assert got.shape == (40, basis.size)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_evaluate_constant_first_column():
    basis = full_basis("monomial", 3, 2)
    states = np.random.default_rng(1).normal(size=(10, 3))
    assert np.all(basis.evaluate(states)[:, 0] == 1.0)


def test_basis_is_frozen():
    basis = full_basis("monomial", 2, 2)
    with pytest.raises(ValueError):
        basis.exponents[0, 0] = 5


def test_labels_align_with_exponents():
    basis = full_basis("trig", 3, 2)
    labels = basis.labels()
    assert labels[0] == "1"
    assert len(labels) == basis.size
    for lbl, exps in zip(labels, basis.exponents):
        assert parse_label(lbl, 3, "trig") == tuple(int(e) for e in exps)


def test_bad_family_rejected():
    with pytest.raises(ValueError):
        full_basis("fourier", 2, 2)
    with pytest.raises(ValueError):
        TermBasis("fourier", [(0, 0)])
