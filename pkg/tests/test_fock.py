import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinboson.fock import (
    DimensionError,
    FockVector,
    ModeGrid,
    TruncationWarning,
    UnitarityError,
    annihilation,
    coherent_tail_mass,
    coherent_vector,
    creation,
    dGamma,
    displacement,
    displacement_table,
    enumerate_basis,
    field,
    number_operator,
    parity,
    sector_norms,
    weyl_parity,
)


def ket(basis, occ):
    c = np.zeros(basis.dim)
    c[basis.index(occ)] = 1.0
    return c


def test_basis_dimensions():
    b = enumerate_basis(1, 3)
    assert b.dim == 4
    assert [tuple(s) for s in b.states] == [(0,), (1,), (2,), (3,)]
    assert enumerate_basis(2, 2).dim == 6
    q = enumerate_basis(3, 10, with_qubit=True)
    assert q.dim == 572 == 2 * math.comb(13, 3)


def test_basis_index_is_a_bijection():
    b = enumerate_basis(3, 5)
    idx = [b.index(s) for s in b.states]
    assert idx == list(range(b.dim))
    assert np.array_equal(b.lookup(b.states), np.arange(b.dim))


def test_dimension_cap_refuses_before_allocating():
    with pytest.raises(DimensionError, match="cap"):
        enumerate_basis(20, 20, dim_cap=1000)


def test_annihilation_examples():
    b = enumerate_basis(1, 4)
    a = annihilation(b, 0).toarray()
    assert np.allclose(a @ ket(b, (2,)), math.sqrt(2) * ket(b, (1,)))
    assert np.allclose(a @ ket(b, (0,)), 0)
    b2 = enumerate_basis(2, 3)
    a1 = annihilation(b2, 0).toarray()
    assert np.allclose(a1 @ ket(b2, (1, 1)), ket(b2, (0, 1)))


def test_creation_examples():
    b = enumerate_basis(1, 4)
    ad = creation(b, 0).toarray()
    assert np.allclose(ad @ ket(b, (0,)), ket(b, (1,)))
    assert np.allclose(ad @ ket(b, (4,)), 0)
    assert ad[b.index((1,)), b.index((0,))] == 1.0
    assert np.allclose(ad, annihilation(b, 0).toarray().T)


def test_field_examples():
    b = enumerate_basis(1, 3)
    phi = field(b, ModeGrid([1.0], [1.0])).toarray()
    assert phi[1, 0] == 1.0
    phi_i = field(b, ModeGrid([1.0], [1j])).toarray()
    expected = 1j * creation(b, 0).toarray() - 1j * annihilation(b, 0).toarray()
    assert np.allclose(phi_i, expected)
    b2 = enumerate_basis(2, 2)
    phi2 = field(b2, ModeGrid([1.0, 1.0], [1.0, 2.0])).toarray()
    assert phi2[b2.index((1, 0)), 0] == 1.0
    assert phi2[b2.index((0, 1)), 0] == 2.0


def test_field_scale_and_hermiticity():
    b = enumerate_basis(2, 5)
    grid = ModeGrid([1.0, 1.5], [0.3 + 0.2j, -0.7])
    phi = field(b, grid, g=2.5)
    assert phi.is_hermitian()
    manual = sum(2.5 * (grid.v[j] * creation(b, j).toarray() + np.conj(grid.v[j]) * annihilation(b, j).toarray())
                 for j in range(2))
    assert np.allclose(phi.toarray(), manual)


def test_dgamma_number_and_parity():
    b = enumerate_basis(2, 3)
    d = dGamma(b, ModeGrid([1.0, 2.0], [0.0, 0.0])).toarray()
    assert d[b.index((1, 1)), b.index((1, 1))] == 3.0
    assert d[0, 0] == 0.0
    n = number_operator(b).toarray()
    assert np.array_equal(np.diag(n), b.totals)
    p = parity(b).toarray()
    assert p[0, 0] == 1 and p[b.index((1, 0)), b.index((1, 0))] == -1 and p[b.index((1, 1)), b.index((1, 1))] == 1
    assert np.array_equal(p @ p, np.eye(b.dim))
    assert np.array_equal(p @ d, d @ p)


def test_dgamma_sector_infimum():
    omega = np.array([1.3, 2.0, 4.1])
    b = enumerate_basis(3, 4)
    diag = np.diag(dGamma(b, omega).toarray())
    for n in range(5):
        assert diag[b.totals == n].min() == pytest.approx(n * omega.min())


@pytest.mark.parametrize("M,n_max", [(1, 12), (2, 8), (3, 5)])
def test_ccr_below_top_shell(M, n_max):
    b = enumerate_basis(M, n_max)
    low = np.flatnonzero(b.totals <= n_max - 1)
    for i in range(M):
        a = annihilation(b, i).toarray()
        for j in range(M):
            ad = creation(b, j).toarray()
            comm = (a @ ad - ad @ a)[np.ix_(low, low)]
            assert np.max(np.abs(comm - (i == j) * np.eye(low.size))) <= 1e-12


def test_coherent_vector_examples():
    b = enumerate_basis(2, 6)
    vac = coherent_vector(b, np.zeros(2))
    assert np.array_equal(vac.coeffs, FockVector.vacuum(b).coeffs)
    single = enumerate_basis(1, 20)
    c = coherent_vector(single, np.array([0.5]))
    assert c.tail_mass < 1e-12
    assert 1 - c.norm**2 < 1e-12


def test_exponential_vector_inner_product():
    b = enumerate_basis(2, 40)
    f = np.array([0.4 + 0.3j, -0.5])
    h = np.array([0.2, 0.6j])
    ef = coherent_vector(b, f, normalized=False)
    eh = coherent_vector(b, h, normalized=False)
    assert ef.vdot(eh) == pytest.approx(np.exp(np.vdot(f, h)), abs=1e-12)


def test_coherent_tail_warning():
    b = enumerate_basis(1, 5)
    with pytest.warns(TruncationWarning):
        c = coherent_vector(b, np.array([2.0]))
    assert c.tail_mass == pytest.approx(coherent_tail_mass(np.array([2.0]), 5))


def test_sector_norms_of_coherent_state_are_poisson():
    b = enumerate_basis(2, 30)
    f = np.array([0.6, 0.8j])
    w = sector_norms(coherent_vector(b, f))
    lam = 1.0
    expected = [math.exp(-lam) * lam**n / math.factorial(n) for n in range(31)]
    assert np.allclose(w, expected, atol=1e-14)


def test_displacement_of_zero_is_identity():
    b = enumerate_basis(2, 4)
    assert np.allclose(displacement(b, np.zeros(2)).toarray(), np.eye(b.dim))
    assert np.array_equal(weyl_parity(b, np.zeros(2)).toarray(), parity(b).toarray())


@pytest.mark.parametrize("method", ["expm", "exact"])
def test_displacement_on_vacuum_is_coherent(method):
    b = enumerate_basis(2, 30)
    f = np.array([0.5, -0.3 + 0.2j])
    d = displacement(b, f, method=method)
    coh = coherent_vector(b, f)
    low = b.totals <= 15
    assert np.allclose((d.toarray()[:, 0])[low], coh.coeffs[low], atol=1e-10)


def test_weyl_parity_vacuum_overlap():
    b = enumerate_basis(1, 100)
    f = np.array([0.9])
    wp = weyl_parity(b, 2 * f, method="exact")
    assert abs(wp.toarray()[0, 0]) == pytest.approx(math.exp(-2 * 0.81), rel=1e-12)


def test_exact_and_expm_agree_on_low_block():
    b = enumerate_basis(2, 30)
    f = np.array([0.7, 0.4j])
    low = np.flatnonzero(b.totals <= 12)
    a = displacement(b, f, method="expm").toarray()[np.ix_(low, low)]
    e = displacement(b, f, method="exact").toarray()[np.ix_(low, low)]
    assert np.max(np.abs(a - e)) < 1e-9


def test_displacement_inverse_on_low_block():
    b = enumerate_basis(2, 30)
    f = np.array([0.5, 0.3])
    assert coherent_tail_mass(f, 30) < 1e-10
    prod = displacement(b, f).toarray() @ displacement(b, -f).toarray()
    low = np.flatnonzero(b.totals <= 15)
    assert np.max(np.abs(prod[np.ix_(low, low)] - np.eye(low.size))) < 1e-8


def test_unitarity_error_on_heavy_tail():
    b = enumerate_basis(1, 6)
    with pytest.raises(UnitarityError):
        displacement(b, np.array([3.0]), method="exact")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        d = displacement(b, np.array([3.0]), method="exact", check_unitarity=False)
    assert d.recipe[0]["unitarity_defect"] > 1e-8


def test_displacement_table_large_amplitude_is_unitary_column():
    # the vacuum column of D(alpha) is a coherent state even far beyond exp underflow
    table = displacement_table(30.0, 2000, 1)
    assert np.sum(table[:, 0] ** 2) == pytest.approx(1.0, abs=1e-12)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        ModeGrid([1.0, -1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        ModeGrid([1.0], [1.0, 2.0])
    with pytest.raises(IndexError):
        annihilation(enumerate_basis(2, 2), 2)
    with pytest.raises(ValueError):
        FockVector(enumerate_basis(1, 2), np.zeros(5))


@settings(max_examples=25, deadline=None)
@given(
    omega=st.lists(st.floats(0.2, 3.0), min_size=1, max_size=2),
    re=st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2),
    im=st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2),
    n=st.integers(1, 6),
)
def test_field_norm_bound_on_finite_blocks(omega, re, im, n):
    M = len(omega)
    omega = np.array(omega)
    v = np.array(re[:M]) + 1j * np.array(im[:M])
    b = enumerate_basis(M, n + 1)
    block = np.flatnonzero(b.totals <= n)
    phi = field(b, ModeGrid(omega, v)).toarray()
    # phi maps the n-block into the (n+1)-block, which the basis keeps
    norm = np.linalg.norm(phi[:, block], 2)
    weight = np.linalg.norm((omega**-0.5 + 1) * v)
    top = np.max(b.states[block] @ omega) + 1
    assert norm <= 2 * weight * math.sqrt(top) + 1e-12


@settings(max_examples=25, deadline=None)
@given(re=st.floats(-1, 1), im=st.floats(-1, 1))
def test_weyl_parity_is_an_involution(re, im):
    b = enumerate_basis(1, 60)
    w = weyl_parity(b, np.array([re + 1j * im]), method="exact").toarray()
    low = np.flatnonzero(b.totals <= 25)
    assert np.max(np.abs((w @ w)[np.ix_(low, low)] - np.eye(low.size))) < 1e-9
    assert np.max(np.abs(w - w.conj().T)) < 1e-12
