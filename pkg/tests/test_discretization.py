import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from actuator_opt import GridIndicator2D, Intervals1D, actuator_load, assemble_fem_1d, assemble_spectral_2d, \
    project_initial_condition
from actuator_opt.discretization import evaluate, spectral_mode_pairs


def test_two_elements_hand_assembly():
    sys_ = assemble_fem_1d(2, 1.0)
    assert sys_.n == 1
    assert sys_.M[0, 0] == pytest.approx(1 / 3)
    assert sys_.S[0, 0] == pytest.approx(4.0)


def test_reference_matrices_spd(heat1d):
    assert heat1d.n == 199
    for mat in (heat1d.M, heat1d.S):
        assert np.array_equal(mat, mat.T)
        np.linalg.cholesky(mat)


def test_bad_parameters():
    with pytest.raises(ValueError):
        assemble_fem_1d(1, 1.0)
    with pytest.raises(ValueError):
        assemble_fem_1d(10, 0.0)
    with pytest.raises(ValueError):
        assemble_fem_1d(10, lambda x: x - 0.5)
    with pytest.raises(ValueError):
        assemble_spectral_2d(0, 0.01)
    with pytest.raises(ValueError):
        assemble_spectral_2d(4, -1.0)


def test_interior_row_sums_vanish():
    S = assemble_fem_1d(50, 0.3).S
    np.testing.assert_allclose(S[1:-1].sum(axis=1), 0.0, atol=1e-10)


def test_variable_diffusion_converges_first_order():
    sig = lambda x: x + 1.0
    # S entries scale like sigma/h; compare the element coefficients after rescaling
    coarse = assemble_fem_1d(4, sig)
    # exact element averages of x + 1 over [i/4, (i+1)/4] equal the midpoint values for linear sigma
    np.testing.assert_allclose(coarse.basis.diffusion, (np.arange(4) + 0.5) / 4 + 1.0)
    errs = []
    for n in (8, 16, 32, 64):
        s = assemble_fem_1d(n, lambda x: np.exp(x)).basis.diffusion
        x0 = np.arange(n) / n
        exact = (np.exp(x0 + 1.0 / n) - np.exp(x0)) * n  # element averages
        errs.append(np.max(np.abs(s - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.9)


def test_spectral_matrices():
    sys_ = assemble_spectral_2d(10, 0.01, 32)
    np.testing.assert_array_equal(sys_.M, np.eye(10))
    assert sys_.S[0, 0] == pytest.approx(0.02 * np.pi**2)
    assert sys_.S[0, 0] == pytest.approx(0.19739, abs=1e-5)
    np.testing.assert_allclose(np.linalg.eigvalsh(-sys_.A), np.sort(np.diag(sys_.S)))


def test_mode_ordering_ties_by_k():
    pairs = spectral_mode_pairs(100)
    ev = pairs[:, 0] ** 2 + pairs[:, 1] ** 2
    assert np.all(np.diff(ev) >= 0)
    assert len({tuple(p) for p in pairs}) == 100
    for i in range(99):
        if ev[i] == ev[i + 1]:
            assert pairs[i, 0] < pairs[i + 1, 0]
    assert tuple(pairs[1]) == (1, 2) and tuple(pairs[2]) == (2, 1)


def test_nyquist_check():
    with pytest.raises(ValueError):
        assemble_spectral_2d(100, 0.01, 8)


def test_load_empty_and_centre_node():
    sys_ = assemble_fem_1d(10, 1.0)
    assert np.all(actuator_load(Intervals1D(()), sys_.basis) == 0)
    b = actuator_load(Intervals1D(((0.4, 0.6),)), sys_.basis)
    assert b[4] == pytest.approx(0.1)  # node x = 0.5
    assert b[3] == pytest.approx(0.05) and b[5] == pytest.approx(0.05)


def test_load_rectangle_matches_closed_form():
    sys_ = assemble_spectral_2d(20, 0.01, 128)
    m = 128
    ax = (np.arange(m) + 0.5) / m
    a, b, c, d = 0.25, 0.5, 0.125, 0.625  # on cell faces
    mask = ((ax >= a) & (ax < b))[:, None] & ((ax >= c) & (ax < d))[None, :]
    load = actuator_load(GridIndicator2D(mask), sys_.basis)
    k, l = sys_.basis.mode_pairs.T
    exact = 2 * (np.cos(k * np.pi * a) - np.cos(k * np.pi * b)) / (k * np.pi) * \
        (np.cos(l * np.pi * c) - np.cos(l * np.pi * d)) / (l * np.pi)
    np.testing.assert_allclose(load, exact, atol=5e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.29), st.floats(0.01, 0.2), st.floats(0.5, 0.75), st.floats(0.01, 0.2))
def test_load_additive(a, la, c, lc):
    basis = assemble_fem_1d(37, 1.0).basis
    w1, w2 = Intervals1D(((a, a + la),)), Intervals1D(((c, c + lc),))
    both = Intervals1D(((a, a + la), (c, c + lc)))
    np.testing.assert_allclose(actuator_load(both, basis), actuator_load(w1, basis) + actuator_load(w2, basis),
                               atol=1e-14)


def test_projection_basics(heat1d):
    assert np.all(project_initial_condition(lambda x: 0.0 * x, heat1d) == 0)
    nodes = heat1d.basis.all_nodes
    k = 57
    hat = lambda x: np.interp(x, nodes, np.eye(nodes.size)[k + 1])
    e = project_initial_condition(hat, heat1d)
    np.testing.assert_allclose(e, np.eye(heat1d.n)[k], atol=1e-12)


def test_projection_2d():
    sys_ = assemble_spectral_2d(25, 0.01, 64)
    coef = project_initial_condition(lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), sys_)
    assert coef[0] == pytest.approx(0.5, abs=1e-3)
    assert np.max(np.abs(coef[1:])) < 1e-3


def test_evaluate_interpolates(heat1d):
    f = project_initial_condition(lambda x: np.sin(np.pi * x), heat1d)
    assert evaluate(heat1d, f, 0.0) == 0.0
    assert evaluate(heat1d, f, 0.5) == pytest.approx(1.0, abs=1e-4)
