import numpy as np
import pytest

from qdnls.errors import DomainError, InvalidDataError, SolitonAssumptionError
from qdnls.grid import GridFunction
from qdnls.lax import OMEGA2
from qdnls.scattering import (ScatteringTable, column_defined, default_k_grid, entry_defined,
                              large_k_coefficient, reflection_coefficients, scattering_batch,
                              scattering_matrix, solve_eigenfunction, symmetry_residuals)

# s(1) for the bump 0.3 (radius 1) from a fixed-step classical RK4 on the full
# matrix equation X' = [L, X] + U X with 8000 steps (step-halving change 6e-14)
S_BUMP_K1 = np.array([
    [1.239190419294882 + 1.636547451008081e-01j, -0.444392135420699 - 3.783128516902699e-01j,
     -0.70400294881289 + 8.065664667525894e-01j],
    [-0.444392135420698 + 3.783128516902697e-01j, 1.239190419294882 - 1.636547451008083e-01j,
     -0.70400294881289 - 8.065664667525885e-01j],
    [-0.519380558449036 - 4.631193246130754e-01j, -0.519380558449036 + 4.631193246130757e-01j,
     1.825965390154858 + 0j],
])
# same oracle at k = 0.5 e^{i pi/6}, interior of D1
S_BUMP_D1 = np.array([
    [1.313945090545587 + 0.054365829387058j, -0.589525530499321 - 0.473158113558004j,
     -0.66153107054886 + 0.591515911849399j],
    [-0.49735952662759 + 0.52001635374308j, 1.404051111408397 - 0.153683327745643j,
     -0.54767798648441 - 0.671560110307911j],
    [-0.51345931925137 - 0.558548830494544j, -0.478555091850685 + 0.585230765352263j,
     1.582738200014566 + 0.10153734895436j],
])


def test_zero_data_gives_identity(zero):
    for k in [0.0, 1.0, -2.0, 0.3 + 0.4j]:
        s, sa = scattering_matrix(zero, k)
        assert np.array_equal(s.values[s.defined], np.eye(3)[s.defined])
        assert np.array_equal(sa.values[sa.defined], np.eye(3)[sa.defined])


def test_bump_matches_rk4_oracle(bump):
    s, _ = scattering_matrix(bump, 1.0)
    assert np.max(np.abs(s.dense() - S_BUMP_K1)) < 1e-10
    s, _ = scattering_matrix(bump, 0.5 * np.exp(1j * np.pi / 6))
    assert np.max(np.abs(s.dense() - S_BUMP_D1)) < 1e-10


def test_routes_agree(gaussian):
    ks = np.array([0.3, 1.0, -0.7, 2.5])
    (a, am), (aa, _) = scattering_batch(gaussian, ks, route="boundary")
    (b, bm), (bb, _) = scattering_batch(gaussian, ks, route="quadrature", panels=96)
    assert np.array_equal(am, bm)
    assert np.nanmax(np.abs(a - b)) < 1e-10
    assert np.nanmax(np.abs(aa - bb)) < 1e-10


def test_domain_rules_for_real_k():
    assert column_defined("X", 0, 1.0) and column_defined("X", 1, 1.0) and not column_defined("X", 2, 1.0)
    assert column_defined("X", 2, -1.0) and not column_defined("X", 0, -1.0)
    assert entry_defined("X", 0, 1, 1.0) and not entry_defined("X", 0, 2, 1.0)
    assert entry_defined("X_adj", 2, 2, 1.0)
    assert all(column_defined("X", j, 0.0) for j in range(3))
    assert all(column_defined("Y", j, 5.0, compact=True) for j in range(3))


def test_undefined_entry_raises(gaussian):
    s, _ = scattering_matrix(gaussian, 1.0)
    with pytest.raises(DomainError):
        s[0, 2]
    assert s.get(0, 2) is None
    with pytest.raises(DomainError):
        s.dense()


def test_eigenfunction_requires_decay():
    g = GridFunction.gaussian(0.3, window=(-2.0, 2.0))
    with pytest.raises(InvalidDataError):
        solve_eigenfunction(g, 1.0)


def test_eigenfunction_normalised_at_right(gaussian):
    ef = solve_eigenfunction(gaussian, 0.8, "X", x=[gaussian.x_max, 0.0])
    assert np.allclose(ef.values[0][:, ef.columns], np.eye(3)[:, ef.columns], atol=1e-14)
    with pytest.raises(DomainError):
        ef.column(2)


def test_unimodular_eigenfunction(bump):
    ef = solve_eigenfunction(bump, 2.0, "Y", x=np.linspace(-1, 1, 5))
    assert np.allclose(ef.det(), 1.0, atol=1e-10)


@pytest.mark.parametrize("k", [0.5, 2.0, 10.0, -1.0, -10.0])
def test_symmetries(gaussian, k):
    ea, eb = symmetry_residuals(lambda z: scattering_matrix(gaussian, z)[0], k)
    assert ea < 1e-8 and eb < 1e-8


def test_determinant_and_duality_bump(bump):
    for k in [0.5, -2.0, 5.0 * np.exp(0.3j)]:
        s, sa = scattering_matrix(bump, k)
        S, SA = s.dense(), sa.dense()
        assert abs(np.linalg.det(S) - 1) < 1e-8
        inv = np.linalg.inv(S).T
        assert np.max(np.abs(SA - inv)) < 1e-8 * max(1.0, np.max(np.abs(inv)))


def test_quotient_identity(gaussian_table, gaussian):
    ks = gaussian_table.k_neg[::40]
    (s, _), _ = scattering_batch(gaussian, OMEGA2 * ks)
    idx = gaussian_table.neg[::40]
    lhs = 1 - np.abs(gaussian_table.r2[::40]) ** 2
    rhs = s[:, 0, 0].real / np.abs(gaussian_table.sA[idx, 0, 0]) ** 2
    assert np.max(np.abs(lhs - rhs)) < 1e-6
    assert np.max(np.abs(s[:, 0, 0].imag)) < 1e-8


def test_reflection_subunit(gaussian_table):
    assert np.all(np.abs(gaussian_table.r1) < 1)
    assert np.all(np.abs(gaussian_table.r2) < 1)


def test_real_data_reflection_relation(gaussian_table):
    # for real even data the two branches are mirror images in modulus
    r1 = np.abs(gaussian_table.r1)
    r2 = np.abs(gaussian_table.r2[::-1])
    assert np.max(np.abs(r1 - r2)) < 1e-10


def test_table_csv_roundtrip(tmp_path, bump, small_k_grid):
    tab = reflection_coefficients(bump, small_k_grid)
    p = tmp_path / "r.csv"
    tab.write_csv(p, header_comment="h")
    back = ScatteringTable.read_csv(p)
    assert np.allclose(back.r1, tab.r1, rtol=0, atol=0)
    assert np.allclose(back.r2_tilde, tab.r2_tilde, rtol=0, atol=0)


def test_parallel_matches_serial(bump, small_k_grid):
    a = reflection_coefficients(bump, small_k_grid, threads=1)
    b = reflection_coefficients(bump, small_k_grid, threads=2)
    assert np.array_equal(a.r1, b.r1)


def test_grid_must_contain_zero(bump):
    with pytest.raises(InvalidDataError):
        reflection_coefficients(bump, [0.1, 0.2])


def test_soliton_guard():
    tab = ScatteringTable(np.array([-1.0, 0.0, 1.0]), np.full((3, 3, 3), np.nan + 0j), np.full((3, 3, 3), np.nan + 0j))
    tab.s[:, 0, 0] = [1, 1e-9, 1]
    tab.sA[:, 0, 0] = 1
    with pytest.raises(SolitonAssumptionError):
        tab.check_soliton_free()


def test_default_grid_shape():
    g = default_k_grid()
    assert g.size == 801 and g[400] == 0.0 and g[-1] == 40.0


def test_large_k_first_coefficient(gaussian):
    X1 = large_k_coefficient(gaussian)
    from qdnls.scattering import _solve_columns
    x = 0.3
    prev = None
    for r in (20.0, 40.0, 80.0):
        cols = [_solve_columns(gaussian, np.array([r]), "X", j, np.array([x]))[0, 0] for j in (0, 1)]
        cols.append(_solve_columns(gaussian, np.array([-r]), "X", 2, np.array([x]))[0, 0])
        err = 0.0
        for j, (kk, c) in enumerate(zip((r, r, -r), cols)):
            e = np.eye(3)[:, j]
            err = max(err, np.max(np.abs(kk * (c - e) - X1.X1(x)[:, j])))
        if prev is not None:
            assert 1.6 < prev / err < 2.5
        prev = err


def test_off_diagonal_decay_envelope(gaussian_table, bump):
    assert gaussian_table.decays_monotonically()
    assert reflection_coefficients(bump, threads=2).decays_monotonically()


def test_tends_to_identity(gaussian_table):
    k = gaussian_table.k_grid
    for sel in (k >= 10, k <= -10):
        d = gaussian_table.distance_to_identity()[sel]
        d = d if k[sel][0] > 0 else d[::-1]
        assert np.all(np.diff(d) < 0)


def test_reflection_rapid_decay(gaussian_table):
    k = gaussian_table.k_pos
    assert np.max(np.abs(gaussian_table.r1) * (1 + k ** 2) ** 4) < 100


def test_small_k_second_difference_settles(gaussian):
    D = []
    for h in (2e-2, 1e-2, 5e-3, 2.5e-3):
        r = reflection_coefficients(gaussian, [0.0, h, 2 * h, 3 * h]).r1
        D.append((r[1] - 2 * r[2] + r[3]) / h ** 2)
    steps = np.abs(np.diff(D))
    assert np.all(steps[1:] < 0.6 * steps[:-1])


def test_eigenfunction_tail_decay(gaussian):
    xs = np.linspace(0.0, gaussian.x_max, 9)
    env = np.zeros(xs.size)
    for k in (0.5, 1.0, 2.0, 5.0, -1.0, -3.0):
        v = np.abs(solve_eigenfunction(gaussian, k, "X", x=xs).values - np.eye(3))
        env = np.maximum(env, np.where(np.isfinite(v), v, 0.0).max(axis=(1, 2)))
    assert np.all(np.diff(env) <= 0) and env[-1] < 1e-12
