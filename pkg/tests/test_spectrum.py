import dataclasses

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import i0, i1

from capstab.discretize import evaluate_Q
from capstab.errors import DegenerateConstraintError
from capstab.spectrum import (SpectrumReport, analyze_spectrum, constrained_index, constrained_spectrum, count_below,
                              index_bracket, projected_index_dense, robin_spectrum)
from conftest import assembly

# Lowest rotationally symmetric eigenvalues of -J on totally geodesic disks.
# Robin rows: phi'(R) = p(R) phi(R); Dirichlet rows: phi(R) = 0 (the constrained radial problem).
# Frozen from the radial ODE phi'' + (s'/s) phi' + (lambda + Ric) phi = 0, see _shoot below.
ORACLE = {
    ("euclidean", 1.0, "R"): -2.5865628591780903,  # k I1(k) = I0(k), lambda = -k^2
    ("hyperbolic", 0.5, "R"): -9.6656637865069,
    ("hyperbolic", 1.0, "R"): -1.9692509841662014,
    ("hyperbolic", 2.0, "R"): -0.22129539177540264,
    ("spherical", 1.0, "R"): -3.385462184994224,
    ("spherical", 2.0, "D"): -0.9067180915561907,
    ("spherical", 2.5, "D"): -1.445537964574171,
}
RIC = {"euclidean": 0.0, "hyperbolic": -2.0, "spherical": 2.0}
WARP = {"euclidean": (lambda r: r, lambda r: 1.0), "hyperbolic": (np.sinh, np.cosh), "spherical": (np.sin, np.cos)}


def _shoot(lam, space, R, bc, n=0):
    s, ds = WARP[space]
    a = lam + RIC[space]
    r0 = 1e-4
    y0 = [r0 ** n, n * r0 ** (n - 1)] if n else [1.0, -a * r0 / 2]
    sol = solve_ivp(lambda r, y: [y[1], -ds(r) / s(r) * y[1] + (n * n / s(r) ** 2 - a) * y[0]],
                    [r0, R], y0, rtol=1e-12, atol=1e-14, method="DOP853")
    y = sol.y[:, -1]
    return y[0] if bc == "D" else y[1] - ds(R) / s(R) * y[0]


@pytest.mark.parametrize("key", sorted(ORACLE))
def test_frozen_oracles_reproduce(key):
    lam = ORACLE[key]
    root = brentq(_shoot, lam - 0.05, lam + 0.05, args=key, xtol=1e-13)
    assert root == pytest.approx(lam, abs=1e-9)


def test_flat_oracle_bessel():
    k = brentq(lambda k: k * i1(k) - i0(k), 0.5, 3.0, xtol=1e-15)
    assert -k * k == pytest.approx(ORACLE[("euclidean", 1.0, "R")], abs=1e-12)


@pytest.mark.parametrize("space,R", [("spherical", 2.0), ("hyperbolic", 1.0)])
def test_coordinate_modes_are_zero_modes(space, R):
    # the n = 1 Robin mode sits at lambda = 0 exactly
    assert abs(_shoot(0.0, space, R, "R", n=1)) <= 1e-9


def _surface_args(space, R):
    return (space, R, "flat_disk") if space == "euclidean" else (space, R, "geodesic_disk")


def _kw(space):
    return {"c": 0.0} if space == "euclidean" else {"offset": 0.0}


@pytest.mark.parametrize("space,R", [(k[0], k[1]) for k in ORACLE if k[2] == "R"])
def test_lowest_robin_eigenvalue(space, R):
    lam = ORACLE[(space, R, "R")]
    errs = []
    for level in (1, 2):
        rep = robin_spectrum(assembly(*_surface_args(space, R), level, **_kw(space)))
        errs.append(abs(rep.eigenvalues[0] - lam))
    assert errs[1] <= 5e-3 * max(1.0, abs(lam))
    assert errs[1] < errs[0] / 2


@pytest.mark.parametrize("R", [2.0, 2.5])
def test_constrained_radial_mode_of_large_spherical_disk(R):
    lam = ORACLE[("spherical", R, "D")]
    mu, _ = constrained_spectrum(assembly("spherical", R, "geodesic_disk", 2, offset=0.0), count=3)
    assert mu[0] == pytest.approx(lam, rel=1e-2)


def test_flat_coordinate_modes_shrink():
    vals = []
    for level in (1, 2):
        ev = robin_spectrum(assembly("euclidean", 1.0, "flat_disk", level, c=0.0)).eigenvalues
        vals.append(np.abs(ev[1:3]))
    assert np.all(vals[1] < vals[0] / 2)
    assert np.max(vals[1]) <= 5e-2


def test_index_paths_agree():
    A = assembly("euclidean", 1.0, "catenoid", 1, critical=True)
    dense = robin_spectrum(A, dense_max=10 ** 6)
    sparse = robin_spectrum(A, dense_max=10)
    assert dense.method == "dense" and sparse.method == "shift-invert"
    # at this level the two rotation zero modes still sit just below the zero band
    assert dense.k_neg == sparse.k_neg == 6
    np.testing.assert_allclose(dense.eigenvalues[:6], sparse.eigenvalues[:6], rtol=1e-8, atol=1e-10)
    ci = constrained_index(A, eps=dense.eps_zero)
    ref, w = projected_index_dense(A, eps=dense.eps_zero)
    assert ci == ref == 5
    mu_d, _ = constrained_spectrum(A, count=5, dense_max=10 ** 6)
    mu_s, _ = constrained_spectrum(A, count=5, dense_max=10)
    np.testing.assert_allclose(mu_d, mu_s, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(mu_d, w[:5], rtol=1e-10, atol=1e-10)
    assert count_below(A.A, A.M, 0.0) == int(np.sum(dense.eigenvalues < 0))


def test_witness_is_admissible_and_negative():
    A = assembly("euclidean", 1.0, "catenoid", 1, critical=True)
    rep = analyze_spectrum(A)
    w = rep.witness
    assert abs(A.c @ w) <= 1e-12 * np.linalg.norm(A.c) * np.linalg.norm(w)
    assert evaluate_Q(A, w, w) == rep.witness_Q < -rep.eps_zero
    assert rep.verdict == "unstable"
    assert rep.cross_check["eigen_count_agrees"]


def test_stable_disks():
    rep = analyze_spectrum(assembly("euclidean", 1.0, "flat_disk", 2, c=0.0))
    assert rep.constrained_index == 0 and rep.k_neg == 1 and rep.verdict == "stable"
    rep = analyze_spectrum(assembly("hyperbolic", 1.0, "geodesic_disk", 2, offset=0.0))
    assert rep.constrained_index == 0 and rep.verdict == "stable"


def _fake(k, zero_band=0, ci=-1):
    return SpectrumReport(np.zeros(1), np.zeros((1, 1)), k, zero_band, 1e-6, 1.0, 1, 0.1, "dense", 0.0,
                          constrained_index=ci)


@pytest.mark.parametrize("k,bracket", [(1, (0, 1)), (0, (0, 0)), (3, (2, 3))])
def test_bracket(k, bracket):
    br = index_bracket(_fake(k))
    assert br["bracket"] == bracket and not br["indeterminate"]


def test_bracket_widened_by_zero_band():
    br = index_bracket(_fake(1, zero_band=2))
    assert br["widened"] == (0, 3) and br["indeterminate"]


def test_verdicts():
    assert _fake(1, ci=0).verdict == "stable"
    assert _fake(2, ci=1).verdict == "unstable"
    rep = _fake(1, ci=0)
    rep.constrained_indeterminate = True
    assert rep.verdict == "indeterminate"


def test_degenerate_constraint():
    A = assembly("euclidean", 1.0, "flat_disk", 0, c=0.0)
    bad = dataclasses.replace(A, c=np.zeros(A.n))
    with pytest.raises(DegenerateConstraintError):
        constrained_index(bad)
