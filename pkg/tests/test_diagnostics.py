import math

import numpy as np
import pytest

from oulab.chaos import transition_chaos
from oulab.covariance import solve_lyapunov
from oulab.diagnostics import (analyticity, analyze, c_bound, cross_checks, kernel_condition,
                               renorming_certificate, s_infinity_norm, s_infinity_pencil, sector_constant,
                               spectral_gap)
from oulab.config import DEFAULT
from oulab.errors import MissingCovarianceError
from oulab.model import OuModel, PowerLaw, build_decoupled, build_diagonal, build_paper_2x2
from helpers import random_invariant, random_normal_model, random_q_symmetric, random_stable


def _checks(model):
    return {c.name: c.status for c in cross_checks(model)}


# ---- S_inf norm

@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
def test_s_infinity_norm_jordan_2x2(t):
    expected = math.exp(-t) * (t + math.sqrt(t * t + 1))
    assert s_infinity_norm(build_paper_2x2(), t) == pytest.approx(expected, rel=1e-10)
    lam = s_infinity_pencil(build_paper_2x2(), t)
    np.testing.assert_allclose(lam, [math.exp(-2 * t) * (t + s * math.sqrt(t * t + 1)) ** 2 for s in (1, -1)],
                               rtol=1e-9)


@pytest.mark.parametrize("a", [0.5, 2.0])
def test_s_infinity_norm_scalar_drift(rng, a):
    B = rng.normal(size=(3, 2))
    m = OuModel(-a * np.eye(3), B)
    assert s_infinity_norm(m, 0.7) == pytest.approx(math.exp(-0.7 * a), rel=1e-10)


def test_s_infinity_norm_matches_whitened_operator(rng):
    for _ in range(5):
        model = random_stable(rng, 4, 2)
        X = solve_lyapunov(model)
        w, U = np.linalg.eigh(X)
        C = np.diag(w ** -0.5) @ U.T @ model.S(0.8) @ U @ np.diag(w ** 0.5)
        assert s_infinity_norm(model, 0.8, X) == pytest.approx(np.linalg.norm(C, 2), rel=1e-9)
        assert transition_chaos(model, 0.8, 1).block_norms()[1] == pytest.approx(np.linalg.norm(C, 2), rel=1e-9)


def test_s_infinity_norm_missing_covariance():
    with pytest.raises(MissingCovarianceError):
        s_infinity_norm(OuModel([[0.0]], [[1.0]]), 1.0)


# ---- gap

def test_gap_identity_model():
    g = spectral_gap(OuModel(-np.eye(3), np.eye(3)))
    assert g.holds and g.M_star == pytest.approx(0.5)
    assert g.gap_omega == pytest.approx(1.0)
    assert g.growth_bound_A_infinity == pytest.approx(-1.0)
    assert all(ok for *_, ok in g.bound_checks.values())


def test_gap_jordan_2x2_absent():
    g = spectral_gap(build_paper_2x2())
    assert not g.holds and g.M_star == math.inf and g.gap_omega is None
    assert g.bound_checks == {}


def test_gap_diagonal_grows_with_truncation():
    for N in (10, 100):
        g = spectral_gap(build_diagonal(PowerLaw(1, 3), PowerLaw(1, 1), N))
        assert g.M_star == pytest.approx(N / 2, rel=1e-10)


def test_gap_decoupled():
    g = spectral_gap(build_decoupled())
    assert g.holds and g.M_star == pytest.approx(0.5)
    assert g.growth_bound_A_infinity == pytest.approx(-1.0)


def test_gap_bound_on_random_models(rng):
    for _ in range(10):
        model = random_stable(rng, 4, 4)
        g = spectral_gap(model)
        assert g.holds
        assert all(ok for *_, ok in g.bound_checks.values())
        # the certified rate never beats the exact growth bound
        assert -g.gap_omega >= g.growth_bound_A_infinity - 1e-9


# ---- analyticity

def test_kernel_condition_jordan_2x2():
    ok, (v, img) = kernel_condition(build_paper_2x2())
    assert not ok
    np.testing.assert_allclose(v, [1.0, 0.0])
    np.testing.assert_allclose(img, [0.0, 1.0])


def test_kernel_condition_full_rank_noise(rng):
    assert kernel_condition(random_stable(rng, 3, 3)) == (True, None)
    assert kernel_condition(build_decoupled()) == (True, None)


def test_analyticity_jordan_2x2():
    a = analyticity(build_paper_2x2())
    assert a.verdict == "not-analytic" and not a.kernel_condition_ok
    assert a.sector_constant_b == math.inf and a.C_bound == math.inf


def test_analyticity_symmetric_drift(rng):
    B = rng.normal(size=(4, 4))
    A = -(B @ B.T) - 0.5 * np.eye(4)
    a = analyticity(OuModel(A, np.eye(4)))
    assert a.verdict == "analytic"
    assert a.sector_constant_b == pytest.approx(0.0, abs=1e-9)
    assert math.isfinite(a.C_bound)


def test_analyticity_rotation_example():
    a = analyticity(OuModel([[-1.0, 2.0], [-2.0, -1.0]], np.eye(2)))
    assert a.verdict == "analytic"
    assert a.sector_constant_b == pytest.approx(2.0, rel=1e-10)
    assert a.sector_constant_sampled == pytest.approx(2.0, rel=0.02)


def test_sector_constant_direct():
    b, _ = sector_constant(np.array([[-1.0, 3.0], [-3.0, -1.0]]), DEFAULT)
    assert b == pytest.approx(3.0)
    assert sector_constant(np.array([[1.0, 0.0], [0.0, -1.0]]), DEFAULT)[0] == math.inf


def test_sector_constant_dominates_sampling(rng):
    for _ in range(10):
        model = random_stable(rng, 4, 4)
        a = analyticity(model)
        assert a.verdict == "analytic"
        assert a.sector_constant_sampled <= a.sector_constant_b * (1 + 1e-6) + 1e-9
        assert a.sector_constant_sampled >= 0.98 * a.sector_constant_b


def test_c_bound_identity_model():
    # A = -I, Q = I: A Q_inf = -I/2, so |A Q_inf x|_H = |x| / 2 = C |x|
    C, _ = c_bound(OuModel(-np.eye(2), np.eye(2)), 0.5 * np.eye(2))
    assert C == pytest.approx(0.5)


def test_analytic_implies_kernel_condition(rng):
    seen = 0
    for k in range(50):
        n = 3
        if k % 2:
            model = random_stable(rng, n, 2)
        else:
            model, _ = random_invariant(rng, n, 2, contractive=True)
            if not model.is_hurwitz():
                continue
        a = analyticity(model)
        assert math.isfinite(a.sector_constant_b) == math.isfinite(a.C_bound)
        if a.verdict == "analytic":
            seen += 1
            assert a.kernel_condition_ok
    assert seen > 0


# ---- cross checks

def test_cross_checks_diagonal_pass():
    c = _checks(build_diagonal(PowerLaw(1, 2), PowerLaw(1, 1), 6))
    assert c["analytic_P_implies_analytic_SH"] == "pass"
    assert c["renormed_contractive_SH_implies_analytic_P"] == "pass"
    assert c["analytic_implies_kernel_condition"] == "pass"
    assert c["gap_equivalences"] == "pass"


def test_cross_checks_jordan_2x2():
    c = _checks(build_paper_2x2())
    assert c["analytic_P_implies_analytic_SH"] == "not-applicable"
    assert c["renormed_contractive_SH_implies_analytic_P"] == "not-applicable"
    assert c["gap_equivalences"] == "not-applicable"


def test_cross_checks_normal_full_noise(rng):
    for _ in range(5):
        _, a_h = random_normal_model(rng, 3, 3)
        c = _checks(OuModel(a_h, np.eye(3)))
        assert c["analytic_P_implies_analytic_SH"] == "pass"
        assert c["renormed_contractive_SH_implies_analytic_P"] == "pass"


def test_cross_checks_never_fail_on_random_models(rng):
    for _ in range(10):
        model, _ = random_invariant(rng, 4, 2)
        if not model.is_hurwitz():
            continue
        assert "fail" not in _checks(model).values()


def test_renorming_certificate():
    assert np.array_equal(renorming_certificate(-np.eye(2), DEFAULT), np.eye(2))
    a = np.array([[-1.0, 10.0], [0.0, -1.0]])
    X = renorming_certificate(a, DEFAULT)
    assert np.all(np.linalg.eigvalsh(X) > 0)
    assert np.linalg.eigvalsh(X @ a + a.T @ X)[-1] <= 1e-9
    assert renorming_certificate(np.array([[1.0]]), DEFAULT) is None


# ---- report

def test_analyze_jordan_2x2():
    r = analyze(build_paper_2x2())
    assert not r.q_symmetric and not r.h_invariant and not r.s_h_contractive
    assert r.hq_infinity and r.q_infinity_provenance == "lyapunov"
    assert not r.spectral_gap.holds
    assert r.analyticity.verdict == "not-analytic"
    assert all(r.strong_feller_at.values())


def test_analyze_q_symmetric_and_unstable(rng):
    r = analyze(random_q_symmetric(rng, 3))
    assert r.q_symmetric and r.analyticity.verdict == "analytic"
    r2 = analyze(OuModel([[1.0]], [[1.0]]))
    assert not r2.hq_infinity and r2.spectral_gap is None and r2.analyticity is None
    assert r2.notes


@pytest.mark.parametrize("seed", range(4))
def test_diagonal_report_matches_dense_route(seed):
    rng = np.random.default_rng(seed)
    a, q = rng.uniform(0.2, 3.0, 5), rng.uniform(0.1, 2.0, 5)
    diag = analyze(OuModel.diagonal(a, q))
    dense_model = OuModel(np.diag(-a), np.diag(np.sqrt(q)))
    dense = analyze(dense_model)
    assert diag.q_infinity_provenance == "closed-form-diagonal"
    np.testing.assert_allclose(diag.q_infinity, np.diag(dense.q_infinity), rtol=1e-12)
    for key in ("M_star", "gap_omega", "growth_bound_A_infinity"):
        assert getattr(diag.spectral_gap, key) == pytest.approx(getattr(dense.spectral_gap, key), rel=1e-9)
    for t, (nrm, bound, ok) in diag.spectral_gap.bound_checks.items():
        assert nrm == pytest.approx(s_infinity_norm(dense_model, t), rel=1e-9) and ok
    assert diag.analyticity.verdict == dense.analyticity.verdict == "analytic"
    assert diag.analyticity.C_bound == pytest.approx(dense.analyticity.C_bound, rel=1e-9)
    assert dense.analyticity.sector_constant_b == pytest.approx(0.0, abs=1e-9)
    assert diag.strong_feller_at == dense.strong_feller_at
    assert [c.status for c in diag.cross_checks] == [c.status for c in dense.cross_checks]
    assert (diag.q_symmetric, diag.h_invariant, diag.s_h_contractive) == \
        (dense.q_symmetric, dense.h_invariant, dense.s_h_contractive)


def test_large_diagonal_report_is_fast():
    import time
    m = build_diagonal(PowerLaw(1, 2), PowerLaw(1, 1), 10 ** 4)
    t0 = time.perf_counter()
    r = analyze(m)
    assert time.perf_counter() - t0 < 1.0
    assert r.spectral_gap.M_star == pytest.approx(10 ** 4 / 2)
    assert any("trace Q_inf False" in n for n in r.notes)
