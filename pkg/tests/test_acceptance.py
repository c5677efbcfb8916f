"""Acceptance criteria, one test per criterion.

Every test prints a single ``ACCEPTANCE <n>: PASS/FAIL`` line with the
measured quantities (run pytest with ``-s`` to see the lines for passing
tests), then asserts the pinned windows.

Criterion 6 pins reference windows for the Post-Single II comparator that
this implementation demonstrably does not reach; the thresholds are kept
strict rather than weakened, so that part of the criterion is expected to
stay red. The Post-Double windows in the same criterion do pass and are
asserted first.
"""

import time

import numpy as np
import pytest

from _oracles import hermite_monomial, lasso_sign_enumeration, random_instance
from pdsseries.data import Dataset
from pdsseries.dictionary import DictionarySpec, hermite_deriv, hermite_eval
from pdsseries.inference import (
    Z_CRITICAL,
    average_derivative,
    functional_estimate,
    residualize_p,
    sandwich_variance,
)
from pdsseries.lasso import (
    LassoConfig,
    initial_loadings,
    kkt_max_violation,
    lasso_solve,
    penalty_level,
)
from pdsseries.montecarlo import (
    DgpConfig,
    _replication_seed,
    g_true,
    run_monte_carlo,
)
from pdsseries.selection import comparison_estimators, pds_fit

pytestmark = pytest.mark.acceptance

# criterion 5 and 6 simulation setups (shared with criterion 9)
CFG5 = dict(cfg=DgpConfig("low_dim", 500, sigma_v=1.0, sigma_eps=2.0),
            estimators=("post_double", "post_single_2", "oracle"),
            n_reps=200, base_seed=0, functionals=("avg_deriv",))
CFG6 = dict(cfg=DgpConfig("high_dim", 500, sigma_v=1.0, sigma_eps=2.0),
            estimators=("post_double", "post_single_2", "oracle"),
            n_reps=100, base_seed=0, functionals=("avg_deriv",))

# E[g'(x)] for x ~ N(0,1), Gauss-Hermite quadrature (101 and 201 nodes agree)
THETA_STANDARD_NORMAL = 0.206620964141907


def report_line(num: int, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    return line


def run_mc(setup):
    rep = run_monte_carlo(setup["cfg"], estimators=setup["estimators"],
                          n_reps=setup["n_reps"], base_seed=setup["base_seed"],
                          functionals=setup["functionals"])
    return rep


@pytest.fixture(scope="module")
def report5():
    t0 = time.perf_counter()
    rep = run_mc(CFG5)
    return rep, time.perf_counter() - t0


# ------------------------------------------------------------ criterion 1

def test_criterion_1_kkt_invariant_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for i in range(100):
        X, y = random_instance(rng, 50, 20)
        if i % 2:
            lam = penalty_level(50, 1, 20, LassoConfig(gamma=0.1))
        else:
            lam = (0.1 + 0.08 * (i % 10)) * float(np.abs(2 * X.T @ y).max())
        fit = lasso_solve(X, y, lam, initial_loadings(X, y))
        worst = max(worst, kkt_max_violation(X, y, fit))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 10.0
    line = report_line(1, ok, f"100 instances (n=50, M=20), max KKT violation "
                              f"{worst:.3e} <= 1e-06, {elapsed:.2f}s < 10s")
    assert ok, line


# ------------------------------------------------------------ criterion 2

def test_criterion_2_sign_enumeration_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for i in range(50):
        m = 2 + i % 3
        X, y = random_instance(rng, 30, m, n_nonzero=m)
        lam = (0.1 + 0.2 * (i % 5)) * float(np.abs(2 * X.T @ y).max())
        loadings = initial_loadings(X, y)
        fit = lasso_solve(X, y, lam, loadings,
                          LassoConfig(cd_tol=1e-12, cd_max_iter=100_000))
        want = lasso_sign_enumeration(X, y, lam, loadings)
        worst = max(worst, float(np.abs(fit.coefficients - want).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 5.0
    line = report_line(2, ok, f"50 instances (M<=4) vs sign-pattern oracle, "
                              f"max coef gap {worst:.3e} <= 1e-06, "
                              f"{elapsed:.2f}s < 5s")
    assert ok, line


# ------------------------------------------------------------ criterion 3

def test_criterion_3_ols_limit():
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(20):
        X, y = random_instance(rng, 60, 8)
        fit = lasso_solve(X, y, 0.0, np.ones(8),
                          LassoConfig(cd_tol=1e-12, cd_max_iter=200_000))
        ols = np.linalg.pinv(X) @ y
        worst = max(worst, float(np.abs(fit.coefficients - ols).max()))
    ok = worst <= 1e-6
    line = report_line(3, ok, f"lambda=0 vs pseudo-inverse LS on 20 full-rank "
                              f"instances, max gap {worst:.3e} <= 1e-06")
    assert ok, line


# ------------------------------------------------------------ criterion 4

def test_criterion_4_basis_identities():
    x = np.linspace(-3.0, 3.0, 41)
    worst_mono = worst_rec = worst_fd = 0.0
    h = 1e-5
    for k in range(9):
        want = np.array([hermite_monomial(v, k) for v in x])
        got = hermite_eval(x, k)
        scale = np.maximum(1.0, np.abs(want))
        worst_mono = max(worst_mono, float(np.max(np.abs(got - want) / scale)))
        if 1 <= k <= 7:
            rec = x * hermite_eval(x, k) - k * hermite_eval(x, k - 1)
            nxt = hermite_eval(x, k + 1)
            sc = np.maximum(1.0, np.abs(nxt))
            worst_rec = max(worst_rec, float(np.max(np.abs(rec - nxt) / sc)))
        dwant = hermite_deriv(x, k)
        fd = (hermite_eval(x + h, k) - hermite_eval(x - h, k)) / (2 * h)
        dsc = np.maximum(1.0, np.abs(dwant))
        worst_fd = max(worst_fd, float(np.max(np.abs(fd - dwant) / dsc)))
    ok = worst_mono <= 1e-9 and worst_rec <= 1e-12 and worst_fd <= 1e-5
    line = report_line(4, ok, f"k<=8 on 41-point grid: monomial expansion "
                              f"{worst_mono:.1e} <= 1e-09, recurrence "
                              f"{worst_rec:.1e} <= 1e-12, FD derivative "
                              f"{worst_fd:.1e} <= 1e-05")
    assert ok, line


# ------------------------------------------------------------ criterion 5

def test_criterion_5_low_dim_simulation(report5):
    rep, elapsed = report5
    rows = {r.estimator: r for r in rep.rows}
    pd_row, orc, psii = rows["post_double"], rows["oracle"], rows["post_single_2"]
    checks = [
        ("post_double MAD in [0.05, 0.11]", 0.05 <= pd_row.mad <= 0.11),
        ("post_double RP5 in [0.02, 0.15]", 0.02 <= pd_row.rp5 <= 0.15),
        ("oracle RP5 in [0.02, 0.11]", 0.02 <= orc.rp5 <= 0.11),
        ("post_single_2 RP5 >= 0.15", psii.rp5 >= 0.15),
        ("wall < 900s", elapsed < 900.0),
    ]
    ok = all(flag for _, flag in checks)
    bad = ", ".join(name for name, flag in checks if not flag)
    line = report_line(
        5, ok,
        f"low_dim n=500 sv=1 se=2, 200 reps, seed 0: post_double "
        f"mad={pd_row.mad:.4f} rp5={pd_row.rp5:.3f}, oracle rp5={orc.rp5:.3f}, "
        f"post_single_2 rp5={psii.rp5:.3f}, {elapsed:.1f}s"
        + (f" [failed: {bad}]" if bad else ""))
    assert ok, line


# ------------------------------------------------------------ criterion 6

def test_criterion_6_high_dim_simulation():
    t0 = time.perf_counter()
    rep = run_mc(CFG6)
    elapsed = time.perf_counter() - t0
    rows = {r.estimator: r for r in rep.rows}
    pd_row, psii = rows["post_double"], rows["post_single_2"]
    pd_ok = abs(pd_row.med_bias) <= 0.04 and 0.01 <= pd_row.rp5 <= 0.13
    psii_ok = psii.med_bias <= -0.4 and psii.rp5 >= 0.9
    ok = pd_ok and psii_ok and elapsed < 1800.0
    line = report_line(
        6, ok,
        f"high_dim n=500 dim_z=1000 sv=1 se=2, 100 reps, seed 0: post_double "
        f"med_bias={pd_row.med_bias:+.4f} rp5={pd_row.rp5:.3f} "
        f"({'ok' if pd_ok else 'out of window'}); post_single_2 "
        f"med_bias={psii.med_bias:+.4f} rp5={psii.rp5:.3f} vs pinned "
        f"med_bias<=-0.4, rp5>=0.9 ({'ok' if psii_ok else 'not reached'}); "
        f"{elapsed:.1f}s")
    assert pd_ok, line
    assert elapsed < 1800.0, line
    # pinned reference window for Post-Single II; expected to stay red
    assert psii_ok, line


# ------------------------------------------------------------ criterion 7

def test_criterion_7_variance_properties():
    rng = np.random.default_rng(707)
    worst_sym = worst_eig = 0.0
    worst_dup = 0.0
    min_v = np.inf
    for i in range(50):
        n, k, n_q = 80, 3, 2
        P = rng.standard_normal((n, k))
        Q = rng.standard_normal((n, n_q))
        y = P @ np.array([1.0, -0.5, 0.25]) + Q @ np.array([1.0, 1.0]) \
            + rng.standard_normal(n)
        A = rng.standard_normal(k)
        U = residualize_p(P, Q)
        r = y - np.concatenate([np.ones((n, 1)), P, Q], axis=1) @ \
            np.linalg.lstsq(np.concatenate([np.ones((n, 1)), P, Q], axis=1),
                            y, rcond=None)[0]
        v, omega, sigma = sandwich_variance(U, r, A)
        worst_sym = max(worst_sym,
                        float(np.abs(omega - omega.T).max()),
                        float(np.abs(sigma - sigma.T).max()))
        worst_eig = max(worst_eig, float(-np.linalg.eigvalsh(sigma).min()))
        min_v = min(min_v, v)
        # doubling every observation halves the variance of the mean
        v2, _, _ = sandwich_variance(np.vstack([U, U]), np.concatenate([r, r]), A)
        se1 = np.sqrt(v / n)
        se2 = np.sqrt(v2 / (2 * n))
        worst_dup = max(worst_dup, abs(se2 - se1 / np.sqrt(2.0)) / se1)
    ok = (worst_sym <= 1e-12 and worst_eig <= 1e-10 and min_v >= 0.0
          and worst_dup <= 1e-8)
    line = report_line(7, ok, f"50 random fits: max asymmetry {worst_sym:.1e} "
                              f"<= 1e-12, min Sigma eig >= -{worst_eig:.1e} "
                              f">= -1e-10, min V {min_v:.3e} >= 0, duplication "
                              f"se drift {worst_dup:.1e} <= 1e-08")
    assert ok, line


# ------------------------------------------------------------ criterion 8

def test_criterion_8_coverage_with_noise_controls():
    t0 = time.perf_counter()
    n, n_reps = 1000, 500
    spec_p = DictionarySpec("hermite_univariate", degree=10)
    spec_q = DictionarySpec("hermite_tensor", degree=10, input_dim=4)
    covered = {"oracle": 0, "post_double": 0}
    for r in range(n_reps):
        rng = np.random.default_rng(_replication_seed(8, r))
        x = rng.standard_normal(n)
        Z = rng.standard_normal((n, 4))
        y = g_true(x) + rng.standard_normal(n)
        data = Dataset(y=y, x=x, Z=Z, h_true=np.zeros(n))
        fits, failures = comparison_estimators(
            data, spec_p, spec_q, estimators=("post_double", "oracle"))
        assert not failures, failures
        functional = average_derivative(spec_p, data.x)
        for name, fit in fits.items():
            res = functional_estimate(fit, functional)
            if res.ci_lower <= THETA_STANDARD_NORMAL <= res.ci_upper:
                covered[name] += 1
    elapsed = time.perf_counter() - t0
    cov_orc = covered["oracle"] / n_reps
    cov_pd = covered["post_double"] / n_reps
    ok = 0.91 <= cov_orc <= 0.99 and 0.91 <= cov_pd <= 0.99
    line = report_line(
        8, ok,
        f"pure-noise controls, n=1000, {n_reps} reps: 95% CI coverage "
        f"oracle={cov_orc:.3f}, post_double={cov_pd:.3f}, window "
        f"[0.91, 0.99]; {elapsed:.1f}s")
    assert ok, line


# ------------------------------------------------------------ criterion 9

def test_criterion_9_byte_identical_rerun(report5, tmp_path):
    rep_a, _ = report5
    rep_b = run_mc(CFG5)
    path_a = tmp_path / "a.csv"
    path_b = tmp_path / "b.csv"
    rep_a.write_csv(path_a)
    rep_b.write_csv(path_b)
    same = (rep_a.to_csv() == rep_b.to_csv()
            and path_a.read_bytes() == path_b.read_bytes())
    line = report_line(9, same, "criterion-5 run repeated with the same seed: "
                                "CSV output byte-identical")
    assert same, line


# sanity guard so the module never silently skips a criterion
def test_all_nine_criteria_present():
    import sys
    mod = sys.modules[__name__]
    names = [n for n in dir(mod) if n.startswith("test_criterion_")]
    assert len(names) == 9
