import math

import numpy as np
import pytest

from conftest import dense_model

from crossreg import (
    IllConditionedRl,
    NoRootAboveRange,
    ReducedSystem,
    add_noise,
    build,
    dense_oracle,
    discrepancy_root,
    factorize,
    gravity,
    run_solver,
    solve_for_mu,
    stopping_check,
    svd_small,
)
from crossreg.aca import init as aca_init
from crossreg.aca import step as aca_step
from crossreg.solver import _solve_reduced


def gravity_system(n=64, k=10, reg="l1", seed=3, delta=1e-2):
    core = gravity(n)
    inst = add_noise(core, delta=delta, seed=seed)
    model, probes = aca_init(inst.oracle, min(50 * n, n * n), seed=seed + 1)
    for _ in range(k):
        aca_step(model, probes, inst.oracle)
    L = build(reg, n)
    return core, inst, model, probes, L, factorize(model, L, inst.g_noisy)


def identity_system(k=3, gproj=None, g_orth=0.0):
    """Synthetic reduced system with Qc = Qr = I_k, B = Bhat = Rl = I_k."""
    eye = np.eye(k)
    gproj = np.asarray(gproj if gproj is not None else eye[:, 0], dtype=float)
    return ReducedSystem(
        qc=eye,
        rc=eye,
        qr=eye,
        rr=eye,
        ql=eye,
        rl=eye,
        b=eye.copy(),
        gproj=gproj,
        g_orth_norm=g_orth,
        rl_cond=1.0,
        substitution_ok=True,
        bhat=eye.copy(),
        svd=svd_small(eye),
        beta=gproj.copy(),
    )


# ---------------------------------------------------------------- factorize


def test_factorize_core_matrix_and_projection():
    core, inst, model, probes, L, sys = gravity_system()
    assert np.linalg.norm(sys.b - sys.rc @ sys.rr.T) <= 1e-12 * np.linalg.norm(sys.b)
    g = inst.g_noisy
    lhs = np.linalg.norm(sys.gproj) ** 2 + sys.g_orth_norm**2
    assert lhs == pytest.approx(np.linalg.norm(g) ** 2, rel=1e-10)


def test_factorize_reduction_identity():
    # M_k Qr == Qc B, the exact content of the QR-based reduction
    core, inst, model, probes, L, sys = gravity_system()
    mk = dense_model(model)
    assert np.linalg.norm(mk @ sys.qr - sys.qc @ sys.b) < 1e-10


def test_factorize_identity_model():
    o = dense_oracle(np.eye(3))
    model, probes = aca_init(o, 9, seed=0)
    for _ in range(3):
        aca_step(model, probes, o)
    sys = factorize(model, build("l0", 3), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(np.abs(sys.b), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(np.abs(sys.rl), np.eye(3), atol=1e-12)


def test_factorize_validation():
    core, inst, model, probes, L, sys = gravity_system()
    with pytest.raises(ValueError):
        factorize(model, build("l1", 32), inst.g_noisy)
    with pytest.raises(ValueError):
        factorize(model, L, inst.g_noisy[:10])


def test_factorize_ill_conditioned_raise_and_fallback():
    core, inst, model, probes, L, sys = gravity_system()
    with pytest.raises(IllConditionedRl):
        factorize(model, L, inst.g_noisy, rl_cond_limit=1.0, on_ill_conditioned="raise")
    fb = factorize(model, L, inst.g_noisy, rl_cond_limit=1.0)
    assert not fb.substitution_ok and fb.bhat is None


def test_unique_solvability_guard():
    # positive diagonals in Rc, Rr, Rl imply trivial intersection of the
    # null spaces of (M_k Qr) and (L Qr): the stacked matrix has full rank
    core, inst, model, probes, L, sys = gravity_system(n=32, k=6)
    assert min(sys.diag_mins) > 0
    stacked = np.vstack([dense_model(model) @ sys.qr, L.dense() @ sys.qr])
    s = np.linalg.svd(stacked, compute_uv=False)
    assert s[-1] > 1e-12 * s[0]


# ------------------------------------------------------------- solve_for_mu


def test_filter_factor_half():
    sys = identity_system()
    sol = solve_for_mu(sys, 1.0)
    np.testing.assert_allclose(sol.y, [0.5, 0.0, 0.0], atol=1e-15)
    assert sol.residual_proj == pytest.approx(0.5, rel=1e-14)
    assert sol.xnorm == pytest.approx(0.5, rel=1e-14)


def test_large_mu_limit():
    sys = identity_system()
    sol = solve_for_mu(sys, 1e12)
    assert sol.xnorm < 1e-4
    assert sol.residual_proj == pytest.approx(np.linalg.norm(sys.gproj), rel=1e-4)


def test_mu_validation():
    sys = identity_system()
    with pytest.raises(ValueError):
        solve_for_mu(sys, 0.0)
    with pytest.raises(ValueError):
        solve_for_mu(sys, -1.0)


def test_xnorm_equals_ynorm():
    core, inst, model, probes, L, sys = gravity_system()
    sol = solve_for_mu(sys, 1e-3)
    assert sol.xnorm == pytest.approx(np.linalg.norm(sol.y), rel=1e-12)
    assert np.linalg.norm(sol.x) == pytest.approx(np.linalg.norm(sol.y), rel=1e-12)


@pytest.mark.parametrize("reg", ["l0", "l1", "l2"])
@pytest.mark.parametrize("mu", [1e-6, 1e-2, 1.0])
def test_normal_equations_oracle(reg, mu):
    core, inst, model, probes, L, sys = gravity_system(n=32, k=6, reg=reg)
    mk = dense_model(model)
    mq = mk @ sys.qr
    lq = L.dense() @ sys.qr
    y_ref = np.linalg.solve(mq.T @ mq + mu * (lq.T @ lq), mq.T @ inst.g_noisy)
    sol = solve_for_mu(sys, mu)
    assert np.linalg.norm(sol.y - y_ref) <= 1e-8 * np.linalg.norm(y_ref)


def test_stacked_fallback_matches_substitution():
    core, inst, model, probes, L, sys = gravity_system()
    fb = factorize(model, L, inst.g_noisy, rl_cond_limit=0.0)
    for mu in (1e-4, 1e-1, 10.0):
        a = solve_for_mu(sys, mu)
        b = solve_for_mu(fb, mu)
        assert np.linalg.norm(a.y - b.y) <= 1e-8 * np.linalg.norm(a.y)
        assert a.residual_proj == pytest.approx(b.residual_proj, rel=1e-8, abs=1e-12)


def test_residual_split_exact(rng):
    core, inst, model, probes, L, sys = gravity_system()
    mk = dense_model(model)
    for _ in range(5):
        y = rng.standard_normal(sys.k)
        full = np.linalg.norm(mk @ (sys.qr @ y) - inst.g_noisy) ** 2
        split = np.linalg.norm(sys.b @ y - sys.gproj) ** 2 + sys.g_orth_norm**2
        assert split == pytest.approx(full, rel=1e-10)


# --------------------------------------------------------- discrepancy_root


@pytest.mark.parametrize("etadelta", [0.1, 0.25, 0.9])
def test_analytic_discrepancy_root(etadelta):
    sys = identity_system()
    mu, sol = discrepancy_root(sys, etadelta)
    assert mu == pytest.approx(etadelta / (1 - etadelta), rel=1e-10)
    assert sol.residual_proj == pytest.approx(etadelta, rel=1e-8)


def test_discrepancy_root_errors():
    sys = identity_system()
    with pytest.raises(NoRootAboveRange):
        discrepancy_root(sys, 1.5)
    with pytest.raises(ValueError):
        discrepancy_root(sys, 0.0)


def test_discrepancy_root_bisection_oracle():
    core, inst, model, probes, L, sys = gravity_system(n=64, k=12, reg="l2")
    target = 0.3 * np.linalg.norm(sys.gproj)
    mu, sol = discrepancy_root(sys, target)
    assert sol.residual_proj == pytest.approx(target, rel=1e-8)
    # independent 60-step bisection on log(mu)
    lo, hi = math.log(1e-18), math.log(1e18)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _solve_reduced(sys, math.exp(mid))[1] < target:
            lo = mid
        else:
            hi = mid
    assert mu == pytest.approx(math.exp(0.5 * (lo + hi)), rel=1e-6)


def test_monotone_mu_curves():
    # the residual increases for any L; the solution 2-norm is guaranteed
    # monotone in standard form, the penalty seminorm ||Rl y|| in general
    core, inst, model, probes, L, sys = gravity_system()
    sys0 = factorize(model, build("l0", 64), inst.g_noisy)
    mus = np.logspace(-12, 12, 50)
    for system, check_ynorm in ((sys, False), (sys0, True)):
        resid = np.empty(mus.size)
        ynorm = np.empty(mus.size)
        pnorm = np.empty(mus.size)
        for i, mu in enumerate(mus):
            y, r = _solve_reduced(system, mu)
            resid[i] = r
            ynorm[i] = np.linalg.norm(y)
            pnorm[i] = np.linalg.norm(system.rl @ y)
        assert np.all(np.diff(resid) >= -1e-12 * resid[:-1])
        assert np.all(np.diff(pnorm) <= 1e-12 * pnorm[:-1])
        if check_ynorm:
            assert np.all(np.diff(ynorm) <= 1e-12 * ynorm[:-1])


# ---------------------------------------------------------- stopping_check


def test_stopping_zero_estimate_accepts_via_discrepancy():
    sys = identity_system(gproj=np.array([1.0, 0.5, 0.25]), g_orth=0.0)
    dec = stopping_check(sys, s_k=0.0, delta=0.4)
    assert dec.accepted and dec.reason == "estimate-negligible"
    assert dec.solution.residual_proj == pytest.approx(0.4, rel=1e-8)
    assert dec.term1 == 0.0


def test_stopping_split_form_invariant():
    # in split mode an accepted decision bounds both terms by eta*delta
    core, inst, model, probes, L, sys = gravity_system(n=128, k=18, reg="l2", delta=1e-2)
    from crossreg.aca import estimate_error

    s_k = estimate_error(probes, (128, 128)).s_k
    dec = stopping_check(sys, s_k, inst.delta, discrepancy_form="split")
    assert dec.accepted
    assert dec.term1 <= inst.delta * (1 + 1e-8)
    assert dec.term2 <= inst.delta * (1 + 1e-8)


def test_stopping_rejects_coarse_model():
    core, inst, model, probes, L, sys = gravity_system(n=64, k=2)
    dec = stopping_check(sys, s_k=1.0, delta=1e-4)
    assert not dec.accepted
    assert dec.solution is not None  # tracing still gets a candidate


def test_stopping_validation():
    sys = identity_system()
    with pytest.raises(ValueError):
        stopping_check(sys, -1.0, 1e-2)
    with pytest.raises(ValueError):
        stopping_check(sys, 1.0, 0.0)
    with pytest.raises(ValueError):
        stopping_check(sys, 1.0, 1e-2, discrepancy_form="bogus")


# -------------------------------------------------------------- run_solver


def test_run_solver_rank_one_consistent(rng):
    u = np.abs(rng.standard_normal(40)) + 0.5
    v = np.abs(rng.standard_normal(40)) + 0.5
    a = np.outer(u, v)
    x_hat = rng.standard_normal(40)
    g_exact = a @ x_hat
    delta = 1e-10 * np.linalg.norm(g_exact)
    o = dense_oracle(a)
    res = run_solver(o, build("l0", 40), g_exact, delta, max_k=5, probe_count=400)
    assert res.decision.accepted
    assert res.decision.k_star == 1
    resid = np.linalg.norm(a @ res.solution.x - g_exact)
    assert resid <= 2 * delta * (1 + 1e-6)


def test_run_solver_trace_and_budget():
    core = gravity(128)
    inst = add_noise(core, delta=1e-2, seed=2)
    res = run_solver(
        inst.oracle, build("l1", 128), inst.g_noisy, inst.delta,
        max_k=25, seed=3, x_exact=inst.x_exact,
    )
    t = 50 * 128
    k = res.model.k
    assert res.decision.accepted
    assert [row.k for row in res.trace] == list(range(1, k + 1))
    assert all(row.rel_error is not None for row in res.trace)
    evals = [row.unique_evals for row in res.trace]
    assert evals == sorted(evals)
    assert evals[-1] <= k * (128 + 128) + t + 128
    # true residual bound at acceptance: || A x - g || <~ (eta1+eta2) delta
    a = core.dense()
    true_resid = np.linalg.norm(a @ res.solution.x - inst.g_noisy)
    assert true_resid <= 2 * 2 * inst.delta


def test_run_solver_full_curve_mode():
    core = gravity(128)
    inst = add_noise(core, delta=1e-2, seed=2)
    res = run_solver(
        inst.oracle, build("l2", 128), inst.g_noisy, inst.delta,
        max_k=22, seed=3, x_exact=inst.x_exact, stop_at_acceptance=False,
    )
    assert len(res.trace) == 22
    assert res.decision.accepted
    assert res.decision.k_star < 22
    accepted_rows = [row for row in res.trace if row.accepted]
    assert accepted_rows and accepted_rows[0].k == res.decision.k_star


def test_run_solver_unaccepted_flagged():
    core = gravity(64)
    inst = add_noise(core, delta=1e-6, seed=1)
    res = run_solver(inst.oracle, build("l0", 64), inst.g_noisy, inst.delta, max_k=3, seed=2)
    assert not res.decision.accepted
    assert res.solution is not None


def test_run_solver_checks_final_state_on_exhaustion(rng):
    # rank exhaustion between strided checks must still evaluate the model
    u = np.abs(rng.standard_normal(30)) + 0.5
    a = np.outer(u, u)
    g_exact = a @ u
    o = dense_oracle(a)
    res = run_solver(o, build("l0", 30), g_exact, 1e-8 * np.linalg.norm(g_exact),
                     max_k=9, probe_count=200, check_stride=4)
    assert res.model.k == 1
    assert res.decision.accepted
    assert res.trace[-1].k == 1


def test_run_solver_check_stride():
    core = gravity(128)
    inst = add_noise(core, delta=1e-2, seed=2)
    res = run_solver(
        inst.oracle, build("l1", 128), inst.g_noisy, inst.delta,
        max_k=20, seed=3, check_stride=3, stop_at_acceptance=False,
    )
    assert [row.k for row in res.trace] == [3, 6, 9, 12, 15, 18, 20]


def test_run_solver_validation():
    core = gravity(16)
    inst = add_noise(core, delta=1e-2, seed=0)
    with pytest.raises(ValueError):
        run_solver(inst.oracle, build("l0", 16), inst.g_noisy, inst.delta, max_k=17)
