import numpy as np
import pytest
from conftest import gamma_primes, gammas
from hypothesis import given, settings, strategies as st

from crmaps.algebra import CPoly, RationalMapGerm
from crmaps.catalog import G, faran_lebl_germ, jet_coordinates, jet_distance
from crmaps.errors import NoConvergence, NotInF2, Unclassifiable
from crmaps.hypersurfaces import SourcePoint
from crmaps.isotropies import (GammaParams, GammaPrimeParams, act, act_jets, compose_gamma, compose_gamma_prime,
                               param_distance, params_to_chart)
from crmaps.normalization import (CONDITION_NAMES, WORK_ORDER, _residual_fn, classify, condition_vector,
                                  levenberg_marquardt, normalize, stage_a, verify_normal_conditions)

eps_and_gp = st.sampled_from([1, -1]).flatmap(lambda e: st.tuples(st.just(e), gamma_primes(e)))
G0 = GammaParams(1.4, 0.3, np.exp(0.8j), 0.2 - 0.3j)


def GP0(eps):
    a2 = 0.3 + 0.1j
    return GammaPrimeParams(0.7, -0.4, np.exp(-2j), np.sqrt(1 - eps * abs(a2) ** 2) * np.exp(0.5j), a2, 0.1j, -0.2)


def jd(A, B):
    return jet_distance(jet_coordinates(A), jet_coordinates(B))


class TestConditions:
    @pytest.mark.parametrize("k,s", [(1, 0), (2, 0), (2, 0.5), (3, 0), (3, 1.3)])
    @pytest.mark.parametrize("eps", [1, -1])
    def test_catalog_satisfies_conditions(self, k, s, eps):
        rep = verify_normal_conditions(G(k, s, eps))
        assert set(rep.residuals) == set(CONDITION_NAMES)
        assert rep.max_residual < 1e-12 and rep.sign_ok
        assert np.max(np.abs(rep.vector)) < 1e-12 and rep.vector.shape == (19,)

    @pytest.mark.parametrize("eps", [1, -1])
    def test_generic_image_violates_conditions(self, eps):
        assert verify_normal_conditions(act(G0, GP0(eps), G(2, 1, eps), eps)).max_residual > 1e-3

    def test_identity_action_keeps_residuals(self):
        H = act(G0, GP0(1), G(3, 0.4, 1), 1)
        a = verify_normal_conditions(H).residuals
        b = verify_normal_conditions(act(GammaParams(), GammaPrimeParams(), H, 1)).residuals
        assert all(abs(a[k] - b[k]) < 1e-12 for k in a)

    def test_condition_vector_batches(self):
        lam = np.array([0.8, 1.0, 1.3])
        jets = act_jets(GammaParams(lam), GammaPrimeParams(), G(2, 0.4, 1), 1, WORK_ORDER)
        V = condition_vector(jets)
        assert V.shape == (3, 19) and np.max(np.abs(V[1])) < 1e-14


class TestNormalize:
    @pytest.mark.parametrize("k,s,eps", [(2, 0.7, -1), (3, 1.0, 1), (3, 0.3, -1)])
    def test_fixed_point(self, k, s, eps):
        H = G(k, s, eps)
        res = normalize(H, eps)
        assert param_distance(res.gamma, res.gamma_p) < 1e-10
        assert jd(res.normalized, H) < 1e-12

    @pytest.mark.parametrize("eps", [1, -1])
    def test_round_trip(self, eps):
        H0 = G(2, 0.7, -1 if eps < 0 else 1)
        res = normalize(act(G0, GP0(eps), H0, eps), eps)
        assert jd(res.normalized, H0) < 1e-8
        back = param_distance(compose_gamma(res.gamma, G0), compose_gamma_prime(res.gamma_p, GP0(eps), eps))
        assert back < 1e-6
        assert all(v <= 1e-8 for v in res.residuals.values())

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("eps", [1, -1])
    def test_gauge_at_s_zero(self, k, eps):
        H0 = G(k, 0, eps)
        res = normalize(act(G0, GP0(eps), H0, eps), eps)
        assert jd(res.normalized, H0) < 1e-8
        assert res.gauge_note

    def test_idempotent(self):
        res = normalize(act(G0, GP0(-1), G(3, 0.6, -1), -1), -1)
        again = normalize(res.normalized, -1)
        assert param_distance(again.gamma, again.gamma_p) < 1e-8

    def test_not_in_F2(self):
        z, w = CPoly.variables(2)
        lin = RationalMapGerm.from_polys([z, CPoly({}, 2), w], CPoly.constant(1, 2))
        with pytest.raises(NotInF2):
            normalize(lin, 1)

    def test_no_convergence_reports_residuals(self):
        with pytest.raises(NoConvergence) as info:
            normalize(act(G0, GP0(1), G(2, 0.4, 1), 1), 1, max_iter=0, accept=1e-300)
        assert set(info.value.residuals) == set(CONDITION_NAMES)

    def test_levenberg_marquardt_polishes_a_perturbed_start(self):
        H = act(G0, GP0(1), G(3, 0.9, 1), 1)
        base = H.jets(WORK_ORDER)
        g, gp, _ = stage_a(base, 1)
        x0 = params_to_chart(g, gp) + 1e-3 * np.linspace(-1, 1, 15)
        x, r, it, hist = levenberg_marquardt(_residual_fn(base, 1), x0)
        assert np.max(np.abs(r)) < 1e-10 and it >= 1 and hist[-1] < hist[0]

    def test_levenberg_marquardt_on_overdetermined_linear_system(self):
        A = np.vstack([np.eye(3), np.ones((1, 3))])
        b = A @ np.array([1.0, -2.0, 0.5])
        x, r, _, _ = levenberg_marquardt(lambda X: X @ A.T - b, np.zeros(3), tol=1e-12)
        assert np.allclose(x, [1.0, -2.0, 0.5], atol=1e-10)


class TestClassify:
    def test_fixed_point(self):
        c = classify(G(3, 1, 1), 1)
        assert (c.id.family, c.id.eps) == (3, 1) and abs(c.id.s - 1) < 1e-12 and c.certificate < 1e-12

    @pytest.mark.parametrize("eps", [1, -1])
    def test_family_one(self, eps):
        c = classify(act(G0, GP0(eps), G(1, 0, eps), eps), eps)
        assert c.id.family == 1 and c.id.s == 0

    def test_unclassifiable(self):
        with pytest.raises(Unclassifiable) as info:
            classify(act(G0, GP0(1), G(3, 1, 1), 1), 1, tol=0.0)
        assert info.value.certificate is not None

    @settings(max_examples=100)
    @given(gammas(), eps_and_gp, st.sampled_from([2, 3]), st.sampled_from([0.3, 0.7, 1.3]))
    def test_equivariance(self, g, eps_gp, k, s):
        eps, gp = eps_gp
        c = classify(act(g, gp, G(k, s, eps), eps), eps)
        assert c.id.family == k and abs(c.id.s - s) < 1e-6

    def test_matching_families_at_coincidence(self):
        assert classify(G(3, 0.5, -1), -1).matching_families == [2, 3]
        assert classify(G(3, 0.5, 1), 1).matching_families == [3]
        assert classify(G(2, 0.7, -1), -1).matching_families == [2]

    def test_sphere_map_vi(self):
        for p in (SourcePoint(0.1 + 0.05j, 0.02), SourcePoint(-0.2j, 0.1)):
            c = classify(faran_lebl_germ(6, -1, p), -1)
            assert c.id.family == 2 and c.certificate < 1e-6

    def test_sphere_map_v_sits_at_the_crossing(self):
        c = classify(faran_lebl_germ(5, -1, SourcePoint(0.1 + 0.05j, 0.02)), -1)
        assert abs(c.id.s - 0.5) < 1e-8
        # G3,1/2,- and G2,1/2,- are one map, so both distances vanish
        assert max(c.distances.values()) < 1e-8
