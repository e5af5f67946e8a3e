import numpy as np
import pytest
from conftest import gamma_primes, gammas
from hypothesis import given, strategies as st

from crmaps.algebra import CPoly, Jet, RationalMapGerm, rational_compose
from crmaps.catalog import G, jet_coordinates
from crmaps.errors import ConstraintViolated, NotOnHypersurface
from crmaps.group_action import sample_box
from crmaps.hypersurfaces import SourcePoint
from crmaps.isotropies import (SWAP, TRIVIAL_CHART, GammaParams, GammaPrimeParams, act, act_jets, compose_gamma,
                               compose_gamma_prime, extract_gamma, extract_gamma_prime, invert_gamma,
                               invert_gamma_prime, orient_transversal, param_distance, params_from_chart,
                               params_to_chart, recenter, sigma_map, sigma_prime_map, source_translation,
                               target_translation, target_translation_inverse)

z, w = CPoly.variables(2)
eps_and_gp = st.sampled_from([1, -1]).flatmap(lambda e: st.tuples(st.just(e), gamma_primes(e)))


def max_jet_diff(a, b):
    return max(float(np.max(np.abs(x.c - y.c))) for x, y in zip(a, b))


def jd(A, B):
    return float(np.linalg.norm(jet_coordinates(A).values - jet_coordinates(B).values))


class TestParams:
    def test_invariants(self):
        with pytest.raises(ConstraintViolated):
            GammaParams(lam=0.0)
        with pytest.raises(ConstraintViolated):
            GammaParams(u=1.1)
        with pytest.raises(ConstraintViolated):
            GammaPrimeParams(a1=0.5).check(1)
        with pytest.raises(ConstraintViolated):
            SWAP.check(1)
        SWAP.check(-1)

    def test_json_roundtrip(self):
        g = GammaParams(1.3, -0.2, np.exp(0.3j), 0.1 - 0.2j)
        gp = GammaPrimeParams(0.9, 0.4, np.exp(1j), np.sqrt(1 + 0.01), 0.1j, 0.2, -0.1j)
        assert GammaParams.from_json(g.to_json()) == g
        assert GammaPrimeParams.from_json(gp.to_json()) == gp

    @pytest.mark.parametrize("eps", [1, -1])
    def test_chart_roundtrip(self, eps):
        X = sample_box(50, eps, seed=3)
        g, gp = params_from_chart(X, eps)
        assert np.allclose(params_to_chart(g, gp), X, atol=1e-12)
        g0, gp0 = params_from_chart(TRIVIAL_CHART, eps)
        assert param_distance(g0, gp0) < 1e-15


class TestMaps:
    def test_sigma_examples(self):
        assert max_jet_diff(sigma_map(GammaParams()).jets(4), Jet.identity(2, 4)) == 0
        f, g = sigma_map(GammaParams(2.0, 0.0, 1.0, 0.0)).components
        assert f.num == 2 * z and g.num == 4 * w and f.den == CPoly.constant(1, 2)
        f, g = sigma_map(GammaParams(c=1.0)).components
        assert f.num == z + w and g.num == w
        assert f.den == 1 - 2j * z - 1j * w

    def test_sigma_prime_examples(self):
        assert max_jet_diff(sigma_prime_map(GammaPrimeParams(), 1).jets(4), Jet.identity(3, 4)) == 0
        assert np.allclose(GammaPrimeParams(u=-1.0).matrix(1), [[-1, 0], [0, 1]])
        z1, z2, ww = CPoly.variables(3)
        S = sigma_prime_map(SWAP, -1)
        assert [c.num for c in S.components] == [z2, z1, -ww]

    @given(gammas())
    def test_jets_match_map(self, g):
        assert max_jet_diff(sigma_map(g).jets(4), sigma_map(g).on_jets(Jet.identity(2, 4))) < 1e-13


class TestInverse:
    def test_trivial_and_dilation(self):
        assert invert_gamma(GammaParams()) == GammaParams()
        gi = invert_gamma(GammaParams(4.0))
        assert float(gi.lam) == 0.25 and float(gi.r) == 0
        gpi = invert_gamma_prime(GammaPrimeParams(4.0), 1)
        assert float(gpi.lam) == pytest.approx(0.25) and abs(complex(gpi.c1)) == 0

    @given(gammas())
    def test_gamma_inverse_oracle(self, g):
        comp = rational_compose(sigma_map(g), sigma_map(invert_gamma(g)))
        assert max_jet_diff(comp.jets(4), Jet.identity(2, 4)) < 1e-10

    @given(eps_and_gp)
    def test_gamma_prime_inverse_oracle(self, eps_gp):
        eps, gp = eps_gp
        comp = rational_compose(sigma_prime_map(gp, eps), sigma_prime_map(invert_gamma_prime(gp, eps), eps))
        assert max_jet_diff(comp.jets(4), Jet.identity(3, 4)) < 1e-10


class TestGroupLaw:
    @given(gammas(), gammas())
    def test_closure_gamma(self, a, b):
        direct = compose_gamma(a, b)
        extracted = extract_gamma(rational_compose(sigma_map(a), sigma_map(b)).jets(3))
        assert param_distance(compose_gamma(direct, invert_gamma(extracted)), GammaPrimeParams()) < 1e-9

    @given(eps_and_gp, st.data())
    def test_closure_gamma_prime(self, eps_gp, data):
        eps, a = eps_gp
        b = data.draw(gamma_primes(eps))
        direct = compose_gamma_prime(a, b, eps)
        extracted = extract_gamma_prime(rational_compose(sigma_prime_map(a, eps), sigma_prime_map(b, eps)).jets(3), eps)
        back = compose_gamma_prime(direct, invert_gamma_prime(extracted, eps), eps)
        assert param_distance(GammaParams(), back) < 1e-9


class TestAction:
    @pytest.mark.parametrize("k,s,eps", [(1, 0, 1), (2, 0.5, -1), (3, 1.2, 1)])
    def test_trivial_action(self, k, s, eps):
        H = G(k, s, eps)
        assert jd(act(GammaParams(), GammaPrimeParams(), H, eps), H) < 1e-14

    @given(gammas(), gammas(), eps_and_gp, st.data())
    def test_left_action_law(self, g1, g2, eps_gp, data):
        eps, gp1 = eps_gp
        gp2 = data.draw(gamma_primes(eps))
        H = G(2, 0.7, eps)
        two_step = act(g1, gp1, act(g2, gp2, H, eps), eps)
        one_step = act(compose_gamma(g1, g2), compose_gamma_prime(gp1, gp2, eps), H, eps)
        assert jd(two_step, one_step) < 1e-9

    @given(gammas(), eps_and_gp)
    def test_act_jets_matches_act(self, g, eps_gp):
        eps, gp = eps_gp
        H = G(3, 0.4, eps)
        assert max_jet_diff(act_jets(g, gp, H, eps, 4), act(g, gp, H, eps).jets(4)) < 1e-10

    @pytest.mark.parametrize("eps", [1, -1])
    def test_circle_stabilizer_both_conventions(self, eps):
        H = G(1, 0, eps)
        u = np.exp(0.9j)
        # (uz, w) and (z1'/u, z2'/u^2, w') fix H in the form sigma' o H o sigma
        sig = sigma_map(GammaParams(u=u))
        sig_p = sigma_prime_map(GammaPrimeParams(u=np.conj(u) ** 3, a1=u ** 2), eps)
        assert jd(rational_compose(sig_p, rational_compose(H, sig)), H) < 1e-12
        # in the action sigma' o H o sigma^{-1} the target factor becomes (u z1', u^2 z2', w')
        gp = GammaPrimeParams(u=u ** 3, a1=np.conj(u) ** 2)
        assert np.allclose(gp.matrix(eps), np.diag([u, u ** 2]))
        assert jd(act(GammaParams(u=u), gp, H, eps), H) < 1e-12


class TestTranslations:
    def test_origin_is_identity(self):
        T = source_translation(SourcePoint(0j, 0.0))
        assert max_jet_diff(T.jets(3), Jet.identity(2, 3)) == 0

    @given(st.complex_numbers(max_magnitude=2), st.floats(-2, 2))
    def test_translated_origin(self, z0, u):
        p = SourcePoint(z0, u)
        assert np.allclose(source_translation(p)(0, 0), p.coords, atol=1e-15)

    @pytest.mark.parametrize("eps", [1, -1])
    def test_target_translation_roundtrip(self, eps):
        q1, q2, u = 0.3 - 0.1j, 0.2j, 0.4
        q = (q1, q2, complex(u, abs(q1) ** 2 + eps * abs(q2) ** 2))
        T, Ti = target_translation(q, eps), target_translation_inverse(q, eps)
        assert np.allclose(T(0, 0, 0), q)
        assert max_jet_diff(rational_compose(Ti, T).jets(3), Jet.identity(3, 3)) < 1e-14
        with pytest.raises(NotOnHypersurface):
            target_translation((1.0, 0.0, 0.0), eps)

    @pytest.mark.parametrize("eps", [1, -1])
    def test_recenter_at_origin(self, eps):
        H = G(3, 0.6, eps)
        assert jd(recenter(H, SourcePoint(0j, 0.0), eps), H) < 1e-14

    def test_recenter_off_hypersurface(self):
        bad = RationalMapGerm.from_polys([z, w, w], CPoly.constant(1, 2))
        with pytest.raises(NotOnHypersurface):
            recenter(bad, SourcePoint(0.3, 0.2), 1)


def test_orient_transversal():
    H = G(2, 0.4, -1)
    flipped = rational_compose(sigma_prime_map(SWAP, -1), H)
    assert complex(flipped.jets(1)[2].derivative((0, 1))).real < 0
    assert jd(orient_transversal(flipped, -1), H) < 1e-14
    assert orient_transversal(H, -1) is H
    assert orient_transversal(G(2, 0.4, 1), 1) is not None
