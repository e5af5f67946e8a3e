import numpy as np
import pytest

from crmaps.catalog import G, NormalFormID, jet_coordinates
from crmaps.errors import Inconsistent
from crmaps.group_action import (N0, OrbitParams, SequenceSpec, base_chart, convergence_experiment, orbit_map,
                                 orbit_map_real, random_stabilizer_search, rank_at_base, reflection_pair,
                                 rotation_pair, sample_box, stabilizer_classify, stabilizer_residual)
from crmaps.isotropies import GammaParams, GammaPrimeParams


class TestOrbitParams:
    def test_positive_s(self):
        with pytest.raises(ValueError):
            OrbitParams(GammaParams(), GammaPrimeParams(), 0.0)

    @pytest.mark.parametrize("eps", [1, -1])
    def test_chart_roundtrip(self, eps):
        x = np.append(sample_box(1, eps, seed=9)[0], 0.8)
        assert np.allclose(OrbitParams.from_chart(x, eps).chart, x, atol=1e-12)
        assert base_chart(0.5).shape == (N0,) and base_chart(0.5)[-1] == 0.5


class TestOrbitMap:
    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("eps", [1, -1])
    def test_base_point_gives_catalog(self, k, eps):
        for s0 in (0.1, 0.7, 1.5):
            J = orbit_map(OrbitParams.from_chart(base_chart(s0), eps), k, eps)
            assert np.max(np.abs(J.values - jet_coordinates(G(k, s0, eps)).values)) < 1e-13

    def test_s_direction(self):
        a = orbit_map(OrbitParams.from_chart(base_chart(0.5), 1), 2, 1)
        b = orbit_map(OrbitParams.from_chart(base_chart(0.6), 1), 2, 1)
        assert abs((b["H_w2[0]"] - a["H_w2[0]"]) - 0.05) < 1e-13

    def test_real_version_is_batched(self):
        X = np.stack([base_chart(0.3), base_chart(0.9)])
        R = orbit_map_real(X, 3, -1)
        assert R.shape == (2, 34)
        assert np.allclose(R[1], jet_coordinates(G(3, 0.9, -1)).as_real(), atol=1e-13)

    @pytest.mark.parametrize("k,eps,s0", [(2, -1, 0.5), (3, 1, 1.0), (2, 1, 0.1), (3, -1, 2.0)])
    def test_rank(self, k, eps, s0):
        rep = rank_at_base(k, eps, s0)
        sv = np.asarray(rep["singular_values"])
        assert rep["rank"] == 16 and rep["rank_s_frozen"] == 15
        assert tuple(rep["shape"]) == (34, 16)
        assert sv[15] >= 1e-6 * sv[0]

    def test_rank_needs_positive_s(self):
        with pytest.raises(ValueError):
            rank_at_base(2, 1, 0.0)

    @pytest.mark.parametrize("k,eps", [(2, 1), (3, -1)])
    def test_local_injectivity(self, k, eps):
        rng = np.random.default_rng(42)
        x0 = base_chart(0.7)
        for _ in range(50):
            d1, d2 = rng.normal(size=(2, N0))
            d1 *= 1e-3 / np.linalg.norm(d1)
            d2 *= 1e-3 / np.linalg.norm(d2)
            a, b = orbit_map_real(np.stack([x0 + d1, x0 + d2]), k, eps)
            assert np.linalg.norm(a - b) > 1e-10


class TestStabilizers:
    @pytest.mark.parametrize("eps", [1, -1])
    def test_explicit_families(self, eps):
        for k in (1, 2):
            jets = G(k, 0, eps).jets(4)
            for u in np.exp(2j * np.pi * np.arange(16) / 16):
                assert stabilizer_residual(*rotation_pair(u), jets, eps) < 1e-12
        assert stabilizer_residual(*reflection_pair(), G(3, 0, eps).jets(4), eps) < 1e-12
        # the reflection is not a stabilizer once s > 0
        assert stabilizer_residual(*reflection_pair(), G(3, 0.5, eps).jets(4), eps) > 1e-3

    @pytest.mark.parametrize("eps", [1, -1])
    def test_classification(self, eps):
        assert stabilizer_classify(G(2, 0, eps), eps).classification == "circle"
        assert stabilizer_classify(G(1, 0, eps), eps).classification == "circle"
        assert stabilizer_classify(G(3, 0, eps), eps).classification == "two_element"
        rep = stabilizer_classify(G(2, 0.5, eps), eps, n_random=2000)
        assert rep.classification == "trivial" and rep.s == pytest.approx(0.5)

    def test_random_search_finds_circle_at_s_zero(self):
        rep = random_stabilizer_search(G(2, 0, 1), 1, n=2000)
        assert rep["nontrivial"]

    def test_inconsistent(self):
        with pytest.raises(Inconsistent):
            stabilizer_classify(G(2, 0.5, 1), 1, tol=10.0)

    def test_sample_box(self):
        X = sample_box(500, -1, seed=1)
        assert np.array_equal(X, sample_box(500, -1, seed=1))
        assert X.shape == (500, 15)
        assert X[:, 0].min() >= 0.5 and X[:, 0].max() <= 2 and np.abs(X[:, 1]).max() <= 1
        for i in (3, 9, 11, 13):
            assert np.hypot(X[:, i], X[:, i + 1]).max() <= 0.5


class TestConvergence:
    def test_constant(self):
        rep = convergence_experiment(SequenceSpec("constant"))
        assert all(r["param_distance"] == 0 and r["jet_distance"] == 0 for r in rep["rows"])
        assert rep["converged"]

    def test_c_decay(self):
        rep = convergence_experiment(SequenceSpec("c_decay", NormalFormID(2, 0.5, -1)))
        assert rep["param_slope"] == pytest.approx(-1, abs=0.05)
        assert rep["converged"] and not rep["divergent"]
        assert all(r["recovered_composite_distance"] < 1e-6 for r in rep["rows"])

    def test_lambda_growth_diverges(self):
        rep = convergence_experiment(SequenceSpec("lambda_growth"))
        assert rep["divergent"] and not rep["converged"]

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            SequenceSpec("spiral").pair(1)
