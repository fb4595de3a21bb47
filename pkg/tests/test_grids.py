import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfbmfp.errors import DomainError
from tfbmfp.grids import GridLaw, graded_case1, select_grid, spliced_case2, uniform
from tfbmfp.special import ModelParams, t_max_formula


class TestGraded:
    def test_node_value(self):
        g = graded_case1(ModelParams(0.25, 0.1), 0.05, 1.0)
        assert g.nodes[4] == pytest.approx(0.04, rel=1e-14)

    def test_step_count_reference_case(self):
        g = graded_case1(ModelParams(0.2, 0.1), 0.05, 200.0)
        assert g.steps == math.ceil(200.0**0.4 / 0.05) == 167

    def test_starts_at_zero(self):
        assert graded_case1(ModelParams(0.3, 0.1), 0.05, 10.0).nodes[0] == 0.0

    @given(H=st.floats(0.05, 0.45), tau=st.floats(1e-3, 0.5), T=st.floats(2.0, 500.0))
    @settings(max_examples=50, deadline=None)
    def test_transformed_step_constant(self, H, tau, T):
        g = graded_case1(ModelParams(H, 0.1), tau, T)
        diffs = np.diff(g.nodes ** (2 * H))
        # the power round trip costs a few ulp of t^(2H) itself
        round_off = 8 * np.finfo(float).eps * g.nodes[-1] ** (2 * H)
        assert np.max(np.abs(diffs - tau)) <= 1e-12 * tau + round_off
        assert g.nodes[-1] >= T * (1 - 1e-12)
        assert g.law is GridLaw.GRADED_CASE_I

    def test_rejects_case_two(self):
        with pytest.raises(DomainError):
            graded_case1(ModelParams(0.7, 0.1), 0.05, 10.0)

    def test_rejects_coarse_tau(self):
        with pytest.raises(DomainError):
            graded_case1(ModelParams(0.3, 0.1), 2.0, 1.0)

    def test_exact_horizon_hit(self):
        g = graded_case1(ModelParams(0.3, 0.1), 1 / 40, 1.0)
        assert g.steps == 40
        assert g.nodes[-1] == pytest.approx(1.0, rel=1e-14)


class TestSpliced:
    def test_reference_case_splice(self):
        p = ModelParams(0.7, 0.01)
        g = spliced_case2(p, 0.05, 600.0)
        k1 = math.ceil(t_max_formula(p) ** 1.4 / 0.05)
        assert g.splice_index == k1
        assert g.nodes[k1] == pytest.approx(28.5, abs=0.05)
        assert g.law is GridLaw.SPLICED_CASE_II
        assert g.nodes[-1] >= 600.0

    def test_segment_laws(self):
        H = 0.7
        g = spliced_case2(ModelParams(H, 0.01), 0.05, 600.0)
        k1 = g.splice_index
        a = np.diff(g.nodes[: k1 + 1] ** (2 * H))
        b = np.diff(g.nodes[k1 + 1 :] ** H)
        assert np.allclose(a, 0.05, rtol=0, atol=1e-12)
        assert np.allclose(b, 0.05, rtol=0, atol=1e-12)
        assert g.nodes[k1 + 1] > g.nodes[k1]
        # seam: first tail node sits on the t^H lattice just past the graded segment
        jump = g.nodes[k1 + 1] ** H - g.nodes[k1] ** H
        assert 0.05 < jump <= 0.1 + 1e-12

    def test_splice_inside_unit_horizon(self):
        p = ModelParams(0.7, 0.5)
        assert t_max_formula(p) == pytest.approx(0.57, abs=0.005)
        g = spliced_case2(p, 0.05, 1.0)
        assert g.law is GridLaw.SPLICED_CASE_II
        assert 0 < g.nodes[g.splice_index] < 1.0

    def test_clamped_to_single_segment(self):
        p = ModelParams(0.9, 1e-4)
        assert t_max_formula(p) > 10.0
        g = spliced_case2(p, 0.05, 10.0)
        assert g.law is GridLaw.GRADED_CASE_I
        assert g.splice_index is None
        assert np.allclose(np.diff(g.nodes**1.8), 0.05, atol=1e-12)

    @given(H=st.floats(0.55, 0.95), lam=st.floats(0.01, 1.0), tau=st.floats(0.005, 0.2))
    @settings(max_examples=50, deadline=None)
    def test_monotone_and_covering(self, H, lam, tau):
        T = 50.0
        try:
            g = spliced_case2(ModelParams(H, lam), tau, T)
        except DomainError:
            return
        assert np.all(np.diff(g.nodes) > 0)
        assert g.nodes[-1] >= T * (1 - 1e-12)

    def test_rejects_case_one(self):
        with pytest.raises(DomainError):
            spliced_case2(ModelParams(0.3, 0.1), 0.05, 10.0)

    def test_rejects_empty_tail(self):
        # graded segment overshoots T before the tail can start
        with pytest.raises(DomainError):
            spliced_case2(ModelParams(0.7, 0.5), 0.9, 0.6)


class TestUniform:
    @pytest.mark.parametrize("T,K", [(200.0, 4000), (600.0, 12000)])
    def test_counts(self, T, K):
        assert uniform(0.05, T).steps == K

    def test_single_step(self):
        assert list(uniform(1.0, 1.0).nodes) == [0.0, 1.0]

    def test_rejects_step_beyond_horizon(self):
        with pytest.raises(DomainError):
            uniform(2.0, 1.0)


@pytest.mark.parametrize("H", [0.1, 0.2, 0.3, 0.4, 0.45])
def test_graded_dominates_uniform(H):
    for T in (2.0, 20.0, 200.0):
        tau = 0.05
        assert graded_case1(ModelParams(H, 0.1), tau, T).steps < uniform(tau, T).steps


def test_select_grid():
    assert select_grid(ModelParams(0.3, 0.1), 0.05, 10.0).law is GridLaw.GRADED_CASE_I
    assert select_grid(ModelParams(0.7, 0.1), 0.05, 10.0).law is GridLaw.SPLICED_CASE_II


def test_nodes_read_only():
    g = uniform(0.5, 2.0)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0
