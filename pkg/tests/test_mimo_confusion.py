import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mocsim.channel import draw_rayleigh
from mocsim.constellation import build_psk, build_qam, normalize_amplitude
from mocsim.errors import (
    BoundUnavailableError,
    CoverageError,
    DivergenceError,
    SingularChannelError,
)
from mocsim.mimo_confusion import (
    FunctionSpec,
    antenna_powers,
    TaylorPlan,
    beamformer_design,
    bob_combine,
    cpd8_sets,
    cpd16_sets,
    cpd_build,
    cpd_encode,
    default_taylor_plan,
    taylor_encode,
    truncation_residual_bound,
)

QAM16_RAW = build_qam(16).scaled(math.sqrt(10))
QAM16_UNIT = normalize_amplitude(build_qam(16))


def plan_with(*orders):
    return TaylorPlan(FunctionSpec(), tuple((n,) for n in orders))


class TestFunctionSpec:
    def test_arctan_coefficients_at_zero(self):
        spec = FunctionSpec()
        for n in range(1, 30):
            expected = 0.0 if n % 2 == 0 else (-1) ** ((n - 1) // 2) / n
            assert spec.coefficient(n) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("s0", [0.3, -0.5, 0.2 + 0.1j, 0.4j])
    def test_general_expansion_point(self, s0):
        spec = FunctionSpec(expansion_point=s0, max_order=12)
        ref = mpmath.taylor(mpmath.atan, mpmath.mpc(s0), 12)
        for n in range(1, 13):
            assert complex(spec.coefficient(n)) == pytest.approx(complex(ref[n]), abs=1e-12)
        assert spec.radius == pytest.approx(min(abs(s0 - 1j), abs(s0 + 1j)))

    def test_nonlinear_orders_skip_zeros(self):
        assert FunctionSpec().nonlinear_orders()[:6] == [3, 5, 7, 9, 11, 13]

    def test_unsupported_function(self):
        with pytest.raises(ValueError):
            FunctionSpec("tanh")


class TestPlan:
    def test_default_assignment(self):
        plan = default_taylor_plan(7)
        assert plan.assignment == ((3,), (5,), (7,), (9,), (11,), (13,))
        assert plan.antenna_count == 7
        assert plan.truncation_order == 13

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            TaylorPlan(FunctionSpec(), ((3,), (3, 5)))

    def test_zero_term_rejected(self):
        with pytest.raises(ValueError):
            TaylorPlan(FunctionSpec(), ((2,),))


class TestTaylorEncode:
    def test_two_antennas(self):
        x = taylor_encode(0.5, plan_with(3))
        assert x[0] == pytest.approx(0.46365, abs=1e-5)
        assert x[1] == pytest.approx(0.125 / 3, abs=1e-15)

    def test_zero_input(self):
        assert np.all(taylor_encode(0.0, default_taylor_plan(5)) == 0)

    def test_three_antenna_sum(self):
        x = taylor_encode(0.5, plan_with(3, 5))
        oracle = math.atan(0.5) + 0.5**3 / 3 - 0.5**5 / 5
        assert x.sum() == pytest.approx(oracle, abs=1e-15)
        assert x.sum() == pytest.approx(0.4990643, abs=1e-7)

    def test_divergence(self):
        with pytest.raises(DivergenceError):
            taylor_encode(1.2, plan_with(3))

    def test_vectorised_shape(self):
        x = taylor_encode(QAM16_UNIT.points, default_taylor_plan(4))
        assert x.shape == (4, 16)

    def test_per_antenna_alphabet_size(self):
        plan = default_taylor_plan(7)
        x = taylor_encode(QAM16_UNIT.points, plan)
        for row in x:
            assert np.unique(np.round(row, 12)).size <= 16 * plan.antenna_count


class TestBobCombine:
    def test_truncated_example(self):
        plan = plan_with(3, 5)
        s_hat = bob_combine(taylor_encode(0.5, plan).sum(), plan)
        assert s_hat == pytest.approx(0.4990643, abs=1e-7)
        assert abs(s_hat - 0.5) <= 0.5**7 / 7

    def test_fixed_point_at_expansion_point(self):
        for s0 in (0.0, 0.3):
            plan = default_taylor_plan(3, FunctionSpec(expansion_point=s0))
            assert bob_combine(np.arctan(s0), plan) == pytest.approx(s0, abs=1e-15)

    def test_many_terms_converge(self):
        plan = default_taylor_plan(30)
        s_hat = bob_combine(taylor_encode(0.6, plan).sum(), plan)
        assert abs(s_hat - 0.6) < 1e-12

    def test_general_expansion_point_recovers_symbol(self):
        spec = FunctionSpec(expansion_point=0.2, max_order=40)
        plan = default_taylor_plan(30, spec)
        s = 0.35 + 0.1j
        assert abs(bob_combine(taylor_encode(s, plan).sum(), plan) - s) < 1e-9

    @given(st.floats(-1.0, 1.0), st.integers(1, 8))
    def test_real_inputs_respect_alternating_bound(self, s, k):
        plan = default_taylor_plan(k + 1)
        residual = abs(bob_combine(taylor_encode(s, plan).sum(), plan) - s)
        assert residual <= truncation_residual_bound(plan, s) + 1e-15

    @given(st.floats(-1.0, 1.0), st.integers(1, 10))
    def test_residual_monotone_for_real_inputs(self, s, k):
        r = [abs(bob_combine(taylor_encode(s, default_taylor_plan(j + 1)).sum(), default_taylor_plan(j + 1)) - s)
             for j in (k, k + 1)]
        assert r[1] <= r[0] + 1e-15


class TestResidualBound:
    def test_examples(self):
        assert truncation_residual_bound(default_taylor_plan(7), 1.0) == pytest.approx(1 / 15)
        assert truncation_residual_bound(default_taylor_plan(7), 0.0) == 0.0
        assert truncation_residual_bound(default_taylor_plan(2), 0.5) == pytest.approx(0.5**5 / 5)

    def test_non_contiguous(self):
        with pytest.raises(BoundUnavailableError):
            truncation_residual_bound(plan_with(5), 0.5)

    def test_nonzero_expansion_point(self):
        with pytest.raises(BoundUnavailableError):
            truncation_residual_bound(default_taylor_plan(3, FunctionSpec(expansion_point=0.1)), 0.5)


class TestBeamformer:
    def test_unit_channel(self):
        assert np.allclose(beamformer_design([1, 1, 1]).weights, 1)

    def test_imaginary_channel(self):
        assert beamformer_design([2j]).weights[0] == pytest.approx(-0.5j)

    def test_zero_channel(self):
        with pytest.raises(SingularChannelError):
            beamformer_design([1, 0])

    def test_noiseless_sum(self):
        g = np.random.default_rng(1)
        h = draw_rayleigh(1, 4, g)[0]
        x = g.standard_normal((4, 10)) + 1j * g.standard_normal((4, 10))
        w = beamformer_design(h)
        assert np.allclose(w.effective(h), 1, atol=1e-12)
        assert np.allclose((h[:, None] * w.weights[:, None] * x).sum(axis=0), x.sum(axis=0), atol=1e-12)


@pytest.fixture(scope="module")
def table16():
    return cpd_build(QAM16_RAW, cpd16_sets())


class TestCpd:
    def _tuples(self, table, k):
        return [tuple(table.component_sets[t][i] for t, i in enumerate(row)) for row in table.decompositions[k]]

    def test_examples(self, table16):
        k31 = int(QAM16_RAW.index_of(3 + 1j))
        k11 = int(QAM16_RAW.index_of(1 + 1j))
        assert (1 - 1j, 2, 2j) in self._tuples(table16, k31)
        assert (1 + 1j, 2, -2) in self._tuples(table16, k11)

    def test_exact_sums(self, table16):
        for k, rows in enumerate(table16.decompositions):
            assert rows.shape[0] >= 1
            for row in rows:
                total = sum(table16.component_sets[t][i] for t, i in enumerate(row))
                assert abs(total - QAM16_RAW.points[k]) <= 1e-12

    def test_counts_frozen(self, table16):
        # brute-force tally over the 64 tuples
        counts = {}
        for a in cpd16_sets()[0]:
            for b in cpd16_sets()[1]:
                for c in cpd16_sets()[2]:
                    counts[a + b + c] = counts.get(a + b + c, 0) + 1
        for k, rows in enumerate(table16.decompositions):
            assert rows.shape[0] == counts[QAM16_RAW.points[k]]

    def test_8psk_figure_sets_leave_gaps(self):
        with pytest.raises(CoverageError) as err:
            cpd_build(build_psk(8), cpd8_sets())
        assert err.value.gaps == (1, 3, 5, 7)

    def test_8psk_figure_example(self):
        b1, b2 = cpd8_sets()
        target = np.exp(5j * np.pi / 8)
        assert abs(b1[0] + b2[1] - target) < 1e-12

    def test_8psk_with_idle_symbol(self):
        table = cpd_build(build_psk(8), cpd8_sets(with_zero=True))
        assert all(rows.shape[0] >= 1 for rows in table.decompositions)

    def test_sets_must_be_smaller(self):
        with pytest.raises(ValueError):
            cpd_build(build_psk(4), [build_psk(4).points])

    def test_encode_sums_and_marginals(self, table16):
        g = np.random.default_rng(0)
        idx = g.integers(0, 16, 20000)
        x = cpd_encode(idx, table16, g, indices=True)
        assert np.allclose(x.sum(axis=0), QAM16_RAW.points[idx], atol=1e-12)
        for t in range(3):
            assert np.unique(x[t]).size <= table16.component_sets[t].size

    def test_antenna_powers_unbalanced(self, table16):
        # every point of B1 has energy 2 and every point of B2, B3 has energy 4
        x = cpd_encode(np.arange(16).repeat(3), table16, 5, indices=True)
        assert np.allclose(antenna_powers(x), [2.0, 4.0, 4.0])
        assert antenna_powers(x).sum() == pytest.approx(QAM16_RAW.mean_power)

    def test_encode_by_symbol_and_missing(self, table16):
        x = cpd_encode(QAM16_RAW.points[[5]], table16, 1)
        assert x.sum() == pytest.approx(QAM16_RAW.points[5])
        with pytest.raises(CoverageError):
            cpd_encode([0.5 + 0.5j], table16, 1)
        with pytest.raises(CoverageError):
            cpd_encode([16], table16, 1, indices=True)

    def test_tuple_choice_is_uniform(self, table16):
        k = int(QAM16_RAW.index_of(1 + 1j))
        x = cpd_encode(np.full(60000, k), table16, 3, indices=True)
        _, counts = np.unique(np.round(x.T, 9), axis=0, return_counts=True)
        assert counts.size == table16.decompositions[k].shape[0]
        assert np.all(np.abs(counts / 60000 - 1 / counts.size) < 0.01)

    def test_text_dump(self, table16):
        lines = table16.to_text().splitlines()
        assert len(lines) == sum(d.shape[0] for d in table16.decompositions)
        assert lines[0].startswith("0 ")
