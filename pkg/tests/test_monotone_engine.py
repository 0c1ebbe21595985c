"""Shift estimation, the iteration operator, and the two monotone runs."""

import numpy as np
import pytest

import helpers
from ellsys import expr as ex
from ellsys.auto_bracket import build_construct
from ellsys.errors import InvariantViolation
from ellsys.mesh_fem import assemble, energy_norm, unit_interval_mesh
from ellsys.monotone_engine import (ShiftConstants, apply_T, energy_budget,
                                    estimate_shifts, iterate_max, iterate_min)
from ellsys.order_lattice import (ProblemSpec, bracket, make_pair,
                                  pair_values, verify_sub, verify_super)


@pytest.fixture(scope="module")
def coupled():
    construct = build_construct(helpers.saturating_config(64, 1.0))
    return construct.spec, construct.interval


def spec_with(f1, f2, g1="0", g2="0", n=16, c="1"):
    mesh = unit_interval_mesh(n)
    forms = assemble(mesh, ex.parse(c), ex.parse(c))
    return mesh, ProblemSpec(mesh, forms, ex.parse(f1), ex.parse(f2),
                             ex.parse(g1), ex.parse(g2),
                             ex.parse(c), ex.parse(c))


class TestShiftConstants:
    def test_invariant_enforced(self):
        with pytest.raises(InvariantViolation):
            ShiftConstants((1.0, 0.0), (0.0, 0.0), 0.5)
        with pytest.raises(InvariantViolation):
            ShiftConstants((-1.0, 0.0), (0.0, 0.0), 2.0)
        ShiftConstants((0.0, 0.0), (0.0, 0.0), 1.0)  # all-zero case: k > 0

    def test_cross_coupled_needs_no_shift(self, coupled):
        spec, interval = coupled
        shifts = estimate_shifts(spec, interval)
        assert shifts.khat == (0.0, 0.0)
        assert shifts.kbar == (0.0, 0.0)
        assert shifts.k == 1.0

    def test_linear_decay_slope(self):
        mesh, spec = spec_with("-2*u1 + u2", "u1 - 2*u2")
        sub = make_pair(mesh, np.zeros(17), np.zeros(17))
        sup = make_pair(mesh, np.ones(17), np.ones(17))
        interval = bracket(spec, sub, sup)
        shifts = estimate_shifts(spec, interval)
        assert shifts.khat[0] == pytest.approx(2.0, abs=1e-6)
        assert shifts.khat[1] == pytest.approx(2.0, abs=1e-6)
        assert shifts.k == pytest.approx(5.0, abs=1e-5)

    def test_sine_slope_oracle(self):
        # analytic derivative of sin is cos with minimum -1 on [0, pi]
        mesh, spec = spec_with("sin(u1)", "0")
        sub = make_pair(mesh, np.zeros(17), np.zeros(17))
        sup = make_pair(mesh, np.full(17, np.pi), np.full(17, np.pi))
        interval = bracket(spec, sub, sup, tol=1.0)
        shifts = estimate_shifts(spec, interval, grid=41)
        assert shifts.khat[0] == pytest.approx(1.0, abs=1e-3)


class TestApplyT:
    def test_solution_is_fixed_point(self):
        mesh, _, spec = helpers.constant_source_spec(32)
        shifts = ShiftConstants((0.0, 0.0), (0.0, 0.0), 1.0)
        ones = make_pair(mesh, np.ones(33), np.ones(33))
        out = apply_T(spec, shifts, ones)
        assert np.abs(out[0].values - 1.0).max() <= 1e-9
        assert np.abs(out[1].values - 1.0).max() <= 1e-9

    def test_image_of_zero_lands_strictly_between(self):
        mesh, _, spec = helpers.constant_source_spec(32)
        shifts = ShiftConstants((0.0, 0.0), (0.0, 0.0), 1.0)
        zero = make_pair(mesh, np.zeros(33), np.zeros(33))
        out = apply_T(spec, shifts, zero)
        assert np.all(out[0].values > 0.0)
        assert np.all(out[0].values < 1.0)

    def test_order_preservation_on_random_ordered_pairs(self, coupled):
        spec, interval = coupled
        shifts = estimate_shifts(spec, interval)
        s1, s2 = pair_values(interval.sub)
        t1, t2 = pair_values(interval.sup)
        rng = np.random.default_rng(2027)
        for _ in range(10):
            lo1 = s1 + rng.random(s1.size) * (t1 - s1)
            lo2 = s2 + rng.random(s2.size) * (t2 - s2)
            hi1 = lo1 + rng.random(s1.size) * (t1 - lo1)
            hi2 = lo2 + rng.random(s2.size) * (t2 - lo2)
            ta = apply_T(spec, shifts, make_pair(spec.mesh, lo1, lo2))
            tb = apply_T(spec, shifts, make_pair(spec.mesh, hi1, hi2))
            assert (ta[0].values - tb[0].values).max() <= 1e-10
            assert (ta[1].values - tb[1].values).max() <= 1e-10


class TestIteration:
    def test_converges_to_constant_solution_from_below(self):
        mesh, spec, interval = helpers.constant_source_bracket(64)
        shifts = estimate_shifts(spec, interval)
        limit, trace = iterate_min(spec, shifts, interval, tol=1e-9)
        assert trace.converged
        assert np.abs(limit[0].values - 1.0).max() <= 1e-8
        assert trace.worst_violation() <= 1e-10
        # ascent from below: every recorded minimum grows
        mins = [snap[0].min() for snap in trace.snapshots]
        assert all(b >= a - 1e-12 for a, b in zip(mins, mins[1:]))

    def test_zero_data_keeps_zero(self):
        mesh, spec = spec_with("0", "0")
        sub = make_pair(mesh, np.zeros(17), np.zeros(17))
        sup = make_pair(mesh, np.ones(17), np.ones(17))
        interval = bracket(spec, sub, sup)
        shifts = estimate_shifts(spec, interval)
        limit, trace = iterate_min(spec, shifts, interval, tol=1e-10)
        assert trace.converged
        assert np.abs(limit[0].values).max() <= 1e-12

    def test_max_run_descends_to_same_limit(self):
        mesh, spec, interval = helpers.constant_source_bracket(64)
        shifts = estimate_shifts(spec, interval)
        lo, _ = iterate_min(spec, shifts, interval, tol=1e-9)
        hi, trace = iterate_max(spec, shifts, interval, tol=1e-9)
        assert trace.converged
        maxs = [snap[0].max() for snap in trace.snapshots]
        assert all(b <= a + 1e-12 for a, b in zip(maxs, maxs[1:]))
        assert np.abs(lo[0].values - hi[0].values).max() <= 1e-6

    def test_coupled_example_runs_inside_bracket(self, coupled):
        spec, interval = coupled
        shifts = estimate_shifts(spec, interval)
        lo, tr_min = iterate_min(spec, shifts, interval, tol=1e-9)
        hi, tr_max = iterate_max(spec, shifts, interval, tol=1e-9)
        assert tr_min.converged and tr_max.converged
        assert tr_min.final_residual() < 1e-8
        assert tr_min.worst_violation() <= 1e-10
        assert tr_max.worst_violation() <= 1e-10
        assert tr_min.worst_containment() <= 1e-10
        assert tr_max.worst_containment() <= 1e-10
        assert (lo[0].values - hi[0].values).max() <= 1e-8
        assert (lo[1].values - hi[1].values).max() <= 1e-8
        # positive, nonconstant limit
        assert lo[0].values.min() > 0
        assert lo[0].values.max() - lo[0].values.min() > 1e-3
        assert verify_sub(spec, lo, interval.tol).passed
        assert verify_super(spec, lo, interval.tol).passed

    def test_energy_stays_within_budget(self, coupled):
        spec, interval = coupled
        shifts = estimate_shifts(spec, interval)
        _, trace = iterate_min(spec, shifts, interval, tol=1e-9)
        budget = energy_budget(spec, shifts, interval)
        assert budget == trace.energy_budget
        worst = max(max(pair) for pair in trace.energies)
        assert worst <= 10.0 * budget

    def test_retry_with_doubled_shift_succeeds(self):
        # interior and boundary data both decay at slope -2, so the honest
        # shift needs k > 2; a manual k = 1.2 breaks monotonicity once and
        # the automatic doubling to 2.4 heals it
        mesh, spec = spec_with("1 - 2*u1", "1 - 2*u2", g1="-2*u1", g2="-2*u2")
        sub = make_pair(mesh, np.zeros(17), np.zeros(17))
        sup = make_pair(mesh, np.ones(17), np.ones(17))
        interval = bracket(spec, sub, sup)
        shifts = ShiftConstants((0.0, 0.0), (0.0, 0.0), 1.2)
        limit, trace = iterate_min(spec, shifts, interval, tol=1e-10)
        assert trace.retried
        assert trace.converged
        assert trace.k_used == pytest.approx(2.4)
        assert verify_sub(spec, limit, 1e-8).passed
        assert verify_super(spec, limit, 1e-8).passed

    def test_unfixable_shift_raises(self):
        mesh, spec = spec_with("1 - 2*u1", "1 - 2*u2", g1="-2*u1", g2="-2*u2")
        sub = make_pair(mesh, np.zeros(17), np.zeros(17))
        sup = make_pair(mesh, np.ones(17), np.ones(17))
        interval = bracket(spec, sub, sup)
        shifts = ShiftConstants((0.0, 0.0), (0.0, 0.0), 0.5)
        with pytest.raises(InvariantViolation, match="monotonicity"):
            iterate_min(spec, shifts, interval, tol=1e-10)
