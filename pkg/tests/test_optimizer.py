import math

import numpy as np
import pytest

from graphfl.optimizer import (
    ScheduleBounds,
    ScheduleError,
    compute_T_opt,
    densify,
    fixed_plan,
    lower_bound_latency,
    plan_objective,
    solve_device,
    solve_round_plan,
    sparsify,
)
from graphfl.sysmodel import DeviceSpec, payload_size, round_costs
from graphfl.verify import grid_oracle, random_schedule_instance

BOUNDS = ScheduleBounds()


def dev(**kw):
    base = dict(rho=2e4, f=2e9, p_tran=0.8, xi_db=1.5, b=1e6)
    base.update(kw)
    return DeviceSpec(**base)


def test_bounds_validation():
    with pytest.raises(ScheduleError):
        ScheduleBounds(mu1=0.5, mu2=0.4, mu3=0.2)
    with pytest.raises(ScheduleError):
        ScheduleBounds(alpha_min=4, alpha_max=2)
    with pytest.raises(ScheduleError):
        ScheduleBounds(q_min=0.0)
    with pytest.raises(ScheduleError):
        ScheduleBounds(z_min=1.5)


def test_sparsify_examples():
    idx, val = sparsify([3.0, -5.0, 1.0, 0.0], 0.5)
    assert idx.tolist() == [0, 1] and val.tolist() == [3.0, -5.0]
    g = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(densify(*sparsify(g, 1.0), 3), g)


def test_sparsify_ties_prefer_lower_index():
    idx, _ = sparsify([1.0, -1.0, 1.0, 1.0], 0.5)
    assert idx.tolist() == [0, 1]


def test_sparsify_residual_nonincreasing():
    g = np.random.default_rng(0).standard_normal(50)
    res = [np.linalg.norm(densify(*sparsify(g, z), 50) - g) for z in np.linspace(0.02, 1, 50)]
    assert all(b <= a for a, b in zip(res, res[1:]))


def test_T_opt_identical_devices():
    s = dev()
    t = compute_T_opt([s, s, s], [450] * 3, 5000, BOUNDS)
    assert t == lower_bound_latency(s, 450, 5000, BOUNDS)


def test_T_opt_slow_device_sets_deadline():
    fast = dev()
    slow = dev(rho=4e4, f=1e9, b=0.5e6)
    t = compute_T_opt([fast, slow], [450, 450], 5000, BOUNDS)
    expected = round_costs(slow, 1, math.ceil(0.3 * 450), payload_size(5000, 0.1)).tau_total
    assert t == expected


def test_T_opt_monotone_in_q_min():
    specs = [dev(), dev(f=1e9)]
    lo = compute_T_opt(specs, [450, 300], 5000, ScheduleBounds(q_min=0.3))
    hi = compute_T_opt(specs, [450, 300], 5000, ScheduleBounds(q_min=0.6))
    assert hi >= lo


def test_generous_deadline_hits_upper_corner():
    p = solve_device(dev(), 450, 5000, BOUNDS, T=1e3)
    assert (p.alpha, p.q, p.z) == (5, 1.0, 1.0)


def test_slowest_device_gets_lower_corner():
    specs = [dev(), dev(f=1.2e9, rho=4e4), dev(f=3e9)]
    sizes = [450, 450, 450]
    plan = solve_round_plan(specs, sizes, 5000, BOUNDS)
    lows = [lower_bound_latency(s, d, 5000, BOUNDS) for s, d in zip(specs, sizes)]
    p = plan.devices[int(np.argmax(lows))]
    assert p.alpha == 1
    assert p.n_samples == math.ceil(0.3 * 450)
    assert p.payload_bits == payload_size(5000, 0.1)


def test_plan_matches_grid_oracle_k2():
    specs = [dev(), dev(f=1.1e9, rho=3.5e4, xi_db=1.0)]
    sizes = [450, 380]
    plan = solve_round_plan(specs, sizes, 5514, BOUNDS)
    for s, d, p in zip(specs, sizes, plan.devices):
        oracle = grid_oracle(s, d, 5514, BOUNDS, plan.T_opt, -174.0)
        assert p.objective >= oracle - 1e-2


def test_random_instances_vs_oracle():
    rng = np.random.default_rng(123)
    for _ in range(10):
        specs, sizes, b, bounds = random_schedule_instance(rng)
        plan = solve_round_plan(specs, sizes, b, bounds)
        for s, d, p in zip(specs, sizes, plan.devices):
            assert p.objective >= grid_oracle(s, d, b, bounds, plan.T_opt, -174.0) - 1e-2


def test_plan_invariants():
    rng = np.random.default_rng(9)
    specs, sizes, b, bounds = random_schedule_instance(rng, k=6)
    plan = solve_round_plan(specs, sizes, b, bounds)
    for s, d, p in zip(specs, sizes, plan.devices):
        assert bounds.alpha_min <= p.alpha <= bounds.alpha_max and isinstance(p.alpha, int)
        assert bounds.q_min <= p.q <= 1 and bounds.z_min <= p.z <= 1
        assert abs(p.n_samples - p.q * d) <= 1
        c = round_costs(s, p.alpha, p.n_samples, p.payload_bits)
        assert c.tau_total == p.predicted_tau <= plan.T_opt
        assert c.energy == p.predicted_energy <= s.E_max
        assert p.objective == plan_objective(bounds, p.alpha, p.q, p.payload_bits, 32 * b)


def test_synchronization_gap():
    rng = np.random.default_rng(4)
    specs, sizes, b, bounds = random_schedule_instance(rng, k=8)
    plan = solve_round_plan(specs, sizes, b, bounds)
    for s, p in zip(specs, plan.devices):
        saturated = (p.alpha, p.q, p.z) == (bounds.alpha_max, 1.0, 1.0)
        energy_bound = s.E_max - p.predicted_energy < 1e-3 * s.E_max
        if saturated or energy_bound:
            continue
        step = p.n_samples * s.rho / s.f
        assert plan.T_opt - p.predicted_tau <= max(1e-6 * plan.T_opt, step)


def test_larger_deadline_never_hurts():
    s = dev(E_max=0.3)
    prev = -1.0
    for t in np.linspace(0.02, 0.2, 10):
        obj = solve_device(s, 450, 5000, BOUNDS, T=float(t)).objective
        assert obj >= prev
        prev = obj


def test_infeasible_names_constraint():
    with pytest.raises(ScheduleError, match="deadline"):
        solve_device(dev(), 450, 5000, BOUNDS, T=1e-9)
    with pytest.raises(ScheduleError, match="energy"):
        solve_device(dev(E_max=1e-9), 450, 5000, BOUNDS, T=10.0)


def test_fixed_plan_uses_defaults():
    specs = [dev(), dev(f=1e9)]
    plan = fixed_plan(specs, [450, 300], 5000, alpha=3)
    for s, d, p in zip(specs, [450, 300], plan.devices):
        assert (p.alpha, p.q, p.z, p.n_samples, p.payload_bits) == (3, 1.0, 1.0, d, 160000)
        assert p.predicted_tau == round_costs(s, 3, d, 160000).tau_total
    assert plan.T_opt == max(plan.taus)
