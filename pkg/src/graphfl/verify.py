"""Brute-force oracles and the equivalence suites run by ``graphfl verify``.

Each oracle shares no code path with what it checks.
"""

from __future__ import annotations

import math

import numpy as np

from .filtering import FilterSpec, aggregate, build_filter_matrix, fedavg
from .graph import connected_components, eigendecompose, laplacian
from .learner import ModelConfig, init_weights, loss_and_gradient
from .optimizer import ScheduleBounds, plan_objective, solve_round_plan
from .sysmodel import DeviceSpec, dbm_per_hz_to_watts

__all__ = [
    "charpoly_eigenvalues",
    "random_graph",
    "component_mean_oracle",
    "grid_oracle",
    "random_schedule_instance",
    "finite_difference_check",
    "SUITES",
    "run_all",
]


def charpoly_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix with K <= 3 from its characteristic polynomial."""
    m = np.asarray(m, dtype=float)
    k = m.shape[0]
    if k == 1:
        coeffs = [1.0, -m[0, 0]]
    elif k == 2:
        coeffs = [1.0, -np.trace(m), m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]]
    elif k == 3:
        minors = sum(
            m[i, i] * m[j, j] - m[i, j] * m[j, i] for i, j in ((0, 1), (0, 2), (1, 2))
        )
        det = (
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )
        coeffs = [1.0, -np.trace(m), minors, -det]
    else:
        raise ValueError("charpoly oracle only for K <= 3")
    return np.sort(np.roots(coeffs).real)


def random_graph(rng: np.random.Generator, k: int, p: float) -> np.ndarray:
    a = np.triu((rng.random((k, k)) < p).astype(float), 1)
    return a + a.T


def component_mean_oracle(adjacency, kappa, grads) -> np.ndarray:
    """Each row replaced by ``sum_{j in C} kappa_j g_j / |C|`` over its component."""
    grads = np.asarray(grads, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    out = np.empty_like(grads)
    for comp in connected_components(np.asarray(adjacency)):
        idx = sorted(comp)
        total = np.zeros(grads.shape[1])
        for j in idx:
            total += kappa[j] * grads[j]
        out[idx] = total / len(idx)
    return out


def grid_oracle(spec: DeviceSpec, data_size: int, num_params: int, bounds: ScheduleBounds,
                T: float, n0: float, step: float = 1e-3) -> float:
    """Best objective over integer alpha and a ``step`` grid in q and z.

    Costs are written out from the formulas, independently of sysmodel.
    """
    rate = spec.b * math.log2(1.0 + 10 ** (spec.xi_db / 10) * spec.p_tran
                              / (dbm_per_hz_to_watts(n0) * spec.b))
    q = np.unique(np.append(np.arange(bounds.q_min, 1.0, step), 1.0))
    z = np.unique(np.append(np.arange(bounds.z_min, 1.0, step), 1.0))
    n = np.ceil(q * data_size - 1e-9)
    dense = 32.0 * num_params
    chi = np.where(z >= 1.0, dense, np.minimum(64.0 * np.ceil(z * num_params - 1e-9), dense))
    best = -np.inf
    for alpha in range(bounds.alpha_min, bounds.alpha_max + 1):
        t_comp = alpha * n * spec.rho / spec.f
        e_comp = spec.varsigma * alpha * n * spec.rho * spec.f ** 2
        t_tran = chi / rate
        tau = t_comp[:, None] + t_tran[None, :]
        energy = e_comp[:, None] + spec.p_tran * t_tran[None, :]
        ok = (tau <= T) & (energy <= spec.E_max)
        if not ok.any():
            continue
        obj = (bounds.mu1 * alpha / bounds.alpha_max + bounds.mu2 * q[:, None]
               + bounds.mu3 * chi[None, :] / dense)
        best = max(best, float(obj[ok].max()))
    return best


def random_schedule_instance(rng: np.random.Generator, k: int = 2):
    specs = [
        DeviceSpec(
            rho=float(rng.uniform(1e4, 5e4)),
            f=float(rng.uniform(1e9, 3.5e9)),
            p_tran=float(rng.uniform(0.5, 1.0)),
            xi_db=float(rng.uniform(1.0, 2.0)),
            b=20e6 / k,
            E_max=float(rng.uniform(0.02, 0.5)),
        )
        for _ in range(k)
    ]
    sizes = [int(rng.integers(50, 200)) for _ in range(k)]
    num_params = int(rng.integers(500, 5000))
    mus = rng.dirichlet(np.ones(3))
    bounds = ScheduleBounds(
        alpha_min=1, alpha_max=5,
        q_min=float(rng.uniform(0.1, 0.5)), z_min=float(rng.uniform(0.05, 0.3)),
        mu1=float(mus[0]), mu2=float(mus[1]), mu3=float(1.0 - mus[0] - mus[1]),
    )
    return specs, sizes, num_params, bounds


def finite_difference_check(rng: np.random.Generator, eps: float = 1e-5, coords: int = 20) -> float:
    """Largest relative error between analytic and central-difference gradients."""
    cfg = ModelConfig((6, 8, 4), seed=int(rng.integers(1 << 30)))
    w = init_weights(cfg, rng) + 0.1 * rng.standard_normal(
        sum((a + 1) * b for a, b in cfg.shapes))
    x = rng.standard_normal((7, 6))
    y = rng.integers(0, 4, size=7)
    _, grad = loss_and_gradient(cfg, w, x, y)
    worst = 0.0
    for i in rng.choice(w.size, size=min(coords, w.size), replace=False):
        wp, wm = w.copy(), w.copy()
        wp[i] += eps
        wm[i] -= eps
        fd = (loss_and_gradient(cfg, wp, x, y)[0] - loss_and_gradient(cfg, wm, x, y)[0]) / (2 * eps)
        worst = max(worst, abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-6))
    return worst


# -- suites ---------------------------------------------------------------


def _suite_spectrum(rng):
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 4))
        lap = laplacian(random_graph(rng, k, 0.6))
        worst = max(worst, np.abs(eigendecompose(lap).eigenvalues - charpoly_eigenvalues(lap)).max())
    return worst < 1e-8, f"max |jacobi - charpoly| = {worst:.2e}"


def _suite_fedavg_limit(rng):
    worst = 0.0
    for _ in range(10):
        k = int(rng.integers(3, 21))
        adj = random_graph(rng, k, 0.5)
        while len(connected_components(adj)) > 1:
            adj = random_graph(rng, k, 0.5)
        sizes = rng.integers(10, 100, size=k)
        w = sizes / sizes.sum()
        g = rng.standard_normal((k, 17))
        h = build_filter_matrix(eigendecompose(laplacian(adj)), FilterSpec(1e12))
        got = aggregate(h, k * w, g)
        worst = max(worst, np.abs(got - fedavg(w, g)).max())
    return worst < 1e-6, f"max |G_hat - fedavg| = {worst:.2e}"


def _suite_components(rng):
    worst = 0.0
    for _ in range(10):
        k = int(rng.integers(2, 16))
        adj = random_graph(rng, k, 0.25)
        kappa = rng.uniform(0.5, 1.5, size=k)
        kappa *= k / kappa.sum()
        g = rng.standard_normal((k, 5))
        h = build_filter_matrix(eigendecompose(laplacian(adj)), FilterSpec(1e12))
        worst = max(worst, np.abs(aggregate(h, kappa, g) - component_mean_oracle(adj, kappa, g)).max())
    return worst < 1e-6, f"max |G_hat - component oracle| = {worst:.2e}"


def _suite_scheduler(rng, instances: int = 50):
    worst = -np.inf
    for _ in range(instances):
        specs, sizes, b, bounds = random_schedule_instance(rng)
        try:
            plan = solve_round_plan(specs, sizes, b, bounds)
        except ValueError:
            continue
        for s, d, p in zip(specs, sizes, plan.devices):
            oracle = grid_oracle(s, d, b, bounds, plan.T_opt, -174.0)
            own = plan_objective(bounds, p.alpha, p.q, p.payload_bits, 32 * b)
            worst = max(worst, oracle - own)
    return worst <= 1e-2, f"max (grid - solver) objective = {worst:.2e}"


def _suite_gradients(rng):
    worst = max(finite_difference_check(rng) for _ in range(5))
    return worst < 1e-4, f"max relative FD error = {worst:.2e}"


SUITES = {
    "spectrum-vs-charpoly": _suite_spectrum,
    "fedavg-limit": _suite_fedavg_limit,
    "component-clustering": _suite_components,
    "scheduler-vs-grid": _suite_scheduler,
    "gradient-vs-fd": _suite_gradients,
}


def run_all(seed: int = 0, echo=print) -> bool:
    ok_all = True
    for name, suite in SUITES.items():
        ok, detail = suite(np.random.default_rng([seed, len(name)]))
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok_all
