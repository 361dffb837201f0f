"""Equalizing device latencies with per-device epochs, data fraction and sparsity."""

import numpy as np

from graphfl.engine import simulate_costs
from graphfl.learner import ModelConfig, flops_per_sample, num_params
from graphfl.optimizer import ScheduleBounds
from graphfl.sysmodel import SpecRanges, heterogeneity_indicator, sample_device_specs

model = ModelConfig((32, 128, 10))
B = num_params(model)
specs = sample_device_specs(np.random.default_rng(1), 20, SpecRanges(rho=(2e4, 3e4), f=(1.5e9, 3e9)))
sizes = [450] * 20
print(f"B = {B} parameters, H = {heterogeneity_indicator(specs):.3f}")

phi = flops_per_sample(model)
fixed = simulate_costs(specs, sizes, B, 200, optimize=False, alpha=3, phi=phi)
opt = simulate_costs(specs, sizes, B, 200, optimize=True, bounds=ScheduleBounds(), phi=phi)

for name, r in (("fixed", fixed), ("optimized", opt)):
    taus = r["plan"].taus
    print(f"{name:>9}: T={taus.max() * 1e3:.3f} ms  spread={np.ptp(taus) * 1e6:.2f} us  "
          f"I5={r['I5']:.3g}  I6={r['I6']:.4f}  I7={r['I7']:.6f}")

print("desync cut: %.2f%%" % (100 * (1 - opt["I7"] / fixed["I7"])))
print("latency cut: %.2f%%" % (100 * (1 - opt["I6"] / fixed["I6"])))

# a few per-device choices
for i in np.argsort(opt["plan"].taus)[:3]:
    p = opt["plan"].devices[i]
    print(f"device {i:2d}: alpha={p.alpha} q={p.q:.3f} z={p.z:.3f} tau={p.predicted_tau * 1e3:.4f} ms")
