"""Uniform, interpolation-error and pruning-guided refinement on a fitted 2D INR.

A relu network is fitted to sin(1 / (1/50 + |x|)), which oscillates quickly
near the origin and is smooth elsewhere.
A short fit keeps this script under a minute, but its error is spread over the
whole square, so pruning ends up refining almost everywhere. Pass --full to use
the benchmark fit (about three minutes), where pruning concentrates the mesh at
the origin and beats uniform refinement at equal DOFs.
"""
import sys

from inrmesh import RunConfig, run_campaign
from inrmesh.metrics import format_report
from inrmesh.trainer import BENCHMARKS, FitSpec, fit

if "--full" in sys.argv:
    spec = BENCHMARKS["corner_osc"]
else:
    spec = FitSpec("corner_osc", epochs=2000, learning_rate=1e-2, detail_fraction=0.5)
net, holdout = fit(spec)
print(f"fitted {net.hidden_widths} relu network, held-out RMSE {holdout:.3f}\n")

common = dict(K_max=9, dof_budget=20000, n_total_err=65536)
runs = {
    "uniform": RunConfig(mode="uniform", **common),
    "basic": RunConfig(mode="basic", tau=0.1, **common),
    "pruning": RunConfig(mode="pruning", T=0.1, P=0.09, eps=1e-3, **common),
}
for name, cfg in runs.items():
    campaign = run_campaign(net, cfg)
    print(name)
    print(format_report(campaign.report))
    print()
