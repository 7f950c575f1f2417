"""
Sweeping the noise level
========================

Ensembles of stochastic Gramians for increasing diffusion.  More noise
always lowers the median unobservability index, while the median
condition number first improves and then degrades.
"""

from obsgram import EnsembleConfig, sweep
from obsgram.systems import ControlSignal

cfg = EnsembleConfig(
    system="noise_affine", params={"q": 0.1}, x0=(0.0, 1.0), eps=0.1, t1=10.0,
    samples=100, base_seed=31, control=ControlSignal.zero(1),
    sweep_param="q", sweep_values=(0.005, 0.01, 0.02, 0.05, 0.1, 0.2),
)
print(f"{'q':>6} {'median kappa':>13} {'median nu':>11} {'IQR kappa':>20}")
for row in sweep(cfg):
    k, nu = row.summary["kappa"], row.summary["nu"]
    print(f"{row.param_value:6.3f} {k.median:13.3f} {nu.median:11.4f}   [{k.q25:7.2f}, {k.q75:7.2f}]")
