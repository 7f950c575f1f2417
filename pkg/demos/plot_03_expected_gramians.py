"""
Expected Gramians of linear stochastic systems
==============================================

For additive noise (Ornstein-Uhlenbeck) and multiplicative noise
(bilinear, Ito) the mean of the stochastic empirical Gramian has a closed
form.  Here each is checked against a Monte Carlo ensemble.
"""

import numpy as np

from obsgram import EnsembleConfig, bs_expected_gramian, linear_to_model, ou_expected_gramian, run_ensemble
from obsgram.systems import LinearAdditiveSpec, LinearMultiplicativeSpec

ou = LinearAdditiveSpec(
    A=np.array([[0.0, 1.0], [-1.0, -0.5]]), C=np.array([[1.0, 0.0]]),
    Omega=0.3 * np.eye(2), mean0=np.zeros(2), cov0=np.zeros((2, 2)),
)
rep = ou_expected_gramian(ou, eps=0.1, t1=5.0)
print("OU: W_O =\n", rep.W_O.round(4))
print("noise adds", round(rep.components["noise_term"], 4), "times I")

mc = run_ensemble(EnsembleConfig(linear_to_model(ou), (0.0, 0.0), 0.1, 5.0, samples=500, base_seed=1))
z = (mc.summary.mean_gramian - rep.E_W) / mc.summary.gramian_se
print("Monte Carlo z-scores:", z.round(2).ravel())

# multiplicative noise: only the covariance of the fundamental matrix matters
bs = LinearMultiplicativeSpec(
    A=-np.eye(2), C=np.array([[1.0, 0.0]]), Omega_list=[np.array([[0.0, 0.5], [0.5, 0.0]])],
    mean0=np.zeros(2), second_moment0=np.zeros((2, 2)),
)
rep = bs_expected_gramian(bs, eps=0.5, t1=4.0)
mc = run_ensemble(EnsembleConfig(linear_to_model(bs), (0.0, 0.0), 0.5, 4.0, samples=500, base_seed=2))
z = (mc.summary.mean_gramian - rep.E_W) / mc.summary.gramian_se
print("bilinear E_W =\n", rep.E_W.round(4))
print("Monte Carlo z-scores:", z.round(2).ravel())
