"""
Gramian rate versus Fisher information
======================================

With Gaussian measurement noise of covariance R, the Fisher information
of one sample is bounded by the Gramian integrand scaled by the largest
eigenvalue of R^-1, and its conditioning is bracketed accordingly.
"""

import numpy as np

from obsgram import TimeGrid, fisher_condition_bounds, fisher_upper_bound, jacobian_estimate, linear_to_model, perturbed_outputs
from obsgram.systems import LinearAdditiveSpec

rng = np.random.default_rng(3)
A = np.array([[-0.5, 1.0], [-1.0, -0.2]])
C = rng.normal(size=(2, 2))
R = np.array([[1.0, 0.3], [0.3, 0.2]])

spec = LinearAdditiveSpec(A, C, np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)))
grid = TimeGrid(2.0, 1e-3)
J = jacobian_estimate(perturbed_outputs(linear_to_model(spec), np.zeros(2), None, 0.1, grid))

for t in (0.5, 1.0, 2.0):
    Jt = J[int(round(t / grid.dt))]
    dW = Jt.T @ Jt
    F = Jt.T @ np.linalg.solve(R, Jt)
    gap = np.linalg.eigvalsh(fisher_upper_bound(R, dW) - F)[0]
    lo, hi = fisher_condition_bounds(R, dW)
    print(f"t={t}: min eig(bound - F) = {gap:.2e}, kappa(F) = {np.linalg.cond(F):.3f} in [{lo:.3f}, {hi:.3f}]")
