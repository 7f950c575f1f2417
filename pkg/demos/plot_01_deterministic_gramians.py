"""
Empirical Gramians of deterministic systems
===========================================

Perturb each initial coordinate by +-eps, integrate, and integrate the
outer product of the output differences.  For linear systems the result
equals the classical observability Gramian for any eps.
"""

import numpy as np

from obsgram import TimeGrid, build_system, empirical_gramian, linear_observability_gramian
from obsgram.systems import ControlSignal

grid = TimeGrid(t1=10.0, dt=1e-3)

# harmonic oscillator, position-like output
osc = empirical_gramian(build_system("oscillator"), [0.0, 0.0], None, 1e-2, grid)
print("oscillator W =\n", osc.W.round(5))
print("sigma_min = %.4f, nu = %.4f, kappa = %.4f" % (osc.sigma_min, osc.nu, osc.kappa))

# compare with the linear Gramian of A = [[0, -1], [1, 0]], C = [0, 1]
A = np.array([[0.0, -1.0], [1.0, 0.0]])
print("max |W - W_lin| =", np.abs(osc.W - linear_observability_gramian(A, [[0.0, 1.0]], 10.0)).max())

# drop the coupling into x1 and the first state becomes invisible
unobs = empirical_gramian(build_system("oscillator_unobs"), [0.0, 0.0], None, 1e-2, grid)
print("decoupled eigenvalues:", unobs.eigenvalues, "nu =", unobs.nu)

# the noise-affine system without noise needs a control to see x1
na = build_system("noise_affine", {"q": 0.0})
for u in (0.0, 0.1):
    r = empirical_gramian(na, [0.0, 0.0], ControlSignal.constant([u]), 1e-2, grid)
    print(f"u = {u}: lambda_min = {r.sigma_min:.4f}, kappa = {r.kappa:.3f}")
