"""
Noise can make a system observable
==================================

Two decoupled decaying states, only the first one measured.  Without
noise the second state is invisible.  If the second state scales the
noise entering the first, the expected Gramian has full rank.
"""

import numpy as np

from obsgram import observability_expectation, stochastic_observability_test
from obsgram.linalg import rank_with_tolerance
from obsgram.systems import LinearMultiplicativeSpec

A = -np.eye(2)
C = np.array([[1.0, 0.0]])
zero = np.zeros((2, 2))

quiet = LinearMultiplicativeSpec(A, C, [zero], np.zeros(2), zero)
coupled = LinearMultiplicativeSpec(A, C, [np.array([[0.0, 1.0], [0.0, 0.0]])], np.zeros(2), zero)

for name, spec in (("no noise", quiet), ("x2 drives noise", coupled)):
    for eps in (0.1, 1.0, 10.0):
        out = stochastic_observability_test(spec, t1=5.0, eps=eps)
        print(f"{name:16s} eps={eps:<5} observable={out['observable']} rank={out['rank']} beta={out['beta']}")
    # independent route: moment ODE for the fundamental matrix, no Kronecker products
    print("  moment-ODE rank:", rank_with_tolerance(observability_expectation(spec, 5.0)))
