"""
A checkable lower bound for weak observability
==============================================

When the output depends on the initial state in a strongly nonlinear
way, a small Gramian eigenvalue can be an artefact of finite eps.  The
bound below combines the Jacobian of the output map with a finite
difference estimate of its third derivative; sigma_min above the bound
certifies local observability.
"""

import numpy as np

from obsgram import TimeGrid, build_system, weak_observability_bound
from obsgram.systems import ControlSignal

grid = TimeGrid(10.0, 1e-3)
uni = build_system("unicycle_det")

# a parked unicycle reveals nothing about its heading or speed
rest = weak_observability_bound(uni, np.zeros(4), ControlSignal.zero(2), 1e-2, grid)
# a constant acceleration makes the state visible
moving = weak_observability_bound(uni, np.zeros(4), ControlSignal.constant([0.0, 1.0]), 1e-2, grid)

for label, rep in (("u = 0", rest), ("u2 = 1", moving)):
    print(f"{label:7s} sigma_min={rep.sigma_min:.4f} bound={rep.bound_value:.3g} "
          f"Gamma_sup={rep.gamma_sup:.3g} weakly observable={rep.weakly_observable}")

# linear systems have no third derivative, so the bound collapses
osc = weak_observability_bound(build_system("oscillator"), [0.0, 0.0], None, 1e-2, grid)
print("oscillator bound:", osc.bound_value)
