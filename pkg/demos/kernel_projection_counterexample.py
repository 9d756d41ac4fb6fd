"""
A channel where the gradient is blind to a kernel direction
===========================================================

A 9-input, 8-output channel is tuned so that the divergence vector at the
optimum is orthogonal to a direction in the kernel of the channel. Moving
along that direction changes the input but not the first-order information,
so any decay bound written purely in terms of the kernel projection fails.
"""

import numpy as np

from caidgeo.certify import appendix_b_counterexample

rep = appendix_b_counterexample()
print(f"epsilon {rep.epsilon:.12f}")
print(f"capacity {rep.capacity:.12f}  (closed form error {rep.capacity_error:.1e})")
print(f"kernel dimension {rep.kernel_dim}, U in kernel: {rep.u_in_kernel}, U.D = {rep.u_dot_gradient:.1e}")
for x, P, v0, nv, vg in rep.refuting_inputs:
    print(f"point mass on input {x}: |v0| = {nv:.4f}, v0.grad = {vg:.1e}, v0 = {np.round(v0, 4)}")
