"""
Checking the beam discretisation against known answers
=======================================================

Before anything rotates we look at the clamped-free beam by itself: a
static load, the first bending modes and the smallest eigenvalue of the
rotating stiffness form, which decides which spin rates are admissible.
"""
import numpy as np

from diskbeam import PhysicalParams, assemble, beam_modes, coercivity_min_eig, static_solve

ops = assemble(PhysicalParams(), 64)

# Unit uniform load: the tip moves by 1/8 and turns by 1/6.
sol = static_solve(ops, 1.0)
print(f"tip deflection {sol.tip_deflection:.12f}   tip slope {sol.tip_slope:.12f}")

# Modal eigenvalues approach beta_k^4 with beta_k the roots of 1 + cos(b) cosh(b) = 0.
beta = np.array([1.8751040687119611, 4.6940911329741745, 7.8547574382376126])
for n in (4, 8, 16, 32):
    mu = beam_modes(assemble(PhysicalParams(), n), 3)
    print(n, np.abs(mu / beta ** 4 - 1))

# Spinning at varpi lowers the stiffness form by varpi^2 (rho = EI = 1),
# so it stays coercive while varpi^2 is below the first modal eigenvalue.
for varpi in (0.0, 1.0, 2.0, 2.9, 3.5, 3.6):
    print(f"varpi={varpi:3.1f}  min eigenvalue {coercivity_min_eig(ops, PhysicalParams(varpi=varpi)):9.4f}")
