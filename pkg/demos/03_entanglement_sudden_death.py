"""Two qubits, each with its own bath, start in a Bell state.

The two-qubit state follows from the single-qubit W factors. The concurrence
never exceeds |r|^2, equals it in the polarized phase, and in the critical
phase hits zero at a finite time (sudden death) before reviving.
"""

import math

import numpy as np

from qubitbath import EvolutionPlan, ModelParams, evolve_ground, ground_state
from qubitbath.observables import concurrence, esd_time, first_min, two_qubit_rho, w_factors, wootters_concurrence

N, h = 10, 10.0
s = 1 / math.sqrt(2)
for jh in (-0.5, -1.5, -4.0):
    p = ModelParams(N, J=jh * h, h=h)
    W = w_factors(evolve_ground(p, ground_state(N, 1 / abs(jh)), plan=EvolutionPlan(3.0, output_dt=1e-3)))
    r2 = np.abs(W.r) ** 2
    c_raw = concurrence(W, s, s, clamp=False)
    c = np.maximum(c_raw, 0)
    t_esd = esd_time(W.gt, c_raw)
    t_min = first_min(W.gt, r2)
    print(f"J/h = {jh}: max(C - |r|^2) = {np.max(c - r2):.1e}")
    if t_esd is None:
        print(f"  no sudden death; max |C - |r|^2| = {np.max(np.abs(c - r2)):.1e}")
    else:
        i = np.argmax(c == 0)
        j = i + np.argmax(c[i:] > 0)
        print(f"  C = 0 first at gt = {t_esd:.4f}, stays dead until gt = {W.gt[j]:.3f}, then revives to {c[j:].max():.3f}")
        print(f"  first minimum of |r|^2 at gt = {t_min[0]:.4f}: sudden death comes first")

# closed-form concurrence against the general Wootters formula at one instant
rho = two_qubit_rho(W, s, s)[500]
print(f"\nclosed form {concurrence(W, s, s)[500]:.12f}  vs  Wootters {wootters_concurrence(rho):.12f}")
