"""The fermionic sector engine against brute-force exact diagonalization.

For N <= 8 the full 2^(N+1) spin Hamiltonian fits in memory, so every
engine result can be checked against a propagation that knows nothing about
Jordan-Wigner fermions, momentum grids or f-tables.
"""

import numpy as np

from qubitbath import EvolutionPlan, ModelParams, bloch_and_purity, coherent_coefficients, evolve_coherent, evolve_ground
from qubitbath import oracle
from qubitbath.observables import qubit_rho, w_factors
from qubitbath.spinbath import bath_ground_state

N = 8
p = ModelParams(N, J=1.3, h=-0.4, omega=0.7)
run = evolve_coherent(p, coherent_coefficients(N, 1.6), EvolutionPlan(20.0, output_dt=0.05))
tr = bloch_and_purity(run)
psi0 = oracle.product_state(1, 0, oracle.bath_coherent_state(N, 1.6))
ref = oracle.bloch_from_rho(oracle.reduced_qubit(oracle.exact_propagate(p, psi0, tr.gt)))
for name, a, b in zip(("sx", "sy", "sz", "purity"), (tr.sx, tr.sy, tr.sz, tr.purity), ref):
    print(f"coherent bath, {name:6s}: max deviation {np.max(np.abs(a - b)):.1e}")
print(f"engine norm drift {run.max_drift:.1e}")

p = ModelParams(N, J=-1.5, h=1.0, omega=0.3)
W = w_factors(evolve_ground(p, bath_ground_state(N, p.J, p.h), plan=EvolutionPlan(20.0, output_dt=0.05)))
_, bath = oracle.bath_ground_vector(N, p.J, p.h)
rho = oracle.reduced_qubit(oracle.exact_propagate(p, oracle.product_state(0.6, 0.8j, bath), W.gt))
print(f"ground-state bath, qubit density matrix: max deviation {np.max(np.abs(qubit_rho(W, 0.6, 0.8j) - rho)):.1e}")
