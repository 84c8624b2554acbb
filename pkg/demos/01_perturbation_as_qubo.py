"""
Vector perturbation as a QUBO
=============================

Build one 2x2 16-QAM precoding instance, write it as a QUBO, solve it three
ways and check they agree.
"""

import numpy as np

from vpqubo import mimo
from vpqubo.preprocess import PreprocessConfig, preprocess
from vpqubo.qubo import build_qubo, decode_bits
from vpqubo.solvers import SolverRequest, brute_force_argmin, solve_sa, solve_sphere_encoder

rng = np.random.default_rng(0)
cons = mimo.constellation("16QAM")
ch = mimo.generate_channel(2, 2, rng)
u, bits = cons.random_symbols(2, rng)
print("symbols", u, "tau", cons.tau)

# one integer per real dimension, t + 1 bits each
p = build_qubo(ch, cons, u, t=1)
print("QUBO variables:", p.n_vars, " offset (ZF power):", round(p.offset, 4))

# exhaustive search over 2**8 bit strings
q = brute_force_argmin(p)
v = decode_bits(q, p.var_map)
print("brute force  v =", v, " P_t =", round(mimo.vpp_objective(ch, cons, u, v), 4))

# the lattice view needs no QUBO at all
sph = solve_sphere_encoder(ch, cons, u, t=1)
print("sphere       v =", sph.best_v, " P_t =", round(sph.best_objective, 4))

# annealing on the conditioned problem
pre, report = preprocess(p, PreprocessConfig(t_high=6, t_low=-2))
print("conditioning:", report.to_dict())
sa = solve_sa(pre, SolverRequest(num_reads=200, anneal_sweeps=50, seed=0))
print("annealer     v =", decode_bits(sa.best_bits, p.var_map))

# perturbing costs the receiver nothing: the modulo undoes it
y, p_t = mimo.transmit(ch, cons, u, sph.best_v, np.inf)
_, rx = mimo.receive_decode(y, p_t, cons)
print("noiseless decode ok:", np.array_equal(rx, bits))
