"""
Clique embedding on a Chimera grid
==================================

Lay a fully connected problem onto Chimera, look at the chains, and see how
chain strength changes the share of broken chains.
"""

import numpy as np

from vpqubo import mimo
from vpqubo.hardware import (
    IceModel,
    chain_strength_for,
    chimera,
    clique_embed,
    parallel_capacity,
    solve_on_hardware_model,
    tile_embeddings,
    validate_embedding,
)
from vpqubo.preprocess import preprocess
from vpqubo.qubo import build_qubo, qubo_to_ising
from vpqubo.solvers import SolverRequest

g = chimera(16)
print("C16:", g.n_qubits, "qubits")

e = clique_embed(28, g)
print("K28 chains:", len(e.chains), "of length", len(e.chains[0]), "->", e.n_physical, "qubits")
print("valid:", validate_embedding(e, g) == [])
print("copies by qubit count:", parallel_capacity(28, g), " placed tiles:", len(tile_embeddings(28, g)))

# a 2x2 16-QAM instance needs 8 logical spins, i.e. a C2 block
rng = np.random.default_rng(0)
cons = mimo.constellation("16QAM")
ch = mimo.generate_channel(2, 2, rng)
u, _ = cons.random_symbols(2, rng)
ising = qubo_to_ising(preprocess(build_qubo(ch, cons, u))[0])

small = chimera(2)
for mult in (0.2, 0.5, 1.2, 2.0):
    emb = clique_embed(ising.n_vars, small, chain_strength_for(ising, mult))
    res = solve_on_hardware_model(ising, emb, IceModel(0.01, 0.01), SolverRequest(200, 100, seed=1))
    print(f"|J_F| = {mult:.1f} J_m   broken chains {res.broken_chain_fraction:.3f}   best energy {res.best_energy:.4f}")
