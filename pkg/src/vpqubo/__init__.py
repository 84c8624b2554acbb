"""Vector perturbation precoding via QUBO reduction and annealing surrogates."""
