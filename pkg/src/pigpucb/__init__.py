"""Partitioned GP-UCB for bandit optimisation in Matérn RKHSs."""
