"""Meshless RBF approximation and Helmholtz-Hodge decomposition of vector fields."""
