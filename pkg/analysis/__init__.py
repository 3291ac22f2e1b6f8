"""
Regression designs, error laws, OLS functionals and convergence-rate analysis.
"""
