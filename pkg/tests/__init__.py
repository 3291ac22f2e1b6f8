"""
Test package for ols-moment-lab.
"""
