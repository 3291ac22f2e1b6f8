"""
Exact combinatorics, moment profiles and expansions, configuration and output.
"""
