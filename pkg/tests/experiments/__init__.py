"""
Test suite for the experiments package.
"""
