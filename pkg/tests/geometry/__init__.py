"""
Test suite for the geometry package.
"""
