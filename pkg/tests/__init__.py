"""
Unit tests for the landslide flow package.
"""
