"""
Experiments that verify the landslide identities and limits, and their command line.
"""
