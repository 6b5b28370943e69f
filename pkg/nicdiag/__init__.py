"""
NIC-pair failure diagnosis: feature fusion, state classification and random-walk ranking.
"""

__all__ = []
