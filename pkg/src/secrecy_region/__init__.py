"""Secrecy-rate region computation for multicast with artificial noise."""
