"""Finite element solver for the magnetized Euler-Poisson system."""
