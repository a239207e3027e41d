"""Numerical L_p projection and moment bodies."""
