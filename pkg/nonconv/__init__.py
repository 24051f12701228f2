"""
nonconv - simulation and verification laboratory for nonconventional sums.

Computes Xi(t) = sum_{n<=t} (F(X(n), X(2n), ..., X(ln)) - Fbar) over mixing
processes, the limiting covariance of the Gaussian limit, and checks the
almost sure CLT, the LIL normalization and the occupation (arcsine) law.
"""

__version__ = "1.0.0"
