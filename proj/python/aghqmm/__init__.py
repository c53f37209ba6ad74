"""Adaptive Gauss-Hermite quadrature for two-level generalized linear mixed models."""

try:
    from ._aghqmm import adapted_rule, fit, gh_rule, marginal_nll, simulate
except ImportError:  # running against an in-tree build without an installed wheel
    from _aghqmm import adapted_rule, fit, gh_rule, marginal_nll, simulate

__all__ = ["adapted_rule", "fit", "gh_rule", "marginal_nll", "simulate"]
