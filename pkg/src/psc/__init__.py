"""Predictive subspace clustering."""
