"""Capacity-achieving input geometry for discrete and classical-quantum channels."""
