"""Possibilistic support-point filtering."""
