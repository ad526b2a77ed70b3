"""Environments: discrete and continuous grids, symbolic regression, structure learning."""
