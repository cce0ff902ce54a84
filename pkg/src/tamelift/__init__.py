"""Nilpotent orbit representatives and tame lifting conditions over Artinian rings."""
