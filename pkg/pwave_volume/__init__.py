"""Generalized p-wave scattering volume at threshold under dipolar and van der Waals
interactions."""

__version__ = "0.1.0"
