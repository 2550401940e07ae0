"""Masked two-channel decoupling for incomplete multi-view weak multi-label learning."""

__version__ = "0.1.0"
