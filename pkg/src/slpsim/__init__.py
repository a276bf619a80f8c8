"""Fake-traffic source-location privacy for sensor networks under a global
eavesdropper running Anderson-Darling exponentiality tests."""

__version__ = "0.1.0"
