"""
DcaseNet: one network jointly trained for acoustic scene classification,
audio tagging and sound event detection.
"""

__version__ = "0.1.0"
