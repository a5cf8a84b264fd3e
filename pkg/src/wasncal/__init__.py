"""Acoustic sensor network toolkit.

Simulates shoebox rooms and microphone-array recordings, extracts
coherence-based diffuseness features, trains small neural classifiers for
source-to-node distance estimation, and calibrates network geometry from
direction-of-arrival observations with scale recovery from the distance
estimates.
"""

__version__ = "0.1.0"
