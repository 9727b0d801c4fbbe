"""Stereo-camera ranging with an overtake-safety signal."""

__version__ = "0.1.0"
