"""Ordinary <-> angular frequency conversion.

Every user-facing frequency is in Hz; physics code works in rad/s. All
conversions go through these two helpers so a missing 2*pi shows up in one
place only.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def to_angular(freq_hz):
    return TWO_PI * freq_hz


def to_hz(omega):
    return omega / TWO_PI
