"""Independent reference detector: naive array transcription, no streaming.

Deliberately written without importing the package so it can serve as an
oracle for the streaming implementation.
"""

import math


def ref_detect(timestamps, r=1.0 / 300.0, omega=200, delta=2.0):
    """Return the list of flagged indices for an announcement timestamp list."""
    n = len(timestamps)
    a = 2.0 / (1.0 + omega)
    intensity = [0.0] * n
    mean = [0.0] * n
    var = [0.0] * n
    flags = []
    for t in range(1, n):
        gap = timestamps[t] - timestamps[t - 1]
        intensity[t] = 1.0 + 2.0 ** (-r * gap) * intensity[t - 1]
        mean[t] = a * intensity[t] + (1.0 - a) * mean[t - 1]
        var[t] = (1.0 - a) * (var[t - 1] + a * (intensity[t] - mean[t - 1]) ** 2)
        if intensity[t] >= mean[t] + delta * math.sqrt(var[t]):
            flags.append(t)
    return flags


def ref_detect_values(values, omega=200, delta=2.0):
    """Same band criterion applied directly to a plain value series."""
    n = len(values)
    a = 2.0 / (1.0 + omega)
    mean = [0.0] * n
    var = [0.0] * n
    flags = []
    for t in range(1, n):
        y = float(values[t])
        mean[t] = a * y + (1.0 - a) * mean[t - 1]
        var[t] = (1.0 - a) * (var[t - 1] + a * (y - mean[t - 1]) ** 2)
        if y >= mean[t] + delta * math.sqrt(var[t]):
            flags.append(t)
    return flags
