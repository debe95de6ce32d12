"""Shared oracles and builders for the test suite.

The oracles here are deliberately naive: a direct O(L^2) DFT sum, a
least-squares sinusoid fit and explicit array rotation. They share no code
with the package.
"""

import math

import numpy as np
import pytest

from vibphase.types import SamplingSpec, Segment, TriAxialRecord


def direct_dft(x):
    """X[k] = sum_n x[n] exp(-j 2 pi k n / L), evaluated term by term."""
    x = np.asarray(x, dtype=complex)
    L = x.size
    out = np.zeros(L, dtype=complex)
    for k in range(L):
        acc = 0j
        for n in range(L):
            acc += x[n] * complex(math.cos(2 * math.pi * k * n / L), -math.sin(2 * math.pi * k * n / L))
        out[k] = acc
    return out


def lstsq_phase(x, f, fs):
    """Phase and amplitude of the best-fit a*cos(2 pi f t + phi) + offset."""
    t = np.arange(len(x)) / fs
    A = np.column_stack([np.cos(2 * np.pi * f * t), np.sin(2 * np.pi * f * t), np.ones_like(t)])
    (c, s, _), *_ = np.linalg.lstsq(A, np.asarray(x, dtype=float), rcond=None)
    # a cos(wt + phi) = a cos(phi) cos(wt) - a sin(phi) sin(wt)
    return math.atan2(-s, c), math.hypot(c, s)


def dtft_phase_on_grid(x, f, fs):
    """Phase of sum x[n] exp(-j 2 pi f n / fs) by explicit summation."""
    n = np.arange(len(x))
    v = np.sum(np.asarray(x) * np.exp(-2j * np.pi * f * n / fs))
    return math.atan2(v.imag, v.real), abs(v)


def angle_diff(a, b):
    """Smallest signed difference between two angles."""
    return (a - b + math.pi) % (2 * math.pi) - math.pi


def cosine_segment(f, fs, L, phases=(0.0, 0.0, 0.0), amps=(1.0, 1.0, 1.0)):
    t = np.arange(L) / fs
    axes = [a * np.cos(2 * np.pi * f * t + p) for a, p in zip(amps, phases)]
    return Segment.from_axes(*axes, sample_rate_hz=fs)


def cosine_record(f, fs, n, phases=(0.0, 0.0, 0.0), delay_s=0.0, noise=0.0, rng=None):
    t = np.arange(n) / fs - delay_s
    axes = [np.cos(2 * np.pi * f * t + p) for p in phases]
    data = np.vstack(axes)
    if noise:
        data = data + rng.normal(0.0, noise, size=data.shape)
    return TriAxialRecord(SamplingSpec(fs, n), data)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
