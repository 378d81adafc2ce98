"""Shared fixtures-as-functions for the test suite.

Kept as a plain module (not a conftest) so individual tests can import
exactly what they need and stay readable in isolation.
"""

import numpy as np

from tdompc.ocp import OcpSpec, PlantModel

# Seed for the random-problem corpus used by the solver and acceptance
# tests.  Frozen so every run exercises the identical 100 instances.
CORPUS_SEED = 20240817


def random_problem(rng):
    """Draw a random stabilizable plant with SPD weights, horizon*m <= 12.

    The plant matrix is rescaled to a spectral radius in [0.3, 1.2] so the
    corpus mixes open-loop stable and unstable systems; `B` is generic
    (full rank almost surely), which keeps every draw stabilizable.
    """
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 3))
    horizon = int(rng.integers(1, 5))
    while horizon * m > 12:
        horizon = int(rng.integers(1, 5))
    a = rng.uniform(-1.0, 1.0, (n, n))
    rho = max(abs(np.linalg.eigvals(a)))
    if rho > 0:
        a *= rng.uniform(0.3, 1.2) / rho
    b = rng.uniform(-1.0, 1.0, (n, m))
    mq = rng.uniform(-1.0, 1.0, (n, n))
    q = mq.T @ mq + np.eye(n)
    mr = rng.uniform(-1.0, 1.0, (m, m))
    r = mr.T @ mr + 0.1 * np.eye(m)
    bound = rng.uniform(0.5, 2.0, m)
    spec = OcpSpec(q=q, r=r, horizon=horizon, u_lower=-bound, u_upper=bound)
    return PlantModel(a=a, b=b), spec


def parse_csv(text):
    """Split CSV text into (header list, list of row lists of strings)."""
    lines = [ln for ln in text.strip().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def column(text, name):
    """Float values of one named column from CSV text."""
    header, rows = parse_csv(text)
    idx = header.index(name)
    return [float(row[idx]) for row in rows]
