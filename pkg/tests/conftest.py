"""Shared fixtures: tiny deterministic corpora and mask generators."""
import numpy as np
import pytest

from segalloc import corpus


def random_mask(rng: np.random.Generator, height: int = 16, width: int = 16,
                p: float | None = None) -> np.ndarray:
    """Bernoulli mask; density drawn per call unless given."""
    if p is None:
        p = float(rng.uniform(0.1, 0.9))
    return rng.random((height, width)) < p


def random_blob(rng: np.random.Generator, height: int = 24, width: int = 24
                ) -> np.ndarray:
    """Nonempty connected-ish blob: a random ellipse, never degenerate."""
    cy = rng.uniform(height * 0.25, height * 0.75)
    cx = rng.uniform(width * 0.25, width * 0.75)
    a = rng.uniform(2.0, width * 0.4)
    b = rng.uniform(2.0, height * 0.4)
    theta = rng.uniform(0.0, np.pi)
    m = corpus.ellipse_mask(height, width, cy, cx, a, b, theta)
    if not m.any():
        m[int(cy), int(cx)] = True
    return m


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A 12-image synthetic dataset shared by the cheaper integration tests."""
    root = tmp_path_factory.mktemp("corpus") / "small"
    return corpus.synth_corpus(root, n=12, seed=42)
