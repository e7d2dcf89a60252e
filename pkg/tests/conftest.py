import numpy as np
import pytest
from hypothesis import settings

from doclab.data import LabeledDataset
from doclab.doc import DocHistogram

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_doc(masses, e_min=0.0, e_min_estimate=None, scale=10**6):
    """Histogram whose bin masses approximate ``masses`` (integer counts)."""
    counts = np.rint(np.asarray(masses, dtype=float) * scale).astype(np.int64)
    if e_min_estimate is None:
        nz = np.flatnonzero(counts)
        e_min_estimate = nz[0] / counts.size if nz.size else 0.0
    return DocHistogram(counts, e_min_estimate, e_min, "analytic")


@pytest.fixture
def line_data():
    # 1-D points; with weights [[1], [-1]] the net predicts 1 exactly for x < 0
    return LabeledDataset(np.array([[-2.0], [-1.0], [1.0], [2.0]]), np.array([1, 0, 0, 0]))
