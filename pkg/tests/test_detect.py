import numpy as np
import pytest

from labpipe.analysis import DetectionParams, detect_atoms
from labpipe.ingest import ImageGrid

from synth import gaussian_blob_image


def grid_positions(n=5, spacing=20.0, offset=15.0):
    xs, ys = np.meshgrid(np.arange(n), np.arange(n))
    return np.stack([xs.ravel() * spacing + offset, ys.ravel() * spacing + offset], axis=1)


def test_25_blob_grid_recovered():
    truth = grid_positions()
    img = gaussian_blob_image((120, 120), truth, np.ones(25), sigma=2.5, snr_db=20, seed=1)
    det = detect_atoms(img, DetectionParams(sigma_min=2.0, sigma_max=4.0, threshold=0.05))
    assert len(det) == 25
    # each truth position matched within 1 px
    for t in truth:
        d = np.min(np.hypot(*(det.positions - t).T))
        assert d < 1.0


def test_flat_image_gives_empty_result():
    img = ImageGrid(width=32, height=32, values=np.zeros((32, 32)))
    det = detect_atoms(img)
    assert len(det) == 0


def test_close_blobs_merged():
    pos = np.array([[30.0, 30.0], [30.5, 30.0]])
    img = gaussian_blob_image((64, 64), pos, np.array([1.0, 0.9]), sigma=2.5)
    det = detect_atoms(img, DetectionParams(threshold=0.05))
    assert len(det) == 1


def test_translation_equivariance():
    truth = grid_positions(4, 18.0, 20.0)
    img = gaussian_blob_image((128, 128), truth, np.ones(len(truth)), sigma=2.5)
    params = DetectionParams(threshold=0.05)
    base = detect_atoms(img, params)

    dx, dy = 3, 5
    shifted_vals = np.zeros_like(img.values)
    shifted_vals[dy:, dx:] = img.values[:-dy, :-dx]
    shifted = ImageGrid(width=128, height=128, values=shifted_vals)
    moved = detect_atoms(shifted, params)

    margin = 16
    core = base.positions[
        (base.positions[:, 0] > margin)
        & (base.positions[:, 0] < 128 - margin - dx)
        & (base.positions[:, 1] > margin)
        & (base.positions[:, 1] < 128 - margin - dy)
    ]
    for p in core:
        d = np.min(np.hypot(*(moved.positions - (p + [dx, dy])).T))
        assert d < 1e-9


def test_nonfinite_image_rejected():
    vals = np.zeros((16, 16))
    grid = ImageGrid(width=16, height=16, values=vals)
    object.__setattr__(grid, "values", vals + 0)  # keep valid grid, poke after
    grid.values[0, 0] = np.nan
    with pytest.raises(Exception):
        detect_atoms(grid)


def test_minimum_pairwise_distance_invariant():
    rng = np.random.default_rng(3)
    truth = grid_positions(6, 15.0, 12.0) + rng.normal(0, 0.5, (36, 2))
    img = gaussian_blob_image((112, 112), truth, np.ones(36), sigma=2.0, snr_db=25)
    det = detect_atoms(img, DetectionParams(sigma_min=1.5, sigma_max=3.0, threshold=0.05))
    from scipy.spatial.distance import pdist

    if len(det) > 1:
        assert pdist(det.positions).min() >= 1.0
