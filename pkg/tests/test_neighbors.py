import numpy as np
import pytest

from labpipe.analysis import DetectedAtoms, DetectionParams, TooFewAtoms, neighbor_stats

from synth import honeycomb_positions, square_lattice


def atoms_from(positions):
    return DetectedAtoms(
        positions=np.asarray(positions, dtype=float),
        intensities=np.ones(len(positions)),
        detection_params=DetectionParams(),
    )


def brute_force_nn(positions):
    positions = np.asarray(positions)
    out = []
    for i, p in enumerate(positions):
        d = np.hypot(*(positions - p).T)
        d[i] = np.inf
        out.append(d.min())
    return np.asarray(out)


def test_square_lattice_all_distances_equal_spacing():
    stats = neighbor_stats(atoms_from(square_lattice(8, 7.5)))
    assert np.allclose(stats.nn_distances, 7.5, atol=1e-12)
    assert np.isclose(stats.modal_distance, 7.5, atol=0.5)


def test_honeycomb_all_distances_equal_bond():
    a, b = honeycomb_positions(6, 6, bond=4.0)
    stats = neighbor_stats(atoms_from(np.vstack([a, b])))
    # interior atoms sit at exactly one bond length from a neighbor
    assert np.isclose(np.median(stats.nn_distances), 4.0, atol=1e-9)
    assert stats.nn_distances.min() > 0


def test_matches_brute_force_on_random_points():
    rng = np.random.default_rng(0)
    pts = rng.random((1000, 2)) * 500
    stats = neighbor_stats(atoms_from(pts))
    assert np.allclose(stats.nn_distances, brute_force_nn(pts), atol=1e-9)


def test_histogram_counts_sum_to_atom_count():
    rng = np.random.default_rng(5)
    pts = rng.random((300, 2)) * 100
    stats = neighbor_stats(atoms_from(pts))
    assert stats.histogram.sum() == 300


def test_pixel_size_conversion():
    stats = neighbor_stats(atoms_from(square_lattice(4, 10.0)), pixel_size_nm=0.05)
    assert np.allclose(stats.nn_distances_nm, 0.5)


def test_too_few_atoms():
    with pytest.raises(TooFewAtoms):
        neighbor_stats(atoms_from([[0.0, 0.0]]))
