import numpy as np

from labpipe.analysis import DetectedAtoms, DetectionParams, map_environments

from synth import honeycomb_positions


def build_atoms(positions, labels):
    return (
        DetectedAtoms(
            positions=np.asarray(positions, dtype=float),
            intensities=np.ones(len(positions)),
            detection_params=DetectionParams(),
        ),
        np.asarray(labels),
    )


def honeycomb_scene(n=10, bond=4.0, remove_b_indices=()):
    a, b = honeycomb_positions(n, n, bond)
    keep = np.setdiff1d(np.arange(len(b)), np.asarray(remove_b_indices, dtype=int))
    b = b[keep]
    positions = np.vstack([a, b])
    labels = np.concatenate([np.zeros(len(a), dtype=int), np.ones(len(b), dtype=int)])
    return build_atoms(positions, labels)


def test_pristine_lattice_has_no_anomaly_components():
    atoms, labels = honeycomb_scene()
    env = map_environments(atoms, labels, m=6, k_env=2, seed=0)
    # one dominant environment; nothing elongated/anomalous of meaningful size
    assert all(c.size <= 6 for c in env.components if c.elongation > 3) or not env.components


def test_vacancy_row_yields_elongated_component():
    # remove one row of the B sublattice in the lattice interior
    n = 12
    row = 6
    removed = [i * n + row for i in range(3, 9)]
    atoms, labels = honeycomb_scene(n=n, remove_b_indices=removed)
    env = map_environments(atoms, labels, m=6, k_env=3, seed=0)
    assert env.components, "expected at least one anomaly component"
    biggest = env.components[0]
    assert biggest.elongation > 3


def test_single_vacancy_yields_compact_component():
    n = 12
    atoms, labels = honeycomb_scene(n=n, remove_b_indices=[6 * n + 6])
    env = map_environments(atoms, labels, m=6, k_env=3, seed=0)
    if env.components:
        interior = [c for c in env.components if c.size >= 2]
        for c in interior:
            assert c.elongation < 3


def test_descriptor_shape():
    atoms, labels = honeycomb_scene()
    env = map_environments(atoms, labels, m=6, k_env=2, seed=0)
    assert env.descriptors.shape == (len(atoms), 6 + 2)


def test_seeded_reproducibility():
    atoms, labels = honeycomb_scene()
    e1 = map_environments(atoms, labels, m=6, k_env=2, seed=4)
    e2 = map_environments(atoms, labels, m=6, k_env=2, seed=4)
    assert np.array_equal(e1.env_labels, e2.env_labels)
    assert np.array_equal(e1.anomaly_flags, e2.anomaly_flags)
