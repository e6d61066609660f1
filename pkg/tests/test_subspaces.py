import numpy as np
import pytest

from curves import random_curve, smooth_gauge
from offdiag_holonomy import (
    CurveError,
    CurveFamily,
    Decomposition,
    TripodPath,
    apply_gauge,
    from_hamiltonian_path,
    projector,
    refine,
    tripod_curve,
)
from offdiag_holonomy.models import tripod_hamiltonian
from offdiag_holonomy.subspaces import (
    curve_from_json,
    curve_to_json,
    eigen_decomposition,
    load_curve,
    save_curve,
    uniform_grid,
)


def test_projector_examples():
    assert np.allclose(projector(np.array([1.0, 0.0])), np.diag([1.0, 0.0]))
    F = np.array([[1.0], [1.0]]) / np.sqrt(2)
    assert np.allclose(projector(F), 0.5 * np.ones((2, 2)))


@pytest.mark.parametrize("dims", [(1, 1, 2), (2, 2), (1, 1, 1)])
def test_projectors_complete_and_orthogonal(dims):
    c = random_curve(np.random.default_rng(4), dims, grid=20)
    for j in (0, 7, 20):
        Ps = c.decomposition_at(j).projectors()
        assert np.allclose(sum(Ps), np.eye(c.N), atol=1e-12)
        for a in range(len(Ps)):
            for b in range(len(Ps)):
                expected = Ps[a] if a == b else 0.0
                assert np.allclose(Ps[a] @ Ps[b], expected, atol=1e-12)


def test_projector_gauge_invariant():
    rng = np.random.default_rng(5)
    c = random_curve(rng, (1, 2), grid=10)
    g = smooth_gauge(rng, c.dims, c.grid)
    cg = apply_gauge(c, g)
    for l in range(c.eta):
        for j in range(c.grid.size):
            assert np.allclose(cg.projector(l, j), c.projector(l, j), atol=1e-12)


def test_decomposition_rejects_bad_frames():
    with pytest.raises(CurveError, match="sum to N"):
        Decomposition([np.eye(3)[:, :1], np.eye(3)[:, 1:2]])
    with pytest.raises(CurveError, match="orthonormal"):
        Decomposition([np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2)])


def test_curve_rejects_non_orthonormal_sample():
    good = [np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]
    bad = [np.array([[1.0], [0.0]]), np.array([[0.5], [1.0]])]
    with pytest.raises(CurveError):
        CurveFamily.from_samples(uniform_grid(1), [good, bad])


def test_grid_validation():
    with pytest.raises(CurveError):
        uniform_grid(0)
    frames = [np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]])]
    with pytest.raises(CurveError):
        CurveFamily.from_samples([0.0, 0.5], [frames, frames])


def test_smoothness_constant_reported():
    c = random_curve(np.random.default_rng(6), (1, 1, 2), grid=50)
    assert 0.0 < c.smoothness < 50.0
    assert c.frames[0].flags.writeable is False


def test_refine_matches_finer_generator():
    c = tripod_curve(TripodPath.linear(1.0, 0.5), 10)
    fine = refine(c, 4)
    assert fine.M == 40
    direct = tripod_curve(TripodPath.linear(1.0, 0.5), 40)
    assert np.allclose(fine.grid, direct.grid)
    assert np.allclose(fine.frames[2], direct.frames[2])


def test_refine_rejects_explicit_curve():
    c = tripod_curve(TripodPath.linear(1.0, 0.5), 10)
    explicit = c.as_samples()
    assert not explicit.refinable
    with pytest.raises(CurveError, match="generator"):
        refine(explicit, 2)


def test_eigen_decomposition_clusters_degenerate_levels():
    frames, energies, sep = eigen_decomposition(np.diag([0.0, 0.0, 1.0, -1.0]))
    assert [F.shape[1] for F in frames] == [1, 2, 1]
    assert energies == pytest.approx([-1.0, 0.0, 1.0])
    assert sep == np.inf


def test_constant_hamiltonian_gives_constant_curve():
    H = np.diag([1.0, 2.0, 2.0])
    c = from_hamiltonian_path(lambda s: H, 8)
    assert c.dims == (1, 2)
    assert c.is_cyclic()
    for l in range(c.eta):
        assert np.allclose(c.frames[l][-1], c.frames[l][0])


def test_tripod_hamiltonian_path_spans_tripod_subspaces():
    p = TripodPath.fourier([1.2, 0.1], [0.8], omega=1.0)
    c = from_hamiltonian_path(lambda s: tripod_hamiltonian(p, s), 40)
    ref = tripod_curve(p, 40)
    # ascending energy: -omega (bright minus), 0 (dark), +omega (bright plus)
    assert c.dims == (1, 2, 1)
    for l_eig, l_ref in ((0, 1), (1, 2), (2, 0)):
        for j in (0, 20, 40):
            assert np.allclose(c.projector(l_eig, j), ref.projector(l_ref, j), atol=1e-10)


def test_level_crossing_is_reported():
    def H(s):
        return np.diag([s - 0.5, 0.5 - s])

    with pytest.raises(CurveError, match="sample"):
        from_hamiltonian_path(H, 10)


def test_json_round_trip(tmp_path):
    c = random_curve(np.random.default_rng(8), (1, 2), grid=12)
    doc = curve_to_json(c)
    back = curve_from_json(doc)
    assert back.dims == c.dims
    for l in range(c.eta):
        assert np.array_equal(back.frames[l], c.frames[l])
    save_curve(c, tmp_path / "c.json")
    again = load_curve(tmp_path / "c.json")
    assert np.array_equal(again.frames[1], c.frames[1])


def test_json_header_mismatch():
    c = random_curve(np.random.default_rng(9), (1, 1), grid=3)
    doc = curve_to_json(c)
    doc["dims"] = [2]
    with pytest.raises(CurveError, match="header"):
        curve_from_json(doc)
    doc = curve_to_json(c)
    doc["format"] = "other"
    with pytest.raises(CurveError, match="format"):
        curve_from_json(doc)
