import numpy as np
import pytest

from ntalab import zoo
from ntalab.geometry import MeshError


@pytest.mark.parametrize("level", range(0, 6))
def test_koch_counts_and_measure(level):
    m = zoo.koch_curve(level)
    assert m.n_elements == 3 * 4 ** level
    assert np.allclose(m.element_measure, 3.0 ** -level, rtol=1e-12)
    assert m.total_measure == pytest.approx(3 * (4 / 3) ** level, rel=1e-12)


def test_koch_level_zero_is_triangle():
    m = zoo.koch_curve(0, side=2.0)
    assert m.n_elements == 3
    assert m.total_measure == pytest.approx(6.0)


@pytest.mark.parametrize("level", range(0, 4))
def test_quadratic_koch_surface_area(level):
    m = zoo.quadratic_koch_surface(level)
    assert m.total_measure == pytest.approx(6.0 * (13 / 9) ** level, rel=1e-12)
    assert m.n_elements == 12 * 13 ** level
    # each of the 6 * 13^k squares at level k grows one bump cube of side 3^-(k+1)
    volume = 1 + sum(6 * 13 ** k / 27 ** (k + 1) for k in range(level))
    assert m.enclosed_content == pytest.approx(volume, rel=1e-12)


def test_lipschitz_profile_slope_bound():
    x, y = zoo.lipschitz_profile(0.5, 64, seed=3)
    assert np.max(np.abs(np.diff(y) / np.diff(x))) <= 0.5 + 1e-12
    x0, y0 = zoo.lipschitz_profile(0.0, 64)
    assert np.all(y0 == 0)


def test_flat_lipschitz_graph_is_box():
    m = zoo.lipschitz_graph(0.0, 16)
    V = m.vertices
    interior_x = (V[:, 0] > 1e-12) & (V[:, 0] < 1 - 1e-12)
    assert sorted(np.unique(V[interior_x, 1])) == [-1.0, 0.0]
    assert m.enclosed_content == pytest.approx(1.0)


@pytest.mark.parametrize("spec", [
    zoo.DomainSpec("disk", resolution=256), zoo.DomainSpec("square", resolution=16),
    zoo.DomainSpec("cube", resolution=48), zoo.DomainSpec("lipschitz_graph", resolution=32, slope=0.5),
    zoo.DomainSpec("koch_curve", level=3), zoo.DomainSpec("quadratic_koch_surface", level=1),
], ids=lambda s: s.kind)
def test_generated_meshes_are_valid(spec):
    m = zoo.generate(spec)
    rng = np.random.default_rng(0)
    P = rng.uniform(m.vertices.min(0), m.vertices.max(0), size=(50, m.dim))
    P = P[m.distance(P) > 1e-6]
    assert np.array_equal(m.classify(P), m.winding_classify(P))
    assert m.enclosed_content > 0


def test_domain_spec_validation():
    with pytest.raises(ValueError, match="unknown domain kind"):
        zoo.DomainSpec("torus")
    with pytest.raises(ValueError):
        zoo.DomainSpec("disk", resolution=4)
    with pytest.raises(ValueError):
        zoo.DomainSpec("koch_curve", level=9)


def test_round_trip(tmp_path):
    m = zoo.square(4)
    p = tmp_path / "sq.txt"
    zoo.save_mesh(m, p)
    back = zoo.load_mesh(p)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.elements, m.elements)
    c = zoo.quadratic_koch_surface(1)
    zoo.save_mesh(c, tmp_path / "q.txt")
    back = zoo.load_mesh(tmp_path / "q.txt")
    assert np.array_equal(back.vertices, c.vertices) and np.array_equal(back.elements, c.elements)


def test_dangling_index_reports_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("MESH n=2\nV 3\n0 0\n1 0\n0 1\nE 3\n0 1\n1 2\n2 7\n")
    with pytest.raises(zoo.MeshFormatError, match="line 9"):
        zoo.load_mesh(p)


def test_open_mesh_file_rejected(tmp_path):
    p = tmp_path / "open.txt"
    p.write_text("MESH n=2\nV 3\n0 0\n1 0\n0 1\nE 2\n0 1\n1 2\n")
    with pytest.raises(MeshError, match="not closed"):
        zoo.load_mesh(p)


def test_obj_cube(tmp_path):
    V = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    idx = {v: i + 1 for i, v in enumerate(V)}
    quads = [((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)), ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
             ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)), ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
             ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)), ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1))]
    lines = [f"v {x} {y} {z}" for x, y, z in V]
    for a, b, c, d in quads:
        lines += [f"f {idx[a]} {idx[b]} {idx[c]}", f"f {idx[a]} {idx[c]} {idx[d]}"]
    p = tmp_path / "cube.obj"
    p.write_text("\n".join(lines) + "\n")
    m = zoo.load_mesh(p)
    assert m.n_elements == 12
    assert m.total_measure == pytest.approx(6.0)
    assert m.enclosed_content == pytest.approx(1.0)


def test_obj_quads_rejected(tmp_path):
    p = tmp_path / "q.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(zoo.MeshFormatError, match="line 5"):
        zoo.load_mesh(p)


def test_atomic_write_leaves_no_temp(tmp_path):
    zoo.atomic_write(tmp_path / "a" / "x.txt", "hello")
    assert (tmp_path / "a" / "x.txt").read_text() == "hello"
    assert [p.name for p in (tmp_path / "a").iterdir()] == ["x.txt"]
