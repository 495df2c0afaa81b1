import numpy as np
import pytest

from c0ip.mesh import Mesh, build_topology, compute_geometry, fix_local_enumeration
from c0ip.penalty import PenaltyConfig, sigma_triangle
from c0ip.assembly import assemble


def make_mesh(coords, triangles):
    return fix_local_enumeration(Mesh(np.array(coords, float), np.array(triangles)))


# fixed test set of meshes with at most four triangles
SMALL_MESHES = {
    "single": ([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)]),
    "square": ([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)]),
    "fan3": ([(0, 0), (2, 0), (1, 1.5), (-1, 1), (-1, -0.5)], [(0, 1, 2), (0, 2, 3), (0, 3, 4)]),
    "crossed": ([(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)],
                [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]),
    "skewed": ([(0, 0), (1.3, 0.1), (1.1, 1.2), (-0.2, 0.9), (0.45, 0.5)],
               [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]),
}


def small_mesh(name):
    return make_mesh(*SMALL_MESHES[name])


def assembled(mesh, a=2.0, f=1.0):
    topo = build_topology(mesh)
    geom = compute_geometry(mesh, topo)
    sigma = sigma_triangle(PenaltyConfig(a), geom, topo)
    system, dofmap = assemble(mesh, topo, geom, sigma, f)
    return topo, geom, sigma, system, dofmap


@pytest.fixture(params=sorted(SMALL_MESHES))
def small(request):
    return small_mesh(request.param)
