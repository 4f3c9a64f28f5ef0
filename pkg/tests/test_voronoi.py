import os

import numpy as np
import pytest

from delone import generators as g
from delone.core import build_windowed_set, canonical_class, extract_patch, norms
from delone.errors import InputError, UnboundedCell
from delone.voronoi import (
    cell_cloud,
    cell_patch_classes,
    cell_return_vectors,
    default_cutoff,
    voronoi_cell,
    voronoi_cells_of_patch,
    write_svg,
)


@pytest.fixture(scope="module")
def z2():
    return g.generate_lattice(np.eye(2), 15.0)


@pytest.fixture(scope="module")
def ab():
    return g.generate_cut_and_project(g.ammann_beenker_scheme(), 25.0)


class TestVoronoiCell:
    def test_z2_unit_square(self, z2):
        c = voronoi_cell(z2, [0.0, 0.0])
        got = sorted(map(tuple, np.round(c.vertices, 12)))
        assert got == [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]
        assert c.area() == pytest.approx(1.0)
        assert c.inradius() == pytest.approx(0.5)
        assert c.diameter() == pytest.approx(np.sqrt(2))

    def test_1d_interval(self):
        X = build_windowed_set(np.arange(-10, 11, dtype=float), 1, 10.0)
        c = voronoi_cell(X, [0.0])
        assert c.vertices[:, 0] == pytest.approx([-0.5, 0.5])
        assert c.diameter() == pytest.approx(1.0)

    def test_not_a_site(self, z2):
        with pytest.raises(InputError):
            voronoi_cell(z2, [0.25, 0.25])

    def test_uncertified_cutoff(self):
        # a cutoff too small to certify the cell raises
        X = build_windowed_set(np.arange(-10, 11, 2, dtype=float), 1, 10.0)
        with pytest.raises(UnboundedCell):
            voronoi_cell(X, [0.0], cutoff=1.5)

    def test_contains_site(self, ab):
        cutoff = default_cutoff(ab)
        idx = ab.interior_indices(cutoff + 1e-9)
        for i in idx[:20]:
            c = voronoi_cell(ab, ab.points[i], cutoff)
            assert c.contains(ab.points[i])
            assert c.inradius() > 0

    def test_localization(self, ab):
        cutoff = default_cutoff(ab)
        idx = ab.interior_indices(2 * cutoff + 1e-9)
        for i in idx[:30]:
            c1 = voronoi_cell(ab, ab.points[i], cutoff)
            c2 = voronoi_cell(ab, ab.points[i], 2 * cutoff)
            assert len(c1.vertices) == len(c2.vertices)
            k = int(np.argmin(norms(c2.vertices - c1.vertices[0])))
            assert np.max(np.abs(c1.vertices -
                                 np.roll(c2.vertices, -k, axis=0))) < 1e-9


class TestPatchVoronoi:
    def test_cells_partition_neighborhood(self, ab):
        i0 = int(np.argmin(norms(ab.points)))
        As = ab.translate(ab.points[i0])
        P = canonical_class(extract_patch(As, np.zeros(2), 2.0))
        pv = voronoi_cells_of_patch(As, P)
        assert len(pv.cells) == len(pv.sites)
        assert any(c is not None for c in pv.cells)
        for site, cell in zip(pv.sites, pv.cells):
            if cell is not None:
                assert cell.contains(site)

    def test_cell_cloud_covers_sites(self, ab):
        i0 = int(np.argmin(norms(ab.points)))
        As = ab.translate(ab.points[i0])
        P = canonical_class(extract_patch(As, np.zeros(2), 2.0))
        pv = voronoi_cells_of_patch(As, P)
        cell = next(c for c in pv.cells if c is not None)
        cloud = cell_cloud(As, cell)
        assert len(cloud) >= 1

    def test_cell_patch_classes_assignment(self, ab):
        i0 = int(np.argmin(norms(ab.points)))
        As = ab.translate(ab.points[i0])
        P = canonical_class(extract_patch(As, np.zeros(2), 2.0))
        pv = voronoi_cells_of_patch(As, P)
        classes, assign = cell_patch_classes(As, P, pv=pv)
        assert len(assign) == len(pv.cells)
        certified = [a for a, c in zip(assign, pv.cells) if c is not None]
        assert all(a >= 0 for a in certified)
        assert max(certified) == len(classes) - 1

    def test_cell_return_vectors_include_zero(self):
        fib = g.generate_substitution_1d(g.fibonacci_rule(), 300.0)
        i0 = int(np.argmin(norms(fib.points)))
        Xs = fib.translate(fib.points[i0])
        P = canonical_class(extract_patch(Xs, np.zeros(1), 3.0))
        pv = voronoi_cells_of_patch(Xs, P)
        vi = next(i for i, c in enumerate(pv.cells)
                  if c is not None and np.linalg.norm(pv.sites[i]) < 20)
        ws = cell_return_vectors(Xs, pv.cells[vi], max_norm=50.0)
        assert len(ws) >= 1
        assert np.min(norms(ws)) < 1e-9  # w = 0 always qualifies


class TestSvg:
    def test_write(self, tmp_path, z2):
        cutoff = default_cutoff(z2)
        cells, sites = [], []
        for i in z2.interior_indices(cutoff + 1e-9)[:12]:
            cells.append(voronoi_cell(z2, z2.points[i], cutoff))
            sites.append(z2.points[i])
        path = os.path.join(tmp_path, "cells.svg")
        write_svg(path, cells, np.asarray(sites))
        text = open(path).read()
        assert text.startswith("<svg")
        assert text.count("<polygon") == 12
