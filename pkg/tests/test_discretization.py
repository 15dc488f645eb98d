import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import quad

from starspec.discretization import (
    BlockAssembler,
    assemble_bs_matrix,
    assemble_diag_block,
    assemble_offdiag_block,
    build_mesh,
)
from starspec.errors import BadParameters
from starspec.geometry import make_star, sharp_configuration

FOUR_PI = 4.0 * math.pi


class TestBuildMesh:
    def test_node_count_and_weight_sum(self):
        m = build_mesh(1.0, 8, 12, 2.0)
        assert m.size == 96
        assert abs(m.weights.sum() - 1.0) <= 1e-12

    def test_uniform_two_panels(self):
        m = build_mesh(1.0, 2, 2, 1.0)
        assert m.size == 4
        assert abs(m.weights.sum() - 1.0) <= 1e-14

    def test_nodes_interior_increasing(self):
        m = build_mesh(3.0, 10, 8, 3.0)
        assert np.all(np.diff(m.nodes) > 0)
        assert m.nodes[0] > 0.0 and m.nodes[-1] < 3.0

    def test_polynomial_exactness(self):
        m = build_mesh(1.0, 2, 4, 1.5)
        assert abs(np.sum(m.weights * m.nodes**3) - 0.25) < 1e-14

    def test_graded_toward_both_ends(self):
        # panel widths grow geometrically away from the vertex, and the
        # end stack shrinks again toward the free endpoint
        m = build_mesh(1.0, 12, 4, 2.0)
        widths = np.diff(m.edges)
        assert widths[0] <= widths.min() * (1 + 1e-12)
        assert widths[-1] < widths.max()
        front = widths[:m.panels - 8]
        assert np.allclose(front[1:] / front[:-1], 2.0, rtol=1e-12)

    def test_bad_parameters(self):
        with pytest.raises(BadParameters):
            build_mesh(-1.0, 8, 12, 2.0)
        with pytest.raises(BadParameters):
            build_mesh(1.0, 1, 12, 2.0)
        with pytest.raises(BadParameters):
            build_mesh(1.0, 8, 1, 2.0)
        with pytest.raises(BadParameters):
            build_mesh(1.0, 8, 12, 0.5)


def quadratic_form(block, mesh, f):
    u = np.sqrt(mesh.weights) * f(mesh.nodes)
    return float(u @ block @ u)


def diag_form_oracle(kappa, L, f, rel=1e-10):
    """(f, T f) for the regularized self-interaction kernel by adaptive
    quadrature, independent of the Nystrom machinery."""

    def inner(s):
        def integrand(t):
            return (f(t) * math.exp(-kappa * abs(s - t)) - f(s)) / abs(s - t)

        left, _ = quad(integrand, 0.0, s, epsabs=1e-13, epsrel=rel, limit=200)
        right, _ = quad(integrand, s, L, epsabs=1e-13, epsrel=rel, limit=200)
        return left + right + f(s) * math.log(4.0 * s * (L - s))

    val, _ = quad(
        lambda s: f(s) * inner(s), 0.0, L, epsabs=1e-13, epsrel=rel, limit=200
    )
    return val / FOUR_PI


class TestDiagBlock:
    def test_quadratic_form_against_adaptive_quadrature(self):
        # endpoint-vanishing test function, like the eigenfunctions the block
        # is used on; with it the form matches the independent adaptive
        # quadrature to near machine precision
        L, kappa = 1.0, 1.3
        mesh = build_mesh(L, 16, 12, 2.0)
        T = assemble_diag_block(kappa, L, mesh)
        f = lambda s: s * (L - s) * np.exp(-s)
        got = quadratic_form(T, mesh, f)
        want = diag_form_oracle(kappa, L, lambda s: s * (L - s) * math.exp(-s))
        assert got == pytest.approx(want, rel=1e-10)

    def test_symmetric(self):
        mesh = build_mesh(2.0, 8, 10, 2.0)
        T = assemble_diag_block(0.5, 2.0, mesh)
        assert np.abs(T - T.T).max() == 0.0

    def test_top_eigenvalue_self_convergence(self):
        tops = []
        for panels in (8, 16, 32):
            mesh = build_mesh(1.0, panels, 12, 2.0)
            T = assemble_diag_block(1.0, 1.0, mesh)
            tops.append(sla.eigvalsh(T)[-1])
        assert abs(tops[1] - tops[0]) < 1e-5
        assert abs(tops[2] - tops[1]) < 1e-6

    def test_mesh_mismatch(self):
        mesh = build_mesh(1.0, 8, 12, 2.0)
        with pytest.raises(BadParameters):
            assemble_diag_block(1.0, 2.0, mesh)


class TestOffdiagBlock:
    def test_quadratic_form_against_adaptive_quadrature(self):
        from scipy.integrate import dblquad

        L, kappa, c2 = 1.0, 0.8, 1.0
        mesh = build_mesh(L, 16, 12, 2.0)
        B = assemble_offdiag_block(kappa, c2, mesh)
        f = lambda s: s * (L - s) * np.exp(-s)
        got = quadratic_form(B, mesh, f)
        want, _ = dblquad(
            lambda t, s: s * (L - s) * math.exp(-s) * t * (L - t) * math.exp(-t)
            * math.exp(-kappa * math.sqrt((s - t) ** 2 + s * t * c2))
            / (FOUR_PI * math.sqrt((s - t) ** 2 + s * t * c2)),
            0.0, L, 0.0, L, epsabs=1e-13, epsrel=1e-11,
        )
        assert got == pytest.approx(want, rel=1e-10)

    def test_antipodal_entries_match_kernel_away_from_vertex(self):
        mesh = build_mesh(1.0, 8, 12, 2.0)
        kappa = 1.0
        B = assemble_offdiag_block(kappa, 4.0, mesh)
        s = mesh.nodes
        w = mesh.weights
        # far from the vertex no correction applies: plain weighted samples
        m, n = mesh.size - 1, mesh.size - 20
        expect = (
            math.sqrt(w[m] * w[n])
            * math.exp(-kappa * (s[m] + s[n]))
            / (FOUR_PI * (s[m] + s[n]))
        )
        assert B[m, n] == pytest.approx(expect, rel=1e-13)

    def test_entries_positive(self):
        mesh = build_mesh(1.0, 8, 12, 2.0)
        for c2 in (4.0, 2.0, 8.0 / 3.0, 0.05):
            B = assemble_offdiag_block(1.0, c2, mesh)
            assert B.min() > 0.0

    def test_entries_decrease_with_kappa(self):
        mesh = build_mesh(1.0, 6, 8, 2.0)
        B1 = assemble_offdiag_block(1.0, 2.0, mesh)
        B2 = assemble_offdiag_block(2.0, 2.0, mesh)
        assert np.all(B2 <= B1 + 1e-15)

    def test_chord_must_be_positive(self):
        mesh = build_mesh(1.0, 4, 4, 2.0)
        with pytest.raises(BadParameters):
            assemble_offdiag_block(1.0, 0.0, mesh)


class TestBsMatrix:
    def test_single_arm_equals_diag_block(self):
        mesh = build_mesh(1.0, 6, 8, 2.0)
        cfg = make_star([(0, 0, 1)], 1.0, 0.0)
        bs = assemble_bs_matrix(cfg, 1.0, mesh)
        T = assemble_diag_block(1.0, 1.0, mesh)
        assert np.abs(bs.matrix - T).max() < 1e-15

    def test_symmetry_and_block_transpose(self):
        mesh = build_mesh(1.0, 6, 8, 2.0)
        cfg = make_star(sharp_configuration(4), 1.0, 0.0)
        bs = assemble_bs_matrix(cfg, 0.7, mesh)
        assert np.abs(bs.matrix - bs.matrix.T).max() == 0.0
        assert np.abs(bs.block(0, 1) - bs.block(1, 0).T).max() == 0.0
        assert bs.dimension == 4 * mesh.size

    def test_offdiag_blocks_positive(self):
        mesh = build_mesh(1.0, 6, 8, 2.0)
        cfg = make_star(sharp_configuration(6), 1.0, 0.0)
        bs = assemble_bs_matrix(cfg, 1.0, mesh)
        for i in range(6):
            for j in range(i + 1, 6):
                assert bs.block(i, j).min() > 0.0

    def test_top_eigenvalue_decreasing_in_kappa(self):
        mesh = build_mesh(1.0, 6, 8, 2.0)
        cfg = make_star(sharp_configuration(3), 1.0, 0.0)
        tops = []
        for kappa in np.geomspace(0.1, 10.0, 10):
            A = assemble_bs_matrix(cfg, kappa, mesh).matrix
            tops.append(sla.eigvalsh(A)[-1])
        assert all(a > b for a, b in zip(tops, tops[1:]))

    def test_arm_permutation_similarity(self):
        mesh = build_mesh(1.0, 5, 6, 2.0)
        dirs = sharp_configuration(4)
        spec_a = np.sort(
            sla.eigvalsh(assemble_bs_matrix(make_star(dirs, 1.0, 0.0), 1.0, mesh).matrix)
        )
        perm = dirs[[2, 0, 3, 1]]
        spec_b = np.sort(
            sla.eigvalsh(assemble_bs_matrix(make_star(perm, 1.0, 0.0), 1.0, mesh).matrix)
        )
        assert np.abs(spec_a - spec_b).max() < 1e-12

    def test_mesh_refinement_reduces_change(self):
        # top-eigenvalue change shrinks by at least 4x per panel doubling
        cfg = make_star(sharp_configuration(2), 1.0, 0.0)
        tops = []
        for panels in (4, 8, 16):
            mesh = build_mesh(1.0, panels, 12, 2.0)
            A = assemble_bs_matrix(cfg, 1.0, mesh).matrix
            tops.append(sla.eigvalsh(A)[-1])
        d1 = abs(tops[1] - tops[0])
        d2 = abs(tops[2] - tops[1])
        assert d2 < d1 / 4.0


class TestScaleCovariance:
    def test_diag_block_shift_under_scaling(self):
        # T_{kappa/2, 2L} = T_{kappa, L} + ln(2)/(2 pi) exactly, entrywise up
        # to the weight scaling
        kappa = 1.7
        mesh1 = build_mesh(1.0, 8, 10, 2.0)
        mesh2 = build_mesh(2.0, 8, 10, 2.0)
        T1 = assemble_diag_block(kappa, 1.0, mesh1)
        T2 = assemble_diag_block(kappa / 2.0, 2.0, mesh2)
        shift = math.log(2.0) / (2.0 * math.pi)
        diff = T2 - (T1 + shift * np.eye(mesh1.size))
        assert np.abs(diff).max() < 1e-13
