"""Adapted charts, singular graphs, division, and reconstruction."""

import math

import numpy as np
import pytest

from emfront import classify as cl, geometry as geo, normalform as nf
from emfront.classify import A3_TYPE, CUSPIDAL_EDGE, ChartWindow
from emfront.gfexpr import parse

WINDOW = ChartWindow.create([0.0, 0.0], [1.0, 1.0], 41)


class TestAdapt:
    def test_identity_for_first_axis_models(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.2])
        assert m.is_direct
        assert np.allclose(m.eq.A, np.eye(2))
        fr = m.frame([0.3, 0.2])
        assert fr.p1.value == pytest.approx(0.09)
        assert fr.lam == pytest.approx(0.6)

    def test_corank_two_rejected(self):
        g = parse("(x1^3 + x2^3)/3 - p3^2/2", 3, {1, 2})
        with pytest.raises(geo.NotCorankOneError):
            nf.adapt(g, [0.0, 0.0, 0.4])

    def test_rotated_three_dim_fixture(self):
        # full-x extension of the fold-edge model, rotated in the x-plane:
        # adaptation recovers the original pairing up to kernel scaling
        th = 0.5
        R = np.array([[math.cos(th), -math.sin(th), 0.0],
                      [math.sin(th), math.cos(th), 0.0],
                      [0.0, 0.0, 1.0]])
        Rt = R.T

        def lin(row):
            return "(" + " + ".join(f"({float(Rt[row, k])!r})*x{k + 1}"
                                    for k in range(3)) + ")"

        src = f"{lin(0)}^3/3 + {lin(1)}^2/2 + {lin(2)}^2/2"
        g_rot = parse(src, n=3, I={1, 2, 3})
        g_ref = parse("x1^3/3 + x2^2/2 + x3^2/2", n=3, I={1, 2, 3})
        q = np.array([0.0, 0.2, -0.1])
        ref = cl.classify_point(g_ref, q)
        assert ref.classification == CUSPIDAL_EDGE and ref.T3 == pytest.approx(1.0)

        m = nf.adapt(g_rot, R @ q)
        assert not m.is_direct
        r = nf.classify_adapted(m)
        assert r.classification == CUSPIDAL_EDGE
        # orthogonal alignment: the kernel-scaling factor is 1
        assert abs(r.T3) == pytest.approx(1.0, abs=1e-9)

    def test_chart_round_trip_general_path(self, fold_edge):
        eq = nf.AffineEquivalence.create(np.array([[0.8, 0.3], [-0.2, 1.1]]),
                                         [0.1, -0.2], [0.05, 0.4], 0.7)
        m = nf.adapt(fold_edge, np.array([0.0, 0.3]), pre=eq)
        rng = np.random.default_rng(9)
        for _ in range(10):
            t = m.base_new_chart + rng.uniform(-0.2, 0.2, 2)
            q = m.from_new_chart(t)
            assert np.allclose(m.to_new_chart(q), t, atol=1e-10)

    def test_frame_consistency_direct_vs_equivalence(self, fold_edge):
        # the identity equivalence through the general machinery must agree
        # with the direct fast path
        m_direct = nf.adapt(fold_edge, [0.0, 0.3])
        m_general = nf.AdaptedModel(fold_edge,
                                    nf.AffineEquivalence.create(np.eye(2) * 1.0,
                                                                [0.0, 0.0]),
                                    [0.0, 0.3])
        m_general.is_direct = False  # force the Newton/compose path
        for t in ([0.2, 0.4], [-0.3, 0.1], [0.0, 0.3]):
            fa = m_direct.frame(np.array(t))
            fb = m_general.frame(np.array(t))
            assert np.allclose(fa.p1.c, fb.p1.c, atol=1e-10)
            assert np.allclose(fa.zp.c, fb.zp.c, atol=1e-10)
            for ja, jb in zip(fa.xJ, fb.xJ):
                assert np.allclose(ja.c, jb.c, atol=1e-10)


class TestSingularGraph:
    def test_fold_edge_flat_graph(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.0])
        g = nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE)
        assert g.excluded == []
        assert np.max(np.abs(g.values)) <= 1e-12

    def test_degenerate_branch_flat_graph(self, degenerate_branch):
        m = nf.adapt(degenerate_branch, [0.0, 0.0])
        g = nf.singular_graph(m, WINDOW, A3_TYPE)
        assert np.max(np.abs(g.values)) <= 1e-10

    def test_curved_graph(self):
        # p1 = x1^2/2 + 0.3 x1 p2 has fold locus x1 = -0.3 p2... solved in x1
        g = parse("x1^3/6 + 0.3*x1^2*p2/2 - p2^2/2", 2, {1})
        m = nf.adapt(g, [0.0, 0.0])
        graph = nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE)
        p2 = graph.axes[0]
        assert np.allclose(graph.values, -0.3 * p2, atol=1e-10)

    def test_wrong_kind_rejected(self, swallowtail):
        m = nf.adapt(swallowtail, [0.0, 0.0])
        with pytest.raises(ValueError, match="not a fold edge"):
            nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE)

    def test_invalid_kind(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.0])
        with pytest.raises(ValueError):
            nf.singular_graph(m, WINDOW, "Swallowtail")


class TestDivide:
    def test_fold_edge_model(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.0])
        graph = nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE)
        model = nf.divide(m, graph)
        assert model.degree == 2 and not model.p1_flip
        assert np.max(np.abs(model.k1)) <= 1e-12
        assert np.max(np.abs(model.k2 - graph.axes[0] ** 2 / 2)) <= 1e-8
        assert model.dphi_dy1_at_base == pytest.approx(2 / 3)
        assert model.dphi_dy1_fd == pytest.approx(model.dphi_dy1_at_base,
                                                  rel=1e-4)

    def test_degenerate_branch_model(self, degenerate_branch):
        m = nf.adapt(degenerate_branch, [0.0, 0.0])
        graph = nf.singular_graph(m, WINDOW, A3_TYPE)
        model = nf.divide(m, graph)
        assert model.degree == 3
        assert np.max(np.abs(model.k1)) <= 1e-10
        assert np.max(np.abs(model.k2 - graph.axes[0] ** 2 / 2)) <= 1e-8
        assert model.dphi_dy1_at_base == pytest.approx(3 / 4)
        assert model.dphi_dy1_fd == pytest.approx(model.dphi_dy1_at_base,
                                                  rel=1e-4)

    def test_one_dimensional_core(self):
        # pure cubic with no transverse directions: p1 = x1^2, phi1 = 1,
        # z' = (2/3) x1^3, phi(y1) = (2/3) y1
        g = parse("x1^3/3", 1, {1})
        w = ChartWindow.create([0.0], [1.0], 41)
        m = nf.adapt(g, [0.0])
        graph = nf.singular_graph(m, w, CUSPIDAL_EDGE)
        model = nf.divide(m, graph)
        assert float(model.k1) == pytest.approx(0.0, abs=1e-12)
        assert float(model.k2) == pytest.approx(0.0, abs=1e-12)
        mid = model.y1_axis
        assert np.allclose(model.phi, (2 / 3) * mid, atol=1e-10)
        assert nf.roundtrip_residual(m, model, w) <= 1e-10

    def test_sign_flip_branch(self):
        # p1 = -x1^2: leading coefficient negative, p1 -> -p1 fix applies
        g = parse("-x1^3/3 - p2^2/2", 2, {1})
        m = nf.adapt(g, [0.0, 0.0])
        graph = nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE)
        model = nf.divide(m, graph)
        assert model.p1_flip
        assert nf.roundtrip_residual(m, model, WINDOW) <= 1e-10

    def test_round_trip_fold_edge(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.0])
        model = nf.divide(m, nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE))
        assert nf.roundtrip_residual(m, model, WINDOW) <= 1e-6

    def test_round_trip_curved_transcendental(self):
        # exercises nonflat graph, nonconstant phi1, quotient + Taylor routes
        g = parse("exp(x1) - 1.3591409142295225*x1^2/2 - p2^2/2 + x1*p2/10", 2, {1})
        base = None
        w = ChartWindow.create([0.30685281944005466, 0.0], [0.5, 0.5], 33)
        m = nf.adapt(g, np.array([0.30685281944005466, 0.0]))
        model = nf.divide(m, nf.singular_graph(m, w, CUSPIDAL_EDGE))
        assert nf.roundtrip_residual(m, model, w) <= 1e-6


class TestReconstruct:
    @pytest.fixture
    def fold_model(self, fold_edge):
        m = nf.adapt(fold_edge, [0.0, 0.0])
        return m, nf.divide(m, nf.singular_graph(m, WINDOW, CUSPIDAL_EDGE))

    def test_plus_branch_value(self, fold_model):
        _, model = fold_model
        got = nf.reconstruct(model, [0.25, 0.0], "+")
        assert got == pytest.approx((2 / 3) * 0.25 ** 1.5, abs=1e-9)

    def test_outside_sheet(self, fold_model):
        _, model = fold_model
        with pytest.raises(nf.OutsideSheetError):
            nf.reconstruct(model, [-0.1, 0.0])

    def test_branches_agree_on_fold(self, fold_model):
        _, model = fold_model
        for p2 in (-0.5, 0.0, 0.7):
            plus = nf.reconstruct(model, [0.0, p2], "+")
            minus = nf.reconstruct(model, [0.0, p2], "-")
            assert plus == minus  # both are exactly k2 at the fold
            assert plus == pytest.approx(p2 * p2 / 2, abs=1e-9)

    def test_degenerate_branch_value(self, degenerate_branch):
        m = nf.adapt(degenerate_branch, [0.0, 0.0])
        model = nf.divide(m, nf.singular_graph(m, WINDOW, A3_TYPE))
        assert nf.reconstruct(model, [1.0, 0.0]) == pytest.approx(0.75, abs=1e-9)
        # negative p1 side goes through the real cube root
        assert nf.reconstruct(model, [-1.0, 0.0]) == pytest.approx(0.75, abs=1e-9)

    def test_serialization_round_trip(self, fold_model):
        _, model = fold_model
        doc = model.to_dict()
        assert doc["schema"] == 1 and doc["kind"] == CUSPIDAL_EDGE
        rebuilt = nf.NormalFormModel(
            kind=doc["kind"], degree=doc["degree"], p1_flip=doc["p1_flip"],
            pJ_axes=[np.array(a) for a in doc["pJ_axes"]],
            y1_axis=np.array(doc["y1_axis"]),
            f=np.array(doc["f"]), k1=np.array(doc["k1"]),
            k2=np.array(doc["k2"]), phi=np.array(doc["phi"]),
            dphi_dy1_at_base=doc["dphi_dy1_at_base"],
            dphi_dy1_fd=doc["dphi_dy1_fd"],
            base_new_chart=np.array(doc["base_new_chart"]),
            delta=doc["delta"])
        assert nf.reconstruct(rebuilt, [0.25, 0.0], "+") == pytest.approx(
            nf.reconstruct(model, [0.25, 0.0], "+"))
