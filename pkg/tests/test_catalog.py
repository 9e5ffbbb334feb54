import math

import numpy as np
import pytest
import sympy as sp

import symbolic
from submanifold.catalog import (
    INVARIANTS, catalog_entries, catalog_names, expected_schwarzschild_riemann, get_entry,
)
from submanifold.dsl import parse_embedding
from submanifold.errors import DomainError
from submanifold.geometry import analyze_point, gauss_rhs, invariants, kretschmann


def _samples(emb, count, seed=0):
    rng = np.random.default_rng(seed)
    lo = np.array([a for a, _ in emb.domain])
    hi = np.array([b for _, b in emb.domain])
    return rng.uniform(lo, hi, size=(count, emb.n))


def test_required_entries_present():
    expect = {
        "euclidean-plane": (2, 3, (1, 1, 1)),
        "unit-sphere": (2, 3, (1, 1, 1)),
        "cylinder": (2, 3, (1, 1, 1)),
        "flat-torus-r4": (2, 4, (1, 1, 1, 1)),
        "de-sitter": (4, 5, (-1, 1, 1, 1, 1)),
        "schwarzschild-6d": (4, 6, (-1, 1, 1, 1, 1, 1)),
    }
    assert set(expect) <= set(catalog_names())
    for name, (n, D, sig) in expect.items():
        e = get_entry(name)
        assert (e.n, e.D, e.signature) == (n, D, sig)


def test_sources_parse_and_facts_are_invariant():
    for e in catalog_entries():
        emb = parse_embedding(e.source)
        assert emb.name == e.name
        assert e.facts
        for fact in e.facts:
            assert fact.name in INVARIANTS


def test_unknown_entry():
    with pytest.raises(KeyError):
        get_entry("klein-bottle")


@pytest.mark.parametrize("entry", catalog_entries(), ids=lambda e: e.name)
def test_expected_facts_reproduced(entry):
    emb = entry.embedding
    for x in _samples(emb, 100, seed=2):
        geo = analyze_point(emb, x)
        r = geo.residuals
        assert r.passes(1e-7)
        got = invariants(geo)
        for fact in entry.facts:
            want = fact.expected(emb, x)
            if fact.name == "induced_signature":
                assert got[fact.name] == tuple(sorted(want))
            else:
                assert abs(got[fact.name] - want) <= fact.tol * max(abs(want), 1), fact.name


def test_de_sitter_against_symbolic_curvature():
    emb = get_entry("de-sitter").embedding
    syms, g = symbolic.induced_metric(emb)
    g = g.applyfunc(sp.trigsimp)
    R = sp.simplify(symbolic.scalar_curvature(g, syms))
    assert R == 12
    for x in _samples(emb, 5):
        geo = analyze_point(emb, x)
        gv = np.array(g.subs(dict(zip(syms, x))).evalf(), dtype=float)
        np.testing.assert_allclose(geo.metric.g.value, gv, atol=1e-13)
        assert invariants(geo)["scalar_curvature"] == pytest.approx(12, abs=1e-6)


def test_schwarzschild_flat_limit():
    # Minkowski space in spherical coordinates: zero up to rounding
    R = expected_schwarzschild_riemann((0.0, 5.0, 1.0, 2.0), mass=0.0)
    assert np.max(np.abs(R)) <= 1e-12


@pytest.mark.parametrize("r", [2.0, 1.0, -3.0])
def test_schwarzschild_inside_horizon(r):
    with pytest.raises(DomainError):
        expected_schwarzschild_riemann((0.0, r, 1.0, 2.0), mass=1.0)


@pytest.mark.parametrize("mass", [0.5, 1.0, 2.0])
def test_schwarzschild_kretschmann(mass):
    for r in [5.0, 7.5, 12.0]:
        point = (0.3, r, 1.1, 0.4)
        R = expected_schwarzschild_riemann(point, mass)
        g_inv = np.diag([-1 / (1 - 2 * mass / r), 1 - 2 * mass / r, r ** -2,
                         1 / (r * math.sin(1.1)) ** 2])
        assert kretschmann(R, g_inv) == pytest.approx(48 * mass ** 2 / r ** 6, rel=1e-12)


def test_schwarzschild_direct_metric_against_symbolic():
    t, r, th, ph = sp.symbols("t r theta phi", real=True)
    f = 1 - 2 / r
    g = sp.diag(-f, 1 / f, r ** 2, r ** 2 * sp.sin(th) ** 2)
    R_sym, _ = symbolic.riemann_lowered(g, (t, r, th, ph))
    point = (0.2, 4.5, 0.9, 1.7)
    R = expected_schwarzschild_riemann(point, 1.0)
    subs = dict(zip((t, r, th, ph), point))
    for key in [(0, 1, 0, 1), (0, 2, 0, 2), (1, 3, 1, 3), (2, 3, 2, 3), (0, 3, 0, 3)]:
        assert R[key] == pytest.approx(float(R_sym[key].subs(subs)), rel=1e-12)


def test_schwarzschild_embedding_reproduces_intrinsic_curvature():
    emb = get_entry("schwarzschild-6d").embedding
    for x in _samples(emb, 25, seed=4):
        geo = analyze_point(emb, x)
        direct = expected_schwarzschild_riemann(x, 1.0)
        rhs = gauss_rhs(geo.extrinsic.b.value, geo.frame.eps)
        scale = np.max(np.abs(direct))
        assert np.max(np.abs(rhs - direct)) <= 1e-6 * scale
        g_exact = np.diag([-(1 - 2 / x[1]), 1 / (1 - 2 / x[1]), x[1] ** 2,
                           (x[1] * math.sin(x[2])) ** 2])
        np.testing.assert_allclose(geo.metric.g.value, g_exact, rtol=1e-12, atol=1e-12)


def test_domains_avoid_chart_singularities():
    sphere = get_entry("unit-sphere").embedding
    assert sphere.domain[0][0] > 0 and sphere.domain[0][1] < math.pi
    schw = get_entry("schwarzschild-6d").embedding
    assert schw.domain[1][0] > 2
