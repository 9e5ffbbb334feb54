"""Reference embeddings with known geometric facts.

Each entry is a ``.emb`` source file shipped next to this module plus a list
of expected frame-invariant scalars.  Expected values are DSL expressions in
the chart variables (a bare constant is also an expression), so they can vary
from point to point, e.g. the Schwarzschild Kretschmann scalar ``48/r^6``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ..dsl import EmbeddingMap, eval_ast, parse_embedding, parse_expression
from ..errors import DomainError
from ..frame import metric_from_jet
from ..geometry import christoffel, riemann
from ..jets import Jet, jet_func, jet_var

__all__ = [
    "ExpectedFact", "CatalogEntry", "catalog_entries", "catalog_names", "get_entry",
    "expected_schwarzschild_riemann", "schwarzschild_metric",
]

INVARIANTS = ("scalar_curvature", "kretschmann", "b_norm_sq", "mean_curvature_sq",
              "induced_signature")


@dataclass(frozen=True)
class ExpectedFact:
    """``name`` is one of INVARIANTS.  For ``induced_signature`` the value is a
    tuple of signs; otherwise it is a DSL expression evaluated at the point."""

    name: str
    value: object
    tol: float

    def expected(self, emb: EmbeddingMap, point):
        if self.name == "induced_signature":
            return tuple(self.value)
        node = parse_expression(self.value, list(emb.variables))
        return float(eval_ast(node, np.asarray(point, dtype=float)))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    source: str
    facts: tuple
    description: str = ""

    @property
    def embedding(self) -> EmbeddingMap:
        return _parse(self.source)

    @property
    def n(self) -> int:
        return self.embedding.n

    @property
    def D(self) -> int:
        return self.embedding.D

    @property
    def signature(self) -> tuple:
        return self.embedding.signature.signs


@lru_cache(maxsize=None)
def _parse(source: str) -> EmbeddingMap:
    return parse_embedding(source)


def _source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.emb").read_text(encoding="utf-8")


F = ExpectedFact

_FACTS = {
    "euclidean-plane": ("Flat plane z = 0 in R^3.", (
        F("scalar_curvature", "0", 1e-12),
        F("kretschmann", "0", 1e-12),
        F("b_norm_sq", "0", 1e-12),
        F("induced_signature", (1, 1), 0),
    )),
    "unit-sphere": ("Round unit sphere in R^3.", (
        F("scalar_curvature", "2", 1e-8),
        F("kretschmann", "4", 1e-8),
        F("b_norm_sq", "2", 1e-9),
        F("mean_curvature_sq", "1", 1e-9),
        F("induced_signature", (1, 1), 0),
    )),
    "cylinder": ("Unit circular cylinder in R^3.", (
        F("scalar_curvature", "0", 1e-10),
        F("kretschmann", "0", 1e-10),
        F("b_norm_sq", "1", 1e-9),
        F("mean_curvature_sq", "0.25", 1e-9),
        F("induced_signature", (1, 1), 0),
    )),
    "flat-torus-r4": ("Clifford torus S^1 x S^1 in R^4.", (
        F("scalar_curvature", "0", 1e-10),
        F("kretschmann", "0", 1e-10),
        F("b_norm_sq", "2", 1e-9),
        F("mean_curvature_sq", "0.5", 1e-9),
        F("induced_signature", (1, 1), 0),
    )),
    "de-sitter": ("de Sitter space of radius 1 in flat 5-space.", (
        F("scalar_curvature", "12", 1e-6),
        F("kretschmann", "24", 1e-6),
        F("b_norm_sq", "4", 1e-7),
        F("mean_curvature_sq", "1", 1e-7),
        F("induced_signature", (-1, 1, 1, 1), 0),
    )),
    "schwarzschild-6d": ("Exterior Schwarzschild (m = 1) in flat 6-space.", (
        F("scalar_curvature", "0", 1e-6),
        F("kretschmann", "48/r^6", 1e-6),
        F("induced_signature", (-1, 1, 1, 1), 0),
    )),
}

# tolerances above are relative to max(|expected|, 1)


@lru_cache(maxsize=None)
def catalog_entries() -> tuple:
    return tuple(CatalogEntry(name, _source(name), facts, desc)
                 for name, (desc, facts) in _FACTS.items())


def catalog_names() -> list:
    return [e.name for e in catalog_entries()]


def get_entry(name: str) -> CatalogEntry:
    for e in catalog_entries():
        if e.name == name:
            return e
    raise KeyError(name)


# ---------------------------------------------------------------------------
# Direct-metric Schwarzschild oracle

def schwarzschild_metric(point, mass: float) -> Jet:
    """Order-3 jet of diag(-(1-2m/r), 1/(1-2m/r), r^2, r^2 sin^2 theta) in
    coordinates (t, r, theta, phi)."""
    t, r, theta, phi = (float(v) for v in point)
    if not r > 2 * mass:
        raise DomainError(f"r = {r!r} is not outside the horizon r = {2 * mass!r}")
    rj = jet_var(1, r, 4)
    th = jet_var(2, theta, 4)
    f = 1 - (2 * mass) / rj
    zero = Jet.constant(0.0, 4)
    sin_th = jet_func("sin", th)
    diag = [-f, 1 / f, rj * rj, rj * rj * sin_th * sin_th]
    rows = [Jet.stack([diag[i] if i == j else zero for j in range(4)]) for i in range(4)]
    return Jet.stack(rows)


def expected_schwarzschild_riemann(point, mass: float = 1.0) -> np.ndarray:
    """Fully lowered Riemann tensor R_nijk of the Schwarzschild metric at a
    point (t, r, theta, phi), from the metric itself rather than an embedding.
    Uses the same Christoffel and Riemann code as the embedding pipeline."""
    metric = metric_from_jet(schwarzschild_metric(point, mass))
    return riemann(christoffel(metric), metric).R
