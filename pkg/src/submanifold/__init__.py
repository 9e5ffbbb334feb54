"""Numerical checks of the Gauss, Codazzi and Ricci equations for explicit
isometric embeddings into flat pseudo-Euclidean space.

The pipeline at a chart point: order-3 Taylor jets of the embedding map, the
induced metric, an orthonormal normal frame built under the indefinite
ambient metric, then Christoffel symbols, Riemann tensor, second fundamental
form b, twisting vector A and the residuals of the integrability equations.
"""

__version__ = "0.1.0"

from .dsl import EmbeddingMap, Signature, parse_embedding, parse_expression  # noqa: E402
from .geometry import Corruption, analyze_point, invariants  # noqa: E402

__all__ = ["__version__", "EmbeddingMap", "Signature", "parse_embedding", "parse_expression",
           "Corruption", "analyze_point", "invariants"]
