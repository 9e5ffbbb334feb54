"""Linear algebra under a diagonal indefinite metric, carried out in jets.

Vectors in the ambient space are jets whose last batch axis runs over the
``D`` ambient components.  Tangent vectors ``Y_{,i}`` are stacked as a
``(n, D)`` jet, normal frames as ``(D - n, D)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsl import Signature
from .errors import DegenerateMetric, NullNormalDirection
from .jets import Jet, jet_func

__all__ = [
    "InducedMetric", "NormalFrame", "eta_inner", "jet_matmul", "symmetrize",
    "induced_metric", "metric_from_jet", "build_normal_frame", "frame_residuals", "completeness_det",
    "METRIC_DET_THRESHOLD", "NULL_THRESHOLD", "VANISH_THRESHOLD",
]

METRIC_DET_THRESHOLD = 1e-12   # relative to max|g_ij|^n
NULL_THRESHOLD = 1e-10         # |eta(w, w)| relative to ||w||_inf^2
VANISH_THRESHOLD = 1e-3        # ||w||_inf of a projected unit seed
SIGN_THRESHOLD = 1e-8


@dataclass(frozen=True)
class InducedMetric:
    g: Jet          # (n, n)
    g_inv: Jet      # (n, n)
    det_g: Jet      # scalar


@dataclass(frozen=True)
class NormalFrame:
    vectors: Jet    # (D - n, D); row A is N_A
    eps: tuple      # eta(N_A, N_A) = eps[A]
    seeds: tuple    # ambient basis index that produced each normal

    @property
    def codim(self) -> int:
        return len(self.eps)


def eta_inner(u: Jet, v, sig: Signature) -> Jet:
    """sum_mu eta_mu u^mu v^mu over the last axis (broadcasting elsewhere)."""
    return (u * v * sig.eta).sum(axis=-1)


def jet_matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the last axis of ``a`` and first axis of ``b``."""
    return (a.reshape(a.shape + (1,) * (b.ndim - 1))
            * b.reshape((1,) * (a.ndim - 1) + b.shape)).sum(axis=a.ndim - 1)


def symmetrize(m: Jet) -> Jet:
    """Mirror the upper triangle so that m[i, j] and m[j, i] are bit-identical."""
    n = m.shape[0]
    i, j = np.tril_indices(n, -1)
    coeffs = m.coeffs.copy()
    coeffs[i, j] = coeffs[j, i]
    return Jet(coeffs, m.n, m.order)


def induced_metric(tangents: Jet, sig: Signature) -> InducedMetric:
    """g_ij = eta(Y_,i, Y_,j), its inverse and determinant, all as jets.

    Raises DegenerateMetric when |det g| < 1e-12 * max|g_ij|^n at the point.
    """
    g = symmetrize(eta_inner(tangents[:, None, :], tangents[None, :, :], sig))
    return metric_from_jet(g)


def metric_from_jet(g: Jet) -> InducedMetric:
    """Inverse and determinant of a symmetric (n, n) metric jet.

    Also used for metrics given directly in closed form rather than induced
    by an embedding.
    """
    n = g.shape[0]
    g0 = g.value
    scale = np.max(np.abs(g0)) ** n
    det0 = np.linalg.det(g0)
    if not np.isfinite(det0) or abs(det0) < METRIC_DET_THRESHOLD * scale or scale == 0:
        raise DegenerateMetric(f"induced metric is singular (det g = {det0:.3e})")

    # g = g0 (I + E) with E nilpotent under truncation:
    # g^-1 = sum_k (-E)^k g0^-1 and det g = det g0 * exp(tr log(I + E)).
    g0_inv = np.linalg.inv(g0)
    h = g - g0
    e = jet_matmul(Jet.constant(g0_inv, g.n), h)
    inv = Jet.constant(g0_inv, g.n)
    term = inv
    log_trace = Jet.constant(0.0, g.n)
    power = None
    for k in range(1, g.order + 1):
        term = -jet_matmul(e, term)
        inv = inv + term
        power = e if power is None else jet_matmul(power, e)
        trace = power.coeffs.diagonal(axis1=0, axis2=1).sum(axis=-1)
        log_trace = log_trace + Jet(trace, g.n, power.order) * ((-1) ** (k + 1) / k)
    det = jet_func("exp", log_trace.truncate(g.order)) * det0
    return InducedMetric(g, symmetrize(inv.truncate(g.order)), det)


def _project_out_tangents(w: Jet, tangents: Jet, metric: InducedMetric, sig: Signature) -> Jet:
    # w - Y_,i g^{ij} eta(Y_,j, w)
    c = eta_inner(tangents, w[None, :], sig)                     # (n,)
    coef = (metric.g_inv * c[None, :]).sum(axis=1)               # (n,)
    return w - (coef[:, None] * tangents).sum(axis=0)


def build_normal_frame(tangents: Jet, metric: InducedMetric, sig: Signature,
                       seed_order=None) -> NormalFrame:
    """Orthonormal normal frame by Gram-Schmidt on the ambient basis vectors.

    Seeds ``e_mu`` are tried in ``seed_order`` (default ``0..D-1``).  Each is
    projected eta-orthogonally off the tangent space and the normals accepted
    so far; a projection that nearly vanishes or is (nearly) null at the
    expansion point is skipped.  Accepted vectors are scaled to unit
    eta-norm and signed so their first component above 1e-8 in magnitude is
    positive.
    """
    n, D = tangents.shape
    codim = D - n
    order = range(D) if seed_order is None else seed_order
    accepted, eps, seeds = [], [], []
    saw_null = False
    for mu in order:
        if len(accepted) == codim:
            break
        e = np.zeros(D)
        e[mu] = 1.0
        w = _project_out_tangents(Jet.constant(e, tangents.n), tangents, metric, sig)
        for u, s in zip(accepted, eps):
            w = w - u * (eta_inner(w, u, sig) * s)
        wv = w.value
        size = np.max(np.abs(wv))
        if size < VANISH_THRESHOLD:
            continue
        norm2 = eta_inner(w, w, sig)
        if abs(norm2.value) < NULL_THRESHOLD * size**2:
            saw_null = True
            continue
        s = 1 if norm2.value > 0 else -1
        u = w * ((norm2 * s) ** -0.5)
        lead = np.flatnonzero(np.abs(u.value) > SIGN_THRESHOLD)[0]
        if u.value[lead] < 0:
            u = -u
        accepted.append(u)
        eps.append(s)
        seeds.append(int(mu))
    if len(accepted) < codim:
        why = "a projected seed is null" if saw_null else "the seeds do not span the normal space"
        raise NullNormalDirection(
            f"found {len(accepted)} of {codim} normals ({why}); "
            "the normal bundle is degenerate or the seed order is unsuitable")
    return NormalFrame(Jet.stack(accepted), tuple(eps), tuple(seeds))


def frame_residuals(tangents: Jet, frame: NormalFrame, sig: Signature):
    """(tangency, orthonormality) max-abs deviations at the expansion point."""
    t = tangents.value
    nv = frame.vectors.value
    eta = sig.eta
    tangency = np.max(np.abs(np.einsum("am,im,m->ai", nv, t, eta)))
    gram = np.einsum("am,bm,m->ab", nv, nv, eta)
    ortho = np.max(np.abs(gram - np.diag(frame.eps)))
    return float(tangency), float(ortho)


def completeness_det(tangents: Jet, frame: NormalFrame) -> float:
    """det of the D x D matrix whose columns are Y_,i and N_A."""
    cols = np.concatenate([tangents.value, frame.vectors.value], axis=0)
    return float(np.linalg.det(cols))
