"""Intrinsic and extrinsic tensors at a chart point and the Gauss, Codazzi,
Ricci and frame-reconstruction residuals built from them.

Index layout (all numpy arrays unless noted):

* ``gamma[k, i, j]``      Gamma^k_ij            (jet, order 1)
* ``dgamma[k, i, j, l]``  d_l Gamma^k_ij
* ``R[n, i, j, k]``       R_nijk, fully lowered
* ``b[i, j, A]``          second fundamental form (jet, order 1)
* ``A[i, A, B]``          twisting vector eta(N_A, d_i N_B) (jet, order 1)
* ``cov_b[i, j, C, k]``   b_{ijC;k}
* ``cov_A[j, A, B, k]``   A_{jAB;k}

Normal indices are raised with the diagonal ``eps`` of the orthonormal
frame; normal indices never pick up connection terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import EmbeddingMap, Signature
from .frame import (
    InducedMetric, NormalFrame, build_normal_frame, eta_inner, induced_metric,
)
from .jets import Jet, jet_eval

__all__ = [
    "ChristoffelSymbols", "RiemannTensor", "ExtrinsicData", "ResidualSet",
    "Corruption", "PointGeometry",
    "christoffel", "metric_compatibility", "riemann", "riemann_symmetry_defects",
    "second_fundamental_form", "twisting_vector", "covariant_derivatives",
    "gauss_rhs", "codazzi_sides", "ricci_sides", "gauss_residual",
    "codazzi_residual", "ricci_residual", "reconstruction_residual",
    "analyze_point", "residual_set",
    "ricci_tensor", "scalar_curvature", "kretschmann", "b_norm_sq",
    "mean_curvature_sq", "induced_signature", "invariants",
]


@dataclass(frozen=True)
class ChristoffelSymbols:
    gamma: Jet              # (n, n, n) [k, i, j]

    @property
    def value(self) -> np.ndarray:
        return self.gamma.value

    @property
    def derivative(self) -> np.ndarray:
        """[k, i, j, l] = d_l Gamma^k_ij."""
        return self.gamma.grad().value


@dataclass(frozen=True)
class RiemannTensor:
    R: np.ndarray           # (n, n, n, n) lowered R_nijk
    R_up: np.ndarray        # (n, n, n, n) R^m_ijk


@dataclass(frozen=True)
class ExtrinsicData:
    b: Jet                  # (n, n, m)
    A: Jet                  # (n, m, m)
    cov_b: np.ndarray = None    # (n, n, m, n)
    cov_A: np.ndarray = None    # (n, m, m, n)


@dataclass(frozen=True)
class ResidualSet:
    gauss: float
    codazzi: float
    ricci: float
    gauss_formula: float
    weingarten: float
    scale: float
    scales: dict = field(default_factory=dict)

    @property
    def reconstruction(self) -> float:
        return max(self.gauss_formula, self.weingarten)

    def as_dict(self) -> dict:
        return {"gauss": self.gauss, "codazzi": self.codazzi, "ricci": self.ricci,
                "reconstruction": self.reconstruction}

    def passes(self, tol: float) -> bool:
        bound = tol * max(self.scale, 1.0)
        return all(v <= bound for v in self.as_dict().values())


@dataclass(frozen=True)
class Corruption:
    """Deliberate damage to b or A before the residuals are evaluated."""

    target: str         # "b" or "A"
    mode: str           # "scale" or "add"
    magnitude: float

    def __post_init__(self):
        if self.target not in ("b", "A"):
            raise ValueError(f"corruption target must be 'b' or 'A', not {self.target!r}")
        if self.mode not in ("scale", "add"):
            raise ValueError(f"corruption mode must be 'scale' or 'add', not {self.mode!r}")
        if not (self.magnitude >= 0 and np.isfinite(self.magnitude)):
            raise ValueError("corruption magnitude must be finite and >= 0")

    @classmethod
    def parse(cls, text: str) -> "Corruption":
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected TENSOR:MODE:MAGNITUDE, got {text!r}")
        try:
            magnitude = float(parts[2])
        except ValueError:
            raise ValueError(f"bad corruption magnitude {parts[2]!r}") from None
        return cls(parts[0], parts[1], magnitude)

    def __str__(self):
        return f"{self.target}:{self.mode}:{self.magnitude!r}"

    def apply(self, tensor: Jet) -> Jet:
        if self.mode == "scale":
            return tensor * self.magnitude
        return tensor + self.magnitude


# ---------------------------------------------------------------------------
# intrinsic

def christoffel(metric: InducedMetric) -> ChristoffelSymbols:
    """Levi-Civita symbols Gamma^k_ij = 1/2 g^km (d_i g_mj + d_j g_mi - d_m g_ij)."""
    dg = metric.g.grad()                                   # [a, b, c] = d_c g_ab
    # lowered[m, i, j] = d_i g_mj + d_j g_mi - d_m g_ij
    lowered = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
    g_inv = metric.g_inv
    n = g_inv.shape[0]
    gamma = (g_inv.reshape(n, n, 1, 1) * lowered.reshape(1, n, n, n)).sum(axis=1) * 0.5
    # exact symmetry in (i, j)
    i, j = np.tril_indices(n, -1)
    coeffs = gamma.coeffs.copy()
    coeffs[:, i, j] = coeffs[:, j, i]
    return ChristoffelSymbols(Jet(coeffs, gamma.n, gamma.order))


def metric_compatibility(metric: InducedMetric, chris: ChristoffelSymbols) -> float:
    """max |d_k g_ij - Gamma^m_ik g_mj - Gamma^m_jk g_im| at the point."""
    dg = metric.g.grad().value                              # [i, j, k]
    g = metric.g.value
    gam = chris.value
    lhs = dg - np.einsum("mik,mj->ijk", gam, g) - np.einsum("mjk,im->ijk", gam, g)
    return float(np.max(np.abs(lhs)))


def riemann(chris: ChristoffelSymbols, metric: InducedMetric) -> RiemannTensor:
    """R^m_ijk = d_j Gamma^m_ik - d_k Gamma^m_ij + Gamma^m_jl Gamma^l_ik - Gamma^m_kl Gamma^l_ij,
    lowered on the first index with g.  With this convention the unit sphere has
    R_{theta phi theta phi} = +sin^2(theta)."""
    gam = chris.value
    dgam = chris.derivative                                 # [m, i, j, l]
    R_up = (np.einsum("mikj->mijk", dgam) - dgam
            + np.einsum("mjl,lik->mijk", gam, gam) - np.einsum("mkl,lij->mijk", gam, gam))
    R = np.einsum("nm,mijk->nijk", metric.g.value, R_up)
    return RiemannTensor(R, R_up)


def riemann_symmetry_defects(R: np.ndarray) -> dict:
    return {
        "antisymmetry": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))),
        "pair_symmetry": float(np.max(np.abs(R - R.transpose(2, 3, 0, 1)))),
        "bianchi": float(np.max(np.abs(R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)))),
    }


# ---------------------------------------------------------------------------
# extrinsic

def covariant_hessian(Y: Jet, tangents: Jet, chris: ChristoffelSymbols) -> Jet:
    """Y^mu_{;ij} = Y^mu_{,ij} - Gamma^r_ij Y^mu_{,r}, laid out as (n, n, D)."""
    hess = Y.grad().grad().transpose(1, 2, 0)               # [i, j, mu]
    n = tangents.shape[0]
    corr = (chris.gamma.reshape(n, n, n, 1) * tangents.reshape(n, 1, 1, -1)).sum(axis=0)
    return hess - corr


def second_fundamental_form(Y: Jet, frame: NormalFrame, chris: ChristoffelSymbols,
                            sig: Signature, tangents: Jet = None) -> Jet:
    """b_ijA = eta(Y_{;ij}, N_A) as an (n, n, D-n) jet of order 1."""
    if tangents is None:
        tangents = Y.grad().transpose(1, 0)
    cov = covariant_hessian(Y, tangents, chris)
    b = eta_inner(cov[:, :, None, :], frame.vectors[None, None, :, :], sig)
    n = b.shape[0]
    i, j = np.tril_indices(n, -1)
    coeffs = b.coeffs.copy()
    coeffs[i, j] = coeffs[j, i]
    return Jet(coeffs, b.n, b.order)


def twisting_vector(frame: NormalFrame, sig: Signature) -> Jet:
    """A_iAB = eta(N_A, d_i N_B) as an (n, D-n, D-n) jet of order 1.

    Differentiating eta(N_A, N_B) = const shows A is antisymmetric in (A, B);
    the upper triangle is computed and mirrored so this holds exactly (in
    particular A vanishes identically in codimension 1).
    """
    N = frame.vectors
    dN = N.grad().transpose(2, 0, 1)                        # [i, B, mu]
    A = eta_inner(N[None, :, None, :], dN[:, None, :, :], sig)
    m = frame.codim
    lo, hi = np.tril_indices(m, 0), np.triu_indices(m, 1)
    coeffs = A.coeffs.copy()
    coeffs[:, lo[0], lo[1]] = 0.0
    coeffs[:, hi[1], hi[0]] = -coeffs[:, hi[0], hi[1]]
    return Jet(coeffs, A.n, A.order)


def covariant_derivatives(b: Jet, A: Jet, chris: ChristoffelSymbols) -> ExtrinsicData:
    gam = chris.value
    bv, Av = b.value, A.value
    cov_b = (b.grad().value
             - np.einsum("mik,mjc->ijck", gam, bv)
             - np.einsum("mjk,imc->ijck", gam, bv))
    cov_A = A.grad().value - np.einsum("mjk,mab->jabk", gam, Av)
    return ExtrinsicData(b, A, cov_b, cov_A)


# ---------------------------------------------------------------------------
# the three integrability identities

def gauss_rhs(b: np.ndarray, eps) -> np.ndarray:
    """g^AB (b_ikA b_jnB - b_ijA b_knB) laid out as [n, i, j, k]."""
    e = np.asarray(eps, dtype=float)
    return (np.einsum("ika,jna,a->nijk", b, b, e)
            - np.einsum("ija,kna,a->nijk", b, b, e))


def codazzi_sides(ext: ExtrinsicData, eps):
    """LHS b_{ijC;k} - b_{ikC;j} and its RHS, both laid out as [i, j, k, C].

    The twisting vector is eta(N_A, d_i N_B); with that orientation the
    normal-connection term reads g^AB (b_ikA A_jCB - b_ijA A_kCB).
    """
    e = np.asarray(eps, dtype=float)
    cb = ext.cov_b
    lhs = np.einsum("ijck->ijkc", cb) - np.einsum("ikcj->ijkc", cb)
    b, A = ext.b.value, ext.A.value
    rhs = (np.einsum("ika,jca,a->ijkc", b, A, e)
           - np.einsum("ija,kca,a->ijkc", b, A, e))
    return lhs, rhs


def ricci_sides(ext: ExtrinsicData, g_inv: np.ndarray, eps):
    """A_{jAB;k} - A_{kAB;j} and g^MN (A_jAM A_kNB - A_kAM A_jNB)
    + g^ml (b_kmA b_ljB - b_jmA b_lkB), laid out as [j, k, A, B]."""
    e = np.asarray(eps, dtype=float)
    cA = ext.cov_A
    lhs = np.einsum("jabk->jkab", cA) - np.einsum("kabj->jkab", cA)
    b, A = ext.b.value, ext.A.value
    rhs = (np.einsum("jam,kmb,m->jkab", A, A, e) - np.einsum("kam,jmb,m->jkab", A, A, e)
           + np.einsum("ml,kma,ljb->jkab", g_inv, b, b)
           - np.einsum("ml,jma,lkb->jkab", g_inv, b, b))
    return lhs, rhs


def _maxabs(*arrays) -> float:
    return float(max((np.max(np.abs(a)) if np.size(a) else 0.0) for a in arrays))


def gauss_residual(R: RiemannTensor, b: Jet, eps) -> float:
    return _maxabs(R.R - gauss_rhs(b.value, eps))


def codazzi_residual(ext: ExtrinsicData, eps) -> float:
    lhs, rhs = codazzi_sides(ext, eps)
    return _maxabs(lhs - rhs)


def ricci_residual(ext: ExtrinsicData, g_inv, eps) -> float:
    g_inv = g_inv.value if isinstance(g_inv, Jet) else g_inv
    lhs, rhs = ricci_sides(ext, g_inv, eps)
    return _maxabs(lhs - rhs)


def _reconstruction_sides(Y, tangents, frame, chris, b, A, metric):
    e = np.asarray(frame.eps, dtype=float)
    T = tangents.value                                      # [i, mu]
    N = frame.vectors.value                                 # [A, mu]
    hess = Y.grad().grad().value                            # [mu, i, j]
    gauss_lhs = np.einsum("mij->ijm", hess)
    gauss_rhs_ = (np.einsum("ija,a,am->ijm", b.value, e, N)
                  + np.einsum("rij,rm->ijm", chris.value, T))
    dN = frame.vectors.grad().value                         # [A, mu, j]
    wein_lhs = np.einsum("amj->ajm", dN)
    # d_j N_A = -g^ml b_jmA Y_,l + g^MN A_jMA N_N
    wein_rhs = (-np.einsum("ml,jma,lu->aju", metric.g_inv.value, b.value, T)
                + np.einsum("jma,m,mu->aju", A.value, e, N))
    return (gauss_lhs, gauss_rhs_), (wein_lhs, wein_rhs)


def reconstruction_residual(Y: Jet, tangents: Jet, frame: NormalFrame, chris: ChristoffelSymbols,
                            b: Jet, A: Jet, metric: InducedMetric):
    """(Gauss formula, Weingarten formula) max-abs residuals in ambient components."""
    (gl, gr), (wl, wr) = _reconstruction_sides(Y, tangents, frame, chris, b, A, metric)
    return _maxabs(gl - gr), _maxabs(wl - wr)


# ---------------------------------------------------------------------------
# scalar invariants

def ricci_tensor(R: RiemannTensor) -> np.ndarray:
    return np.einsum("mimj->ij", R.R_up)


def scalar_curvature(R: RiemannTensor, g_inv: np.ndarray) -> float:
    return float(np.einsum("ij,ij->", g_inv, ricci_tensor(R)))


def kretschmann(R: np.ndarray, g_inv: np.ndarray) -> float:
    R_up = np.einsum("na,ib,jc,kd,abcd->nijk", g_inv, g_inv, g_inv, g_inv, R)
    return float(np.einsum("nijk,nijk->", R, R_up))


def b_norm_sq(b: np.ndarray, g_inv: np.ndarray, eps) -> float:
    """b_ijA b_klB g^AB g^ik g^jl: frame independent."""
    e = np.asarray(eps, dtype=float)
    return float(np.einsum("ija,kla,a,ik,jl->", b, b, e, g_inv, g_inv))


def mean_curvature_sq(b: np.ndarray, g_inv: np.ndarray, eps) -> float:
    """g^AB H_A H_B with H_A = g^ij b_ijA / n."""
    n = g_inv.shape[0]
    H = np.einsum("ij,ija->a", g_inv, b) / n
    return float(np.sum(np.asarray(eps, dtype=float) * H * H))


# ---------------------------------------------------------------------------
# pipeline

@dataclass(frozen=True)
class PointGeometry:
    point: tuple
    Y: Jet
    tangents: Jet
    metric: InducedMetric
    frame: NormalFrame
    christoffel: ChristoffelSymbols
    riemann: RiemannTensor
    extrinsic: ExtrinsicData
    residuals: ResidualSet


def residual_set(Y, tangents, metric, frame, chris, R, ext) -> ResidualSet:
    eps = frame.eps
    g_inv = metric.g_inv.value
    grhs = gauss_rhs(ext.b.value, eps)
    clhs, crhs = codazzi_sides(ext, eps)
    rlhs, rrhs = ricci_sides(ext, g_inv, eps)
    (gl, gr), (wl, wr) = _reconstruction_sides(Y, tangents, frame, chris, ext.b, ext.A, metric)
    scales = {
        "gauss": _maxabs(R.R, grhs),
        "codazzi": _maxabs(clhs, crhs),
        "ricci": _maxabs(rlhs, rrhs),
        "reconstruction": _maxabs(gl, gr, wl, wr),
    }
    return ResidualSet(
        gauss=_maxabs(R.R - grhs),
        codazzi=_maxabs(clhs - crhs),
        ricci=_maxabs(rlhs - rrhs),
        gauss_formula=_maxabs(gl - gr),
        weingarten=_maxabs(wl - wr),
        scale=max(scales.values()),
        scales=scales,
    )


def analyze_point(emb: EmbeddingMap, point, seed_order=None,
                  corruption: Corruption = None) -> PointGeometry:
    """Run the whole pipeline at one chart point.

    jets of Y -> induced metric -> normal frame -> Christoffels, Riemann ->
    b, A and their covariant derivatives -> residuals.  Raises
    DegenerateMetric / NullNormalDirection / EvalError when the point cannot
    be framed.
    """
    sig = emb.signature
    Y = jet_eval(emb, point)
    tangents = Y.grad().transpose(1, 0)                     # [i, mu], order 2
    metric = induced_metric(tangents, sig)
    frame = build_normal_frame(tangents, metric, sig, seed_order)
    chris = christoffel(metric)
    R = riemann(chris, metric)
    b = second_fundamental_form(Y, frame, chris, sig, tangents)
    A = twisting_vector(frame, sig)
    if corruption is not None:
        if corruption.target == "b":
            b = corruption.apply(b)
        else:
            A = corruption.apply(A)
    ext = covariant_derivatives(b, A, chris)
    res = residual_set(Y, tangents, metric, frame, chris, R, ext)
    return PointGeometry(tuple(float(x) for x in point), Y, tangents, metric, frame,
                         chris, R, ext, res)


def induced_signature(metric: InducedMetric) -> tuple:
    """Signs of the eigenvalues of g at the point, ascending."""
    return tuple(int(s) for s in np.sign(np.linalg.eigvalsh(metric.g.value)))


def invariants(geom: PointGeometry) -> dict:
    """Frame-independent scalars at the point."""
    g_inv = geom.metric.g_inv.value
    b = geom.extrinsic.b.value
    eps = geom.frame.eps
    return {
        "scalar_curvature": scalar_curvature(geom.riemann, g_inv),
        "kretschmann": kretschmann(geom.riemann.R, g_inv),
        "b_norm_sq": b_norm_sq(b, g_inv, eps),
        "mean_curvature_sq": mean_curvature_sq(b, g_inv, eps),
        "induced_signature": induced_signature(geom.metric),
    }
