"""Sympy reference computations used as independent oracles in the tests."""

import sympy as sp


def parse_components(emb):
    """Sympy expressions for the components of an EmbeddingMap."""
    syms = sp.symbols(emb.variables, real=True)
    from submanifold.dsl import format_expr
    local = dict(zip(emb.variables, syms))
    comps = [sp.sympify(format_expr(c).replace("^", "**"), locals=local) for c in emb.components]
    return syms, comps


def induced_metric(emb):
    syms, comps = parse_components(emb)
    eta = emb.signature.signs
    n = len(syms)
    J = [[sp.diff(c, s) for s in syms] for c in comps]
    g = sp.Matrix(n, n, lambda i, j: sum(eta[m] * J[m][i] * J[m][j] for m in range(len(comps))))
    return syms, g


def christoffel(g, syms):
    n = len(syms)
    gi = g.inv()
    return [[[sp.Rational(1, 2) * sum(gi[k, m] * (sp.diff(g[m, j], syms[i]) + sp.diff(g[m, i], syms[j])
                                                  - sp.diff(g[i, j], syms[m])) for m in range(n))
              for j in range(n)] for i in range(n)] for k in range(n)]


def riemann_lowered(g, syms):
    """R_nijk with R^m_ijk = d_j G^m_ik - d_k G^m_ij + G^m_jl G^l_ik - G^m_kl G^l_ij."""
    n = len(syms)
    G = christoffel(g, syms)

    def up(m, i, j, k):
        return (sp.diff(G[m][i][k], syms[j]) - sp.diff(G[m][i][j], syms[k])
                + sum(G[m][j][l] * G[l][i][k] - G[m][k][l] * G[l][i][j] for l in range(n)))

    R_up = {(m, i, j, k): up(m, i, j, k) for m in range(n) for i in range(n)
            for j in range(n) for k in range(n)}
    return {(a, i, j, k): sum(g[a, m] * R_up[(m, i, j, k)] for m in range(n))
            for a in range(n) for i in range(n) for j in range(n) for k in range(n)}, R_up


def scalar_curvature(g, syms):
    n = len(syms)
    _, R_up = riemann_lowered(g, syms)
    gi = g.inv()
    ric = [[sum(R_up[(m, i, m, j)] for m in range(n)) for j in range(n)] for i in range(n)]
    return sum(gi[i, j] * ric[i][j] for i in range(n) for j in range(n))
