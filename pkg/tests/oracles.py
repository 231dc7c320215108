"""Independent index-loop reference implementations.

Everything here is written with explicit nested loops and hand-expanded
product rules straight from the displayed coordinate formulas, sharing
only the metric derivative tables with the main pipeline.  Slow on
purpose; used to derive and guard golden values.
"""

import numpy as np


class LoopOracle:
    """Curvature quantities from a metric jet by brute-force index loops."""

    def __init__(self, mjet):
        self.n = mjet.n
        self.g = [np.asarray(t) for t in mjet.g.tables]
        self.gi = [np.asarray(t) for t in mjet.ginv.tables]
        self._build_christoffel()
        self._build_riemann()
        self._build_ricci()
        self._build_schouten()
        self._build_weyl()

    # --- connection ----------------------------------------------------------

    def _build_christoffel(self):
        n = self.n
        g1, g2, g3, g4 = (self.g + [None] * 4)[1:5]
        gi0, gi1, gi2, gi3 = (self.gi + [None] * 4)[0:4]

        def s0(l, a, b):
            return g1[b, l, a] + g1[a, l, b] - g1[a, b, l]

        def s1(l, a, b, c):
            return g2[b, l, a, c] + g2[a, l, b, c] - g2[a, b, l, c]

        def s2(l, a, b, c, d):
            return g3[b, l, a, c, d] + g3[a, l, b, c, d] - g3[a, b, l, c, d]

        def s3(l, a, b, c, d, e):
            return g4[b, l, a, c, d, e] + g4[a, l, b, c, d, e] - g4[a, b, l, c, d, e]

        rng = range(n)
        self.G = np.zeros((n, n, n))
        for k in rng:
            for a in rng:
                for b in rng:
                    self.G[k, a, b] = 0.5 * sum(gi0[k, l] * s0(l, a, b) for l in rng)

        self.dG = np.zeros((n, n, n, n))
        for k in rng:
            for a in rng:
                for b in rng:
                    for c in rng:
                        self.dG[k, a, b, c] = 0.5 * sum(
                            gi1[k, l, c] * s0(l, a, b) + gi0[k, l] * s1(l, a, b, c)
                            for l in rng)

        self.d2G = np.zeros((n, n, n, n, n))
        if g3 is not None and gi2 is not None:
            for k in rng:
                for a in rng:
                    for b in rng:
                        for c in rng:
                            for d in rng:
                                self.d2G[k, a, b, c, d] = 0.5 * sum(
                                    gi2[k, l, c, d] * s0(l, a, b)
                                    + gi1[k, l, c] * s1(l, a, b, d)
                                    + gi1[k, l, d] * s1(l, a, b, c)
                                    + gi0[k, l] * s2(l, a, b, c, d)
                                    for l in rng)

        self.d3G = None
        if g4 is not None and gi3 is not None:
            self.d3G = np.zeros((n, n, n, n, n, n))
            for k in rng:
                for a in rng:
                    for b in rng:
                        for c in rng:
                            for d in rng:
                                for e in rng:
                                    self.d3G[k, a, b, c, d, e] = 0.5 * sum(
                                        gi3[k, l, c, d, e] * s0(l, a, b)
                                        + gi2[k, l, c, d] * s1(l, a, b, e)
                                        + gi2[k, l, c, e] * s1(l, a, b, d)
                                        + gi2[k, l, d, e] * s1(l, a, b, c)
                                        + gi1[k, l, c] * s2(l, a, b, d, e)
                                        + gi1[k, l, d] * s2(l, a, b, c, e)
                                        + gi1[k, l, e] * s2(l, a, b, c, d)
                                        + gi0[k, l] * s3(l, a, b, c, d, e)
                                        for l in rng)

    # --- curvature ------------------------------------------------------------

    def _half_riemann(self, a, b, c, d):
        """dGamma g + Gamma Gamma g term, before antisymmetrization."""
        n = self.n
        g0 = self.g[0]
        t = sum(self.dG[m, b, c, a] * g0[m, d] for m in range(n))
        q = sum(self.G[m, b, c] * self.G[r, a, m] * g0[r, d]
                for m in range(n) for r in range(n))
        return t + q

    def _half_riemann_d(self, a, b, c, d, e):
        n = self.n
        g0, g1 = self.g[0], self.g[1]
        t = sum(self.d2G[m, b, c, a, e] * g0[m, d]
                + self.dG[m, b, c, a] * g1[m, d, e] for m in range(n))
        q = 0.0
        for m in range(n):
            for r in range(n):
                q += (self.dG[m, b, c, e] * self.G[r, a, m] * g0[r, d]
                      + self.G[m, b, c] * self.dG[r, a, m, e] * g0[r, d]
                      + self.G[m, b, c] * self.G[r, a, m] * g1[r, d, e])
        return t + q

    def _half_riemann_d2(self, a, b, c, d, e, f):
        n = self.n
        g0, g1, g2 = self.g[0], self.g[1], self.g[2]
        t = sum(self.d3G[m, b, c, a, e, f] * g0[m, d]
                + self.d2G[m, b, c, a, e] * g1[m, d, f]
                + self.d2G[m, b, c, a, f] * g1[m, d, e]
                + self.dG[m, b, c, a] * g2[m, d, e, f] for m in range(n))
        q = 0.0
        for m in range(n):
            for r in range(n):
                gm, gr = self.G[m, b, c], self.G[r, a, m]
                dgm_e, dgm_f = self.dG[m, b, c, e], self.dG[m, b, c, f]
                dgr_e, dgr_f = self.dG[r, a, m, e], self.dG[r, a, m, f]
                q += (self.d2G[m, b, c, e, f] * gr * g0[r, d]
                      + dgm_e * dgr_f * g0[r, d]
                      + dgm_e * gr * g1[r, d, f]
                      + dgm_f * dgr_e * g0[r, d]
                      + gm * self.d2G[r, a, m, e, f] * g0[r, d]
                      + gm * dgr_e * g1[r, d, f]
                      + dgm_f * gr * g1[r, d, e]
                      + gm * dgr_f * g1[r, d, e]
                      + gm * gr * g2[r, d, e, f])
        return t + q

    def _build_riemann(self):
        n = self.n
        self.R = np.zeros((n, n, n, n))
        self.dR = np.zeros((n, n, n, n, n))
        self.d2R = None if self.d3G is None else np.zeros((n,) * 6)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        self.R[a, b, c, d] = (self._half_riemann(a, b, c, d)
                                              - self._half_riemann(b, a, c, d))
                        for e in range(n):
                            self.dR[a, b, c, d, e] = (
                                self._half_riemann_d(a, b, c, d, e)
                                - self._half_riemann_d(b, a, c, d, e))
                            if self.d2R is not None:
                                for f in range(n):
                                    self.d2R[a, b, c, d, e, f] = (
                                        self._half_riemann_d2(a, b, c, d, e, f)
                                        - self._half_riemann_d2(b, a, c, d, e, f))

    def _build_ricci(self):
        n = self.n
        gi0, gi1, gi2 = self.gi[0], self.gi[1], (self.gi + [None, None, None])[2]
        self.Ric = np.zeros((n, n))
        self.dRic = np.zeros((n, n, n))
        self.d2Ric = None if self.d2R is None else np.zeros((n, n, n, n))
        for b in range(n):
            for c in range(n):
                self.Ric[b, c] = sum(gi0[a, d] * self.R[a, b, c, d]
                                     for a in range(n) for d in range(n))
                for e in range(n):
                    self.dRic[b, c, e] = sum(
                        gi1[a, d, e] * self.R[a, b, c, d]
                        + gi0[a, d] * self.dR[a, b, c, d, e]
                        for a in range(n) for d in range(n))
                    if self.d2Ric is not None:
                        for f in range(n):
                            self.d2Ric[b, c, e, f] = sum(
                                gi2[a, d, e, f] * self.R[a, b, c, d]
                                + gi1[a, d, e] * self.dR[a, b, c, d, f]
                                + gi1[a, d, f] * self.dR[a, b, c, d, e]
                                + gi0[a, d] * self.d2R[a, b, c, d, e, f]
                                for a in range(n) for d in range(n))

        self.Rs = sum(gi0[b, c] * self.Ric[b, c] for b in range(n) for c in range(n))
        self.dRs = np.zeros(n)
        for e in range(n):
            self.dRs[e] = sum(gi1[b, c, e] * self.Ric[b, c]
                              + gi0[b, c] * self.dRic[b, c, e]
                              for b in range(n) for c in range(n))
        self.d2Rs = None
        if self.d2Ric is not None:
            self.d2Rs = np.zeros((n, n))
            for e in range(n):
                for f in range(n):
                    self.d2Rs[e, f] = sum(
                        gi2[b, c, e, f] * self.Ric[b, c]
                        + gi1[b, c, e] * self.dRic[b, c, f]
                        + gi1[b, c, f] * self.dRic[b, c, e]
                        + gi0[b, c] * self.d2Ric[b, c, e, f]
                        for b in range(n) for c in range(n))

    def _build_schouten(self):
        n = self.n
        g0, g1, g2 = self.g[0], self.g[1], self.g[2]
        cn = 1.0 / (2.0 * (n - 1))
        self.P = (self.Ric - cn * self.Rs * g0) / (n - 2)
        self.dP = np.zeros((n, n, n))
        for b in range(n):
            for c in range(n):
                for e in range(n):
                    self.dP[b, c, e] = (self.dRic[b, c, e]
                                        - cn * (self.dRs[e] * g0[b, c]
                                                + self.Rs * g1[b, c, e])) / (n - 2)
        self.d2P = None
        if self.d2Ric is not None:
            self.d2P = np.zeros((n, n, n, n))
            for b in range(n):
                for c in range(n):
                    for e in range(n):
                        for f in range(n):
                            self.d2P[b, c, e, f] = (
                                self.d2Ric[b, c, e, f]
                                - cn * (self.d2Rs[e, f] * g0[b, c]
                                        + self.dRs[e] * g1[b, c, f]
                                        + self.dRs[f] * g1[b, c, e]
                                        + self.Rs * g2[b, c, e, f])) / (n - 2)

    def _build_weyl(self):
        n = self.n
        g0, g1, g2 = self.g[0], self.g[1], self.g[2]

        def w_term(p, dp, d2p, gg, dgg, d2gg, a, c, b, d, e=None, f=None):
            if e is None:
                return p[a, c] * gg[b, d]
            if f is None:
                return dp[a, c, e] * gg[b, d] + p[a, c] * dgg[b, d, e]
            return (d2p[a, c, e, f] * gg[b, d] + dp[a, c, e] * dgg[b, d, f]
                    + dp[a, c, f] * dgg[b, d, e] + p[a, c] * d2gg[b, d, e, f])

        self.W = np.zeros((n, n, n, n))
        self.dW = np.zeros((n, n, n, n, n))
        self.d2W = None if self.d2P is None else np.zeros((n,) * 6)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        args = (self.P, self.dP, self.d2P, g0, g1, g2)
                        self.W[a, b, c, d] = (
                            self.R[a, b, c, d]
                            + w_term(*args, a, c, b, d) - w_term(*args, b, c, a, d)
                            + w_term(*args, b, d, a, c) - w_term(*args, a, d, b, c))
                        for e in range(n):
                            self.dW[a, b, c, d, e] = (
                                self.dR[a, b, c, d, e]
                                + w_term(*args, a, c, b, d, e)
                                - w_term(*args, b, c, a, d, e)
                                + w_term(*args, b, d, a, c, e)
                                - w_term(*args, a, d, b, c, e))
                            if self.d2W is not None:
                                for f in range(n):
                                    self.d2W[a, b, c, d, e, f] = (
                                        self.d2R[a, b, c, d, e, f]
                                        + w_term(*args, a, c, b, d, e, f)
                                        - w_term(*args, b, c, a, d, e, f)
                                        + w_term(*args, b, d, a, c, e, f)
                                        - w_term(*args, a, d, b, c, e, f))

    # --- covariant derivatives and the named tensors --------------------------

    def nabla_schouten(self):
        n = self.n
        out = np.zeros((n, n, n))
        for b in range(n):
            for c in range(n):
                for m in range(n):
                    out[b, c, m] = self.dP[b, c, m] - sum(
                        self.P[p, c] * self.G[p, m, b]
                        + self.P[b, p] * self.G[p, m, c] for p in range(n))
        return out

    def nabla2_schouten(self):
        n = self.n
        np_first = self.nabla_schouten()
        out = np.zeros((n, n, n, n))
        for b in range(n):
            for c in range(n):
                for m in range(n):
                    for f in range(n):
                        partial = self.d2P[b, c, m, f] - sum(
                            self.dP[p, c, f] * self.G[p, m, b]
                            + self.P[p, c] * self.dG[p, m, b, f]
                            + self.dP[b, p, f] * self.G[p, m, c]
                            + self.P[b, p] * self.dG[p, m, c, f]
                            for p in range(n))
                        out[b, c, m, f] = partial - sum(
                            np_first[p, c, m] * self.G[p, f, b]
                            + np_first[b, p, m] * self.G[p, f, c]
                            + np_first[b, c, p] * self.G[p, f, m]
                            for p in range(n))
        return out

    def cotton(self):
        n = self.n
        nab = self.nabla_schouten()
        out = np.zeros((n, n, n))
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    out[a, b, c] = nab[b, c, a] - nab[a, c, b]
        return out

    def nabla_weyl(self):
        n = self.n
        out = np.zeros((n, n, n, n, n))
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        for e in range(n):
                            out[a, b, c, d, e] = self.dW[a, b, c, d, e] - sum(
                                self.W[p, b, c, d] * self.G[p, e, a]
                                + self.W[a, p, c, d] * self.G[p, e, b]
                                + self.W[a, b, p, d] * self.G[p, e, c]
                                + self.W[a, b, c, p] * self.G[p, e, d]
                                for p in range(n))
        return out

    def nabla2_weyl(self):
        n = self.n
        nw = self.nabla_weyl()
        out = np.zeros((n,) * 6)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    for d in range(n):
                        for e in range(n):
                            for f in range(n):
                                partial = self.d2W[a, b, c, d, e, f] - sum(
                                    self.dW[p, b, c, d, f] * self.G[p, e, a]
                                    + self.W[p, b, c, d] * self.dG[p, e, a, f]
                                    + self.dW[a, p, c, d, f] * self.G[p, e, b]
                                    + self.W[a, p, c, d] * self.dG[p, e, b, f]
                                    + self.dW[a, b, p, d, f] * self.G[p, e, c]
                                    + self.W[a, b, p, d] * self.dG[p, e, c, f]
                                    + self.dW[a, b, c, p, f] * self.G[p, e, d]
                                    + self.W[a, b, c, p] * self.dG[p, e, d, f]
                                    for p in range(n))
                                out[a, b, c, d, e, f] = partial - sum(
                                    nw[p, b, c, d, e] * self.G[p, f, a]
                                    + nw[a, p, c, d, e] * self.G[p, f, b]
                                    + nw[a, b, p, d, e] * self.G[p, f, c]
                                    + nw[a, b, c, p, e] * self.G[p, f, d]
                                    + nw[a, b, c, d, p] * self.G[p, f, e]
                                    for p in range(n))
        return out

    def bach(self):
        n = self.n
        gi0 = self.gi[0]
        n2w = self.nabla2_weyl()
        out = np.zeros((n, n))
        for a in range(n):
            for b in range(n):
                div = sum(gi0[k, f] * gi0[l, e] * n2w[a, k, b, l, e, f]
                          for k in range(n) for f in range(n)
                          for l in range(n) for e in range(n))
                ric = 0.5 * sum(gi0[k, m] * gi0[l, p] * self.Ric[m, p]
                                * self.W[a, k, b, l]
                                for k in range(n) for m in range(n)
                                for l in range(n) for p in range(n))
                out[a, b] = div + ric
        return out

    def gauge_vectors(self):
        n = self.n
        gi0, g1 = self.gi[0], self.g[1]
        gamma_up = np.zeros(n)
        for k in range(n):
            gamma_up[k] = sum(gi0[a, b] * self.G[k, a, b]
                              for a in range(n) for b in range(n))
        tilde = np.zeros(n)
        for k in range(n):
            acc = 0.0
            for r in range(n):
                for a in range(n):
                    for b in range(n):
                        acc += gi0[k, r] * gi0[k, a] * gi0[k, b] * g1[a, b, r]
            tilde[k] = -(n - 2) / 2.0 * acc / gi0[k, k]
        return gamma_up, tilde
