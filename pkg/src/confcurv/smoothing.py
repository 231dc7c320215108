"""Frequency smoothing of rough matrix symbols on a discrete torus.

A symbol p(x, xi) with limited smoothness in x is split as p = p# + pb,
where p# low-passes the x-dependence scale by scale over a dyadic
partition of unity in xi.  The split preserves ellipticity (up to the
factor 1/2) above a computable frequency, and the pointwise pseudoinverse
of p# quantizes to a leading-order left inverse on band-limited inputs.
All transforms are plain FFTs on periodic grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadRegularity,
    DegenerateFit,
    InputError,
    NoEllipticityBand,
    PartitionCoverage,
    SingularNormalMatrix,
)

__all__ = [
    "transition_profile", "lowpass_profile", "LPBundle", "TorusSymbol",
    "synth_zygmund_symbol", "smooth_split", "SplitResult",
    "regularity_rate", "RateFit", "measure_ellipticity",
    "ellipticity_preservation", "PreservationResult",
    "parametrix_residual", "ResidualTable",
]


def transition_profile(t):
    """Smooth descent from 1 at t<=0 to 0 at t>=1 via exp(1 - 1/(1-t^2))."""
    t = np.asarray(t, dtype=np.float64)
    out = np.ones_like(t)
    out[t >= 1.0] = 0.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - tm ** 2))
    return out


def lowpass_profile(r, threshold=1.0):
    """Radial bump phi: 1 on |xi| <= threshold, 0 beyond 2*threshold."""
    r = np.abs(np.asarray(r, dtype=np.float64))
    return transition_profile(r / threshold - 1.0)


@dataclass
class LPBundle:
    """Dyadic partition of unity with per-scale smoothing exponents."""

    levels: int                  # J: scales 0..J
    delta: float
    threshold: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta}")
        self.eps = np.array([2.0 ** (-j * self.delta)
                             for j in range(self.levels + 1)])

    def band_radius(self):
        return 2.0 ** self.levels * self.threshold

    def psi(self, radii):
        """Partition weights psi_j(|xi|), shape (levels+1,) + radii.shape."""
        radii = np.asarray(radii, dtype=np.float64)
        phis = [lowpass_profile(radii / 2.0 ** j, self.threshold)
                for j in range(self.levels + 1)]
        out = [phis[0]]
        for j in range(1, self.levels + 1):
            out.append(phis[j] - phis[j - 1])
        return np.stack(out, axis=0)

    def partition_defect(self, radii):
        radii = np.asarray(radii, dtype=np.float64)
        inside = radii <= self.band_radius()
        if not np.any(inside):
            return 0.0
        total = self.psi(radii[inside]).sum(axis=0)
        return float(np.abs(total - 1.0).max())


@dataclass
class TorusSymbol:
    """Samples of an M x N symbol on an x-grid times a xi-lattice.

    ``samples`` has the x axes first, then the lattice axis, then (M, N):
    shape ``(G,)*d + (K, M, N)``.  xi points are integer frequency vectors.
    """

    d: int
    grid: int
    shape: tuple
    order: float                 # m
    regularity: float            # r of the x-dependence
    xi_points: np.ndarray        # (K, d) integers
    samples: np.ndarray
    seed: int | None = None

    @property
    def xi_norms(self):
        return np.linalg.norm(self.xi_points, axis=1)

    @property
    def x_freq_radii(self):
        freqs = [np.fft.fftfreq(self.grid) * self.grid for _ in range(self.d)]
        mesh = np.meshgrid(*freqs, indexing="ij")
        return np.sqrt(sum(m ** 2 for m in mesh))

    def profile_at(self, k):
        """x-profile of the symbol at lattice index k: shape (G,)*d + (M, N)."""
        return self.samples[..., k, :, :]

    def growth_constant(self):
        """Smallest C with ||p(x, xi)|| <= C <xi>^m over all samples."""
        sup = np.linalg.svd(self.samples, compute_uv=False)[..., 0]
        weights = (1.0 + self.xi_norms ** 2) ** (self.order / 2.0)
        per_xi = sup.max(axis=tuple(range(self.d)))
        return float((per_xi / weights).max())


def _full_line_lattice(grid):
    return (np.fft.fftfreq(grid) * grid).astype(np.int64)[:, None]


def _ray_lattice_2d(max_radius):
    """Sparse 2-d lattice along coordinate and diagonal rays."""
    points = set()
    r = 1
    while r <= max_radius:
        for direction in ((1, 0), (0, 1), (1, 1), (1, -1)):
            points.add((r * direction[0], r * direction[1]))
        r *= 2
    extra = [1, 3, 5, 12, 24, 48]
    for r in extra:
        if r <= max_radius:
            points.add((r, 0))
    points.add((0, 0))
    return np.array(sorted(points), dtype=np.int64)


def synth_zygmund_symbol(d: int, shape: tuple, m: float, r: float, seed: int,
                         grid: int = 1024, amplitude: float = 0.25,
                         n_scales: int | None = None,
                         xi_points=None) -> TorusSymbol:
    """Deterministic rough test symbol with a known x-regularity exponent.

    p(x, xi) = (a0 + amplitude * sum_j 2^{-jr} A_j cos(2^j theta_j . x + phase_j))
               * <xi>^m, with an injective constant anchor a0 and
    unit-spectral-norm random matrices A_j: a lacunary series whose
    Hölder-Zygmund exponent in x is exactly r.
    """
    if not 0.0 < r <= 3.0:
        raise BadRegularity(f"regularity must lie in (0, 3], got {r}")
    if m < 0:
        raise InputError(f"order must be nonnegative, got {m}")
    if d not in (1, 2):
        raise InputError(f"spatial dimension must be 1 or 2, got {d}")
    mm, nn = shape
    if mm < nn:
        raise InputError("need M >= N for an overdetermined elliptic anchor")
    rng = np.random.default_rng(seed)
    if n_scales is None:
        n_scales = int(np.log2(grid)) - 1
    if 2 ** n_scales > grid // 2:
        raise InputError(f"{n_scales} scales exceed the grid Nyquist range")

    a0 = np.zeros((mm, nn))
    a0[:nn, :nn] = np.eye(nn)
    if mm > nn:
        a0[nn:, :] = 0.3

    axes = [np.arange(grid) * (2.0 * np.pi / grid) for _ in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    z = np.zeros(mesh[0].shape + (mm, nn))
    directions_2d = ((1, 0), (0, 1), (1, 1), (1, -1))
    for j in range(n_scales + 1):
        a_j = rng.normal(size=(mm, nn))
        a_j /= np.linalg.svd(a_j, compute_uv=False)[0]
        phase_j = rng.uniform(0.0, 2.0 * np.pi)
        if d == 1:
            carrier = np.cos(2 ** j * mesh[0] + phase_j)
        else:
            theta = directions_2d[int(rng.integers(len(directions_2d)))]
            carrier = np.cos(2 ** j * (theta[0] * mesh[0] + theta[1] * mesh[1])
                             + phase_j)
        z += 2.0 ** (-j * r) * carrier[..., None, None] * a_j
    coeff = a0 + amplitude * z

    if xi_points is None:
        xi_points = _full_line_lattice(grid) if d == 1 else _ray_lattice_2d(grid // 2)
    else:
        xi_points = np.asarray(xi_points, dtype=np.int64).reshape(-1, d)
    weights = (1.0 + np.linalg.norm(xi_points, axis=1) ** 2) ** (m / 2.0)
    samples = coeff[..., None, :, :] * weights[:, None, None]
    return TorusSymbol(d=d, grid=grid, shape=(mm, nn), order=m, regularity=r,
                       xi_points=xi_points, samples=samples, seed=seed)


def lowpass_x(profile, eps, grid, d, threshold=1.0):
    """J_eps in x: Fourier multiplier phi(eps |k|) on the periodic grid."""
    freqs = [np.fft.fftfreq(grid) * grid for _ in range(d)]
    mesh = np.meshgrid(*freqs, indexing="ij")
    radii = np.sqrt(sum(f ** 2 for f in mesh))
    mult = lowpass_profile(eps * radii, threshold)
    axes = tuple(range(d))
    spectrum = np.fft.fftn(profile, axes=axes)
    shape_pad = mult.shape + (1,) * (profile.ndim - d)
    return np.fft.ifftn(spectrum * mult.reshape(shape_pad), axes=axes).real


@dataclass
class SplitResult:
    symbol: TorusSymbol
    bundle: LPBundle
    p_sharp: np.ndarray
    p_flat: np.ndarray
    flat_shell_radii: list = field(default_factory=list)
    flat_shell_sup: list = field(default_factory=list)
    flat_decay_exponent: float | None = None

    @property
    def reconstruction_defect(self):
        total = self.p_sharp + self.p_flat
        return float(np.abs(total - self.symbol.samples).max())


def _spectral_sup(block):
    """sup over x of the spectral norm, for an (..., M, N) block."""
    return float(np.linalg.svd(block, compute_uv=False)[..., 0].max())


def smooth_split(p: TorusSymbol, lp: LPBundle) -> SplitResult:
    """p = p# + pb with p#(x, xi) = sum_j [J_{eps_j} p(., xi)] psi_j(xi)."""
    radii = p.xi_norms
    if radii.max() > lp.band_radius() + 1e-9:
        raise PartitionCoverage(
            f"lattice radius {radii.max():.1f} exceeds the partition band "
            f"{lp.band_radius():.1f}; increase levels")
    psi = lp.psi(radii)                      # (J+1, K)
    p_sharp = np.zeros_like(p.samples)
    for j in range(lp.levels + 1):
        active = psi[j] > 0.0
        if not np.any(active):
            continue
        smoothed = lowpass_x(p.samples[..., active, :, :], lp.eps[j],
                             p.grid, p.d)
        weights = psi[j][active][:, None, None]
        p_sharp[..., active, :, :] += smoothed * weights
    p_flat = p.samples - p_sharp

    # sup-norm decay of pb over dyadic shells 2^{j-1} < |xi| <= 2^j
    shell_radii, shell_sup = [], []
    j = 1
    while 2 ** j <= radii.max() + 1e-9:
        mask = (radii > 2 ** (j - 1)) & (radii <= 2 ** j)
        if np.any(mask):
            sup = _spectral_sup(p_flat[..., mask, :, :])
            if sup > 0.0:
                shell_radii.append(2.0 ** j)
                shell_sup.append(sup)
        j += 1
    exponent = None
    if len(shell_sup) >= 3:
        exponent = float(np.polyfit(np.log2(shell_radii),
                                    np.log2(shell_sup), 1)[0])
    return SplitResult(symbol=p, bundle=lp, p_sharp=p_sharp, p_flat=p_flat,
                       flat_shell_radii=shell_radii, flat_shell_sup=shell_sup,
                       flat_decay_exponent=exponent)


@dataclass
class RateFit:
    eps: list
    deviations: list
    slope: float
    points_used: int


def regularity_rate(p: TorusSymbol, xi_index: int,
                    eps_values=tuple(2.0 ** (-k) for k in range(3, 10)),
                    threshold: float = 1.0) -> RateFit:
    """Fit the low-pass saturation rate sup_x |p - J_eps p| ~ eps^r.

    Degenerate data (deviation not rising at least two decades above the
    numerical floor, or fewer than three usable points) raise
    ``DegenerateFit``.
    """
    profile = p.profile_at(xi_index)
    scale = max(float(np.abs(profile).max()), 1.0)
    eps_used, devs = [], []
    for eps in eps_values:
        smoothed = lowpass_x(profile, eps, p.grid, p.d, threshold)
        dev = _spectral_sup(profile - smoothed)
        if dev > 1e-13 * scale:
            eps_used.append(eps)
            devs.append(dev)
    floor = 1e-13 * scale
    if len(devs) < 3 or max(devs, default=0.0) < 100.0 * floor:
        raise DegenerateFit(
            "low-pass deviations too small or too few for a rate fit")
    slope = float(np.polyfit(np.log(eps_used), np.log(devs), 1)[0])
    return RateFit(eps=eps_used, deviations=devs, slope=slope,
                   points_used=len(devs))


def _normal_eigen_min(block):
    """Smallest eigenvalue of p^t p over x, for an (..., M, N) block."""
    sv = np.linalg.svd(block, compute_uv=False)
    return sv[..., -1] ** 2


def measure_ellipticity(p: TorusSymbol, min_radius: float = 1.0) -> float:
    """Largest C with p^t p >= C |xi|^{2m} on the lattice beyond min_radius."""
    radii = p.xi_norms
    mask = radii >= min_radius
    if not np.any(mask):
        raise InputError("no lattice points beyond the requested radius")
    block = p.samples[..., mask, :, :]
    mins = _normal_eigen_min(block)
    per_xi = mins.min(axis=tuple(range(p.d)))
    return float((per_xi / radii[mask] ** (2.0 * p.order)).min())


@dataclass
class PreservationResult:
    band_radius: float          # L
    pass_: bool
    constant: float             # input C
    worst_ratio: float          # min over the band of lambda_min/(C/2 |xi|^{2m})


def ellipticity_preservation(split: SplitResult, constant: float,
                             order: float | None = None) -> PreservationResult:
    """Smallest lattice radius L with p#^t p# >= C/2 |xi|^{2m} beyond L."""
    if constant <= 1e-14:
        raise NoEllipticityBand("input symbol carries no ellipticity constant")
    p = split.symbol
    m = p.order if order is None else order
    radii = p.xi_norms
    mask = radii > 0
    mins = _normal_eigen_min(split.p_sharp[..., mask, :, :])
    axes = tuple(range(p.d))
    per_xi = mins.min(axis=axes)
    need = 0.5 * constant * radii[mask] ** (2.0 * m)
    ok = per_xi >= need
    order_idx = np.argsort(radii[mask])
    sorted_ok = ok[order_idx]
    sorted_radii = radii[mask][order_idx]
    # smallest radius such that every lattice point at or beyond it passes
    suffix_ok = np.logical_and.accumulate(sorted_ok[::-1])[::-1]
    if not suffix_ok.any():
        raise NoEllipticityBand(
            "no lattice radius beyond which the smoothed symbol stays elliptic")
    first = int(np.argmax(suffix_ok))
    band = float(sorted_radii[first])
    ratio = float((per_xi[order_idx][first:] / need[order_idx][first:]).min())
    return PreservationResult(band_radius=band, pass_=True,
                              constant=constant, worst_ratio=ratio)


@dataclass
class ResidualTable:
    frequencies: list
    residuals: list
    below_band: list
    band_radius: float

    def strictly_decreasing(self):
        usable = [r for r, b in zip(self.residuals, self.below_band) if not b]
        return all(b < a for a, b in zip(usable, usable[1:]))


def _quantize_1d(symbol_samples, u, grid):
    """Left quantization a(x, D)u on the periodic line.

    ``symbol_samples``: (G, K, M, N) in FFT lattice order; u: (G, N).
    """
    u_hat = np.fft.fft(u, axis=0) / grid                  # (K, N)
    w = np.einsum("jkmn,kn->jkm", symbol_samples, u_hat)
    j_idx = np.arange(grid)
    kernel = np.exp(2j * np.pi * np.outer(j_idx, j_idx) / grid)  # e^{i k x_j}
    return np.einsum("jk,jkm->jm", kernel, w)


def parametrix_residual(split: SplitResult, frequencies,
                        band_radius: float | None = None,
                        seed: int = 11) -> ResidualTable:
    """Relative error of E0(x,D) p#(x,D) u against u for single-mode inputs.

    E0 is the pointwise pseudoinverse (p#^t p#)^{-1} p#^t; the composition
    error is one order lower than the symbols, so residuals decrease in the
    input frequency.  Inputs below the ellipticity band are flagged.
    """
    p = split.symbol
    if p.d != 1:
        raise InputError("quantized parametrix experiments run on the line")
    grid = p.grid
    mm, nn = p.shape
    sharp = split.p_sharp
    normal = np.einsum("jkmn,jkml->jknl", sharp, sharp)   # p#^t p#
    eigen_floor = np.linalg.eigvalsh(normal)[..., 0].min()
    if eigen_floor <= 1e-13:
        raise SingularNormalMatrix(
            f"normal matrix nearly singular (min eigenvalue {eigen_floor:.3e})")
    e0 = np.einsum("jknl,jkml->jknm", np.linalg.inv(normal), sharp)

    rng = np.random.default_rng(seed)
    v = rng.normal(size=nn) + 1j * rng.normal(size=nn)
    v /= np.linalg.norm(v)
    x = np.arange(grid) * (2.0 * np.pi / grid)
    band = band_radius if band_radius is not None else 0.0
    lattice = p.xi_points[:, 0]
    residuals, below = [], []
    for freq in frequencies:
        if abs(freq) > grid // 2 - 1:
            raise InputError(f"frequency {freq} beyond the grid Nyquist range")
        u = v[None, :] * np.exp(1j * freq * x)[:, None]
        k_idx = int(np.where(lattice == freq)[0][0])
        pu = np.einsum("jmn,n->jm", sharp[:, k_idx], v) * np.exp(1j * freq * x)[:, None]
        eu = _quantize_1d(e0, pu, grid)
        residuals.append(float(np.linalg.norm(eu - u) / np.linalg.norm(u)))
        below.append(bool(abs(freq) < band))
    return ResidualTable(frequencies=list(frequencies), residuals=residuals,
                         below_band=below, band_radius=band)
