"""Angular-momentum reduction of radial 3D kernels.

A translation-invariant kernel K(|x-y|) acts on each angular-momentum
sector independently; this module produces the per-sector Nystrom
matrices that the rest of the package does its operator algebra on.

Conventions.  For a radial quadrature grid {r_i, w_i}, a function f is
represented by the coefficient vector c_i = sqrt(w_i) * r_i * f(r_i), so
Euclidean inner products of coefficients equal discretized inner products
in L^2(r^2 dr).  The sector kernel is

    K_l(r, r') = 2*pi * Int_{-1}^{1} K(sep(mu)) P_l(mu) d mu,

with sep(mu) = sqrt(r^2 + r'^2 - 2 r r' mu), and the full kernel is
recovered as Sum_l (2l+1)/(4*pi) * K_l(r, r') * P_l(cos gamma).  The mu
integral is evaluated after substituting the separation s for mu, which
turns the |r - r'| endpoint singularity of Coulomb-type kernels into a
smooth integrand (the s ds jacobian supplies the vanishing factor).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RadialGrid",
    "SectorOperator",
    "build_grid",
    "build_sector_operator",
    "default_r_max",
    "legendre_project",
    "load_operator",
    "resum_sectors",
    "save_operator",
    "suggested_ell_max",
]

# Classification probes sectors 0..2; pointwise reconstruction needs far
# more angular resolution.
ELL_MAX_CLASSIFY = 2
ELL_MAX_RECONSTRUCT = 40

_MAGIC = b"FOSEC1\n"
_VERSION = 1


def default_r_max(beta: float, floor: float = 1e-8) -> float:
    """Radius beyond which the half-potential weight (1+r)^(-beta/2) < floor."""
    if not (beta > 0.0):
        raise ValueError("decay exponent must be positive")
    return float(floor ** (-2.0 / beta) - 1.0)


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    count: int

    def __post_init__(self):
        if not (np.all(np.diff(self.nodes) > 0.0) and self.nodes[0] > 0.0):
            raise ValueError("nodes must be strictly increasing and positive")
        if not np.all(self.weights > 0.0):
            raise ValueError("weights must be positive")
        moment = float(np.sum(self.weights * self.nodes**2))
        exact = self.r_max**3 / 3.0
        if abs(moment - exact) > 1e-10 * exact:
            raise ValueError("weights fail the r^2 moment check")

    def coefficients(self, f) -> np.ndarray:
        """Coefficient vector of a radial function (callable or samples)."""
        vals = f(self.nodes) if callable(f) else np.asarray(f)
        return np.sqrt(self.weights) * self.nodes * vals

    def values(self, coeffs: np.ndarray) -> np.ndarray:
        """Point values at the nodes from a coefficient vector."""
        return np.asarray(coeffs) / (np.sqrt(self.weights) * self.nodes)

    def norm(self, coeffs: np.ndarray) -> float:
        return float(np.linalg.norm(coeffs))


def build_grid(count: int, r_max: float | None = None, beta: float | None = None) -> RadialGrid:
    """Gauss-Legendre grid on (0, r_max].

    r_max defaults to the radius where the asserted potential tail
    (1+r)^(-beta/2) drops below 1e-8.
    """
    if count < 8:
        raise ValueError(f"need at least 8 nodes, got {count}")
    if r_max is None:
        if beta is None:
            raise ValueError("need r_max or a decay exponent to choose it")
        r_max = default_r_max(beta)
    if not (r_max > 0.0 and np.isfinite(r_max)):
        raise ValueError(f"r_max must be positive and finite, got {r_max}")
    x, w = np.polynomial.legendre.leggauss(count)
    nodes = 0.5 * r_max * (x + 1.0)
    weights = 0.5 * r_max * w
    return RadialGrid(nodes=nodes, weights=weights, r_max=float(r_max), count=count)


@dataclass(frozen=True)
class SectorOperator:
    ell: int
    grid: RadialGrid
    matrix: np.ndarray

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ coeffs


def _legendre_rows(ell_max: int, mu: np.ndarray) -> np.ndarray:
    """P_0..P_ell_max at mu by upward recurrence; shape (ell_max+1, *mu.shape)."""
    out = np.empty((ell_max + 1,) + mu.shape)
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = mu
    for ell in range(1, ell_max):
        out[ell + 1] = ((2 * ell + 1) * mu * out[ell] - ell * out[ell - 1]) / (ell + 1)
    return out


def _n_mu_default(ell: int, oscillation: float = 0.0) -> int:
    # GL resolves ~0.55 nodes per unit of half-range phase; oscillation is
    # the kernel's max |d phase / d separation|, the half-range is r+r'
    return int(2 * ell + 24 + np.ceil(0.6 * oscillation))


def legendre_project(kernel, ell: int, r: float, r_prime: float, n_mu: int | None = None):
    """Sector component K_l(r, r') of a radial kernel.

    kernel must accept numpy arrays of separations, including the
    removable-singularity limit at separation zero when r = r'.
    """
    if ell < 0:
        raise ValueError("sector index must be nonnegative")
    if n_mu is None:
        n_mu = _n_mu_default(ell)
    if n_mu < 2 * ell + 16:
        raise ValueError(f"n_mu={n_mu} cannot resolve P_{ell} (need >= {2 * ell + 16})")
    lo, hi = min(r, r_prime), max(r, r_prime)
    if lo < 1e-300:
        val = 4.0 * np.pi * np.asarray(kernel(np.array([hi])))[0]
        return val if ell == 0 else 0.0 * val
    x, w = np.polynomial.legendre.leggauss(n_mu)
    a, b = hi - lo, hi + lo
    s = 0.5 * (b - a) * x + 0.5 * (b + a)
    mu = np.clip((r**2 + r_prime**2 - s**2) / (2.0 * r * r_prime), -1.0, 1.0)
    vals = np.asarray(kernel(s))
    if not np.all(np.isfinite(vals)):
        raise ValueError("kernel produced non-finite samples on the separation range")
    pl = _legendre_rows(ell, mu)[ell]
    return (2.0 * np.pi / (r * r_prime)) * 0.5 * (b - a) * np.sum(w * vals * s * pl)


def build_sector_operator(
    kernel, ell: int, grid: RadialGrid, n_mu: int | None = None, oscillation: float = 0.0
) -> SectorOperator:
    """Symmetrized Nystrom matrix of a radial kernel in one sector.

    oscillation hints the kernel's phase rate in the separation variable
    (eta for the limiting resolvents) so enough mu-nodes are used.
    """
    if n_mu is None:
        n_mu = _n_mu_default(ell, oscillation * 2.0 * grid.r_max)
    if n_mu < 2 * ell + 16:
        raise ValueError(f"n_mu={n_mu} cannot resolve P_{ell} (need >= {2 * ell + 16})")
    r = grid.nodes
    n = grid.count
    iu, ju = np.triu_indices(n)
    ri, rj = r[iu], r[ju]
    a, b = np.abs(ri - rj), ri + rj
    x, w = np.polynomial.legendre.leggauss(n_mu)
    half = 0.5 * (b - a)
    s = half[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
    mu = (ri[:, None] ** 2 + rj[:, None] ** 2 - s**2) / (2.0 * ri * rj)[:, None]
    np.clip(mu, -1.0, 1.0, out=mu)
    vals = np.asarray(kernel(s.ravel())).reshape(s.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("kernel produced non-finite samples on the separation range")
    pl = _legendre_rows(ell, mu)[ell]
    proj = (2.0 * np.pi / (ri * rj)) * half * ((vals * s * pl) @ w)
    sw = np.sqrt(grid.weights)
    scale_i = sw[iu] * r[iu]
    scale_j = sw[ju] * r[ju]
    mat = np.zeros((n, n), dtype=proj.dtype)
    mat[iu, ju] = scale_i * proj * scale_j
    mat[ju, iu] = mat[iu, ju]
    return SectorOperator(ell=ell, grid=grid, matrix=mat)


def suggested_ell_max(eta: float, r_sum: float) -> int:
    """Sectors needed to reconstruct an oscillatory kernel pointwise."""
    return max(ELL_MAX_RECONSTRUCT, int(np.ceil(abs(eta) * r_sum)) + 24)


def resum_sectors(sector_values, cos_gamma: float):
    """Sum_l (2l+1)/(4*pi) K_l P_l(cos gamma) over the supplied sectors."""
    vals = np.asarray(sector_values)
    if not -1.0 <= cos_gamma <= 1.0:
        raise ValueError("cos_gamma must lie in [-1, 1]")
    ell_max = vals.shape[0] - 1
    pl = _legendre_rows(ell_max, np.array([float(cos_gamma)]))[:, 0]
    weights = (2.0 * np.arange(ell_max + 1) + 1.0) / (4.0 * np.pi)
    return np.tensordot(weights * pl, vals, axes=(0, 0))


def save_operator(path, op: SectorOperator) -> None:
    """Write a sector operator in the portable binary layout."""
    header = _MAGIC + struct.pack(
        "<III d", _VERSION, op.ell, op.grid.count, op.grid.r_max
    )
    mat = np.ascontiguousarray(op.matrix.astype(np.complex128))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(mat.astype("<c16").tobytes())


def load_operator(path) -> SectorOperator:
    """Read an operator written by save_operator, validating the header."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise ValueError("not a sector-operator file (bad magic)")
    off = len(_MAGIC)
    version, ell, count, r_max = struct.unpack_from("<III d", blob, off)
    if version != _VERSION:
        raise ValueError(f"unsupported format version {version}")
    off += struct.calcsize("<III d")
    expected = count * count * 16
    if len(blob) - off != expected:
        raise ValueError(f"payload is {len(blob) - off} bytes, expected {expected}")
    mat = np.frombuffer(blob[off:], dtype="<c16").reshape(count, count).astype(np.complex128)
    grid = build_grid(count, r_max)
    return SectorOperator(ell=int(ell), grid=grid, matrix=mat)
