"""Time evolution and resolvent synthesis for the perturbed operator.

The evolution kernel is the Stone integral of the boundary difference of
perturbed resolvents.  The free part has a closed-form integrand and a
certified improper tail.  The potential's correction enters through
per-sector sandwiches (R0 v) M^{-1} (v R0); those are expensive per
energy, so a CorrectionCache samples the sector-resummed difference once
per geometry on an eta grid, splines it, and every time sample integrates
the cheap spline.  Only the + boundary is ever assembled: for real data
the - boundary is its complex conjugate.

Threshold corrections: at a zero-energy resonance or eigenvalue the
sandwich difference carries a 1/eta pole whose Stone integral decays only
like t^{-1/2}.  The pole must be removed over the full energy range: a
correction truncated at eta = t^{-1/2} leaves a Fresnel-sized t^{-1/2}
residue from the pole's tail beyond the cut.  F_kernel and G_kernel are
therefore separable finite-rank operators, frozen zero-energy pole blocks
times the full-range Stone weight integral, and the evolution's
subtract="auto" mode performs the equivalent subtraction through the
cache's pointwise pole coefficient.  G additionally carries the
second-kernel boundary-difference display, which is itself of t^{-3/2}
size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .birman_schwinger import Potential, build_M
from .errors import SingularFactorError
from .kernels import FOUR_PI, MINUS, PLUS, free_resolvent, free_resolvent_diff
from .oscillatory import (
    DEFAULT_MAX_PANELS,
    IntegrationPlan,
    QuadResult,
    _integrate,
    improper_tail,
)
from .spectral_map import stone_jacobian
from .partial_waves import ELL_MAX_CLASSIFY, RadialGrid, _legendre_rows, _n_mu_default
from .spectral_map import eta_of_lambda, lambda_of_eta

__all__ = [
    "CorrectionCache",
    "Geometry",
    "PropagatorSample",
    "ThresholdData",
    "F_kernel",
    "G_kernel",
    "build_threshold_data",
    "evolution_kernel",
    "free_kernel",
    "perturbed_resolvent",
    "weighted_norm",
    "weighted_operator",
]

_STONE_PREFACTOR = 1.0 / (2.0j * math.pi)

# eta grid for correction caches: logarithmic through the threshold region,
# then fine enough linear steps to keep the e^{i eta (r+r')} structure of
# the sandwiches inside cubic-spline accuracy.  The log top is where the
# geometric spacing has shrunk to the linear step.
_CACHE_ETA_LOG_TOP = 0.05
_CACHE_ETA_LOG_COUNT = 28
_CACHE_ETA_STEP = 0.025
DEFAULT_CACHE_ETA_TOP = 8.0

# measured cubic-spline bias of the cached difference, relative to the
# correction body, at the step sizes above
_SPLINE_REL = 1e-4

# where the pole coefficient is read off.  A bisection-tuned potential is
# critical only to ~1e-11, which caps the singular growth of M^{-1} below
# a crossover eta (sqrt of the detuning for a second-order pole), so the
# limit of eta * difference must be taken on the plateau above the
# crossover, not at eta -> 0.  The quadratic Richardson step removes the
# plateau's own eta^2 variation.
_POLE_FIT_ETA = 1e-3


@dataclass(frozen=True)
class Geometry:
    """Spatial sample point pair: radii and the angle cosine between them."""

    r: float
    r_prime: float
    cos_gamma: float

    def __post_init__(self):
        if not (self.r >= 0.0 and self.r_prime >= 0.0):
            raise ValueError("radii must be nonnegative")
        if not -1.0 <= self.cos_gamma <= 1.0:
            raise ValueError("cos_gamma must lie in [-1, 1]")

    @property
    def separation(self) -> float:
        sq = self.r**2 + self.r_prime**2 - 2.0 * self.r * self.r_prime * self.cos_gamma
        return math.sqrt(max(sq, 0.0))


@dataclass(frozen=True)
class PropagatorSample:
    """One evolution-kernel value with its error and correction accounting."""

    t: float
    geometry: Geometry
    value: complex
    correction_subtracted: str
    correction: complex
    est_error: float


@lru_cache(maxsize=256)
def _gauss_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _sector_row(kernel, ell: int, r: float, grid: RadialGrid, n_mu: int) -> np.ndarray:
    """K_l(r, r_j) against every grid node for an off-grid radius r."""
    nodes = grid.nodes
    if r < 1e-300:
        vals = np.asarray(kernel(nodes))
        return FOUR_PI * vals if ell == 0 else np.zeros(grid.count, dtype=complex)
    x, w = _gauss_rule(n_mu)
    a, b = np.abs(r - nodes), r + nodes
    half = 0.5 * (b - a)
    s = half[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
    mu = (r**2 + nodes[:, None] ** 2 - s**2) / (2.0 * r * nodes)[:, None]
    np.clip(mu, -1.0, 1.0, out=mu)
    vals = np.asarray(kernel(s.ravel())).reshape(s.shape)
    pl = _legendre_rows(ell, mu)[ell]
    return (2.0 * np.pi / (r * nodes)) * half * ((vals * s * pl) @ w)


def _sandwich_vector(eta: float, ell: int, r: float, potential: Potential, grid: RadialGrid) -> np.ndarray:
    """Coefficients of v R0+(eta; r, .): the off-grid contraction vector."""
    n_mu = _n_mu_default(ell, 2.0 * abs(eta) * min(r, grid.r_max))
    row = _sector_row(lambda s: free_resolvent(PLUS, eta, s), ell, r, grid, n_mu)
    return np.sqrt(grid.weights) * grid.nodes * potential.half(grid.nodes) * row


def _free_kernel_result(t: float, separation: float, tol: float) -> QuadResult:
    if not (t != 0.0 and np.isfinite(t)):
        raise ValueError("time must be finite and nonzero")
    if separation < 0.0:
        raise ValueError("separation must be nonnegative")
    f = lambda eta: _STONE_PREFACTOR * free_resolvent_diff(eta, separation)
    # |R0+ - R0-| <= 1/(2 pi (1+2 eta^2)) * eta <= eta^{-1}/(4 pi^2): safe 1/eta envelope
    return improper_tail(f, t, 0.0, tol=tol, envelope=(1.0, 1.0), min_eta=2.0 * separation)


def free_kernel(t: float, separation: float, tol: float = 1e-9) -> complex:
    """Evolution kernel of the unperturbed operator at separation |x - y|."""
    return _free_kernel_result(t, separation, tol).value


def _invert_sector(m_matrix: np.ndarray, s_proj: np.ndarray | None, ell: int) -> np.ndarray:
    cond = np.linalg.cond(m_matrix)
    if s_proj is None or not s_proj.any():
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularFactorError(f"sector {ell} operator", cond)
        return np.linalg.inv(m_matrix)
    # near-threshold sectors go through the projection split
    from .birman_schwinger import jn_invert

    return jn_invert(m_matrix, s_proj)


def _sector_projections(classification, n: int, ell_max: int) -> list:
    projections = [None] * (ell_max + 1)
    if classification is None:
        return projections
    for ell, basis in classification.s1_basis.items():
        if ell <= ell_max:
            projections[ell] = basis @ basis.conj().T
    return projections


def perturbed_resolvent(
    sign,
    eta: float,
    geometry: Geometry,
    potential: Potential,
    grid: RadialGrid,
    ell_max: int = ELL_MAX_CLASSIFY,
    classification=None,
) -> complex:
    """R_V(x, y) at one boundary energy by the symmetric resolvent identity.

    The correction is resummed over sectors 0..ell_max; pass the
    classification to stabilize near-threshold inversions.
    """
    if eta < 0.0:
        raise ValueError("eta must be nonnegative")
    projections = _sector_projections(classification, grid.count, ell_max)
    pl = _legendre_rows(ell_max, np.array([geometry.cos_gamma]))[:, 0]
    total = 0.0 + 0.0j
    for ell in range(ell_max + 1):
        m_op = build_M(sign, eta, potential, grid, ell)
        minv = _invert_sector(m_op.matrix, projections[ell], ell)
        left = _sandwich_vector(eta, ell, geometry.r, potential, grid)
        right = _sandwich_vector(eta, ell, geometry.r_prime, potential, grid)
        if sign == MINUS:
            left, right = left.conj(), right.conj()
        sand = left @ minv @ right
        total += (2.0 * ell + 1.0) / FOUR_PI * pl[ell] * sand
    return complex(free_resolvent(sign, eta, geometry.separation) - total)


@dataclass(frozen=True)
class ThresholdData:
    """Static blocks feeding the finite-rank threshold corrections.

    x_block is the resonance inverse on the first null space; pole_blocks
    are the second-kernel inverses for the slow eta^-2 sector blocks; and
    pole_matrices hold, per sector, the full first-order pole of the
    sandwiched inverse read off the plateau of -eta Im M^{-1}(eta).  The
    resonance part of the sector-0 pole is carried by x_block through the
    closed-form weight, so pole_matrices store only the excess.
    """

    potential: Potential
    grid: RadialGrid
    classification: object
    x_block: np.ndarray | None
    pole_blocks: dict
    pole_matrices: dict
    l1_norm: float


def build_threshold_data(potential: Potential, grid: RadialGrid, classification) -> ThresholdData:
    """Assemble the null-space blocks the threshold corrections contract against."""
    from .birman_schwinger import build_P
    from .kernels import expansion_G
    from .partial_waves import build_sector_operator

    l1 = potential.l1_norm(grid)
    x_block = None
    pole_blocks = {}
    if 0 in classification.s1_basis and classification.verdict in (
        "resonance",
        "resonance_and_eigenvalue",
    ):
        q = classification.s1_basis[0]
        p = build_P(potential, grid).matrix
        t1 = q.T @ p @ q
        vals, vecs = np.linalg.eigh(t1)
        keep = np.abs(vals) > classification.tol
        if keep.any():
            inv = (vecs[:, keep] / vals[keep]) @ vecs[:, keep].T
            x_block = q @ inv @ q.T
    v = potential.half(grid.nodes)
    for ell, q2 in classification.s2_basis.items():
        body = build_sector_operator(lambda s: expansion_G(2, s), ell, grid).matrix
        sandwiched = v[:, None] * body * v[None, :]
        small = q2.T @ sandwiched @ q2
        pole_blocks[ell] = q2 @ np.linalg.inv(small) @ q2.T

    pole_matrices = {}
    projections = _sector_projections(classification, grid.count, ELL_MAX_CLASSIFY)
    for ell in classification.s1_basis:
        h = _POLE_FIT_ETA

        def first_order(eta):
            m_op = build_M(PLUS, eta, potential, grid, ell)
            minv = _invert_sector(m_op.matrix, projections[ell], ell)
            return -eta * minv.imag

        b1, b2 = first_order(h), first_order(2.0 * h)
        block = 2.0 * b1 - b2
        if ell == 0 and x_block is not None:
            block = block - (FOUR_PI / l1) * x_block
        pole_matrices[ell] = block
    return ThresholdData(
        potential=potential,
        grid=grid,
        classification=classification,
        x_block=x_block,
        pole_blocks=pole_blocks,
        pole_matrices=pole_matrices,
        l1_norm=l1,
    )


def _short_interval_quad(integrand, cut: float, rel_tol: float = 1e-10):
    """Adaptive Gauss-Legendre on [0, cut] for smooth non-oscillatory data."""
    previous = None
    for order in (16, 24, 36, 54):
        x, w = np.polynomial.legendre.leggauss(order)
        etas = 0.5 * cut * (x + 1.0)
        value = 0.5 * cut * np.sum(w * integrand(etas))
        if previous is not None and abs(value - previous) <= rel_tol * (1.0 + abs(value)):
            return complex(value)
        previous = value
    return complex(value)


@lru_cache(maxsize=256)
def _fresnel_weight(t: float, cut: float = 4.0) -> complex:
    # full-range Stone weight of a first-order pole,
    # int_0^inf (4 eta^2 + 2) e^{-it lambda}: panels up to the cut, then
    # the same closed-form tail the evolution subtraction uses
    plan = IntegrationPlan(t=t, interval=(0.0, cut), tol=1e-10, max_panels=DEFAULT_MAX_PANELS)
    body = _integrate(lambda etas: 4.0 * etas**2 + 2.0, plan)
    return complex(body.value + _pole_tail(t, cut).value)


def _pole_sandwich(geometry: Geometry, data: ThresholdData, blocks: dict) -> complex:
    """Pole coefficient of the boundary difference at one geometry.

    Zero-energy boundary rows sandwich the given first-order pole blocks
    of the inverse; the -2i carries the (+)/(-) pairing of the residue.
    """
    total = 0.0
    for ell, block in blocks.items():
        left = _sandwich_vector(0.0, ell, geometry.r, data.potential, data.grid)
        right = _sandwich_vector(0.0, ell, geometry.r_prime, data.potential, data.grid)
        pl = float(_legendre_rows(ell, np.array([geometry.cos_gamma]))[ell, 0])
        total += (2.0 * ell + 1.0) / FOUR_PI * pl * (left @ block @ right).real
    return -2j * total


def _difference_display(t: float, geometry: Geometry, data: ThresholdData, ell: int, block) -> complex:
    """Second-kernel display term over [0, t^(-1/2)] in one sector.

    The (+) minus (-) sandwich pairing vanishes linearly at eta = 0,
    taming the 2/eta weight; the Stone prefactor signs the term so that
    subtracting it removes the matching piece of the evolution kernel.
    """
    cut = t**-0.5
    pot, grid = data.potential, data.grid
    pl = float(_legendre_rows(ell, np.array([geometry.cos_gamma]))[ell, 0])

    def integrand(etas):
        out = np.empty(etas.size, dtype=complex)
        for k, eta in enumerate(etas):
            left = _sandwich_vector(eta, ell, geometry.r, pot, grid)
            right = _sandwich_vector(eta, ell, geometry.r_prime, pot, grid)
            out[k] = 2j * (left @ block @ right).imag
        return np.exp(-1j * t * lambda_of_eta(etas)) * (4.0 * etas + 2.0 / etas) * out

    term = _short_interval_quad(integrand, cut)
    return -_STONE_PREFACTOR * (2.0 * ell + 1.0) / FOUR_PI * pl * term


def F_kernel(t: float, geometry: Geometry, data: ThresholdData) -> complex:
    """Finite-rank resonance correction at time t.

    Separable form: the frozen zero-energy resonance block of the inverse,
    sandwiched between boundary rows, times the full-range Stone weight of
    a first-order pole.  Subtracting it from the perturbed evolution kernel
    removes the t^{-1/2} term.
    """
    if data.classification.verdict not in ("resonance", "resonance_and_eigenvalue"):
        raise ValueError("F correction requires a resonance verdict")
    if not t > 1.0:
        raise ValueError("threshold corrections apply for t > 1")
    if data.x_block is None:
        return 0.0 + 0.0j
    shift = _pole_sandwich(geometry, data, {0: (FOUR_PI / data.l1_norm) * data.x_block})
    return complex(-_STONE_PREFACTOR * shift * _fresnel_weight(t))


def G_kernel(t: float, geometry: Geometry, data: ThresholdData) -> complex:
    """Finite-rank eigenvalue correction at time t.

    Three pieces, all signed to subtract from the evolution kernel: the
    resonance part when present, the per-sector pole excess the eigenvalue
    induces in the inverse (frozen blocks times the full Stone weight),
    and the second-kernel boundary-difference display truncated at
    eta = t^{-1/2}.
    """
    if data.classification.verdict not in ("eigenvalue", "resonance_and_eigenvalue"):
        raise ValueError("G correction requires an eigenvalue verdict")
    if not t > 1.0:
        raise ValueError("threshold corrections apply for t > 1")
    value = 0.0 + 0.0j
    if data.x_block is not None:
        value += F_kernel(t, geometry, data)
    if data.pole_matrices:
        shift = _pole_sandwich(geometry, data, data.pole_matrices)
        value += -_STONE_PREFACTOR * shift * _fresnel_weight(t)
    for ell, block in data.pole_blocks.items():
        value += _difference_display(t, geometry, data, ell, block)
    return complex(value)


class CorrectionCache:
    """Splined sector-resummed sandwich differences over the eta grid.

    For each geometry the cache holds W_raw(eta) = eta * [resummed
    (+)-minus-(-) sandwich difference], which is bounded through the
    threshold in every verdict, together with the extrapolated pole
    coefficient W_raw(0+).  Built once, read concurrently.
    """

    def __init__(
        self,
        potential: Potential,
        grid: RadialGrid,
        classification,
        geometries,
        ell_max: int = ELL_MAX_CLASSIFY,
        eta_top: float = DEFAULT_CACHE_ETA_TOP,
    ):
        self.potential = potential
        self.grid = grid
        self.classification = classification
        self.ell_max = ell_max
        self.geometries = tuple(geometries)
        log_part = np.geomspace(1e-6, _CACHE_ETA_LOG_TOP, _CACHE_ETA_LOG_COUNT)
        lin_part = np.arange(
            _CACHE_ETA_LOG_TOP + _CACHE_ETA_STEP, eta_top + 1e-12, _CACHE_ETA_STEP
        )
        self.eta_nodes = np.concatenate([log_part, lin_part])
        self._splines = {}
        self._pole = {}
        self._profile = {}
        self._build()

    def _build(self):
        pot, grid = self.potential, self.grid
        projections = _sector_projections(self.classification, grid.count, self.ell_max)
        radii = sorted({g.r for g in self.geometries} | {g.r_prime for g in self.geometries})
        pl = {
            g: _legendre_rows(self.ell_max, np.array([g.cos_gamma]))[:, 0]
            for g in self.geometries
        }
        w_raw = {g: np.empty(self.eta_nodes.size, dtype=complex) for g in self.geometries}
        for k, eta in enumerate(self.eta_nodes):
            inverses = []
            rows = {}
            for ell in range(self.ell_max + 1):
                m_op = build_M(PLUS, float(eta), pot, grid, ell)
                inverses.append(_invert_sector(m_op.matrix, projections[ell], ell))
                for r in radii:
                    rows[(ell, r)] = _sandwich_vector(float(eta), ell, r, pot, grid)
            for g in self.geometries:
                acc = 0.0 + 0.0j
                for ell in range(self.ell_max + 1):
                    sand = rows[(ell, g.r)] @ inverses[ell] @ rows[(ell, g.r_prime)]
                    acc += (2.0 * ell + 1.0) / FOUR_PI * pl[g][ell] * 2j * sand.imag
                w_raw[g][k] = eta * acc
        for g in self.geometries:
            vals = w_raw[g]
            spline = CubicSpline(self.eta_nodes, vals)
            w1, w2 = spline(_POLE_FIT_ETA), spline(2.0 * _POLE_FIT_ETA)
            self._splines[g] = spline
            self._pole[g] = complex(w1 - (w2 - w1) / 3.0)
            self._profile[g] = np.abs(vals)

    def pole_coefficient(self, geometry: Geometry) -> complex:
        return self._pole[geometry]

    def scaled_difference(self, geometry: Geometry):
        """Spline of W_raw = eta * (sandwich difference), callable on arrays."""
        return self._splines[geometry]

    def tail_cut(self, geometry: Geometry, t: float, target: float) -> float:
        """Smallest cached eta beyond which the neglected tail fits target.

        Only the cached difference is ever neglected past the cut; the
        pole part has its own closed tail, so the profile is unshifted.
        """
        bound = 2.0 * self._profile[geometry] / (self.eta_nodes * abs(t))
        eligible = (self.eta_nodes >= 1.0) & (bound <= target)
        if eligible.any():
            return float(self.eta_nodes[np.argmax(eligible)])
        return float(self.eta_nodes[-1])

    def tail_bound(self, geometry: Geometry, t: float, eta_cut: float) -> float:
        g_end = abs(self._splines[geometry](eta_cut)) / eta_cut
        return 2.0 * g_end / abs(t)


def _pole_tail(t: float, a: float) -> QuadResult:
    """Stone integral of the pole 1/eta from a to infinity, in closed form.

    In the spectral variable the integrand is e^{-itu} / eta(u), whose
    integration-by-parts series truncates after two boundary terms with
    remainder at most |g'(u_a)| / t^2 because g' is monotone.
    """
    u_a = lambda_of_eta(a)
    g = 1.0 / a
    dg = -1.0 / (a * a * stone_jacobian(a))
    it = 1j * t
    value = complex(np.exp(-it * u_a) * (g / it + dg / it**2))
    bound = abs(dg) / t**2
    return QuadResult(value=value, error=bound, panels=0, truncation_bound=bound, eta_max=a)


def evolution_kernel(
    t: float,
    geometry: Geometry,
    cache: CorrectionCache,
    subtract: str = "auto",
    tol: float = 1e-8,
    eta_cut: float | None = None,
    max_panels: int = DEFAULT_MAX_PANELS,
) -> PropagatorSample:
    """Evolution kernel sample, optionally with the threshold pole removed.

    subtract="auto" removes, for t > 1 and a singular verdict, the full
    Stone integral of the pole part pole(eta) = W_raw(0+) / eta; the
    remaining integrand is regular at eta = 0 and the removed amount is
    reported as the sample's correction.
    """
    if subtract not in ("none", "auto"):
        raise ValueError(f"subtract must be 'none' or 'auto', got {subtract!r}")
    if not t > 0.0:
        raise ValueError("time must be positive")
    verdict = cache.classification.verdict
    do_subtract = subtract == "auto" and verdict != "regular" and t > 1.0

    free = _free_kernel_result(t, geometry.separation, tol)
    spline = cache.scaled_difference(geometry)
    pole = cache.pole_coefficient(geometry)
    shift = pole if do_subtract else 0.0 + 0.0j

    scale = abs(free.value) + abs(pole - shift) / math.sqrt(max(t, 1.0))
    target = 1e-4 * scale + 0.1 * tol
    if eta_cut is None:
        eta_cut = cache.tail_cut(geometry, t, 2.0 * math.pi * target)

    def body_integrand(etas):
        return (spline(etas) - shift) * (4.0 * etas**2 + 2.0)

    plan = IntegrationPlan(t=t, interval=(0.0, float(eta_cut)), tol=tol, max_panels=max_panels)
    body = _integrate(body_integrand, plan)
    tail_bound = cache.tail_bound(geometry, t, eta_cut)

    value = free.value - _STONE_PREFACTOR * body.value
    est_error = free.error + abs(_STONE_PREFACTOR) * (
        body.error + tail_bound + _SPLINE_REL * abs(body.value)
    )

    correction = 0.0 + 0.0j
    label = "none"
    if do_subtract:
        # the pole's own tail is kept in closed form, so the shifted body
        # plus this term subtracts the pole over the full energy range
        pole_body = _integrate(lambda etas: 4.0 * etas**2 + 2.0, plan)
        pole_tail = _pole_tail(t, float(eta_cut))
        value += _STONE_PREFACTOR * shift * pole_tail.value
        correction = -_STONE_PREFACTOR * shift * (pole_body.value + pole_tail.value)
        est_error += abs(_STONE_PREFACTOR) * abs(shift) * (pole_body.error + pole_tail.error)
        label = "G" if cache.classification.s2_basis else "F"
    return PropagatorSample(
        t=t,
        geometry=geometry,
        value=complex(value),
        correction_subtracted=label,
        correction=complex(correction),
        est_error=float(est_error),
    )


def weighted_operator(
    sign,
    eta: float,
    potential: Potential | None,
    grid: RadialGrid,
    s: float,
    s_prime: float,
    ell: int,
    classification=None,
) -> np.ndarray:
    """Weighted sector matrix diag((1+r)^-s') R_V diag((1+r)^-s)."""
    if not (s > 0.5 and s_prime > 0.5):
        raise ValueError("weights need s, s' > 1/2")
    from .partial_waves import build_sector_operator

    r0 = build_sector_operator(
        lambda sep: free_resolvent(sign, eta, sep), ell, grid, oscillation=eta
    ).matrix
    if potential is None:
        body = r0
    else:
        m_op = build_M(sign, eta, potential, grid, ell)
        proj = _sector_projections(classification, grid.count, ell)[ell]
        minv = _invert_sector(m_op.matrix, proj, ell)
        v = potential.half(grid.nodes)
        body = r0 - r0 @ (v[:, None] * minv * v[None, :]) @ r0
    left = (1.0 + grid.nodes) ** (-s_prime)
    right = (1.0 + grid.nodes) ** (-s)
    return left[:, None] * body * right[None, :]


def weighted_norm(
    sign,
    energy: float,
    potential: Potential | None,
    grid: RadialGrid,
    s: float = 2.0,
    s_prime: float = 2.0,
    ell_max: int = ELL_MAX_CLASSIFY,
    variable: str = "eta",
    classification=None,
) -> float:
    """Discretized B(s, -s') resolvent norm, maximized over sectors."""
    if variable == "lambda":
        eta = eta_of_lambda(energy)
    elif variable == "eta":
        eta = float(energy)
    else:
        raise ValueError(f"variable must be 'eta' or 'lambda', got {variable!r}")
    best = 0.0
    for ell in range(ell_max + 1):
        mat = weighted_operator(sign, eta, potential, grid, s, s_prime, ell, classification)
        best = max(best, float(np.linalg.norm(mat, 2)))
    return best
