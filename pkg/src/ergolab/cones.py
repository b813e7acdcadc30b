"""Joint cone conditions for hyperbolic 2x2 matrices.

A projective cone is an open interval of lines, stored as a center angle
(mod pi) and a half width.  A pair of matrices {A, B} admits a joint cone
certificate when there are disjoint cones C^u, C^s with

    A C^u strictly inside C^u,   A^{-1} C^s strictly inside C^s   (same for B)

and a uniform expansion constant kappa > 1: every unit line direction in C^u
is stretched by more than kappa under A and B, and every direction in C^s is
stretched by more than kappa under A^{-1} and B^{-1}.

Verification is numerical, not rigorous: inclusion uses interval arithmetic on
cone endpoints (the projective action of an invertible matrix is a circle
homeomorphism, so an interval maps to the interval between the endpoint
images), and the expansion infimum is taken over a dense angle grid with
golden-section refinement around the grid minimum.  Certificates are required
to survive re-checking at 10x grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cocycle import Mat2, svd2

PI = math.pi
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

MARGIN_FLOOR = 1e-9  # strict inequalities must clear this


class ConeError(ValueError):
    pass


class InclusionFail(ConeError):
    def __init__(self, mat_index: int, cone_name: str):
        self.mat_index = mat_index
        self.cone_name = cone_name
        super().__init__(f"matrix #{mat_index} does not map {cone_name} into itself")


class ExpansionFail(ConeError):
    def __init__(self, mat_index: int, cone_name: str, kappa: float):
        self.mat_index = mat_index
        self.cone_name = cone_name
        self.kappa = kappa
        super().__init__(
            f"matrix #{mat_index} expansion on {cone_name} is {kappa:.6g} <= 1"
        )


@dataclass(frozen=True)
class ProjectiveCone:
    """Open set of lines within `half_width` of `center_angle` (angles mod pi)."""

    center_angle: float
    half_width: float

    def __post_init__(self):
        if not (0.0 < self.half_width < 0.5 * PI):
            raise ValueError("half_width must lie in (0, pi/2)")
        object.__setattr__(self, "center_angle", self.center_angle % PI)

    def contains(self, angle: float, slack: float = 0.0) -> bool:
        return proj_dist(angle, self.center_angle) < self.half_width - slack


def proj_dist(a: float, b: float) -> float:
    """Distance between two lines given by angles, in [0, pi/2]."""
    d = (a - b) % PI
    return min(d, PI - d)


def cones_disjoint(c1: ProjectiveCone, c2: ProjectiveCone) -> bool:
    return proj_dist(c1.center_angle, c2.center_angle) > c1.half_width + c2.half_width


def line_image_angle(m: Mat2, angle: float) -> float:
    """Angle (mod pi) of the image line of `angle` under m."""
    vx, vy = math.cos(angle), math.sin(angle)
    wx, wy = m.apply(vx, vy)
    return math.atan2(wy, wx) % PI


def _doubled_arc(m: Mat2, cone: ProjectiveCone) -> tuple[float, float]:
    """Image of the cone under m as an arc (start, length) on the doubled
    circle (line angle theta is represented by 2 theta on [0, 2 pi))."""
    lo = line_image_angle(m, cone.center_angle - cone.half_width)
    hi = line_image_angle(m, cone.center_angle + cone.half_width)
    mid = line_image_angle(m, cone.center_angle)
    a, b, c = 2.0 * lo, 2.0 * hi, 2.0 * mid
    length_ab = (b - a) % (2.0 * PI)
    if (c - a) % (2.0 * PI) <= length_ab:
        return a % (2.0 * PI), length_ab
    return b % (2.0 * PI), (a - b) % (2.0 * PI)


def inclusion_margin(m: Mat2, cone: ProjectiveCone) -> float:
    """Angular slack of m(cone) inside cone; positive iff strictly included."""
    start, length = _doubled_arc(m, cone)
    t_start = (2.0 * (cone.center_angle - cone.half_width)) % (2.0 * PI)
    t_length = 4.0 * cone.half_width
    off = (start - t_start) % (2.0 * PI)
    # margins at both ends, in projective radians
    lead = off / 2.0
    trail = (t_length - off - length) / 2.0
    return min(lead, trail)


def _stretch_on_grid(m: Mat2, cone: ProjectiveCone, grid_n: int) -> tuple[float, float]:
    """(min stretch over cone, argmin angle) on a boundary-inclusive grid."""
    theta = np.linspace(cone.center_angle - cone.half_width,
                        cone.center_angle + cone.half_width, grid_n)
    vx, vy = np.cos(theta), np.sin(theta)
    wx = m.a * vx + m.b * vy
    wy = m.c * vx + m.d * vy
    stretch = np.hypot(wx, wy)
    i = int(np.argmin(stretch))
    return float(stretch[i]), float(theta[i])


def _stretch(m: Mat2, angle: float) -> float:
    wx, wy = m.apply(math.cos(angle), math.sin(angle))
    return math.hypot(wx, wy)


def _golden_refine(m: Mat2, lo: float, hi: float, iters: int = 60) -> float:
    """Golden-section minimum of the stretch over [lo, hi]."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = _stretch(m, x1), _stretch(m, x2)
    for _ in range(iters):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = _stretch(m, x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = _stretch(m, x2)
    return min(f1, f2)


def min_expansion(m: Mat2, cone: ProjectiveCone, grid_n: int = 10_000) -> float:
    """Infimum of ||M v|| over unit v with direction in the closed cone.

    Grid minimum refined by golden section in the bracketing grid cell.
    """
    coarse, arg = _stretch_on_grid(m, cone, grid_n)
    h = 2.0 * cone.half_width / (grid_n - 1)
    lo = max(arg - h, cone.center_angle - cone.half_width)
    hi = min(arg + h, cone.center_angle + cone.half_width)
    return min(coarse, _golden_refine(m, lo, hi))


@dataclass(frozen=True)
class ConeCertificate:
    """Verified joint cone data: disjoint cones, expansion kappa > 1, and the
    smallest angular slack among the inclusion checks."""

    cone_u: ProjectiveCone
    cone_s: ProjectiveCone
    kappa: float
    margin: float

    def __post_init__(self):
        if self.kappa <= 1.0:
            raise ValueError("kappa must exceed 1")
        if self.margin <= 0.0:
            raise ValueError("margin must be positive")
        if not cones_disjoint(self.cone_u, self.cone_s):
            raise ValueError("cones must be disjoint")


def check_joint_cone(mats: Sequence[Mat2], cone_u: ProjectiveCone,
                     cone_s: ProjectiveCone, grid_n: int = 10_000,
                     tol: float = 1e-9) -> ConeCertificate:
    """Verify the joint cone condition for `mats` on the given cone pair.

    kappa is the verified infimum of the expansion minus `tol`; raises
    InclusionFail / ExpansionFail when a check does not clear MARGIN_FLOOR.
    """
    if not cones_disjoint(cone_u, cone_s):
        raise ConeError("candidate cones are not disjoint")
    margin = math.inf
    kappa = math.inf
    for i, m in enumerate(mats):
        mi = m.inv()
        for mat, cone, name in ((m, cone_u, "C^u"), (mi, cone_s, "C^s")):
            inc = inclusion_margin(mat, cone)
            if inc <= MARGIN_FLOOR:
                raise InclusionFail(i, name)
            margin = min(margin, inc)
            expansion = min_expansion(mat, cone, grid_n)
            if expansion <= 1.0 + MARGIN_FLOOR:
                raise ExpansionFail(i, name, expansion)
            kappa = min(kappa, expansion)
    return ConeCertificate(cone_u, cone_s, kappa - tol, margin)


# ---------------------------------------------------------------------------
# eigen analysis


@dataclass(frozen=True)
class HyperbolicityReport:
    is_hyperbolic: bool
    eigenvalues: tuple[float, float] | None  # None when complex
    eigen_angles: tuple[float, float] | None  # (unstable, stable) line angles
    complex_pair: bool


def eigen_analysis(m: Mat2) -> HyperbolicityReport:
    """Eigen data of an invertible matrix.

    Hyperbolic means real eigenvalues with both moduli different from 1.  For
    integer matrices with det = +1 this reduces to |trace| > 2.  Eigen angles
    are returned as (expanding line, contracting line) when hyperbolic, else
    ordered by eigenvalue.
    """
    if m.det() == 0:
        raise ValueError("matrix must be invertible")
    tr = m.trace()
    det = m.det()
    disc = tr * tr - 4.0 * det
    if disc <= 0:
        # complex pair, or a repeated real eigenvalue (parabolic): not hyperbolic
        return HyperbolicityReport(False, None, None, complex_pair=disc < 0)
    rt = math.sqrt(disc)
    lam1 = 0.5 * (tr + rt)
    lam2 = 0.5 * (tr - rt)
    if abs(lam1) < abs(lam2):
        lam1, lam2 = lam2, lam1  # |lam1| >= |lam2|
    angles = (_eigen_angle(m, lam1), _eigen_angle(m, lam2))
    hyper = abs(abs(lam1) - 1.0) > 1e-12 and abs(abs(lam2) - 1.0) > 1e-12
    return HyperbolicityReport(hyper, (lam1, lam2), angles, complex_pair=False)


def _eigen_angle(m: Mat2, lam: float) -> float:
    if m.b != 0:
        return math.atan2(lam - m.a, m.b) % PI
    if m.c != 0:
        return math.atan2(m.c, lam - m.d) % PI
    return 0.0 if abs(m.a - lam) <= abs(m.d - lam) else 0.5 * PI


# ---------------------------------------------------------------------------
# certificate search


_WIDTH_SCHEDULE = tuple(1.35 * 0.78 ** i for i in range(16))  # ~1.35 .. 0.026 rad


def _circular_mean_angles(angles: Sequence[float]) -> float:
    """Mean of line angles via the doubled-angle embedding."""
    z = sum(complex(math.cos(2 * a), math.sin(2 * a)) for a in angles)
    if abs(z) < 1e-12:
        return angles[0]
    return (0.5 * math.atan2(z.imag, z.real)) % PI


def search_cone_certificate(mats: Sequence[Mat2],
                            grid_n: int = 2_000) -> ConeCertificate | None:
    """Deterministic search for a joint cone certificate.

    Candidate centers are the circular means of the matrices' unstable and
    stable eigen-angles; widths descend through a fixed coarse-to-fine
    schedule.  Returns the first certificate found, or None when the schedule
    is exhausted (a search outcome, not a proof of nonexistence).
    """
    reports = [eigen_analysis(m) for m in mats]
    if not all(r.is_hyperbolic for r in reports):
        return None
    center_u = _circular_mean_angles([r.eigen_angles[0] for r in reports])
    center_s = _circular_mean_angles([r.eigen_angles[1] for r in reports])
    for wu in _WIDTH_SCHEDULE:
        for ws in _WIDTH_SCHEDULE:
            try:
                cu = ProjectiveCone(center_u, wu)
                cs = ProjectiveCone(center_s, ws)
            except ValueError:
                continue
            if not cones_disjoint(cu, cs):
                continue
            try:
                return check_joint_cone(mats, cu, cs, grid_n=grid_n)
            except ConeError:
                continue
    return None


# ---------------------------------------------------------------------------
# non-commuting hyperbolic pairs in generated semigroups


def find_noncommuting_hyperbolic(
    generators: Sequence[Mat2], max_word_len: int
) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """Breadth-first search for two words in the generators whose products are
    both hyperbolic and do not commute.

    Words are enumerated in length-lexicographic order over generator indices;
    products use exact integer arithmetic.  Returns the first such pair of
    index words, or None.
    """
    gens = []
    for g in generators:
        if not g.is_integer():
            raise ValueError("generators must be integer matrices")
        gens.append((int(g.a), int(g.b), int(g.c), int(g.d)))

    def mul(p, q):
        return (p[0] * q[0] + p[1] * q[2], p[0] * q[1] + p[1] * q[3],
                p[2] * q[0] + p[3] * q[2], p[2] * q[1] + p[3] * q[3])

    def hyperbolic(p):
        a, b, c, d = p
        det = a * d - b * c
        if det == 0:
            return False
        tr = a + d
        disc = tr * tr - 4 * det
        if disc <= 0:
            return False
        rt = math.sqrt(disc)
        l1 = 0.5 * (tr + rt)
        l2 = 0.5 * (tr - rt)
        return abs(abs(l1) - 1.0) > 1e-12 and abs(abs(l2) - 1.0) > 1e-12

    found: list[tuple[tuple[int, ...], tuple[int, int, int, int]]] = []
    frontier = [((), (1, 0, 0, 1))]
    for _ in range(max_word_len):
        nxt = []
        for word, prod in frontier:
            for gi, g in enumerate(gens):
                w = word + (gi,)
                p = mul(g, prod)
                nxt.append((w, p))
                if hyperbolic(p):
                    for prev_word, prev_prod in found:
                        if mul(p, prev_prod) != mul(prev_prod, p):
                            return prev_word, w
                    found.append((w, p))
        frontier = nxt
    return None


def word_product(generators: Sequence[Mat2], word: Sequence[int]) -> Mat2:
    """Exact integer product of generators along an index word (applied right
    to left: word (i, j) gives G_j @ G_i... the same order the search uses)."""
    prod = (1, 0, 0, 1)
    for gi in word:
        g = generators[gi]
        a, b, c, d = int(g.a), int(g.b), int(g.c), int(g.d)
        prod = (a * prod[0] + b * prod[2], a * prod[1] + b * prod[3],
                c * prod[0] + d * prod[2], c * prod[1] + d * prod[3])
    return Mat2(*prod)


# ---------------------------------------------------------------------------
# perturbed families on a grid


@dataclass(frozen=True)
class PerturbedConeReport:
    passed: bool
    worst_margin: float  # slack-adjusted inclusion margin, radians
    worst_expansion: float  # slack-adjusted kappa over the grid
    worst_point: tuple[float, float]
    slack_angle: float
    slack_norm: float


def _batch_image_angle(a, b, c, d, angle: float):
    vx, vy = math.cos(angle), math.sin(angle)
    return np.arctan2(c * vx + d * vy, a * vx + b * vy) % PI


def _batch_inclusion_margin(a, b, c, d, cone: ProjectiveCone):
    """Vectorized inclusion_margin for arrays of matrix entries."""
    two_pi = 2.0 * PI
    lo = 2.0 * _batch_image_angle(a, b, c, d, cone.center_angle - cone.half_width)
    hi = 2.0 * _batch_image_angle(a, b, c, d, cone.center_angle + cone.half_width)
    mid = 2.0 * _batch_image_angle(a, b, c, d, cone.center_angle)
    len_ab = (hi - lo) % two_pi
    first = ((mid - lo) % two_pi) <= len_ab
    start = np.where(first, lo, hi) % two_pi
    length = np.where(first, len_ab, (lo - hi) % two_pi)
    t_start = (2.0 * (cone.center_angle - cone.half_width)) % two_pi
    t_length = 4.0 * cone.half_width
    off = (start - t_start) % two_pi
    return np.minimum(off, t_length - off - length) / 2.0


def min_stretch_closed_form(m: Mat2, cone: ProjectiveCone) -> float:
    """Exact infimum of ||M v|| over unit v in the closed cone.

    ||M v(theta)||^2 = alpha + beta cos 2 theta + gamma sin 2 theta, so the
    minimum is attained either at an interior critical angle or at a cone
    endpoint.  Used as an independent oracle for the grid-based search.
    """
    v = _batch_min_stretch(np.array([m.a]), np.array([m.b]),
                           np.array([m.c]), np.array([m.d]), cone)
    return float(v[0])


def _batch_min_stretch(a, b, c, d, cone: ProjectiveCone):
    alpha = 0.5 * (a * a + b * b + c * c + d * d)
    beta = 0.5 * (a * a - b * b + c * c - d * d)
    gamma = a * b + c * d
    t1 = cone.center_angle - cone.half_width
    width = 2.0 * cone.half_width
    t_star = (0.5 * np.arctan2(-gamma, -beta)) % PI
    inside = ((t_star - t1) % PI) <= width
    interior = alpha - np.hypot(beta, gamma)

    def q(theta):
        return alpha + beta * math.cos(2 * theta) + gamma * math.sin(2 * theta)

    boundary = np.minimum(q(t1), q(t1 + width))
    val = np.where(inside, np.minimum(interior, boundary), boundary)
    return np.sqrt(np.maximum(val, 0.0))


def check_perturbed_cones(family: Sequence, cert: ConeCertificate,
                          grid_n: int = 256) -> PerturbedConeReport:
    """Check the cone certificate for perturbed maps on a grid of base points.

    At each of grid_n x grid_n points the derivative (and its inverse) must
    map C^u (resp. C^s) into itself with expansion > 1.  Between grid points
    the derivative varies by at most

        L = eps * W2 * opnorm(A)^2 * h_max          (h_max = half diagonal
                                                     of a grid cell)

    where W2 bounds the second derivative of the perturbation displacement;
    the check subtracts the induced angular slack L / kappa and norm slack L
    from the measured per-point margins and passes only if both stay positive
    everywhere.  Expansion minima use the exact sinusoid closed form rather
    than the grid search (the per-point problem is one dimensional).
    """
    from .cocycle import MapSpec, jacobian_batch  # local import to avoid cycle

    h = 1.0 / grid_n
    xs = (np.arange(grid_n) + 0.5) * h
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])

    worst_margin = math.inf
    worst_exp = math.inf
    worst_pt = (0.0, 0.0)
    slack_angle_all = 0.0
    slack_norm_all = 0.0
    for spec in family:
        if not isinstance(spec, MapSpec):
            raise TypeError("family entries must be MapSpec")
        pert = spec.perturbation
        if pert is None or pert.amplitude == 0.0:
            lip = 0.0
        else:
            lip = pert.amplitude * pert.max_weight2() * spec.linear.opnorm() ** 2
        slack_norm = lip * h * math.sqrt(2.0) / 2.0
        # a matrix perturbation of operator norm s moves image angles of unit
        # vectors by at most s / ||M v||; bound with the certified kappa
        slack_angle = slack_norm / cert.kappa
        slack_angle_all = max(slack_angle_all, slack_angle)
        slack_norm_all = max(slack_norm_all, slack_norm)

        a, b, c, d = jacobian_batch(spec, pts)
        det = a * d - b * c
        ia, ib, ic, id_ = d / det, -b / det, -c / det, a / det
        for (ea, eb, ec, ed), cone in (((a, b, c, d), cert.cone_u),
                                       ((ia, ib, ic, id_), cert.cone_s)):
            inc = _batch_inclusion_margin(ea, eb, ec, ed, cone) - slack_angle
            exp_m = _batch_min_stretch(ea, eb, ec, ed, cone) - slack_norm
            i_inc = int(np.argmin(inc))
            i_exp = int(np.argmin(exp_m))
            if inc[i_inc] < worst_margin:
                worst_margin = float(inc[i_inc])
                worst_pt = (float(pts[i_inc, 0]), float(pts[i_inc, 1]))
            if exp_m[i_exp] < worst_exp:
                worst_exp = float(exp_m[i_exp])
                if exp_m[i_exp] <= 1.0:
                    worst_pt = (float(pts[i_exp, 0]), float(pts[i_exp, 1]))
    passed = worst_margin > 0.0 and worst_exp > 1.0
    return PerturbedConeReport(passed, worst_margin, worst_exp, worst_pt,
                               slack_angle_all, slack_norm_all)
