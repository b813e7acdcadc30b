"""Lyapunov exponents, Oseledec directions, Lyapunov norms, and stopping times.

The central estimator is projective iteration: push a generic direction
through the derivative cocycle, renormalizing each step and averaging the log
stretch.  The bottom exponent comes from the determinant identity
lambda_u + lambda_s = mean log |det Df| (exact for the estimates by
construction) rather than from a second vector, and an independent backward
iteration cross-checks it.

Truncated Lyapunov norms realize the orbit-adapted norms

    ||v||'^2 = sum_n ||Df^n v||^2 exp(-2 lambda n - 2 eps0 |n|)

restricted to |n| <= W (one-sided: n in [-W, 0]).  With respect to these
norms, hyperbolicity is uniform step by step, which is what the stopping-time
tables and their bi-Lipschitz slope bounds exercise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .cocycle import (
    DrivingMeasure,
    MapSpec,
    Mat2,
    ScaledMat2,
    TorusPoint,
    Word,
    apply_xy,
    inverse_xy,
    jacobian_xy,
    point_mass,
    sample_word,
    svd2,
)
from .cones import eigen_analysis, line_image_angle, proj_dist
from .rng import derive_seeds, make_rng

PI = math.pi


class DegenerateCocycle(RuntimeError):
    """Derivative norms vanished or blew up; the map family is invalid."""


class UnreliableDirections(RuntimeError):
    """Too many direction estimates failed their hyperbolicity check."""


class OutOfRange(IndexError):
    """Requested stopping-time data beyond the available orbit."""


class PreconditionFail(ValueError):
    """Structural precondition of an operation does not hold."""


# ---------------------------------------------------------------------------
# exponent estimation


@dataclass(frozen=True)
class LyapunovEstimate:
    """Exponent pair in nats per step.

    lambda_s is defined as mean_log_det - lambda_u, so the sum identity holds
    exactly by construction; lambda_s is additionally clamped to lambda_u from
    above (the clamp only ever acts at rounding level, e.g. for isometries
    where both exponents vanish).
    """

    lambda_u: float
    lambda_s: float
    stderr_u: float
    n_steps: int
    mean_log_det: float

    def __post_init__(self):
        if self.lambda_u < self.lambda_s - 1e-9:
            raise ValueError("lambda_u must not be below lambda_s")

    @property
    def hyperbolic(self) -> bool:
        return self.lambda_u > 0 > self.lambda_s


# The growth of a 2x2 product is read off the scaled matrix product (top
# singular value), not off an iterated vector: a single pushed direction
# cannot recover cancellations such as A, A^{-1} words returning to the
# identity.  Even so, float arithmetic loses a cancellation once an
# intermediate product's condition number exceeds 1/eps; products of integer
# matrices are therefore refined exactly (divide-and-conquer big-integer
# product) whenever the float estimate lands in the near-cancellation band.

_EXACT_REFINE_BAND = 0.05  # nats/step; below this, integer families re-run exactly
_TREE_LEAF = 32


def _log_big(x: int) -> float:
    bl = x.bit_length()
    if bl <= 53:
        return math.log(x)
    return (bl - 53) * math.log(2.0) + math.log(float(x >> (bl - 53)))


def _log_smax_int(m: tuple[int, int, int, int]) -> float:
    """log of the largest singular value of an integer 2x2 matrix, exactly
    (isqrt on the characteristic data of M^T M)."""
    a, b, c, d = m
    t = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = t * t - 4 * det * det
    s = math.isqrt(disc)
    return 0.5 * (_log_big(t + s) - math.log(2.0))


def _tree_product(mats: list[tuple[int, int, int, int]], entries: list[int],
                  lo: int, hi: int) -> tuple[int, int, int, int]:
    """Exact product M_{hi-1} ... M_{lo} of integer matrices along a word."""
    if hi - lo <= _TREE_LEAF:
        a, b, c, d = 1, 0, 0, 1
        for e in entries[lo:hi]:
            ma, mb, mc, md = mats[e]
            a, b, c, d = (ma * a + mb * c, ma * b + mb * d,
                          mc * a + md * c, mc * b + md * d)
        return a, b, c, d
    mid = (lo + hi) // 2
    pa, pb, pc, pd = _tree_product(mats, entries, lo, mid)
    qa, qb, qc, qd = _tree_product(mats, entries, mid, hi)
    return (qa * pa + qb * pc, qa * pb + qb * pd,
            qc * pa + qd * pc, qc * pb + qd * pd)


def _exact_int_estimate(mats: list[tuple[int, int, int, int]],
                        entries: list[int], n_batches: int) -> tuple[float, float]:
    """(top exponent, batch stderr) from exact integer cocycle products."""
    n = len(entries)
    batch = n // n_batches
    vals = []
    for k in range(n_batches):
        lo = k * batch
        hi = n if k == n_batches - 1 else (k + 1) * batch
        p = _tree_product(mats, entries, lo, hi)
        vals.append(_log_smax_int(p))
    # block subadditivity: the mean of block growth rates upper-estimates the
    # exponent; the exact full product gives the tightest single-window value
    full = _tree_product(mats, entries, 0, n)
    lam = _log_smax_int(full) / n
    means = np.array(vals[:n_batches]) / batch
    stderr = float(means.std(ddof=1) / math.sqrt(len(means)))
    return lam, stderr


def _int_family_mats(specs: list[MapSpec]) -> list[tuple[int, int, int, int]] | None:
    mats = []
    for s in specs:
        if not s.is_linear():
            return None
        m = s.linear
        mats.append((int(m.a), int(m.b), int(m.c), int(m.d)))
    return mats


def top_exponent(family: Mapping[str, MapSpec], nu: DrivingMeasure,
                 x0: TorusPoint, n: int, seed: int, *,
                 burn_in: int = 1000, n_batches: int = 20) -> LyapunovEstimate:
    """Top Lyapunov exponent along one random orbit of length n (after
    burn_in), via the rescaled derivative cocycle product.

    The per-step rescaling keeps the running product at unit operator norm,
    so words of any length neither overflow nor underflow.  The standard
    error is the batch-means estimate over `n_batches` consecutive batches.
    Deterministic in `seed`.
    """
    if n < n_batches:
        raise ValueError("n too small for batch error estimate")
    word = sample_word(nu, burn_in + n, seed)
    specs = [family[i] for i in nu.ids]
    lin = [None if not s.is_linear() else
           (float(s.linear.a), float(s.linear.b), float(s.linear.c),
            float(s.linear.d), abs(float(s.linear.det()))) for s in specs]
    entries = word.entries.tolist()
    x, y = x0.x, x0.y
    # scaled product state: unit-opnorm matrix + accumulated log scale
    pa, pb, pc, pd = 1.0, 0.0, 0.0, 1.0
    batch = n // n_batches
    batch_sums: list[float] = []
    log_acc = 0.0
    det_acc = 0.0
    cur = 0.0
    in_batch = 0
    log = math.log
    for step, e in enumerate(entries):
        t = lin[e]
        if t is not None:
            a, b, c, d, adet = t
            fx = (a * x + b * y) % 1.0
            fy = (c * x + d * y) % 1.0
        else:
            spec = specs[e]
            jac = jacobian_xy(spec, x, y)
            a, b, c, d = jac.a, jac.b, jac.c, jac.d
            adet = abs(jac.det())
            fx, fy = apply_xy(spec, x, y)
        if step >= burn_in:
            qa = a * pa + b * pc
            qb = a * pb + b * pd
            qc = c * pa + d * pc
            qd = c * pb + d * pd
            s1, _, _, _ = svd2(qa, qb, qc, qd)
            if not (s1 > 0.0 and math.isfinite(s1)):
                raise DegenerateCocycle("cocycle product became degenerate")
            pa, pb, pc, pd = qa / s1, qb / s1, qc / s1, qd / s1
            g = log(s1)
            log_acc += g
            det_acc += log(adet)
            cur += g
            in_batch += 1
            if in_batch == batch and len(batch_sums) < n_batches:
                batch_sums.append(cur)
                cur = 0.0
                in_batch = 0
        x = 0.0 if fx == 1.0 else fx
        y = 0.0 if fy == 1.0 else fy

    lam_u = log_acc / n
    mld = det_acc / n
    means = np.array(batch_sums) / batch
    stderr = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0

    if abs(lam_u) < _EXACT_REFINE_BAND:
        mats = _int_family_mats(specs)
        if mats is not None:
            lam_u, stderr = _exact_int_estimate(mats, entries[burn_in:], n_batches)
    lam_s = min(mld - lam_u, lam_u)
    return LyapunovEstimate(lam_u, lam_s, stderr, n, mld)


def backward_top_exponent(family: Mapping[str, MapSpec], nu: DrivingMeasure,
                          x0: TorusPoint, n: int, seed: int, *,
                          burn_in: int = 1000,
                          n_batches: int = 20) -> LyapunovEstimate:
    """Top exponent of the inverse cocycle along the same forward orbit.

    Runs the forward orbit, then composes the inverse Jacobians in reverse
    order (rescaled matrix product).  For the forward exponent pair
    (lambda_u, lambda_s) this recovers -lambda_s as its top value.
    """
    word = sample_word(nu, burn_in + n, seed)
    specs = [family[i] for i in nu.ids]
    entries = word.entries.tolist()
    x, y = x0.x, x0.y
    pts_x = np.empty(n)
    pts_y = np.empty(n)
    for step, e in enumerate(entries):
        if step >= burn_in:
            pts_x[step - burn_in] = x
            pts_y[step - burn_in] = y
        x, y = apply_xy(specs[e], x, y)

    pa, pb, pc, pd = 1.0, 0.0, 0.0, 1.0
    log = math.log
    log_acc = 0.0
    det_acc = 0.0
    batch = n // n_batches
    batch_sums: list[float] = []
    cur = 0.0
    in_batch = 0
    for k in range(n - 1, -1, -1):
        e = entries[burn_in + k]
        jac = jacobian_xy(specs[e], pts_x[k], pts_y[k])
        det = jac.det()
        a, b, c, d = jac.d / det, -jac.b / det, -jac.c / det, jac.a / det
        qa = a * pa + b * pc
        qb = a * pb + b * pd
        qc = c * pa + d * pc
        qd = c * pb + d * pd
        s1, _, _, _ = svd2(qa, qb, qc, qd)
        if not (s1 > 0.0 and math.isfinite(s1)):
            raise DegenerateCocycle("backward product became degenerate")
        pa, pb, pc, pd = qa / s1, qb / s1, qc / s1, qd / s1
        g = log(s1)
        log_acc += g
        det_acc += -log(abs(det))
        cur += g
        in_batch += 1
        if in_batch == batch and len(batch_sums) < n_batches:
            batch_sums.append(cur)
            cur = 0.0
            in_batch = 0

    lam_u = log_acc / n
    mld = det_acc / n
    means = np.array(batch_sums) / batch
    stderr = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else 0.0

    if abs(lam_u) < _EXACT_REFINE_BAND:
        mats = _int_family_mats(specs)
        if mats is not None:
            # inverse of an integer matrix is its adjugate over the determinant
            adj = [(m[3], -m[1], -m[2], m[0]) for m in mats]
            rev = [entries[burn_in + k] for k in range(n - 1, -1, -1)]
            lam_adj, stderr = _exact_int_estimate(adj, rev, n_batches)
            dets = sum(log(abs(float(specs[e].linear.det())))
                       for e in entries[burn_in:])
            lam_u = lam_adj - dets / n
    lam_s = min(mld - lam_u, lam_u)
    return LyapunovEstimate(lam_u, lam_s, stderr, n, mld)


# ---------------------------------------------------------------------------
# Oseledec directions


@dataclass(frozen=True)
class DirectionEstimate:
    """A stable or unstable line estimate at a finite horizon.

    `convergence_gap` is the angular move between horizons N - gap_lag and N;
    the estimate is flagged unreliable when the singular values of the
    defining cocycle are within a factor 2 of each other or when the gap
    exceeds 1e-3.
    """

    angle: float  # mod pi
    horizon: int
    convergence_gap: float
    sv_log_gap: float
    unreliable: bool


SV_RATIO_FLOOR = math.log(2.0)
GAP_FLOOR = 1e-3


def _cocycle_with_checkpoint(family, word, x: TorusPoint, n: int,
                             checkpoint: int) -> tuple[ScaledMat2, ScaledMat2]:
    specs = [family[i] for i in word.ids]
    entries = word.entries[:n].tolist()
    acc = ScaledMat2.identity()
    at_checkpoint = None
    px, py = x.x, x.y
    for i, e in enumerate(entries):
        if i == checkpoint:
            at_checkpoint = acc
        spec = specs[e]
        acc = acc.compose_left(jacobian_xy(spec, px, py))
        px, py = apply_xy(spec, px, py)
    if checkpoint == n:
        at_checkpoint = acc
    return acc, at_checkpoint


def stable_direction(family: Mapping[str, MapSpec], word: Word, x: TorusPoint,
                     n: int, *, gap_lag: int = 10) -> DirectionEstimate:
    """Most contracted input direction of the n-step cocycle at x.

    Computed as the right-singular direction for the smaller singular value,
    via the closed-form 2x2 SVD of the scaled cocycle.
    """
    if n > len(word):
        raise ValueError("horizon exceeds word length")
    lag = min(gap_lag, n)
    full, part = _cocycle_with_checkpoint(family, word, x, n, n - lag)
    log_s1, log_s2, _, ang_min = full.svd()
    _, _, _, ang_min_prev = part.svd()
    gap = proj_dist(ang_min, ang_min_prev)
    sv_gap = log_s1 - log_s2
    unreliable = sv_gap < SV_RATIO_FLOOR or gap > GAP_FLOOR
    return DirectionEstimate(ang_min, n, gap, sv_gap, unreliable)


def backward_orbit(family: Mapping[str, MapSpec], word: Word, x: TorusPoint,
                   base_index: int, depth: int) -> list[TorusPoint]:
    """Points x, x_{-1}, ..., x_{-depth} obtained by inverting the word
    entries base_index-1, ..., base_index-depth in turn."""
    if depth > base_index:
        raise ValueError("not enough word entries before the base index")
    specs = [family[i] for i in word.ids]
    entries = word.entries.tolist()
    pts = [x]
    cx, cy = x.x, x.y
    for k in range(1, depth + 1):
        spec = specs[entries[base_index - k]]
        cx, cy = inverse_xy(spec, cx, cy)
        pts.append(TorusPoint(cx, cy))
    return pts


def _forward_image_angle(family, word, start: TorusPoint, i0: int, n: int) -> tuple[float, float]:
    """(image angle of the most stretched direction, sv log gap) for the
    cocycle over word entries [i0, i0 + n) starting at `start`."""
    specs = [family[i] for i in word.ids]
    entries = word.entries[i0:i0 + n].tolist()
    acc = ScaledMat2.identity()
    px, py = start.x, start.y
    for e in entries:
        spec = specs[e]
        acc = acc.compose_left(jacobian_xy(spec, px, py))
        px, py = apply_xy(spec, px, py)
    log_s1, log_s2, ang_max, _ = acc.svd()
    wx, wy = acc.mat.apply(math.cos(ang_max), math.sin(ang_max))
    return math.atan2(wy, wx) % PI, log_s1 - log_s2


def unstable_direction(family: Mapping[str, MapSpec], word: Word, x: TorusPoint,
                       n: int, *, base_index: int | None = None,
                       gap_lag: int = 10) -> DirectionEstimate:
    """Unstable line at x determined by the n most recent maps of the word.

    x sits at position `base_index` (default n) of the word; the estimate is
    the image of the most stretched singular direction of the cocycle from
    the n-step pullback of x forward to x.
    """
    base = n if base_index is None else base_index
    back = backward_orbit(family, word, x, base, n)
    ang, sv_gap = _forward_image_angle(family, word, back[n], base - n, n)
    lag = min(gap_lag, n - 1)
    ang_prev, _ = _forward_image_angle(family, word, back[n - lag],
                                       base - (n - lag), n - lag)
    gap = proj_dist(ang, ang_prev)
    unreliable = sv_gap < SV_RATIO_FLOOR or gap > GAP_FLOOR
    return DirectionEstimate(ang, n, gap, sv_gap, unreliable)


def nonrandomness_score(family: Mapping[str, MapSpec], nu: DrivingMeasure,
                        x: TorusPoint, k_words: int, n: int, seed: int) -> float:
    """Circular variance of stable directions at x across independent words.

    Angles are embedded by doubling (line angles live mod pi); the score is
    1 - |mean|, in [0, 1].  0 means every word produced the same stable line
    (a non-random candidate); values near 1 mean strong word dependence.
    Raises UnreliableDirections when more than half the words are flagged.
    """
    if k_words < 2:
        raise ValueError("need at least two words")
    seeds = derive_seeds(seed, k_words)
    angles = []
    flagged = 0
    for s in seeds:
        word = sample_word(nu, n, s)
        est = stable_direction(family, word, x, n)
        if est.unreliable:
            flagged += 1
        angles.append(est.angle)
    if flagged * 2 > k_words:
        raise UnreliableDirections(f"{flagged}/{k_words} directions unreliable")
    if all(a == angles[0] for a in angles):
        return 0.0
    # sorting makes the score exactly invariant under permuting the words
    z = np.exp(2j * np.sort(np.array(angles))).mean()
    return float(min(max(1.0 - abs(z), 0.0), 1.0))


# ---------------------------------------------------------------------------
# truncated Lyapunov norms


def default_epsilon0(est: LyapunovEstimate) -> float:
    """Half the admissible ceiling min{1, lambda_u/200, -lambda_s/200}."""
    if not est.hyperbolic:
        raise PreconditionFail("epsilon0 default needs a hyperbolic estimate")
    return 0.5 * min(1.0, est.lambda_u / 200.0, -est.lambda_s / 200.0)


def validate_epsilon0(epsilon0: float, est: LyapunovEstimate | None) -> None:
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    if est is not None and est.hyperbolic:
        ceiling = min(1.0, est.lambda_u / 200.0, -est.lambda_s / 200.0)
        if epsilon0 >= ceiling:
            raise ValueError(
                f"epsilon0 {epsilon0:.3g} must stay below {ceiling:.3g}"
            )


def _unit_from(v0: tuple[float, float]) -> tuple[float, float]:
    n = math.hypot(v0[0], v0[1])
    if n == 0 or not math.isfinite(n):
        raise ValueError("direction must be nonzero and finite")
    return v0[0] / n, v0[1] / n


def _relative_log_norms(family, word, x: TorusPoint, v: tuple[float, float],
                        base_index: int, n_back: int, n_fwd: int,
                        bundle: str | None = None) -> np.ndarray:
    """logs[j + n_back] = log(||Df^j v|| / ||v||) for j in [-n_back, n_fwd].

    bundle = None transports the literal float vector both ways.  That is the
    honest norm of v itself, but a float vector can never sit exactly on an
    (irrational) Oseledec line, so its transport in the line's repelling time
    direction eventually follows the complementary component.  bundle = "u"
    or "s" therefore treats span(v) as the unstable resp. stable line and
    transports a line anchored at the end where that bundle attracts: for "u"
    the anchor is the most-stretched input direction of the forward cocycle
    at the n_back-pullback of x; for "s" the anchor at the n_fwd-image is the
    most-contracted output direction, transported backward.  In both cases
    every step moves in the bundle's attracting time direction, so the
    profile tracks the restricted cocycle stably.
    """
    specs = [family[i] for i in word.ids]
    entries = word.entries.tolist()
    if base_index - n_back < 0 or base_index + n_fwd > len(entries):
        raise ValueError("orbit segment not covered by the word")
    ux, uy = _unit_from(v)
    logs = np.zeros(n_back + n_fwd + 1)

    if bundle == "u":
        back = backward_orbit(family, word, x, base_index, n_back)
        # anchor: most-stretched input direction of the pullback-to-base cocycle
        acc = ScaledMat2.identity()
        px, py = back[n_back].x, back[n_back].y
        for k in range(n_back):
            spec = specs[entries[base_index - n_back + k]]
            acc = acc.compose_left(jacobian_xy(spec, px, py))
            px, py = apply_xy(spec, px, py)
        _, _, ang_max, _ = acc.svd()
        wx, wy = math.cos(ang_max), math.sin(ang_max)
        cx, cy = back[n_back].x, back[n_back].y
        cum = 0.0
        for j in range(-n_back, n_fwd):
            spec = specs[entries[base_index + j]]
            jac = jacobian_xy(spec, cx, cy)
            tx, ty = jac.apply(wx, wy)
            nrm = math.hypot(tx, ty)
            cum += math.log(nrm)
            wx, wy = tx / nrm, ty / nrm
            logs[n_back + j + 1] = cum
            cx, cy = apply_xy(spec, cx, cy)
        logs -= logs[n_back]
        return logs

    if bundle == "s":
        # anchor: most-contracted output direction at the forward end
        acc = ScaledMat2.identity()
        cx, cy = x.x, x.y
        for j in range(n_fwd):
            spec = specs[entries[base_index + j]]
            acc = acc.compose_left(jacobian_xy(spec, cx, cy))
            cx, cy = apply_xy(spec, cx, cy)
        _, _, _, ang_min = acc.svd()
        ix, iy = acc.mat.apply(math.cos(ang_min), math.sin(ang_min))
        nrm = math.hypot(ix, iy)
        if nrm == 0.0:
            ang = (ang_min + 0.5 * PI) % PI  # fully collapsed; any transverse
            ix, iy = math.cos(ang), math.sin(ang)
        else:
            ix, iy = ix / nrm, iy / nrm
        end = TorusPoint(cx, cy)
        wx, wy = ix, iy
        cum = 0.0
        cx, cy = end.x, end.y
        for j in range(n_fwd - 1, -n_back - 1, -1):
            spec = specs[entries[base_index + j]]
            cx, cy = inverse_xy(spec, cx, cy)
            jac = jacobian_xy(spec, cx, cy)
            det = jac.det()
            tx = (jac.d * wx - jac.b * wy) / det
            ty = (-jac.c * wx + jac.a * wy) / det
            nrm = math.hypot(tx, ty)
            # pullback norm is the reciprocal forward stretch, so adding its
            # log makes consecutive differences the forward increments
            cum += math.log(nrm)
            wx, wy = tx / nrm, ty / nrm
            logs[n_back + j] = cum
        logs -= logs[n_back]
        return logs

    # literal vector transport
    cx, cy = x.x, x.y
    wx, wy = ux, uy
    acc = 0.0
    for j in range(n_fwd):
        spec = specs[entries[base_index + j]]
        jac = jacobian_xy(spec, cx, cy)
        wx, wy = jac.apply(wx, wy)
        nrm = math.hypot(wx, wy)
        acc += math.log(nrm)
        wx /= nrm
        wy /= nrm
        logs[n_back + j + 1] = acc
        cx, cy = apply_xy(spec, cx, cy)
    cx, cy = x.x, x.y
    wx, wy = ux, uy
    acc = 0.0
    for k in range(1, n_back + 1):
        spec = specs[entries[base_index - k]]
        cx, cy = inverse_xy(spec, cx, cy)
        jac = jacobian_xy(spec, cx, cy)
        det = jac.det()
        tx = (jac.d * wx - jac.b * wy) / det
        ty = (-jac.c * wx + jac.a * wy) / det
        nrm = math.hypot(tx, ty)
        acc += math.log(nrm)
        wx, wy = tx / nrm, ty / nrm
        logs[n_back - k] = acc
    return logs


def truncated_norm(family: Mapping[str, MapSpec], word: Word, x: TorusPoint,
                   v: tuple[float, float], window: int, epsilon0: float,
                   lam: float, *, two_sided: bool = True,
                   base_index: int | None = None,
                   bundle: str | None = None) -> float:
    """Truncated Lyapunov norm of the tangent vector v at x.

    Two-sided: (sum_{|j| <= W} ||Df^j v||^2 e^{-2 lam j - 2 eps0 |j|})^{1/2};
    one-sided truncates to j in [-W, 0].  `lam` is the exponent of the
    Oseledec bundle v approximates; pass bundle = "u" or "s" to transport
    span(v) as that bundle's line (see _relative_log_norms) instead of
    transporting the literal float vector.  The point x sits at word position
    `base_index` (default W), so backward steps resolve against earlier word
    entries.  Always >= ||v|| (the j = 0 term); exactly homogeneous in v.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    base = window if base_index is None else base_index
    n_fwd = window if two_sided else 0
    logs = _relative_log_norms(family, word, x, v, base, window, n_fwd, bundle)
    js = np.arange(-window, n_fwd + 1)
    expo = 2.0 * (logs - lam * js - epsilon0 * np.abs(js))
    top = expo.max()
    s = math.sqrt(float(np.exp(expo - top).sum())) * math.exp(0.5 * top)
    return math.hypot(v[0], v[1]) * s


@dataclass(frozen=True)
class GrowthCheckReport:
    passed: bool
    margin_low: float  # log-units of unused slack, >= 0 when passing
    margin_high: float
    tail: float  # data-driven boundary mass ratio entering the slack
    slack_log: float


def norm_growth_check(family: Mapping[str, MapSpec], word: Word, x: TorusPoint,
                      v: tuple[float, float], window: int, epsilon0: float,
                      lam: float, n: int, *, base_index: int | None = None,
                      bundle: str | None = None) -> GrowthCheckReport:
    """Check the two-sided Lyapunov-norm growth sandwich over n steps:

        e^{n lam - n eps0} ||v||' / slack <= ||Df^n v||' <= e^{n lam + n eps0} ||v||' slack

    with both norms truncated at the same window W.  The truncation breaks the
    infinite-sum index-shift inequality only through boundary terms; the check
    computes that boundary mass from the orbit data and uses

        slack = e^{2 eps0} (1 + tail),   tail = boundary mass / ||v||'^2.

    Margins report the unused slack in log units.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > window:
        raise ValueError("n must not exceed the window")
    base = window if base_index is None else base_index
    logs = _relative_log_norms(family, word, x, v, base, window, window + n, bundle)
    js = np.arange(-window, window + n + 1)
    terms = 2.0 * (logs - lam * js - epsilon0 * np.abs(js))
    top = terms.max()
    weights = np.exp(terms - top)

    in_a = np.abs(js) <= window
    a2 = float(weights[in_a].sum())
    missing = float(weights[js < n - window].sum())  # A-terms absent at image
    extra = float(weights[js > window].sum())  # image terms outside A's range
    tail = (missing + extra) / a2

    # image norm with the same window, exact index arithmetic
    img = 2.0 * (logs - lam * (js - n) - epsilon0 * np.abs(js - n))
    in_b = np.abs(js - n) <= window
    b_terms = img[in_b]
    top_b = b_terms.max()
    b2 = float(np.exp(b_terms - top_b).sum())

    log_a = 0.5 * (math.log(a2) + top)
    log_b = 0.5 * (math.log(b2) + top_b)
    slack_log = 2.0 * epsilon0 + math.log1p(tail)
    margin_low = log_b - (n * lam - n * epsilon0 + log_a - slack_log)
    margin_high = (n * lam + n * epsilon0 + log_a + slack_log) - log_b
    passed = margin_low >= -1e-12 and margin_high >= -1e-12
    return GrowthCheckReport(passed, margin_low, margin_high, tail, slack_log)


# ---------------------------------------------------------------------------
# stopping times


@dataclass(frozen=True)
class NormLogData:
    """Cumulative log operator norms along one word, in a fixed norm family.

    stable_cum[m] = log ||Df^m restricted to the stable line||' and
    unstable_cum[m] likewise for the unstable line, both relative to the
    norms at position 0 (entry 0 is 0).  unstable_cum must be strictly
    increasing for stopping times to be well defined.
    """

    stable_cum: np.ndarray
    unstable_cum: np.ndarray
    lam_u: float
    lam_s: float
    epsilon0: float
    window: int

    def __post_init__(self):
        if np.any(np.diff(self.unstable_cum) <= 0):
            raise ValueError("unstable cumulative log norms must be increasing")


def build_norm_log_data(family: Mapping[str, MapSpec], nu: DrivingMeasure,
                        x0: TorusPoint, m_max: int, seed: int, *,
                        window: int = 600, epsilon0: float | None = None,
                        est: LyapunovEstimate | None = None,
                        horizon: int = 100) -> NormLogData:
    """Truncated-Lyapunov-norm profiles along one random orbit.

    Builds, for positions m = 0..m_max, the cumulative log norms of the
    restricted cocycle in the two-sided truncated Lyapunov norm with the given
    (window, epsilon0).  Directions are obtained by converged projective
    iteration: forward for the unstable line and backward (through inverse
    Jacobians) for the stable line, refreshed at every step.

    The truncation window must suppress its own boundary: per-step norm
    ratios stay inside the band e^{lam +- eps0} up to boundary terms of
    relative size ~ e^{2(sd sqrt(W) - eps0 W)}, where sd is the per-step
    fluctuation of log stretches.  The defaults (W = 600 and, when epsilon0
    is not given, eps0 = lambda_u / 10) keep that factor negligible for
    moderately hyperbolic families; the package-wide tiny default epsilon0
    would need W ~ 1e6 to do the same.
    """
    if est is None:
        est = top_exponent(family, nu, x0, 20_000, seed ^ 0x5EED)
    if not est.hyperbolic:
        raise PreconditionFail("stopping-time data needs a hyperbolic family")
    eps0 = epsilon0 if epsilon0 is not None else est.lambda_u / 10.0
    if eps0 <= 0 or eps0 >= est.lambda_u:
        raise ValueError("epsilon0 must lie in (0, lambda_u)")
    w = window
    total = m_max + 2 * w + 2 * horizon
    word = sample_word(nu, total, seed)
    specs = [family[i] for i in nu.ids]
    entries = word.entries.tolist()

    # orbit
    xs = np.empty(total + 1)
    ys = np.empty(total + 1)
    cx, cy = x0.x, x0.y
    for i, e in enumerate(entries):
        xs[i], ys[i] = cx, cy
        cx, cy = apply_xy(specs[e], cx, cy)
    xs[total], ys[total] = cx, cy

    # forward pass: unstable unit direction, per-step log stretches
    inc_u = np.zeros(total)
    ux, uy = 0.6, 0.8
    for i, e in enumerate(entries):
        jac = jacobian_xy(specs[e], xs[i], ys[i])
        wx, wy = jac.apply(ux, uy)
        nrm = math.hypot(wx, wy)
        inc_u[i] = math.log(nrm)
        ux, uy = wx / nrm, wy / nrm

    # backward pass: stable unit direction via inverse Jacobians
    inc_s = np.zeros(total)
    vx, vy = 0.6, 0.8
    for i in range(total - 1, -1, -1):
        jac = jacobian_xy(specs[entries[i]], xs[i], ys[i])
        det = jac.det()
        # pull back through the inverse, which expands the stable line
        tx = (jac.d * vx - jac.b * vy) / det
        ty = (-jac.c * vx + jac.a * vy) / det
        nrm = math.hypot(tx, ty)
        vx, vy = tx / nrm, ty / nrm
        # stretch of the (now converged) stable direction under the forward map
        fx, fy = jac.apply(vx, vy)
        inc_s[i] = math.log(math.hypot(fx, fy))

    c_u = np.concatenate([[0.0], np.cumsum(inc_u)])
    c_s = np.concatenate([[0.0], np.cumsum(inc_s)])

    base0 = horizon + w  # word index of position m = 0
    js = np.arange(-w, w + 1)

    def profile(c: np.ndarray, lam: float) -> np.ndarray:
        centers = base0 + np.arange(m_max + 1)
        rows = c[centers[:, None] + js[None, :]] - c[centers][:, None]
        rows = 2.0 * (rows - lam * js[None, :] - eps0 * np.abs(js)[None, :])
        top = rows.max(axis=1)
        log_q = 0.5 * (np.log(np.exp(rows - top[:, None]).sum(axis=1)) + top)
        return (c[centers] - c[base0]) + log_q - log_q[0]

    return NormLogData(profile(c_s, est.lambda_s), profile(c_u, est.lambda_u),
                       est.lambda_u, est.lambda_s, eps0, w)


@dataclass(frozen=True)
class StoppingTimeTable:
    """tau(m) = largest integer l >= 0 with
    ||Df^m|E^s||' . ||Df^l|E^u at position m||' . delta <= eps,
    and L(m) = m + tau(m).  tau is non-decreasing and L strictly increasing
    (integer-valued tau plateaus where the continuous-time version has slope
    below one)."""

    delta: float
    eps: float
    ms: np.ndarray
    taus: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.taus) < 0):
            raise ValueError("tau must be non-decreasing")
        if np.any(np.diff(self.ms + self.taus) <= 0):
            raise ValueError("L must be strictly increasing")

    @property
    def ls(self) -> np.ndarray:
        return self.ms + self.taus


def stopping_times(data: NormLogData, delta: float, eps: float,
                   m_range: Sequence[int]) -> StoppingTimeTable:
    """Stopping-time table from cumulative norm profiles, by binary search.

    Raises OutOfRange when an m (or its stopping position) runs past the
    available profile.
    """
    if delta <= 0 or eps <= 0:
        raise ValueError("delta and eps must be positive")
    ms = np.asarray(list(m_range), dtype=np.int64)
    if len(ms) == 0:
        raise ValueError("empty m range")
    u = data.unstable_cum
    s = data.stable_cum
    budget = math.log(eps / delta)
    taus = np.empty(len(ms), dtype=np.int64)
    for i, m in enumerate(ms):
        if m >= len(s):
            raise OutOfRange(f"m = {m} beyond stable profile")
        target = u[m] + budget - s[m]
        if target < u[m] - 1e-12:
            raise ValueError("stable norm at m already exceeds the eps/delta budget")
        # last index with u[idx] <= target
        idx = int(np.searchsorted(u, target + 1e-12, side="right")) - 1
        if idx >= len(u) - 1:
            raise OutOfRange(f"stopping position for m = {m} beyond profile")
        taus[i] = idx - m
    return StoppingTimeTable(delta, eps, ms, taus)


@dataclass(frozen=True)
class SlopeBoundReport:
    passed: bool
    lo: float
    hi: float
    worst_low: float  # most negative clearance over lags
    worst_high: float


def check_slope_bounds(table: StoppingTimeTable, lam_u: float, lam_s: float,
                       epsilon0: float,
                       lags: Sequence[int] = (1, 5, 10, 20)) -> SlopeBoundReport:
    """Check all discrete tau slopes against the bi-Lipschitz interval

        [(-lam_s - 3 eps0)/(lam_u + eps0), (-lam_s + 3 eps0)/(lam_u - eps0)]

    enlarged by the one-step discretization slack 1/lag."""
    lo = (-lam_s - 3 * epsilon0) / (lam_u + epsilon0)
    hi = (-lam_s + 3 * epsilon0) / (lam_u - epsilon0)
    worst_low = math.inf
    worst_high = math.inf
    ms = table.ms
    idx_of = {int(m): i for i, m in enumerate(ms)}
    for lag in lags:
        for i, m in enumerate(ms):
            j = idx_of.get(int(m) + lag)
            if j is None:
                continue
            slope = (table.taus[j] - table.taus[i]) / lag
            worst_low = min(worst_low, slope - (lo - 1.0 / lag))
            worst_high = min(worst_high, (hi + 1.0 / lag) - slope)
    passed = worst_low >= 0 and worst_high >= 0
    return SlopeBoundReport(passed, lo, hi, worst_low, worst_high)


# ---------------------------------------------------------------------------
# mixed projectivized cocycle over an invariant line pair


@dataclass(frozen=True)
class MixedExponentResult:
    closed_form: float
    simulated: float
    t: float


def mixed_projective_exponent(f_mat: Mat2, g_mat: Mat2, t: float, *,
                              n_steps: int = 100_000,
                              seed: int = 0) -> MixedExponentResult:
    """Exponent of the random product (g with probability t, f with 1 - t)
    along the invariant pair {unstable line of f, stable line of f}.

    Closed form:  (1 - t) (lam_u(f) + lam_s(f))/2
                  + t (log ||g|E^u|| + log ||g|E^s||)/2.

    The simulation runs the two-line Markov chain for n_steps: each map either
    fixes or swaps the two lines, with an exact per-transition log gain; the
    reported value averages the chains started on each line of the pair
    (matching the half-half weighting of the closed form, and keeping the
    t = 0 and t = 1 endpoints ergodic).
    Raises PreconditionFail when g does not preserve the line pair.
    """
    if not (0.0 <= t <= 1.0):
        raise ValueError("t must lie in [0, 1]")
    rep = eigen_analysis(f_mat)
    if not rep.is_hyperbolic:
        raise PreconditionFail("f must be hyperbolic with distinct real eigenvalues")
    ang_u, ang_s = rep.eigen_angles
    tol = 1e-10
    img_u = line_image_angle(g_mat, ang_u)
    img_s = line_image_angle(g_mat, ang_s)
    if proj_dist(img_u, ang_u) < tol and proj_dist(img_s, ang_s) < tol:
        swap = False
    elif proj_dist(img_u, ang_s) < tol and proj_dist(img_s, ang_u) < tol:
        swap = True
    else:
        raise PreconditionFail("g does not preserve the line pair of f")

    def gain(m: Mat2, ang: float) -> float:
        wx, wy = m.apply(math.cos(ang), math.sin(ang))
        return math.log(math.hypot(wx, wy))

    f_u, f_s = gain(f_mat, ang_u), gain(f_mat, ang_s)
    g_u, g_s = gain(g_mat, ang_u), gain(g_mat, ang_s)
    closed = (1 - t) * 0.5 * (f_u + f_s) + t * 0.5 * (g_u + g_s)

    use_g = make_rng(seed).random(n_steps) < t
    swaps = use_g & swap
    parity = np.concatenate([[0], np.cumsum(swaps)[:-1]]) % 2  # before each step
    # chain 1 starts on the unstable line (state 0 = u), chain 2 on the stable
    gains_f = np.where(parity == 0, f_u, f_s)
    gains_g = np.where(parity == 0, g_u, g_s)
    chain1 = np.where(use_g, gains_g, gains_f)
    gains_f2 = np.where(parity == 0, f_s, f_u)
    gains_g2 = np.where(parity == 0, g_s, g_u)
    chain2 = np.where(use_g, gains_g2, gains_f2)
    simulated = float((chain1.sum() + chain2.sum()) / (2 * n_steps))
    return MixedExponentResult(closed, simulated, t)


# ---------------------------------------------------------------------------
# exponent continuity scan


@dataclass(frozen=True)
class ContinuityRow:
    t: float
    estimate: LyapunovEstimate
    chi_exact: float | None
    residual: float | None


def shared_eigenlines(f: Mat2, g: Mat2, tol: float = 1e-9) -> list[float]:
    """Angles of common eigenlines of two matrices, when both are real
    diagonalizable; empty if none coincide."""
    rf, rg = eigen_analysis(f), eigen_analysis(g)
    if rf.eigen_angles is None or rg.eigen_angles is None:
        return []
    shared = []
    for a in rf.eigen_angles:
        for b in rg.eigen_angles:
            if proj_dist(a, b) < tol:
                shared.append(a)
    return shared


def exponent_continuity_scan(f_spec: MapSpec, g_spec: MapSpec,
                             t_grid: Sequence[float], n: int, x0: TorusPoint,
                             seed: int, *, burn_in: int = 1000) -> list[ContinuityRow]:
    """Top exponent of nu_t = t delta_f + (1 - t) delta_g over a t grid.

    When the linear parts share an eigenline V (and both specs are linear),
    chi_V(t) = t log||f|V|| + (1 - t) log||g|V|| is itself an exponent; the
    scan reports the residual of the estimate against the largest such line.
    """
    rows = []
    family = {"f": f_spec, "g": g_spec}
    shared: list[float] = []
    if f_spec.is_linear() and g_spec.is_linear():
        shared = shared_eigenlines(f_spec.linear, g_spec.linear)
    for t in t_grid:
        if not (0.0 < t <= 1.0):
            raise ValueError("t grid must lie in (0, 1]")
        if t == 1.0:
            nu = point_mass("f")
        else:
            nu = DrivingMeasure((("f", t), ("g", 1.0 - t)))
        est = top_exponent(family, nu, x0, n, seed)
        chi = None
        residual = None
        if shared:
            def gain(m: Mat2, ang: float) -> float:
                wx, wy = m.apply(math.cos(ang), math.sin(ang))
                return math.log(math.hypot(wx, wy))
            chis = [t * gain(f_spec.linear, a) + (1 - t) * gain(g_spec.linear, a)
                    for a in shared]
            chi = max(chis)
            residual = abs(est.lambda_u - chi)
        rows.append(ContinuityRow(t, est, chi, residual))
    return rows
