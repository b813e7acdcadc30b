"""Torus points, map families, random words, and overflow-safe derivative cocycles.

The basic objects:

* ``TorusPoint`` -- a point of the unit 2-torus, coordinates reduced mod 1.
* ``Mat2`` -- a 2x2 matrix with closed-form inverse, operator norm and SVD.
* ``MapSpec`` -- one torus diffeomorphism: an invertible integer linear part
  optionally composed with a small periodic perturbation.  Two perturbation
  families are supported: ``ShearPair`` (two successive shears, exactly
  area-preserving) and ``TrigField`` (a trigonometric displacement field,
  generally dissipative).
* ``DrivingMeasure`` / ``Word`` -- a finitely supported distribution on a map
  family and an i.i.d. sample from it, reproducible from a 64-bit seed.
* ``ScaledMat2`` -- a 2x2 matrix stored as (unit-scale matrix, log of removed
  factor) so that derivative products along long words never overflow.

A map spec with linear part L and perturbation P acts as f(p) = P(L(p)).
Perturbed specs must satisfy a constructive invertibility margin checked at
construction time (see ``MapSpec``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .rng import make_rng

TWO_PI = 2.0 * math.pi


class NonConvergence(RuntimeError):
    """Newton iteration for an inverse map failed to converge."""


# ---------------------------------------------------------------------------
# torus geometry


def wrap01(t: float) -> float:
    """Reduce a real number into [0, 1).  Idempotent."""
    r = t % 1.0
    # x % 1.0 rounds to exactly 1.0 for tiny negative x; fold that back.
    return 0.0 if r == 1.0 else r


def wrap_half(t: float) -> float:
    """Reduce a displacement into (-1/2, 1/2]."""
    r = t % 1.0
    if r > 0.5:
        r -= 1.0
    return r


def circle_dist(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class TorusPoint:
    """A point of the 2-torus; both coordinates always lie in [0, 1)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", wrap01(self.x))
        object.__setattr__(self, "y", wrap01(self.y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def torus_dist(p: TorusPoint, q: TorusPoint) -> float:
    """Flat metric: max of the per-coordinate circle distances."""
    return max(circle_dist(p.x, q.x), circle_dist(p.y, q.y))


# ---------------------------------------------------------------------------
# 2x2 matrices


@dataclass(frozen=True)
class Mat2:
    """2x2 matrix [[a, b], [c, d]], row-major.  Entries int or float.

    Note: det may underflow to 0 for the unit-norm factor of a long hyperbolic
    cocycle product; invertibility is enforced where maps are constructed, not
    here.
    """

    a: float
    b: float
    c: float
    d: float

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def trace(self) -> float:
        return self.a + self.d

    def is_integer(self) -> bool:
        return all(float(v).is_integer() for v in (self.a, self.b, self.c, self.d))

    def inv(self) -> "Mat2":
        det = self.det()
        if det == 0:
            raise ValueError("matrix is singular")
        if isinstance(self.a, int) and self.is_integer() and abs(det) == 1:
            s = int(det)
            return Mat2(int(self.d) * s, -int(self.b) * s, -int(self.c) * s, int(self.a) * s)
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def matmul(self, other: "Mat2") -> "Mat2":
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def apply(self, vx: float, vy: float) -> tuple[float, float]:
        return (self.a * vx + self.b * vy, self.c * vx + self.d * vy)

    def opnorm(self) -> float:
        s1, _, _, _ = svd2(self.a, self.b, self.c, self.d)
        return s1

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=float)


def svd2(a: float, b: float, c: float, d: float) -> tuple[float, float, float, float]:
    """Closed-form SVD data of [[a, b], [c, d]].

    Returns (s_max, s_min, angle_max, angle_min): the singular values and the
    angles (mod pi) of the corresponding right-singular directions.  The
    right-singular direction for s_max is the input direction of largest
    stretch; the one for s_min is orthogonal to it.
    """
    e = 0.5 * (a + d)
    f = 0.5 * (a - d)
    g = 0.5 * (c + b)
    h = 0.5 * (c - b)
    q = math.hypot(e, h)
    r = math.hypot(f, g)
    s_max = q + r
    s_min = abs(q - r)
    a1 = math.atan2(g, f)
    a2 = math.atan2(h, e)
    # M = R(phi) diag(q + r, q - r) R(theta)^T with phi + theta = a1 and
    # phi - theta = a2; the first column of R(theta) is the right-singular
    # direction for s_max regardless of the sign of det M.
    theta = 0.5 * (a1 - a2)
    theta %= math.pi
    theta_min = (theta + 0.5 * math.pi) % math.pi
    return s_max, s_min, theta, theta_min


# ---------------------------------------------------------------------------
# perturbations


@dataclass(frozen=True)
class SineSeries:
    """Finite sine series  psi(t) = sum_j c_j sin(2 pi k_j t + phi_j)."""

    terms: tuple[tuple[int, float, float], ...]  # (freq, coeff, phase)

    def __post_init__(self):
        for k, _, _ in self.terms:
            if int(k) != k:
                raise ValueError("frequencies must be integers")

    def value(self, t: float) -> float:
        return sum(c * math.sin(TWO_PI * k * t + p) for k, c, p in self.terms)

    def deriv(self, t: float) -> float:
        return sum(c * TWO_PI * k * math.cos(TWO_PI * k * t + p) for k, c, p in self.terms)

    def weight(self) -> float:
        """sum |c_j| |k_j|; bounds Lip(psi) / (2 pi)."""
        return sum(abs(c) * abs(k) for k, c, _ in self.terms)

    def weight2(self) -> float:
        """sum |c_j| (2 pi k_j)^2; bounds the second derivative."""
        return sum(abs(c) * (TWO_PI * k) ** 2 for k, c, _ in self.terms)


@dataclass(frozen=True)
class ShearPair:
    """Exactly area-preserving perturbation: the composition of
    (x, y) -> (x + eps psi1(y), y)  followed by  (x, y) -> (x, y + eps psi2(x)).
    Each shear has unit Jacobian determinant by construction.
    """

    psi1: SineSeries
    psi2: SineSeries
    amplitude: float

    def max_weight(self) -> float:
        return max(self.psi1.weight(), self.psi2.weight())

    def max_weight2(self) -> float:
        return max(self.psi1.weight2(), self.psi2.weight2())


@dataclass(frozen=True)
class TrigTerm:
    """One Fourier mode of a displacement field: c * sin(2 pi k.p + phase)."""

    kx: int
    ky: int
    cx: float
    cy: float
    phase: float


@dataclass(frozen=True)
class TrigField:
    """Perturbation  p -> p + eps * sum_j c_j sin(2 pi k_j . p + phi_j)."""

    terms: tuple[TrigTerm, ...]
    amplitude: float

    def max_weight(self) -> float:
        return sum(math.hypot(t.cx, t.cy) * math.hypot(t.kx, t.ky) for t in self.terms)

    def max_weight2(self) -> float:
        return sum(
            math.hypot(t.cx, t.cy) * (TWO_PI * math.hypot(t.kx, t.ky)) ** 2
            for t in self.terms
        )


Perturbation = ShearPair | TrigField


# ---------------------------------------------------------------------------
# map specs


@dataclass(frozen=True)
class MapSpec:
    """One torus diffeomorphism f(p) = P(L(p)).

    L is an invertible integer matrix acting linearly mod 1; P is the optional
    perturbation.  Construction enforces a sufficient invertibility margin for
    perturbed specs:

        amplitude * 2 pi * W < 1 / opnorm(L^{-1})

    where W is the largest single-component weight sum(|c_j| |k_j|) of the
    perturbation.  The margin guarantees the perturbation displacement is a
    contraction, so Newton inversion of the full map converges.

    ``conservative`` is True when the map preserves Lebesgue area exactly:
    |det L| = 1 and the perturbation, if any, is a ShearPair.
    """

    linear: Mat2
    perturbation: Perturbation | None = None
    conservative: bool = False

    def __post_init__(self):
        if not self.linear.is_integer():
            raise ValueError("linear part must have integer entries")
        if self.linear.det() == 0:
            raise ValueError("linear part must be invertible")
        pert = self.perturbation
        if pert is not None and pert.amplitude > 0:
            margin_budget = 1.0 / self.linear.inv().opnorm()
            load = pert.amplitude * TWO_PI * pert.max_weight()
            if load >= margin_budget:
                raise ValueError(
                    f"invertibility margin violated: {load:.6g} >= {margin_budget:.6g}"
                )
        area_preserving = abs(self.linear.det()) == 1 and (
            pert is None or isinstance(pert, ShearPair) or pert.amplitude == 0
        )
        if self.conservative and not area_preserving:
            raise ValueError("conservative flag requires |det| = 1 and shear/no perturbation")
        object.__setattr__(self, "conservative", area_preserving)

    def is_linear(self) -> bool:
        return self.perturbation is None or self.perturbation.amplitude == 0.0


def linear_spec(a: int, b: int, c: int, d: int) -> MapSpec:
    return MapSpec(Mat2(a, b, c, d))


def shear_spec(linear: Mat2, eps: float,
               psi1: SineSeries | None = None,
               psi2: SineSeries | None = None) -> MapSpec:
    """Shear-perturbed spec; default shears are single sin(2 pi t) modes."""
    one = SineSeries(((1, 1.0, 0.0),))
    return MapSpec(linear, ShearPair(psi1 or one, psi2 or one, eps))


# --- evaluation (scalar fast paths; public API wraps TorusPoint) -----------


def _pert_forward(pert: Perturbation, x: float, y: float) -> tuple[float, float]:
    eps = pert.amplitude
    if isinstance(pert, ShearPair):
        x = x + eps * pert.psi1.value(y)
        y = y + eps * pert.psi2.value(x)
        return x, y
    dx = dy = 0.0
    for t in pert.terms:
        s = math.sin(TWO_PI * (t.kx * x + t.ky * y) + t.phase)
        dx += t.cx * s
        dy += t.cy * s
    return x + eps * dx, y + eps * dy


def _pert_jacobian(pert: Perturbation, x: float, y: float) -> Mat2:
    eps = pert.amplitude
    if isinstance(pert, ShearPair):
        # J = [[1, 0], [eps psi2'(x1), 1]] @ [[1, eps psi1'(y)], [0, 1]]
        # evaluated at the intermediate point x1 = x + eps psi1(y)
        g1 = eps * pert.psi1.deriv(y)
        x1 = x + eps * pert.psi1.value(y)
        g2 = eps * pert.psi2.deriv(x1)
        return Mat2(1.0, g1, g2, g2 * g1 + 1.0)
    j11 = j12 = j21 = j22 = 0.0
    for t in pert.terms:
        co = math.cos(TWO_PI * (t.kx * x + t.ky * y) + t.phase) * TWO_PI
        j11 += t.cx * t.kx * co
        j12 += t.cx * t.ky * co
        j21 += t.cy * t.kx * co
        j22 += t.cy * t.ky * co
    return Mat2(1.0 + eps * j11, eps * j12, eps * j21, 1.0 + eps * j22)


def _pert_inverse(pert: Perturbation, x: float, y: float,
                  tol: float = 1e-13, max_iter: int = 50) -> tuple[float, float]:
    """Solve P(w) = (x, y) for w on the torus."""
    eps = pert.amplitude
    if isinstance(pert, ShearPair):
        # triangular shears invert exactly
        y0 = y - eps * pert.psi2.value(x)
        x0 = x - eps * pert.psi1.value(y0)
        return x0, y0
    wx, wy = x, y
    for _ in range(max_iter):
        fx, fy = _pert_forward(pert, wx, wy)
        rx = wrap_half(fx - x)
        ry = wrap_half(fy - y)
        if abs(rx) < tol and abs(ry) < tol:
            return wx, wy
        j = _pert_jacobian(pert, wx, wy)
        det = j.det()
        wx -= (j.d * rx - j.b * ry) / det
        wy -= (-j.c * rx + j.a * ry) / det
    raise NonConvergence("perturbation inverse did not converge; margin violated?")


def apply_xy(spec: MapSpec, x: float, y: float) -> tuple[float, float]:
    """f(x, y) with coordinates reduced into [0, 1)."""
    m = spec.linear
    lx = (m.a * x + m.b * y) % 1.0
    ly = (m.c * x + m.d * y) % 1.0
    pert = spec.perturbation
    if pert is not None and pert.amplitude != 0.0:
        lx, ly = _pert_forward(pert, lx, ly)
        lx %= 1.0
        ly %= 1.0
    return (0.0 if lx == 1.0 else lx, 0.0 if ly == 1.0 else ly)


def inverse_xy(spec: MapSpec, x: float, y: float) -> tuple[float, float]:
    pert = spec.perturbation
    if pert is not None and pert.amplitude != 0.0:
        x, y = _pert_inverse(pert, x, y)
    mi = spec.linear.inv()
    ix = (mi.a * x + mi.b * y) % 1.0
    iy = (mi.c * x + mi.d * y) % 1.0
    return (0.0 if ix == 1.0 else ix, 0.0 if iy == 1.0 else iy)


def jacobian_xy(spec: MapSpec, x: float, y: float) -> Mat2:
    m = spec.linear
    pert = spec.perturbation
    if pert is None or pert.amplitude == 0.0:
        return Mat2(float(m.a), float(m.b), float(m.c), float(m.d))
    lx = (m.a * x + m.b * y) % 1.0
    ly = (m.c * x + m.d * y) % 1.0
    return _pert_jacobian(pert, lx, ly).matmul(m)


def apply_map(spec: MapSpec, p: TorusPoint) -> TorusPoint:
    """Image f(p), reduced mod 1."""
    return TorusPoint(*apply_xy(spec, p.x, p.y))


def inverse_map(spec: MapSpec, q: TorusPoint) -> TorusPoint:
    """Preimage f^{-1}(q).  Exact for linear and shear specs, Newton otherwise.

    Raises NonConvergence if the Newton solve fails within 50 steps.
    """
    return TorusPoint(*inverse_xy(spec, q.x, q.y))


def derivative(spec: MapSpec, p: TorusPoint) -> Mat2:
    """Exact analytic Jacobian of f at p."""
    return jacobian_xy(spec, p.x, p.y)


def apply_map_batch(spec: MapSpec, pts: np.ndarray) -> np.ndarray:
    """Vectorized f over an (n, 2) array of torus points."""
    m = spec.linear
    x = (m.a * pts[:, 0] + m.b * pts[:, 1]) % 1.0
    y = (m.c * pts[:, 0] + m.d * pts[:, 1]) % 1.0
    pert = spec.perturbation
    if pert is not None and pert.amplitude != 0.0:
        eps = pert.amplitude
        if isinstance(pert, ShearPair):
            for k, c, ph in pert.psi1.terms:
                x = x + eps * c * np.sin(TWO_PI * k * y + ph)
            for k, c, ph in pert.psi2.terms:
                y = y + eps * c * np.sin(TWO_PI * k * x + ph)
        else:
            dx = np.zeros_like(x)
            dy = np.zeros_like(y)
            for t in pert.terms:
                s = np.sin(TWO_PI * (t.kx * x + t.ky * y) + t.phase)
                dx += t.cx * s
                dy += t.cy * s
            x = x + eps * dx
            y = y + eps * dy
        x %= 1.0
        y %= 1.0
    x[x == 1.0] = 0.0
    y[y == 1.0] = 0.0
    return np.column_stack([x, y])


def jacobian_batch(spec: MapSpec, pts: np.ndarray) -> tuple[np.ndarray, ...]:
    """Vectorized Jacobian entries (a, b, c, d) of f over (n, 2) base points."""
    m = spec.linear
    n = len(pts)
    pert = spec.perturbation
    if pert is None or pert.amplitude == 0.0:
        ones = np.ones(n)
        return (float(m.a) * ones, float(m.b) * ones,
                float(m.c) * ones, float(m.d) * ones)
    lx = (m.a * pts[:, 0] + m.b * pts[:, 1]) % 1.0
    ly = (m.c * pts[:, 0] + m.d * pts[:, 1]) % 1.0
    eps = pert.amplitude
    if isinstance(pert, ShearPair):
        g1 = np.zeros(n)
        psi1 = np.zeros(n)
        for k, c, ph in pert.psi1.terms:
            g1 += eps * c * TWO_PI * k * np.cos(TWO_PI * k * ly + ph)
            psi1 += eps * c * np.sin(TWO_PI * k * ly + ph)
        x1 = lx + psi1
        g2 = np.zeros(n)
        for k, c, ph in pert.psi2.terms:
            g2 += eps * c * TWO_PI * k * np.cos(TWO_PI * k * x1 + ph)
        pa, pb, pc, pd = np.ones(n), g1, g2, g2 * g1 + 1.0
    else:
        j11 = np.zeros(n)
        j12 = np.zeros(n)
        j21 = np.zeros(n)
        j22 = np.zeros(n)
        for t in pert.terms:
            co = np.cos(TWO_PI * (t.kx * lx + t.ky * ly) + t.phase) * TWO_PI
            j11 += t.cx * t.kx * co
            j12 += t.cx * t.ky * co
            j21 += t.cy * t.kx * co
            j22 += t.cy * t.ky * co
        pa, pb = 1.0 + eps * j11, eps * j12
        pc, pd = eps * j21, 1.0 + eps * j22
    return (pa * m.a + pb * m.c, pa * m.b + pb * m.d,
            pc * m.a + pd * m.c, pc * m.b + pd * m.d)


# ---------------------------------------------------------------------------
# driving measures and words


@dataclass(frozen=True)
class DrivingMeasure:
    """Finitely supported probability on a map family: ((map_id, prob), ...)."""

    atoms: tuple[tuple[str, float], ...]

    def __post_init__(self):
        ids = [i for i, _ in self.atoms]
        probs = [p for _, p in self.atoms]
        if len(set(ids)) != len(ids):
            raise ValueError("map ids must be distinct")
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be strictly positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(i for i, _ in self.atoms)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.atoms)


def point_mass(map_id: str) -> DrivingMeasure:
    return DrivingMeasure(((map_id, 1.0),))


def uniform_measure(*map_ids: str) -> DrivingMeasure:
    n = len(map_ids)
    return DrivingMeasure(tuple((i, 1.0 / n) for i in map_ids))


@dataclass(frozen=True)
class Word:
    """An i.i.d. sample from a driving measure.

    ``entries`` holds indices into ``ids`` (the atom order of the measure that
    generated the word).  Regenerating from (measure, length, seed) reproduces
    the entries bit-exactly.
    """

    entries: np.ndarray
    ids: tuple[str, ...]
    seed: int

    def __len__(self) -> int:
        return len(self.entries)

    def map_id(self, i: int) -> str:
        return self.ids[self.entries[i]]


def sample_word(nu: DrivingMeasure, length: int, seed: int) -> Word:
    """Sample `length` i.i.d. atoms of `nu`; deterministic in `seed`."""
    if length < 0:
        raise ValueError("length must be >= 0")
    cum = np.cumsum(nu.probs)
    cum[-1] = 1.0
    u = make_rng(seed).random(length)
    entries = np.searchsorted(cum, u, side="right").astype(np.int64)
    return Word(entries, nu.ids, seed)


def resolve_specs(family: Mapping[str, MapSpec], nu: DrivingMeasure) -> list[MapSpec]:
    """Specs in atom order; raises KeyError for unknown map ids."""
    return [family[i] for i in nu.ids]


def constant_word(map_id: str, length: int) -> Word:
    return Word(np.zeros(length, dtype=np.int64), (map_id,), seed=0)


# ---------------------------------------------------------------------------
# scaled matrices and the derivative cocycle


@dataclass(frozen=True)
class ScaledMat2:
    """Matrix exp(log_scale) * mat with mat kept at unit operator norm.

    Rescaling happens after every composition step, so products along words of
    any practical length (1e8 steps and beyond) never overflow or underflow.
    """

    mat: Mat2
    log_scale: float

    @staticmethod
    def identity() -> "ScaledMat2":
        return ScaledMat2(Mat2(1.0, 0.0, 0.0, 1.0), 0.0)

    @staticmethod
    def from_mat(m: Mat2) -> "ScaledMat2":
        s = m.opnorm()
        return ScaledMat2(Mat2(m.a / s, m.b / s, m.c / s, m.d / s), math.log(s))

    def compose_left(self, m: Mat2) -> "ScaledMat2":
        """Return scaled form of (m @ self)."""
        prod = m.matmul(self.mat)
        s = prod.opnorm()
        if not (s > 0.0 and math.isfinite(s)):
            raise ValueError("degenerate matrix in cocycle composition")
        return ScaledMat2(
            Mat2(prod.a / s, prod.b / s, prod.c / s, prod.d / s),
            self.log_scale + math.log(s),
        )

    def reconstruct(self) -> Mat2:
        f = math.exp(self.log_scale)
        m = self.mat
        return Mat2(m.a * f, m.b * f, m.c * f, m.d * f)

    def log_opnorm(self) -> float:
        return self.log_scale + math.log(self.mat.opnorm())

    def svd(self) -> tuple[float, float, float, float]:
        """(log s_max, log s_min, angle_max, angle_min) of the full matrix."""
        s1, s2, th1, th2 = svd2(self.mat.a, self.mat.b, self.mat.c, self.mat.d)
        return (self.log_scale + math.log(s1),
                self.log_scale + math.log(s2) if s2 > 0 else -math.inf,
                th1, th2)


def orbit_points(family: Mapping[str, MapSpec], word: Word, p: TorusPoint,
                 n: int) -> list[TorusPoint]:
    """Points p, f_0(p), ..., f^n(p) along the word (n + 1 points)."""
    if n > len(word):
        raise ValueError("orbit length exceeds word length")
    specs = [family[i] for i in word.ids]
    entries = word.entries[:n].tolist()
    pts = [p]
    x, y = p.x, p.y
    for e in entries:
        x, y = apply_xy(specs[e], x, y)
        pts.append(TorusPoint(x, y))
    return pts


def cocycle_derivative(family: Mapping[str, MapSpec], word: Word, p: TorusPoint,
                       n: int) -> ScaledMat2:
    """Scaled derivative of the n-step composition along `word` at `p`.

    Equals the chain-rule product Df(x_{n-1}) ... Df(x_0) over the orbit.
    n = 0 returns the identity with log_scale 0.
    """
    if n > len(word):
        raise ValueError("n exceeds word length")
    specs = [family[i] for i in word.ids]
    entries = word.entries[:n].tolist()
    acc = ScaledMat2.identity()
    x, y = p.x, p.y
    for e in entries:
        spec = specs[e]
        acc = acc.compose_left(jacobian_xy(spec, x, y))
        x, y = apply_xy(spec, x, y)
    return acc


# ---------------------------------------------------------------------------
# exact rational orbits for pure-linear families


def rational_orbit_ok(family: Mapping[str, MapSpec], nu: DrivingMeasure,
                      x0) -> bool:
    """True when x0 is rational and every driven map is purely linear."""
    if not (isinstance(x0, tuple) and all(isinstance(c, Fraction) for c in x0)):
        return False
    return all(family[i].is_linear() for i in nu.ids)


def exact_linear_orbit(family: Mapping[str, MapSpec], word: Word,
                       x0: tuple[Fraction, Fraction], n: int) -> np.ndarray:
    """Orbit of a rational point under integer-linear maps, computed exactly.

    Integer matrices preserve the lattice (1/q) Z^2 / Z^2, so the orbit is run
    in integer arithmetic mod the common denominator and only converted to
    float at the end.  Returns an (n + 1, 2) float array.
    """
    q = math.lcm(x0[0].denominator, x0[1].denominator)
    px = (x0[0].numerator * (q // x0[0].denominator)) % q
    py = (x0[1].numerator * (q // x0[1].denominator)) % q
    mats = []
    for i in word.ids:
        m = family[i].linear
        mats.append((int(m.a), int(m.b), int(m.c), int(m.d)))
    out = np.empty((n + 1, 2), dtype=np.int64)
    out[0] = (px, py)
    entries = word.entries[:n].tolist()
    for j, e in enumerate(entries):
        a, b, c, d = mats[e]
        px, py = (a * px + b * py) % q, (c * px + d * py) % q
        out[j + 1] = (px, py)
    return out.astype(float) / q
