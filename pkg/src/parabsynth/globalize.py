"""Global checks on a synthesized germ: poles, ramification, separatrices, fixed points.

Everything here runs on a :class:`~parabsynth.synthesis.SynthesisResult`
(or directly on a :class:`~parabsynth.flow.VectorFieldSpec` for the
separatrix tracer) and reports residuals instead of asserting them, so the
same code serves tests, the CLI ``verify`` suite and exploratory scripts.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .cauchyheine import explicit_sides
from .errors import (
    ClassificationFailed,
    DuplicateRoot,
    FixedPointNotFound,
    LengthNotReached,
    NumericalError,
    StableDirectionNotFound,
)
from .flow import DEFAULT_TOL, VectorFieldSpec, flow
from .germs import log_psi_ratio
from .model import SECTORS, TWO_PI_I, involution_sigma, log_H0, x0_unchecked
from .synthesis import (
    SynthesisResult,
    branch_jump,
    delta_flow,
    horn_sample_points,
    newton_root,
    pole_equation,
    side_for,
)

WINDING_POINTS = 256
WINDING_FLOOR = 1e-8
SEED_OFFSET = 1e-3


def recentered(X: VectorFieldSpec, center: complex) -> VectorFieldSpec:
    """``X`` in the coordinate ``w = z - center``.

    Flowing the displacement lets the integrator's relative tolerance act on
    the local scale instead of on ``|z| ~ 1``.
    """
    return VectorFieldSpec(lambda w: X.coeff(np.asarray(w) + center),
                           tuple(q - center for q in X.poles),
                           tuple((z - center, k) for z, k in X.zeros), None, name=f"{X.name}@{center:.3g}")


# ---------------------------------------------------------------------------
# Poles of the sectorial fields
# ---------------------------------------------------------------------------


@dataclass
class PoleReport:
    """One pole of ``X^+-`` with its provenance.

    ``residual`` is the Newton step size at the root, ``|g|/|g'|`` for the
    pole equation ``g = 1/R0 + f'``; ``side_gap`` is the distance between
    the roots found from the two sides (zero for poles seen from one side).
    """

    location: complex
    seed: complex
    label: str
    residual: float
    distance: float
    allowed: float
    sides: tuple[str, ...]
    side_gap: float = 0.0

    @property
    def within_disc(self) -> bool:
        return self.distance < self.allowed

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "location": [self.location.real, self.location.imag],
            "seed": [self.seed.real, self.seed.imag],
            "residual": self.residual,
            "distance": self.distance,
            "allowed": self.allowed,
            "sides": list(self.sides),
            "side_gap": self.side_gap,
        }


def _pole_seeds(r: SynthesisResult) -> list[tuple[str, complex, float]]:
    p = r.params
    root = math.sqrt(p.lam)
    seeds = [("i", 1j, 3 * root), ("-i", -1j, 3 * root)]
    if p.mu != 0:
        seeds += [("z+", p.z_plus, 5 * root), ("z-", p.z_minus, 5 * root)]
    return seeds


def _sides_containing(z: complex) -> tuple[str, ...]:
    return tuple(s for s in ("+", "-") if SECTORS.in_sector(z, s))


def _newton_pole(r: SynthesisResult, seed: complex, side: str) -> tuple[complex, float]:
    if r.f_is_zero:
        return complex(seed), 0.0
    g = lambda z: pole_equation(r, z, side)[0]  # noqa: E731
    root, _ = newton_root(g, seed)
    h = 1e-6 * (1 + abs(root))
    dg = (g(root + h) - g(root - h)) / (2 * h)
    return root, abs(g(root)) / abs(dg)


def find_poles(r: SynthesisResult, *, check_bound: bool = True,
               side_tol: float = 1e-8) -> list[PoleReport]:
    """Locate the poles of the sectorial fields near ``+-i`` and ``z+-``.

    Poles in the overlap are computed from both sides; a disagreement beyond
    ``side_tol`` raises :class:`NumericalError`.
    """
    if check_bound:
        r.params.check_globalization()
    reports = []
    for label, seed, allowed in _pole_seeds(r):
        sides = _sides_containing(seed)
        roots = [_newton_pole(r, seed, s) for s in sides]
        loc, res = roots[0]
        gap = max((abs(x - loc) for x, _ in roots[1:]), default=0.0)
        if gap > side_tol:
            raise NumericalError(f"pole near {label} differs between sides by {gap:.3g}")
        reports.append(PoleReport(loc, complex(seed), label, max(x for _, x in roots),
                                  abs(loc - seed), allowed, sides, gap))
    for i, a in enumerate(reports):
        for b in reports[i + 1:]:
            if abs(a.location - b.location) < 1e-8:
                raise DuplicateRoot(f"seeds {a.label} and {b.label} reach the same pole")
    return reports


def winding_number(fun, center: complex, radius: float, n: int = WINDING_POINTS,
                   floor: float = WINDING_FLOOR) -> int:
    """Winding number of ``fun`` around 0 along the circle ``|z - center| = radius``."""
    z = center + radius * np.exp(2j * np.pi * np.arange(n + 1) / n)
    v = np.asarray(fun(z), dtype=complex)
    if not np.all(np.isfinite(v)):
        raise NumericalError("function is not finite on the winding circle")
    if np.min(np.abs(v)) < floor:
        raise NumericalError(f"|g| = {np.min(np.abs(v)):.3g} on the circle; winding is unreliable")
    turns = np.sum(np.angle(v[1:] / v[:-1])) / (2 * np.pi)
    return int(round(turns))


def pole_counts(r: SynthesisResult, reports: list[PoleReport] | None = None) -> dict[str, int]:
    """Zero count of ``(1 - z^2)(1/R0 + f')`` in each seed disc.

    The factor ``1 - z^2`` removes the pole of ``1/R0`` at ``+-1``, which lies
    inside the discs around ``z+-``; it does not vanish near ``+-i``.
    """
    reports = find_poles(r, check_bound=False) if reports is None else reports
    out = {}
    for rep in reports:
        side = rep.sides[0]
        fun = lambda z, s=side: (1 - z * z) * pole_equation(r, z, s)  # noqa: E731
        out[rep.label] = winding_number(fun, rep.seed, rep.allowed)
    return out


def sigma_pole_symmetry(r: SynthesisResult, reports: list[PoleReport] | None = None) -> dict:
    """Residuals of the pole set under ``sigma``.

    ``set_distance`` is the Hausdorff distance between the pole set and its
    image.  The labelled residuals compare ``sigma(p_i)`` with ``p_-i`` and
    ``sigma(p_+)`` with ``p_-`` as stated; for ``f = 0`` the first one is 2
    because ``sigma`` fixes ``+-i``.
    """
    reports = find_poles(r, check_bound=False) if reports is None else reports
    loc = {rep.label: rep.location for rep in reports}
    pts = np.array(list(loc.values()))
    img = involution_sigma(pts)
    d = np.abs(pts[:, None] - img[None, :])
    out = {"set_distance": float(max(d.min(axis=0).max(), d.min(axis=1).max())),
           "labelled": {"i": abs(involution_sigma(loc["i"]) - loc["-i"])}}
    if "z+" in loc:
        out["labelled"]["z+"] = abs(involution_sigma(loc["z+"]) - loc["z-"])
    return out


# ---------------------------------------------------------------------------
# Ramification points
# ---------------------------------------------------------------------------


@dataclass
class RamificationReport:
    """The two points sent onto ``pole`` by the time-1 map.

    ``slit`` is the polyline ``z_p -> pole -> w_p`` (the arc removed from the
    sphere); ``separation`` holds, per point, the distance between the pole
    reached by the forward time-1 flow and ``pole`` together with the
    separation time.
    """

    pole: complex
    side: str
    residue: complex
    points: tuple[complex, complex]
    seed_times: tuple[complex, complex]
    separation: list[tuple[float, complex]]
    slit: np.ndarray

    def to_json(self) -> dict:
        return {
            "pole": [self.pole.real, self.pole.imag],
            "side": self.side,
            "points": [[z.real, z.imag] for z in self.points],
            "separation": [{"pole_gap": g, "time": [t.real, t.imag]} for g, t in self.separation],
        }


def _segment_integral(fun, a: complex, b: complex, n: int = 24) -> complex:
    x, w = np.polynomial.legendre.leggauss(n)
    pts = a + (b - a) * (x + 1) / 2
    return complex(np.dot(w, fun(pts)) * (b - a) / 2)


def pole_residue(inverse_coeff, pole: complex, step: float | None = None) -> complex:
    """Residue of ``R`` at a simple pole, from the regular function ``1/R``."""
    h = 1e-5 * (1 + abs(pole)) if step is None else step
    d = (inverse_coeff(np.array([pole + h]))[0] - inverse_coeff(np.array([pole - h]))[0]) / (2 * h)
    d = complex(d)
    if d == 0 or not cmath.isfinite(d):
        raise StableDirectionNotFound(f"1/R has a degenerate zero at {pole!r}")
    return 1.0 / d


def separatrix_directions(residue: complex) -> dict[str, tuple[complex, complex]]:
    """Unit directions of the trajectories entering and leaving a simple pole.

    Near the pole ``(z - p)^2 = 2 r t + c``: points on ``p + sqrt(-2 r s)``
    reach the pole after time ``s > 0``.
    """
    st = cmath.sqrt(-2 * residue)
    un = cmath.sqrt(2 * residue)
    st, un = st / abs(st), un / abs(un)
    return {"stable": (st, -st), "unstable": (un, -un)}


def ramification_points(r: SynthesisResult, pole: complex, side: str | None = None, *,
                        tol: float = DEFAULT_TOL, offset: float | None = None) -> RamificationReport:
    """Points at time-form distance 1 before ``pole`` on its stable manifold.

    Seeds are placed ``offset`` from the pole along the two stable
    directions.  The default is ``1e-3 sqrt(lambda)``, capped at ``1e-3``
    times the distance to the nearest other zero or pole of the model so
    that the square-root chart still holds next to ``z+-`` (which sit
    ``O(lambda)`` from ``+-1``); the exact time from each seed to the
    pole is integrated on the straight segment (``1/R`` is regular there)
    and the remaining time is flowed backwards.
    """
    side = side_for(pole) if side is None else side
    X = r.field(side)
    g = lambda z: pole_equation(r, np.asarray(z), side)  # noqa: E731
    if offset is None:
        model_poles = sorted((complex(q) for q in r.params.poles), key=lambda q: abs(q - pole))
        others = model_poles[1:] + [complex(z) for z, _ in X.zeros]
        gap = min((abs(q - pole) for q in others), default=math.inf)
        eps = SEED_OFFSET * min(math.sqrt(r.params.lam), gap)
    else:
        eps = offset
    res = pole_residue(g, pole, step=min(1e-5 * (1 + abs(pole)), eps))
    # the pole is reached like sqrt(2 res (T - t)); a guard worth 1e-7 in time keeps
    # the separation test meaningful when the residue is tiny (next to z+-)
    guard = max(0.1 * eps, math.sqrt(2 * abs(res) * 1e-7))
    local = recentered(X, pole)
    points, times, seps, arcs = [], [], [], []
    for d in separatrix_directions(res)["stable"]:
        t_seed = _segment_integral(g, pole + eps * d, pole)
        if not t_seed.real > 0:
            raise StableDirectionNotFound(f"seed time {t_seed!r} is not forward")
        back = flow(local, eps * d, -(1.0 - t_seed), tol, pole_guard=guard, record=True)
        if not back.ok:
            raise LengthNotReached(f"backward shot from {pole + eps * d!r} ended with status {back.status}")
        fwd = flow(local, back.endpoint, 1.0, tol, pole_guard=guard)
        if fwd.status == "separated":
            seps.append((abs(fwd.pole), complex(fwd.separation_time)))
        else:
            seps.append((math.inf, complex("nan")))
        points.append(pole + back.endpoint)
        times.append(t_seed)
        arcs.append(np.array([pole + w for _, w in back.trajectory][::-1] + [pole]))
    slit = np.concatenate([arcs[0], arcs[1][::-1][1:]])
    return RamificationReport(complex(pole), side, res, tuple(points), tuple(times), seps, slit)


def _segment_distance(z: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a, b = poly[:-1], poly[1:]
    ab = b - a
    denom = np.where(np.abs(ab) > 0, np.abs(ab) ** 2, 1.0)
    t = np.clip(((z[:, None] - a[None, :]) * np.conj(ab)[None, :]).real / denom[None, :], 0, 1)
    return np.min(np.abs(z[:, None] - (a[None, :] + t * ab[None, :])), axis=1)


def slit_distance(z, slits: list[np.ndarray]) -> np.ndarray:
    """Distance from each point to the nearest slit polyline."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if not slits:
        return np.full(z.shape, np.inf)
    return np.min([_segment_distance(z, s) for s in slits], axis=0)


def _branch_values(r: SynthesisResult, z: complex, pole: complex, side: str,
                   tol: float) -> tuple[complex, complex]:
    """Time-1 values along time paths passing the pole's time on either side.

    The paths run radially to a circle of radius ``|1 - T|/2`` about the
    time ``T`` at which the pole is reached, follow it counterclockwise or
    clockwise to the radius pointing at 1, then go straight to 1.
    """
    X = r.field(side)
    g = lambda w: pole_equation(r, np.asarray(w), side)  # noqa: E731
    t_pole = _segment_integral(g, z, pole)
    delta = 0.5 * abs(1.0 - t_pole)
    start = cmath.phase(-t_pole)
    stop = cmath.phase(1.0 - t_pole)
    ccw = (stop - start) % (2 * math.pi)
    values = []
    for sweep in (ccw, ccw - 2 * math.pi):
        arc = [t_pole + delta * cmath.exp(1j * (start + sweep * k / 16)) for k in range(17)]
        res = flow(X, z, [0] + arc + [1.0], tol, pole_guard=1e-3 * delta * abs(r.params.lam))
        if not res.ok:
            raise NumericalError(f"a continuation path ended with status {res.status}")
        values.append(res.endpoint)
    return values[0], values[1]


def monodromy_check(r: SynthesisResult, rep: RamificationReport, which: int = 0,
                    radius: float | None = None, steps: int = 48, tol: float = DEFAULT_TOL) -> dict:
    """Continue ``Delta`` twice around a small circle about a ramification point.

    At every point of the circle both branches are computed (straight time
    path, and a time path looping once around the pole's time); the
    continuation picks the branch nearest to the previous value.
    """
    zp = rep.points[which]
    rho = 0.25 * abs(zp - rep.pole) if radius is None else radius
    start = None
    track = []
    for k in range(2 * steps + 1):
        z = zp + rho * cmath.exp(2j * math.pi * k / steps)
        b = _branch_values(r, z, rep.pole, rep.side, tol)
        if start is None:
            start = b
            cur = b[0]
        else:
            cur = min(b, key=lambda v: abs(v - cur))
        track.append(cur)
    one, two = track[steps], track[2 * steps]
    scale = abs(start[0] - start[1])
    return {
        "branch_gap": scale,
        "after_one_loop": abs(one - start[1]) / scale,
        "after_two_loops": abs(two - start[0]) / scale,
        "switched": abs(one - start[1]) < abs(one - start[0]),
    }


# ---------------------------------------------------------------------------
# Separatrices and spinal graph
# ---------------------------------------------------------------------------


@dataclass
class SeparatrixArc:
    pole: complex
    kind: str
    end: str
    polyline: np.ndarray


@dataclass
class SpinalEdge:
    source: str
    target: str
    polyline: np.ndarray


@dataclass
class SpinalGraph:
    """Stationary points linked by one representative trajectory per face.

    ``vertices`` maps labels (``"0"``, ``"inf"``, ``"+1"``, ...) to points
    (``inf`` for the point at infinity).  Labels ``"periodic"`` and
    ``"unresolved"`` mark faces whose trajectories do not reach a vertex.
    """

    vertices: dict[str, complex]
    poles: list[complex]
    separatrices: list[SeparatrixArc] = field(default_factory=list)
    edges: list[SpinalEdge] = field(default_factory=list)
    grid: int = 0

    def edge_multiset(self) -> dict[tuple[str, str], int]:
        out: dict[tuple[str, str], int] = {}
        for e in self.edges:
            out[(e.source, e.target)] = out.get((e.source, e.target), 0) + 1
        return out

    @property
    def euler_face_count(self) -> int:
        """Face count predicted by Euler's formula for a connected separatrix graph."""
        return 2 - (len(self.vertices) + len(self.poles)) + len(self.separatrices)

    def to_json(self) -> dict:
        def pts(a):
            return [[complex(z).real, complex(z).imag] for z in a]

        return {
            "vertices": {k: ([v.real, v.imag] if cmath.isfinite(v) else "inf")
                         for k, v in self.vertices.items()},
            "poles": pts(self.poles),
            "separatrices": [{"pole": pts([s.pole])[0], "kind": s.kind, "end": s.end,
                              "polyline": pts(s.polyline)} for s in self.separatrices],
            "edges": [{"source": e.source, "target": e.target, "polyline": pts(e.polyline)}
                      for e in self.edges],
        }


def _vertex_labels(X: VectorFieldSpec) -> dict[str, complex]:
    out = {}
    for z, _ in X.zeros:
        z = complex(z)
        if z == 0:
            out["0"] = z
        elif z.imag == 0:
            out[f"{z.real:+g}"] = z
        else:
            out[f"{z.real:+g}{z.imag:+g}i"] = z
    out["inf"] = complex("inf")
    return out


def _classify_end(X: VectorFieldSpec, vertices: dict[str, complex], z0: complex, direction: float,
                  eq_tol: float, t_max: float, tol: float,
                  guard: float | None = None) -> tuple[str, np.ndarray]:
    """Follow a real-time trajectory until it settles near a vertex."""
    pts = [complex(z0)]
    z = complex(z0)
    elapsed = 0.0
    chunk = 0.5
    while elapsed < t_max:
        res = flow(X, z, direction * chunk, tol, pole_guard=guard, record=True)
        pts.extend(w for _, w in res.trajectory[1:])
        z = res.endpoint
        elapsed += chunk
        if res.status == "separated":
            return f"pole:{res.pole.real:+.6g}{res.pole.imag:+.6g}i", np.array(pts)
        if res.status == "escaped" or not cmath.isfinite(z) or abs(z) > 1 / eq_tol:
            return "inf", np.array(pts[:-1] if not cmath.isfinite(z) else pts)
        if res.status != "ok":
            return "unresolved", np.array(pts)
        for lab, v in vertices.items():
            if cmath.isfinite(v) and abs(z - v) < eq_tol:
                return lab, np.array(pts + [v])
        chunk = min(chunk * 1.5, 50.0)
    return "periodic", np.array(pts)


def trace_separatrices(X: VectorFieldSpec, *, eq_tol: float = 2e-3, t_max: float = 1e5,
                       offset: float = 1e-4, tol: float = 1e-9, grid: int = 720,
                       min_face_cells: int = 12) -> SpinalGraph:
    """Separatrix graph and spinal graph of a rational field on the sphere.

    From each declared pole the four local separatrices are followed until
    they settle within ``eq_tol`` of a stationary point (``inf`` counts as
    one).  Faces are the connected components of a log-polar grid (radii
    ``2 eq_tol`` to ``1/(2 eq_tol)``) once cells crossed by separatrices are
    removed; one trajectory from the most interior cell of each face gives
    the spinal edge.  The grid is refined (up to four times ``grid``) until
    the face count matches Euler's formula; ``graph.grid`` records the
    resolution used.
    """
    vertices = _vertex_labels(X)
    graph = SpinalGraph(vertices, [complex(p) for p in X.poles])
    guard = 0.1 * offset / (1 + max((abs(p) for p in X.poles), default=0.0))
    for p in X.poles:
        res = pole_residue(lambda z: 1.0 / X.coeff(z), p)
        for kind, dirs in separatrix_directions(res).items():
            direction = -1.0 if kind == "stable" else 1.0
            for d in dirs:
                end, poly = _classify_end(X, vertices, p + offset * d, direction, eq_tol, t_max, tol,
                                          guard)
                if end == "unresolved":
                    raise ClassificationFailed(f"{kind} separatrix of {p!r} did not settle")
                graph.separatrices.append(SeparatrixArc(complex(p), kind, end,
                                                        np.concatenate([[p], poly])))
    # refine the face grid until the count agrees with Euler's formula
    for n in (grid, 2 * grid, 4 * grid):
        seeds = _face_seeds(graph, eq_tol, n, min_face_cells)
        if len(seeds) == graph.euler_face_count:
            break
    graph.grid = n
    for z, lab in seeds:
        src, back = _classify_end(X, vertices, z, -1.0, eq_tol, t_max, tol)
        dst, fwd = _classify_end(X, vertices, z, 1.0, eq_tol, t_max, tol)
        graph.edges.append(SpinalEdge(src, dst, np.concatenate([back[::-1], fwd[1:]])))
    return graph


def _face_seeds(graph: SpinalGraph, eq_tol: float, n: int, min_cells: int):
    s_max = math.log(1 / (2 * eq_tol))
    ds = 2 * s_max / n
    dth = 2 * math.pi / n
    blocked = np.zeros((n, n), dtype=bool)
    for arc in graph.separatrices:
        poly = arc.polyline[np.isfinite(arc.polyline)]
        for a, b in zip(poly[:-1], poly[1:]):
            size = max(min(abs(a), abs(b)), 2 * eq_tol) * min(ds, dth)
            k = max(2, int(math.ceil(4 * abs(b - a) / size)))
            seg = a + (b - a) * np.linspace(0, 1, k)
            seg = seg[seg != 0]
            i = np.floor((np.log(np.abs(seg)) + s_max) / ds).astype(int)
            j = np.floor((np.angle(seg) + math.pi) / dth).astype(int) % n
            ok = (i >= 0) & (i < n)
            blocked[i[ok], j[ok]] = True
    labels, count = ndimage.label(~blocked)
    # the angle is periodic: merge labels across the seam
    parent = list(range(count + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in zip(labels[:, 0], labels[:, -1]):
        if a and b:
            parent[find(a)] = find(b)
    roots = np.array([find(k) for k in range(count + 1)])
    faces = roots[labels]
    depth = ndimage.distance_transform_edt(~blocked)
    out = []
    for lab in np.unique(faces[faces > 0]):
        mask = faces == lab
        if mask.sum() < min_cells:
            continue
        idx = np.argmax(np.where(mask, depth, -1))
        i, j = np.unravel_index(idx, mask.shape)
        z = math.exp(-s_max + (i + 0.5) * ds) * cmath.exp(1j * (-math.pi + (j + 0.5) * dth))
        out.append((z, int(lab)))
    return out


# ---------------------------------------------------------------------------
# Multipliers at +-1
# ---------------------------------------------------------------------------


@dataclass
class MultiplierReport:
    point: complex
    fixed_point: complex
    multiplier: complex
    alternating_value: complex
    same_sign_value: complex
    alternating_error: float
    same_sign_error: float
    sign: float

    def to_json(self) -> dict:
        c = lambda z: [complex(z).real, complex(z).imag]  # noqa: E731
        return {"point": c(self.point), "fixed_point": c(self.fixed_point),
                "multiplier": c(self.multiplier), "alternating_value": c(self.alternating_value),
                "same_sign_value": c(self.same_sign_value), "alternating_error": self.alternating_error,
                "same_sign_error": self.same_sign_error, "sign": self.sign}


def multiplier_at(r: SynthesisResult, point: int, *, points: int = 64,
                  tol: float = 1e-12) -> MultiplierReport:
    """``Delta'`` at the stationary point ``point`` (``+1`` or ``-1``).

    ``X_f = X0/(1 + X0 f')`` vanishes wherever ``X0`` does, so ``+-1`` stay
    fixed; this is verified on the computed map.  The derivative is a Cauchy
    integral of ``Delta`` on a circle whose radius is a tenth of the
    distance to the nearest model pole.  ``sign`` is ``s`` with
    ``|multiplier| = exp(-s Re(1/mu))``.  The report compares against both
    ``exp(-1/mu)`` at each point and the alternating ``exp(-+1/mu)`` at ``+-1``.
    """
    mu = r.params.mu
    if mu == 0:
        raise FixedPointNotFound("+-1 are not stationary when mu = 0")
    c = complex(point)
    side = side_for(c)
    gap = min(abs(c - q) for q in r.params.poles)
    guard = 1e-3 * gap / (1 + abs(c))
    rho = 0.1 * gap
    # flow the displacement from the fixed point so that the relative
    # tolerance applies to the small circle rather than to |z| ~ 1
    base = r.field(side)
    shifted = recentered(base, c)

    def delta(w):
        res = flow(shifted, w, 1.0, tol, pole_guard=guard)
        if not res.ok:
            raise FixedPointNotFound(f"time-1 flow from {w + c!r} ended with status {res.status}")
        return res.endpoint

    drift = abs(flow(base, c, 1.0, tol, pole_guard=guard).endpoint - c)
    if drift > 1e-8 * rho:
        raise FixedPointNotFound(f"Delta moves {point} by {drift:.3g}")
    theta = 2 * np.pi * np.arange(points) / points
    vals = np.array([delta(rho * cmath.exp(1j * t)) for t in theta])
    mult = complex(np.mean(vals * np.exp(-1j * theta)) / rho)
    alternating = cmath.exp(-1 / mu if point > 0 else 1 / mu)
    same_sign = cmath.exp(-1 / mu)
    re = (1 / mu).real
    sign = -math.log(abs(mult)) / re if re != 0 else math.nan
    return MultiplierReport(c, c, mult, alternating, same_sign, abs(mult - alternating) / abs(alternating),
                            abs(mult - same_sign) / abs(same_sign), sign)


def linear_part_oracle(r: SynthesisResult, point: int, points: int = 64) -> complex:
    """``exp(X0'(point))`` with ``X0'`` from a discrete Cauchy integral of ``X0``.

    The circle has half the distance to the nearest model pole as radius,
    so the aliasing error is about ``2**-points``.
    """
    c = complex(point)
    rho = 0.5 * min(abs(c - q) for q in r.params.poles)
    theta = 2 * np.pi * np.arange(points) / points
    vals = x0_unchecked(c + rho * np.exp(1j * theta), r.params)
    return cmath.exp(complex(np.mean(vals * np.exp(-1j * theta)) / rho))


# ---------------------------------------------------------------------------
# Modulus at infinity
# ---------------------------------------------------------------------------


@dataclass
class InfinityReport:
    """Horn maps of the germ seen from infinity.

    For sample points ``z`` the first integrals of ``sigma* Delta`` are
    ``H_f^-(sigma z)`` (plus side) and ``H_f^+(sigma z)`` (minus side).
    ``act_log_ratio`` is ``log psi_act(h) - log h``; ``composition_error``
    is ``|psi_f(psi_act(h))/h - 1|`` and ``involution_error`` the largest
    ``|sigma(sigma z) - z|`` over the samples.
    """

    z: dict
    act_log_h: dict
    act_log_ratio: dict
    composition_error: dict
    involution_error: float

    @property
    def max_composition_error(self) -> float:
        return max(float(np.max(v)) for v in self.composition_error.values())

    def to_json(self) -> dict:
        return {"max_composition_error": self.max_composition_error,
                "involution_error": self.involution_error,
                "per_wedge": {w: float(np.max(v)) for w, v in self.composition_error.items()}}


def modulus_at_infinity(r: SynthesisResult, n_samples: int = 50, radii=(0.6, 1.6)) -> InfinityReport:
    """Measure the horn maps of ``sigma* Delta`` and compose them with the data."""
    images = horn_sample_points(n_samples, radii)
    p, m = r.params, r.modulus
    out_z, out_h, out_ratio, out_err = {}, {}, {}, {}
    inv = 0.0
    for w, zeta in images.items():
        z = involution_sigma(zeta)
        inv = max(inv, float(np.max(np.abs(involution_sigma(z) - zeta))))
        if r.f_is_zero:
            fp = fm = np.zeros(zeta.shape, dtype=complex)
        else:
            lp, lm, _ = explicit_sides(r.operator, r.f, zeta)
            fp, fm = lp - r.f.offset, lm - r.f.offset
        log_fplus = log_H0(zeta, "+", p) + TWO_PI_I * fp
        jump = branch_jump(zeta, p) + TWO_PI_I * (fm - fp)
        # plus side of sigma* Delta carries H_f^-(zeta), its minus side H_f^+(zeta)
        act_log_h = log_fplus + jump
        act_ratio = -jump
        back = log_psi_ratio(m, w, log_h=log_fplus)
        out_z[w] = z
        out_h[w] = act_log_h
        out_ratio[w] = act_ratio
        out_err[w] = np.abs(np.expm1(back + act_ratio))
    return InfinityReport(out_z, out_h, out_ratio, out_err, inv)


# ---------------------------------------------------------------------------
# Injectivity
# ---------------------------------------------------------------------------


def injectivity_check(r: SynthesisResult, slits: list[np.ndarray], n: int = 500,
                      radii=(0.3, 3.0), slit_margin: float | None = None,
                      tol: float = DEFAULT_TOL) -> dict:
    """Smallest image separation of ``Delta`` on a polar grid off the slits."""
    k = int(math.ceil(math.sqrt(n)))
    rad = np.geomspace(radii[0], radii[1], k)
    ang = (np.arange(k) + 0.5) * 2 * math.pi / k
    z = (rad[:, None] * np.exp(1j * ang[None, :])).ravel()[:n]
    margin = 2 * math.sqrt(r.params.lam) if slit_margin is None else slit_margin
    keep = slit_distance(z, slits) > margin
    for q in r.params.poles:
        keep &= np.abs(z - q) > margin
    z = z[keep]
    img, src = [], []
    for zk in z:
        res = delta_flow(r, zk, tol)
        if res.ok:
            img.append(res.endpoint)
            src.append(zk)
    img = np.array(img)
    d = np.abs(img[:, None] - img[None, :])
    np.fill_diagonal(d, np.inf)
    return {"points": int(img.size), "min_image_distance": float(d.min()),
            "min_source_distance": float(np.min(np.abs(np.subtract.outer(src, src))
                                                + np.diag(np.full(len(src), np.inf))))}
