"""Free-product word spaces over a pointed finite metric space.

Words are tuples of non-basepoint letters; the distance between two words
eliminates their common prefix and pays the letter distance at the first
divergence plus the norms of both tails.  A window truncates the (infinite)
word space at a maximum order and norm; everything downstream -- cones, cone
trees, component cores, the full cover pipeline -- works inside a window and
restricts its correctness claims to the margin-reduced part.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .exact import to_fraction
from .metric import (
    ConstructionError,
    Family,
    FiniteMetricSpace,
    InputError,
    point_key,
    r_components,
    set_diameter,
    sorted_points,
)
from .covers import CoverWitness
from .combinators import decompose
from .trees import RootedTree, tree_cover

ROOT = "<root>"  # cone-tree root sentinel; never collides with word tuples

EPSILON = ()

DEFAULT_WINDOW_CAP = 200_000


def word_order(w) -> int:
    return len(w)


def concat(u, v):
    return tuple(u) + tuple(v)


class FreeProductWindow:
    """Finite truncation of the word space over a pointed base.

    Holds every word of order <= max_order and norm <= max_norm, the word
    metric, the base's minimal positive gap E, and an optional margin: all
    pipeline correctness assertions are restricted to words of norm at most
    max_norm - margin.
    """

    def __init__(self, base, max_order, max_norm, *, margin=None, cap=DEFAULT_WINDOW_CAP):
        if base.basepoint is None:
            raise InputError("free-product windows need a pointed base space")
        self.base = base
        self.x0 = base.basepoint
        self.max_order = int(max_order)
        self.max_norm = to_fraction(max_norm)
        self.margin = None if margin is None else to_fraction(margin)
        if self.max_order < 0 or self.max_norm < 0:
            raise InputError("window bounds must be non-negative")

        self.letter_norm = {
            x: base.dist(self.x0, x) for x in base.points if x != self.x0
        }
        gaps = [
            base.dist(p, q) for p, q in itertools.combinations(base.points, 2)
        ]
        self.E = min(gaps) if gaps else Fraction(1)
        if gaps and self.E <= 0:
            raise InputError("base space is not discrete: zero gap between points")

        self._norms = self._enumerate(cap)
        self.words = tuple(sorted(self._norms, key=point_key))
        self.word_set = frozenset(self.words)
        self.space = FiniteMetricSpace(
            self.words, self._dist, basepoint=EPSILON, name="*X-window"
        )

    def _enumerate(self, cap):
        letters = [
            x for x in sorted_points(self.letter_norm)
            if self.letter_norm[x] <= self.max_norm
        ]
        norms = {}
        stack = [(EPSILON, 0)]
        while stack:
            w, nw = stack.pop()
            norms[w] = nw
            if len(norms) > cap:
                raise InputError(f"window exceeds the {cap}-word cap")
            if len(w) == self.max_order:
                continue
            for x in reversed(letters):
                nx = nw + self.letter_norm[x]
                if nx <= self.max_norm:
                    ext = w + (x,)
                    if ext not in norms:
                        stack.append((ext, nx))
        return norms

    def norm(self, w):
        n = self._norms.get(w)
        if n is None:
            n = sum(self.letter_norm[c] for c in w)
        return n

    def _dist(self, u, v):
        # every prefix of a window word is a window word, so the cached
        # norms resolve the common-prefix elimination in O(prefix) time
        i = 0
        n = min(len(u), len(v))
        while i < n and u[i] == v[i]:
            i += 1
        norms = self._norms
        nu, nv = norms[u], norms[v]
        if i == len(u):
            return nv - nu
        if i == len(v):
            return nu - nv
        head = self.base.dist(u[i], v[i])
        return head + (nu - norms[u[: i + 1]]) + (nv - norms[v[: i + 1]])

    def dist(self, u, v):
        return self.space.dist(u, v)

    def contains(self, w):
        return w in self.word_set

    def require(self, words):
        for w in words:
            if w not in self.word_set:
                raise InputError(f"word {w!r} is outside the window")

    def inner_norm_bound(self, margin):
        return self.max_norm - margin

    def inner_words(self, margin):
        bound = self.max_norm - margin
        return frozenset(w for w in self.words if self.norm(w) <= bound)

    def __len__(self):
        return len(self.words)


def fp_window(base, max_order, max_norm, *, margin=None, cap=DEFAULT_WINDOW_CAP):
    return FreeProductWindow(base, max_order, max_norm, margin=margin, cap=cap)


def fp_distance(base, u, v):
    """Common-prefix elimination distance between two words over a pointed base.

    When one word extends the other, the distance is the extension's norm
    (forced by the trivial-word rule); otherwise it pays the letter distance
    at the first divergence plus both tail norms.
    """
    if base.basepoint is None:
        raise InputError("fp_distance needs a pointed base space")
    x0 = base.basepoint
    for w in (u, v):
        for c in w:
            if c == x0:
                raise InputError("words may not contain the basepoint letter")

    def norm(w):
        return sum((base.dist(x0, c) for c in w), Fraction(0))

    i = 0
    n = min(len(u), len(v))
    while i < n and u[i] == v[i]:
        i += 1
    tu, tv = u[i:], v[i:]
    if not tu:
        return norm(tv)
    if not tv:
        return norm(tu)
    return base.dist(tu[0], tv[0]) + norm(tu[1:]) + norm(tv[1:])


def word_norm(base, w):
    return fp_distance(base, EPSILON, w)


# ---------------------------------------------------------------------------
# cones and flat sets


def cone_window(window, A, R):
    """A concatenated with all words whose letters have norm <= R, inside the window."""
    window.require(A)
    R = to_fraction(R)
    small = [x for x, nx in window.letter_norm.items() if nx <= R]
    small.sort(key=point_key)
    out = set()
    stack = list(A)
    for a in A:
        out.add(a)
    while stack:
        w = stack.pop()
        if len(w) == window.max_order:
            continue
        nw = window.norm(w)
        for x in small:
            nx = nw + window.letter_norm[x]
            if nx <= window.max_norm:
                ext = w + (x,)
                if ext not in out and ext in window.word_set:
                    out.add(ext)
                    stack.append(ext)
    return frozenset(out)


def is_flat(A) -> bool:
    """True iff all words share one order and a common prefix of length order - 1.

    The one-point set {epsilon} counts as flat: it serves as the base of the
    trivial-word cone in the pipeline.
    """
    A = list(A)
    if not A:
        return False
    k = len(A[0])
    if any(len(w) != k for w in A):
        return False
    if k == 0:
        return len(A) == 1
    prefix = A[0][:-1]
    return all(w[:-1] == prefix for w in A)


def flat_prefix(A):
    w = next(iter(A))
    return w[:-1] if w else EPSILON


# ---------------------------------------------------------------------------
# cone trees and the quasi-isometry check


@dataclass
class ConeTree:
    tree: RootedTree
    base_set: frozenset
    cone: frozenset
    E: Fraction
    D: object  # diameter of the flat base
    M: Fraction
    window: FreeProductWindow


def cone_tree(window, A, M):
    """The simplicial tree over con_M(A): root joined to the flat base, one
    edge per single-letter extension of norm <= M."""
    A = frozenset(A)
    if not A:
        raise InputError("cone_tree needs a nonempty base")
    if not is_flat(A):
        raise InputError("cone_tree base must be flat")
    window.require(A)
    M = to_fraction(M)
    cone = cone_window(window, A, M)
    parent = {ROOT: None}
    for w in sorted_points(cone):
        parent[w] = ROOT if w in A else w[:-1]
    tree = RootedTree(parent)
    D = set_diameter(window.space, A)
    return ConeTree(tree, A, cone, window.E, D, M, window)


@dataclass
class QiReport:
    ok: bool
    violations: list
    pairs_checked: int
    params: dict


def qi_check(ct):
    """Exact verification of both quasi-isometry inequalities on all cone pairs:
    d/M - D/M <= d_T <= d/E + 3."""
    E, D, M = ct.E, ct.D, ct.M
    violations = []
    pairs = 0
    pts = sorted_points(ct.cone)
    for u, v in itertools.combinations(pts, 2):
        pairs += 1
        d = ct.window.dist(u, v)
        dT = ct.tree.distance(u, v)
        if not (Fraction(d, 1) / M - Fraction(D, 1) / M <= dT):
            violations.append(("lower", u, v, d, dT))
        if not (dT <= Fraction(d, 1) / E + 3):
            violations.append(("upper", u, v, d, dT))
    return QiReport(not violations, violations, pairs, {"E": E, "D": D, "M": M})


def cone_cover(window, A, M, r):
    """Two r-disjoint families covering con_M(A), pulled back from the tree cover.

    Tree sets more than r/E + 3 apart give word sets more than r apart; a
    tree set of diameter below 3*ceil(r/E + 3) gives a word set of diameter
    at most M * (3 * ceil(r/E + 3)) + D, the recorded bound.
    """
    A = frozenset(A)
    if not A:
        return [Family.of([]), Family.of([])], 0
    r = to_fraction(r)
    ct = cone_tree(window, A, M)
    rt = math.ceil(Fraction(r, 1) / ct.E + 3)
    tc = tree_cover(ct.tree, rt)
    families = []
    for fam in (tc.even, tc.odd):
        families.append(Family.of([s - {ROOT} for s in fam.sets]))
    bound = ct.M * (3 * rt) + ct.D
    return families, bound


def cone_cover_bound(E, D_bound, M, r):
    """The cone_cover mesh bound with the base diameter replaced by a uniform cap."""
    rt = math.ceil(Fraction(to_fraction(r), 1) / E + 3)
    return to_fraction(M) * (3 * rt) + D_bound


# ---------------------------------------------------------------------------
# component cores


def words_adjacent(u, v) -> bool:
    """Adjacent words differ in their last letter or extend one another by one."""
    if u == v:
        return False
    if len(u) == len(v):
        return len(u) > 0 and u[:-1] == v[:-1]
    if abs(len(u) - len(v)) != 1:
        return False
    longer, shorter = (u, v) if len(u) > len(v) else (v, u)
    return longer[:-1] == shorter


@dataclass
class CoreReport:
    core: frozenset
    flat: bool
    contained: bool
    radius: Fraction
    artifacts: list  # boundary words where a check failed, norm beyond margin
    hard_failures: list  # failures among margin-reduced words

    @property
    def ok(self):
        return self.flat and self.contained and not self.hard_failures


def component_core(window, C, M, R, D, *, margin=0):
    """Minimal-order slice of an R-component of a cone window, with checks.

    Verifies the core is flat and that C lies in the (M + R + D)-cone of the
    core.  Failures at words whose norm exceeds max_norm - margin are window
    artifacts; failures at inner words are hard.
    """
    C = frozenset(C)
    if not C:
        raise InputError("component_core needs a nonempty component")
    window.require(C)
    M, R, D = to_fraction(M), to_fraction(R), to_fraction(D)
    margin = to_fraction(margin)
    k0 = min(len(w) for w in C)
    core = frozenset(w for w in C if len(w) == k0)
    flat = is_flat(core)
    radius = M + R + D
    inner_bound = window.max_norm - margin

    artifacts = []
    hard = []
    if flat:
        reach = cone_window(window, core, radius)
        for w in sorted_points(C):
            if w in reach:
                continue
            if window.norm(w) > inner_bound:
                artifacts.append(w)
            else:
                hard.append(w)
    else:
        boundary = [w for w in C if window.norm(w) > inner_bound]
        if boundary:
            artifacts = sorted_points(boundary)
        else:
            hard = sorted_points(C)
    contained = not hard and flat
    return CoreReport(core, flat, contained, radius, artifacts, hard)


# ---------------------------------------------------------------------------
# the free-product pipeline


@dataclass
class CoverageAssignment:
    word: tuple
    family: int  # 1-based family index
    member: frozenset
    split: int | None  # position after the last heavy letter; None for the trivial case


@dataclass
class CoverageCertificate:
    R_star: Fraction
    assignments: list
    ok: bool
    problems: list


@dataclass
class VFamilies:
    families: list  # n + 1 families, the last is {{epsilon}}
    bounds: list  # member-diameter bound per family
    scales_used: list
    R_star: Fraction
    certificate: CoverageCertificate


def build_v_families(oracle_for_x, scales, window):
    """Translate a base-space witness into word-space families plus a coverage
    certificate.

    Family i collects x . (U minus the R*-ball) over window words x and
    members U of the i-th base family, where R* is the scale after the last
    base slot; the extra family is the trivial word alone.  The certificate
    assigns every window word to a family via its last heavy letter and
    re-checks disjointness, flatness, and boundedness of every family.
    """
    base = window.base
    if oracle_for_x.space.point_set != base.point_set:
        raise InputError("oracle is not over the window's base space")
    witness = oracle_for_x.checked(scales)
    n = len(witness.entries)
    R_star = scales.at(n + 1)
    x0 = base.basepoint

    heavy_letters = {
        x for x, nx in window.letter_norm.items() if nx > R_star
    }

    families = []
    bounds = []
    scales_used = []
    member_lookup = []  # per family: dict (prefix, set-id) -> member
    for i, entry in enumerate(witness.entries, start=1):
        members = {}
        for si, U in enumerate(entry.family.sets):
            U_heavy = frozenset(u for u in U if u != x0 and u in heavy_letters)
            if not U_heavy:
                continue
            for x in window.words:
                member = frozenset(
                    x + (u,) for u in U_heavy if x + (u,) in window.word_set
                )
                if member:
                    members[(x, si)] = member
        dedup = sorted({m for m in members.values()},
                       key=lambda s: point_key(min(s, key=point_key)))
        families.append(Family.of(dedup, label=f"V{i}"))
        bounds.append(entry.mesh_bound)
        scales_used.append(scales.at(i))
        member_lookup.append(members)

    families.append(Family.of([{EPSILON}], label=f"V{n + 1}"))
    bounds.append(0)
    scales_used.append(R_star)

    assignments = []
    problems = []
    base_sets = [
        list(entry.family.sets) for entry in witness.entries
    ]
    for w in window.words:
        heavy_pos = [k for k, c in enumerate(w) if c in heavy_letters]
        if not heavy_pos:
            assignments.append(CoverageAssignment(w, n + 1, frozenset({EPSILON}), None))
            continue
        mpos = max(heavy_pos)
        letter = w[mpos]
        found = None
        for i, sets in enumerate(base_sets, start=1):
            for si, U in enumerate(sets):
                if letter in U:
                    found = (i, si)
                    break
            if found:
                break
        if found is None:
            problems.append((w, "letter not covered by the base witness"))
            continue
        i, si = found
        prefix = w[:mpos]
        member = member_lookup[i - 1].get((prefix, si))
        if member is None or w[: mpos + 1] not in member:
            problems.append((w, "assigned member does not contain the heavy prefix"))
            continue
        tail = w[mpos + 1 :]
        if any(window.letter_norm[c] > R_star for c in tail):
            problems.append((w, "tail letter above R*"))
            continue
        assignments.append(CoverageAssignment(w, i, member, mpos))

    # family-level checks: disjointness at the family scale, flat bounded members
    for i, fam in enumerate(families, start=1):
        from .metric import family_is_R_disjoint

        ok, bad = family_is_R_disjoint(window.space, fam, scales_used[i - 1])
        if not ok:
            problems.append((f"V{i}", f"not {scales_used[i - 1]}-disjoint: {bad}"))
        for member in fam.sets:
            if not is_flat(member):
                problems.append((f"V{i}", f"member not flat: {sorted_points(member)[:3]}"))
            if set_diameter(window.space, member) > bounds[i - 1]:
                problems.append((f"V{i}", "member exceeds the diameter bound"))

    cert = CoverageCertificate(R_star, assignments, not problems, problems)
    return VFamilies(families, bounds, scales_used, R_star, cert)


class _FreeProductDecomposable:
    """Decomposition hypothesis realizing the free-product construction.

    Families are the R_i-components of the (R* + 1)-cones over the translated
    base families; each component is re-covered through its core's cone tree.
    """

    def __init__(self, oracle_for_x, window, margin):
        self.oracle = oracle_for_x
        self.window = window
        self.margin = margin
        self.vf = None
        self.M = None
        self.core_reports = []
        self.artifacts = []

    def families(self, sub):
        self.vf = build_v_families(self.oracle, sub, self.window)
        if not self.vf.certificate.ok:
            raise ConstructionError(
                f"coverage certificate failed: {self.vf.certificate.problems[:3]}"
            )
        self.M = self.vf.R_star + 1
        if self.margin is None:
            self.margin = self.vf.R_star + self.M  # one cone layer per step
        out = []
        for i, fam in enumerate(self.vf.families, start=1):
            support = fam.support()
            cone = cone_window(self.window, support, self.M)
            comps = r_components(self.window.space, cone, sub.at(i))
            out.append((sub.at(i), Family.of(comps, label=f"cone-comps-{i}")))
        return out

    def subcover(self, i, U, R):
        D_i = to_fraction(self.vf.bounds[i - 1])
        report = component_core(self.window, U, self.M, R, D_i, margin=self.margin)
        self.core_reports.append((i, report))
        self.artifacts.extend(report.artifacts)
        if report.hard_failures:
            raise ConstructionError(
                f"component core failed inside the margin-reduced window: "
                f"{report.hard_failures[:3]}"
            )
        core_cap = 2 * self.M + 2 * to_fraction(R) + 2 * D_i
        B = cone_cover_bound(self.window.E, core_cap, report.radius, R)
        if not report.flat:
            # whole component is a boundary artifact; emit nothing for it
            return B, [Family.of([]), Family.of([])]
        if set_diameter(self.window.space, report.core) > core_cap:
            boundary = [w for w in U
                        if self.window.norm(w) > self.window.max_norm - self.margin]
            if len(boundary) == 0:
                raise ConstructionError(
                    f"core of an inner component exceeds its uniform diameter cap "
                    f"({core_cap})"
                )
            self.artifacts.extend(sorted_points(U))
            return B, [Family.of([]), Family.of([])]
        fams, _ = cone_cover(self.window, report.core, report.radius, R)
        clipped = [Family.of([s & U for s in fam.sets]) for fam in fams]
        return B, clipped


@dataclass
class FreeProductResult:
    witness: CoverWitness
    window: FreeProductWindow
    margin: Fraction
    reduced_points: frozenset
    v_families: VFamilies
    artifacts: list


def free_product_cover(oracle_for_x, scales, window):
    """End-to-end free-product cover on a window, via decompose with k = 2.

    The returned witness passes verify_apc_witness with coverage required on
    the margin-reduced window; boundary words whose components were clipped
    are reported as artifacts.
    """
    hyp = _FreeProductDecomposable(oracle_for_x, window, window.margin)
    # the hypothesis learns its margin when families() computes R*; to hand
    # decompose the exempt set up front, resolve families eagerly
    from .covers import MappedStream

    probe = MappedStream(scales, lambda i: i * 2)
    hyp.families(probe)
    margin = hyp.margin
    reduced = window.inner_words(margin)
    allow = window.word_set - reduced

    hyp2 = _FreeProductDecomposable(oracle_for_x, window, margin)
    witness = decompose(window.space, 2, hyp2, scales, allow_uncovered=allow)
    witness.meta["margin"] = margin
    witness.meta["artifacts"] = len(hyp2.artifacts)
    return FreeProductResult(
        witness, window, margin, reduced, hyp2.vf, sorted_points(set(hyp2.artifacts))
    )


# ---------------------------------------------------------------------------
# wedges and the two-factor free product


def wedge_space(X, Y):
    """The wedge of two pointed spaces: glue the basepoints, route cross
    distances through them."""
    if X.basepoint is None or Y.basepoint is None:
        raise InputError("wedge needs pointed spaces")
    x0, y0 = X.basepoint, Y.basepoint
    points = ["*"]
    points += [("x", p) for p in X.points if p != x0]
    points += [("y", q) for q in Y.points if q != y0]

    def component(a):
        if a == "*":
            return None, None
        return a[0], a[1]

    def norm(side, p):
        if side is None:
            return 0
        return X.dist(x0, p) if side == "x" else Y.dist(y0, p)

    def d(a, b):
        sa, pa = component(a)
        sb, pb = component(b)
        if sa == sb and sa is not None:
            return X.dist(pa, pb) if sa == "x" else Y.dist(pa, pb)
        if sa == sb:
            return 0
        return norm(sa, pa) + norm(sb, pb)

    return FiniteMetricSpace(points, d, basepoint="*", name=f"({X.name})v({Y.name})")


def _alternating_words(window):
    """Window words whose letters alternate between the two wedge sides."""
    out = []
    for w in window.words:
        ok = all(w[i][0] != w[i + 1][0] for i in range(len(w) - 1))
        if ok:
            out.append(w)
    return out


@dataclass
class WedgeReport:
    ok: bool
    pairs_checked: int
    mismatches: list


def wedge_embed_check(X, Y, max_order, max_norm):
    """Exhaustive isometry check of two-factor words inside the wedge word space.

    The two-factor distance is computed independently: eliminate the common
    prefix; at the divergence pay the factor distance when both letters come
    from the same side and the sum of their norms otherwise.
    """
    W = wedge_space(X, Y)
    window = fp_window(W, max_order, max_norm)
    x0, y0 = X.basepoint, Y.basepoint

    def letter_norm(c):
        side, p = c
        return X.dist(x0, p) if side == "x" else Y.dist(y0, p)

    def letter_dist(a, b):
        if a[0] == b[0]:
            return X.dist(a[1], b[1]) if a[0] == "x" else Y.dist(a[1], b[1])
        return letter_norm(a) + letter_norm(b)

    def direct(u, v):
        i = 0
        n = min(len(u), len(v))
        while i < n and u[i] == v[i]:
            i += 1
        tu, tv = u[i:], v[i:]
        if not tu:
            return sum(map(letter_norm, tv))
        if not tv:
            return sum(map(letter_norm, tu))
        return (
            letter_dist(tu[0], tv[0])
            + sum(map(letter_norm, tu[1:]))
            + sum(map(letter_norm, tv[1:]))
        )

    words = _alternating_words(window)
    mismatches = []
    pairs = 0
    for u, v in itertools.combinations(words, 2):
        pairs += 1
        if window.dist(u, v) != direct(u, v):
            mismatches.append((u, v, window.dist(u, v), direct(u, v)))
    return WedgeReport(not mismatches, pairs, mismatches)
