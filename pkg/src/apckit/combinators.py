"""Cover-combination algorithms: product, fibering, and decomposition.

All three share the same triangular bookkeeping: the input scale stream is
rearranged into columns, per-column covers are requested from providers, and
the resulting (i, j)-indexed families are flattened back so that the family
built for column i, position j lands at exactly the slot whose scale it was
built for.  Empty slots are kept, never compacted.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

from .exact import ceil_scalar, hyp, to_fraction
from .metric import (
    ConstructionError,
    Family,
    InputError,
    family_is_R_disjoint,
    set_diameter,
    sorted_points,
)
from .covers import (
    CountingStream,
    CoverWitness,
    MappedStream,
    WitnessEntry,
)


def triangular_index(i: int, j: int) -> int:
    """Position of (i, j) in the diagonal enumeration of N+ x N+; (1,1) -> 1.

    Strictly increasing in each argument, so each column of a non-decreasing
    sequence is non-decreasing and a family placed at slot k(i, j) sits at a
    scale at least as large as the one it was built for.
    """
    if i < 1 or j < 1:
        raise InputError("triangular indices start at 1")
    d = i + j
    return (d - 1) * (d - 2) // 2 + i


def triangular_inverse(k: int):
    if k < 1:
        raise InputError("triangular positions start at 1")
    d = (3 + math.isqrt(8 * k - 7)) // 2
    while (d - 1) * (d - 2) // 2 >= k:
        d -= 1
    while d * (d - 1) // 2 < k:
        d += 1
    i = k - (d - 1) * (d - 2) // 2
    return i, d - i


def column_stream(scales, i):
    """The i-th column of the triangular rearrangement, as a stream."""
    return MappedStream(scales, lambda j: triangular_index(i, j))


# ---------------------------------------------------------------------------
# coarse-map predicates


@dataclass(frozen=True)
class UniformlyExpansiveMap:
    """A point map between finite spaces with a non-decreasing expansion modulus.

    The contract dist_Y(f(x), f(x')) <= rho(dist_X(x, x')) is checkable
    exhaustively; see check_uniformly_expansive.
    """

    source: object
    target: object
    fmap: object  # point -> point
    rho: object  # scalar -> scalar, non-decreasing

    def __call__(self, x):
        return self.fmap(x)


def identity_rho(t):
    return t


def check_uniformly_expansive(m, *, pair_budget=2_000_000, seed=0):
    """Verify the expansion contract on all pairs (or a seeded sample above budget).

    Returns (ok, witness) where witness is a violating pair, or None.
    """
    pts = m.source.points
    for x in pts:
        if m.fmap(x) not in m.target:
            return False, (x, m.fmap(x))
    n = len(pts)
    n_pairs = n * (n - 1) // 2

    def bad(x, y):
        dx = m.source.dist(x, y)
        dy = m.target.dist(m.fmap(x), m.fmap(y))
        return not dy <= m.rho(dx)

    if n_pairs <= pair_budget:
        for x, y in itertools.combinations(pts, 2):
            if bad(x, y):
                return False, (x, y)
    else:
        rng = random.Random(seed)
        for _ in range(pair_budget):
            i = rng.randrange(n)
            j = rng.randrange(n - 1)
            if j >= i:
                j += 1
            if bad(pts[i], pts[j]):
                return False, (pts[i], pts[j])
    return True, None


def check_coarsely_surjective(fmap, X, Y, R):
    """For each y in Y there must be x in X with dist(y, f(x)) < R (strict)."""
    images = [fmap(x) for x in X.points]
    Y.require(images)
    for y in Y.points:
        if not any(Y.dist(y, fy) < R for fy in images):
            return False, y
    return True, None


# ---------------------------------------------------------------------------
# the product combinator


class _DiagonalStream:
    """Stream of rho(R_{i, n_i}) values, monotonized by running max.

    Providers are only guaranteed to honor non-decreasing streams;
    monotonizing only raises scales, which strengthens every family it
    produces for the original diagonal values.
    """

    def __init__(self, raw_at):
        self.raw_at = raw_at
        self._memo = []

    def at(self, i):
        while len(self._memo) < i:
            v = self.raw_at(len(self._memo) + 1)
            if self._memo and v < self._memo[-1]:
                v = self._memo[-1]
            self._memo.append(v)
        return self._memo[i - 1]


def _clipped_product(U, V, pair_point, clip):
    s = {pair_point(x, y) for x in U for y in V}
    if clip is not None:
        s &= clip
    return s


def product_engine(oracleX, oracleY, scales, *, mesh_combine="l2", pair_point=None,
                   clip=None, rho=None):
    """Shared engine behind product covers (l2 spaces, l1 grids, group products).

    Queries oracleX once per column, feeds the monotonized diagonal of
    end-of-column scales (through rho if given) to oracleY, and places the
    product family built from column i position j at output slot
    triangular_index(i, j).
    """
    if pair_point is None:
        pair_point = lambda x, y: (x, y)
    if rho is None:
        rho = identity_rho
    combine = hyp if mesh_combine == "l2" else (lambda a, b: a + b)

    if not oracleX.space.points or not oracleY.space.points:
        return CoverWitness([], {"columns": 0, "per_column": []})

    counting = CountingStream(scales)
    col_cache = {}

    def column_witness(i):
        if i not in col_cache:
            col = column_stream(counting, i)
            col_cache[i] = oracleX.checked(col)
        return col_cache[i]

    def raw_diag_x(i):
        w = column_witness(i)
        n_i = len(w.entries)
        if n_i == 0:
            raise ConstructionError("oracle returned an empty witness for a nonempty space")
        return rho(column_stream(counting, i).at(n_i))

    diag = _DiagonalStream(raw_diag_x)
    witnessY = oracleY.checked(diag)
    m = len(witnessY.entries)

    slots = {}
    bounds = {}
    per_column = []
    for i in range(1, m + 1):
        wX = column_witness(i)
        per_column.append(len(wX.entries))
        entryY = witnessY.entries[i - 1]
        if entryY.is_empty():
            continue
        for j, entryX in enumerate(wX.entries, start=1):
            if entryX.is_empty():
                continue
            t = triangular_index(i, j)
            sets = []
            for U in entryX.family.sets:
                for V in entryY.family.sets:
                    sets.append(_clipped_product(U, V, pair_point, clip))
            slots[t] = Family.of(sets, label=f"W[{i},{j}]")
            bounds[t] = combine(entryX.mesh_bound, entryY.mesh_bound)

    n_slots = max(slots) if slots else 0
    entries = []
    for t in range(1, n_slots + 1):
        fam = slots.get(t, Family.of([]))
        entries.append(WitnessEntry(counting.at(t), fam, bounds.get(t, 0)))
    meta = {
        "columns": m,
        "per_column": per_column,
        "scales_consumed": counting.max_index,
    }
    return CoverWitness(entries, meta)


def product_cover(oracleX, oracleY, scales):
    """Cover of the l2 product space from covers of the factors.

    The output passes verify_apc_witness against the input stream: the family
    at slot t is R_t-disjoint because it was built for exactly that slot's
    scale, and each member's squared diameter is bounded by the sum of the
    squared factor meshes.
    """
    witness = product_engine(oracleX, oracleY, scales, mesh_combine="l2")
    witness.meta["space"] = "product"
    return witness


# ---------------------------------------------------------------------------
# the fibering combinator


@dataclass
class FiberCoverScheme:
    """Per-fiber cover provider implementing the uniform-fiber contract.

    family_count is fixed once the scale stream is fixed; bound_for_scale
    maps the fiber scale M to a mesh bound that must not depend on the fiber
    itself; cover(A, M) returns family_count families of subsets of A, the
    j-th disjoint at the j-th scale of the stream the scheme was built for.
    """

    family_count: int
    bound_for_scale: object  # M -> bound
    cover: object  # (A, M) -> list[Family]


def fiber_scheme_from_asdim(n, provider):
    """Scheme factory with k = n + 1 from a uniform per-fiber cover provider.

    provider(M, R) must return (B, cover_fn) where cover_fn(A) yields n + 1
    R-disjoint B-bounded families covering any A with diam f(A) < M, and B
    depends on (M, R) only.  The factory reads the (n+1)-st scale of its
    stream; families disjoint there are disjoint at every earlier scale.
    """

    def factory(stream):
        k = n + 1
        r_star = stream.at(k)
        memo = {}

        def entry(M):
            if M not in memo:
                memo[M] = provider(M, r_star)
            return memo[M]

        return FiberCoverScheme(
            family_count=k,
            bound_for_scale=lambda M: entry(M)[0],
            cover=lambda A, M: entry(M)[1](A),
        )

    return factory


def whole_fiber_scheme():
    """k = 1 scheme covering each fiber by itself; valid when diam A <= diam f(A).

    Useful for identity-like maps; the single family is vacuously disjoint at
    any scale.
    """

    def factory(stream):
        return FiberCoverScheme(
            family_count=1,
            bound_for_scale=lambda M: M,
            cover=lambda A, M: [Family.of([A])],
        )

    return factory


def singleton_fiber_scheme():
    """k = 1, mesh 0 scheme; valid only when every coarse fiber is a single point."""

    def factory(stream):
        def cover(A, M):
            if len(A) > 1:
                raise ConstructionError("singleton fiber scheme got a multi-point fiber")
            return [Family.of([A])]

        return FiberCoverScheme(1, lambda M: 0, cover)

    return factory


def projection_scheme_from_oracle(oracleX):
    """Scheme for the projection of an l2 product onto its second factor.

    Families are slices (U x Y) of the fiber for U in the factor witness; the
    j-th inherits the j-th column scale's disjointness from the X coordinate,
    and mesh combines the factor mesh with the fiber scale in l2.
    """

    def factory(stream):
        w = oracleX.checked(stream)
        k = len(w.entries)
        max_mesh = max((e.mesh_bound for e in w.entries), default=0)

        def cover(A, M):
            fams = []
            for e in w.entries:
                sets = []
                for U in e.family.sets:
                    sets.append({p for p in A if p[0] in U})
                fams.append(Family.of(sets))
            return fams

        return FiberCoverScheme(k, lambda M: hyp(max_mesh, M), cover)

    return factory


def fibering_cover(umap, oracleY, scheme_factory, scales, *, check_rho=True,
                   rho_budget=200_000):
    """Cover of the source of a uniformly expansive map from a cover of its target
    and uniform covers of its coarse fibers.

    Per column i the scheme fixes n_i; the target oracle answers the
    monotonized stream of rho(R_{i, n_i}); each target set's preimage is a
    coarse fiber at one more than its recorded mesh, covered by the scheme;
    unions over a target family are placed at slot triangular_index(i, j).
    Scheme output is validated per fiber and the mesh bound per (column, M)
    is recorded and audited to be fiber-independent.
    """
    X, Y = umap.source, umap.target
    if check_rho:
        ok, bad = check_uniformly_expansive(umap, pair_budget=rho_budget)
        if not ok:
            raise InputError(f"expansion modulus violated at {bad!r}")
    if not X.points:
        return CoverWitness([], {"columns": 0, "per_column": [], "bounds": []})

    counting = CountingStream(scales)
    schemes = {}
    fibers_of = {}

    def scheme_for(i):
        if i not in schemes:
            schemes[i] = scheme_factory(column_stream(counting, i))
        return schemes[i]

    def raw_diag(i):
        s = scheme_for(i)
        if s.family_count < 1:
            raise ConstructionError("fiber scheme must provide at least one family")
        return umap.rho(column_stream(counting, i).at(s.family_count))

    diag = _DiagonalStream(raw_diag)
    witnessY = oracleY.checked(diag)
    m = len(witnessY.entries)

    preimage = {}
    for x in X.points:
        preimage.setdefault(umap.fmap(x), []).append(x)

    slots = {}
    bounds = {}
    audit = []
    per_column = []
    for i in range(1, m + 1):
        scheme = scheme_for(i)
        k = scheme.family_count
        per_column.append(k)
        entryY = witnessY.entries[i - 1]
        if entryY.is_empty():
            continue
        M_i = ceil_scalar(entryY.mesh_bound) + 1
        B_i = scheme.bound_for_scale(M_i)
        col = column_stream(counting, i)
        merged = [[] for _ in range(k)]
        n_fibers = 0
        for V in entryY.family.sets:
            A = frozenset(p for y in V for p in preimage.get(y, ()))
            if not A:
                continue
            n_fibers += 1
            fams = scheme.cover(A, M_i)
            if len(fams) != k:
                raise ConstructionError(
                    f"scheme for column {i} returned {len(fams)} families, declared {k}"
                )
            covered = set()
            for j, fam in enumerate(fams, start=1):
                for s in fam.sets:
                    if not s <= A:
                        raise ConstructionError(
                            f"scheme family {j} (column {i}) leaves its fiber"
                        )
                    covered |= s
                    if set_diameter(X, s) > B_i:
                        raise ConstructionError(
                            f"scheme mesh bound not honored: column {i}, family {j}, "
                            f"bound {B_i}"
                        )
                ok, bad = family_is_R_disjoint(X, fam, col.at(j))
                if not ok:
                    raise ConstructionError(
                        f"scheme family {j} (column {i}) is not {col.at(j)}-disjoint: {bad}"
                    )
            if covered != A:
                raise ConstructionError(
                    f"scheme cover misses {len(A - covered)} fiber points (column {i})"
                )
            for j, fam in enumerate(fams, start=1):
                merged[j - 1].extend(fam.sets)
        audit.append({"column": i, "M": M_i, "B": B_i, "fibers": n_fibers})
        for j in range(1, k + 1):
            if not merged[j - 1]:
                continue
            t = triangular_index(i, j)
            slots[t] = Family.of(merged[j - 1], label=f"U[{i},{j}]")
            bounds[t] = B_i

    n_slots = max(slots) if slots else 0
    entries = []
    for t in range(1, n_slots + 1):
        fam = slots.get(t, Family.of([]))
        entries.append(WitnessEntry(counting.at(t), fam, bounds.get(t, 0)))
    meta = {
        "columns": m,
        "per_column": per_column,
        "bounds": audit,
        "scales_consumed": counting.max_index,
    }
    return CoverWitness(entries, meta)


# ---------------------------------------------------------------------------
# the decomposition combinator


def decompose(space, k, hyp_oracle, scales, *, allow_uncovered=frozenset()):
    """Cover from families whose members each split into k bounded disjoint families.

    hyp_oracle.families(stream) returns the list of (scale, family) pairs, the
    i-th disjoint at the i-th scale of the k-subsampled stream (R_k, R_2k, ...);
    hyp_oracle.subcover(i, U, R) returns (B, k families of subsets of U
    covering U, each R-disjoint with mesh <= B) where B may depend on (i, R)
    but never on U -- violations abort.  The j-th subfamily of the i-th input
    family lands at slot (i-1)k + j, which is disjoint at its own slot scale
    because (i-1)k + j <= ik.

    Points in allow_uncovered are exempt from the coverage checks; windowed
    constructions use this for their margin region.
    """
    if k < 1:
        raise InputError("decompose needs k >= 1")
    allow_uncovered = frozenset(allow_uncovered)
    counting = CountingStream(scales)
    sub = MappedStream(counting, lambda i: i * k)
    fam_list = hyp_oracle.families(sub)
    n = len(fam_list)

    covered = set()
    for i, (scale_i, fam) in enumerate(fam_list, start=1):
        R_i = sub.at(i)
        if to_fraction(scale_i) != R_i:
            raise ConstructionError(
                f"hypothesis family {i} declared scale {scale_i}, stream says {R_i}"
            )
        ok, bad = family_is_R_disjoint(space, fam, R_i)
        if not ok:
            raise ConstructionError(f"hypothesis family {i} is not {R_i}-disjoint: {bad}")
        covered |= fam.support()
    if not covered >= space.point_set - allow_uncovered:
        missing = sorted_points(space.point_set - allow_uncovered - covered)[:5]
        raise ConstructionError(f"hypothesis families do not cover the space: {missing}")

    entries = []
    b_values = []
    slot_data = {}
    for i, (_, fam) in enumerate(fam_list, start=1):
        R_i = sub.at(i)
        B_i = None
        merged = [[] for _ in range(k)]
        for U in fam.sets:
            B_u, subfams = hyp_oracle.subcover(i, U, R_i)
            if B_i is None:
                B_i = B_u
            elif B_u != B_i:
                raise ConstructionError(
                    f"subcover bound varies with the member set in family {i}: "
                    f"{B_u} != {B_i}"
                )
            if len(subfams) != k:
                raise ConstructionError(
                    f"subcover of family {i} returned {len(subfams)} families, need {k}"
                )
            sub_covered = set()
            for j, sf in enumerate(subfams, start=1):
                for s in sf.sets:
                    if not s <= U:
                        raise ConstructionError(
                            f"subcover set leaves its member (family {i}, subfamily {j})"
                        )
                    sub_covered |= s
                    if set_diameter(space, s) > B_u:
                        raise ConstructionError(
                            f"subcover mesh exceeds its bound (family {i}, subfamily {j})"
                        )
                ok, bad = family_is_R_disjoint(space, sf, R_i)
                if not ok:
                    raise ConstructionError(
                        f"subcover family {j} of member in family {i} is not "
                        f"{R_i}-disjoint: {bad}"
                    )
            if not sub_covered >= U - allow_uncovered:
                raise ConstructionError(
                    f"subcover misses {len(U - allow_uncovered - sub_covered)} points "
                    f"of a member (family {i})"
                )
            for j, sf in enumerate(subfams, start=1):
                merged[j - 1].extend(sf.sets)
        if B_i is None:
            B_i = 0
        b_values.append(B_i)
        for j in range(1, k + 1):
            t = (i - 1) * k + j
            slot_data[t] = (Family.of(merged[j - 1], label=f"V[{t}]"), B_i)

    for t in range(1, n * k + 1):
        fam, bound = slot_data.get(t, (Family.of([]), 0))
        entries.append(WitnessEntry(counting.at(t), fam, bound))
    meta = {"n": n, "k": k, "bounds": b_values, "scales_consumed": counting.max_index}
    return CoverWitness(entries, meta)
