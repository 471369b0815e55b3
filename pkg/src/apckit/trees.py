"""Rooted simplicial trees with unit edges and their two-family annulus cover.

The cover splits vertices into depth annuli of height r and takes the
r-components of each annulus, even annuli into one family and odd into the
other.  Same-parity annuli are separated by more than r in depth alone, and
a component sits inside the subtree of a single "anchor" vertex just above
its annulus, which pins its diameter below 3r - 2 for integer r.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .exact import to_fraction
from .metric import Family, FiniteMetricSpace, InputError, sorted_points
from .covers import ApcOracle, witness_from_families


class RootedTree:
    """Vertices with a parent map; exactly one root (parent None)."""

    def __init__(self, parent):
        self.parent = dict(parent)
        roots = [v for v, p in self.parent.items() if p is None]
        if len(roots) != 1:
            raise InputError(f"tree must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        for v, p in self.parent.items():
            if p is not None and p not in self.parent:
                raise InputError(f"parent {p!r} of {v!r} is not a vertex")
        self.depth = {}
        self._compute_depths()
        self.vertices = tuple(sorted_points(self.parent))

    def _compute_depths(self):
        for v in self.parent:
            chain = []
            u = v
            while u is not None and u not in self.depth:
                chain.append(u)
                u = self.parent[u]
                if len(chain) > len(self.parent):
                    raise InputError("parent map has a cycle")
            base = -1 if u is None else self.depth[u]
            for w in reversed(chain):
                base += 1
                self.depth[w] = base

    def __len__(self):
        return len(self.parent)

    def meet(self, u, v):
        """Deepest common ancestor."""
        du, dv = self.depth[u], self.depth[v]
        while du > dv:
            u = self.parent[u]
            du -= 1
        while dv > du:
            v = self.parent[v]
            dv -= 1
        while u != v:
            u = self.parent[u]
            v = self.parent[v]
        return u

    def distance(self, u, v):
        w = self.meet(u, v)
        return self.depth[u] + self.depth[v] - 2 * self.depth[w]

    def ancestor_at_depth(self, v, h):
        d = self.depth[v]
        if d < h:
            raise InputError("vertex is above the requested depth")
        while d > h:
            v = self.parent[v]
            d -= 1
        return v

    def as_space(self):
        return FiniteMetricSpace(
            self.vertices, self.distance, basepoint=self.root, name="tree"
        )

    def height(self):
        return max(self.depth.values())


def tree_from_edges(root, edges):
    parent = {root: None}
    for p, c in edges:
        if c in parent:
            raise InputError(f"vertex {c!r} has two parents")
        parent[c] = p
    return RootedTree(parent)


def random_tree(n, rng=None, *, shape="attach"):
    """Random rooted tree on vertices 0..n-1 (0 is the root)."""
    rng = rng or random.Random(0)
    parent = {0: None}
    for v in range(1, n):
        if shape == "path":
            parent[v] = v - 1
        elif shape == "star":
            parent[v] = 0
        elif shape == "caterpillar":
            parent[v] = v - 1 if v % 2 else max(0, v - 2)
        else:
            parent[v] = rng.randrange(v)
    return RootedTree(parent)


def _annulus_bounds(i, r):
    """Integer depth range [lo, hi] of annulus i: i*r <= depth < (i+1)*r, exact."""
    lo = math.ceil(i * r)
    top = (i + 1) * r
    hi = (math.ceil(top) - 1) if top != int(top) else int(top) - 1
    return lo, hi


@dataclass
class TreeCover:
    even: Family
    odd: Family
    mesh_bound: object
    r: Fraction
    anchors: dict  # annulus index -> anchor depth

    def families(self):
        return [self.even, self.odd]


def tree_cover(tree, r):
    """Two r-disjoint families covering the tree, mesh < 3r.

    Components of an annulus are computed exactly by anchor subtrees: every
    vertex connects up its branch to the annulus top, and two top vertices
    are within r iff they share the ancestor at depth top - floor(floor(r)/2).
    For integer r the mesh bound is the stronger 3r - 2.
    """
    r = to_fraction(r)
    if r < 1:
        raise InputError("tree_cover needs r >= 1")
    s = math.floor(r)  # chain-step threshold: distances are integers
    half = s // 2
    n_annuli = math.floor(tree.height() / r) + 1
    families = {0: [], 1: []}
    anchors = {}
    for i in range(n_annuli):
        lo, hi = _annulus_bounds(i, r)
        members = [v for v in tree.vertices if lo <= tree.depth[v] <= hi]
        if not members:
            continue
        if i == 0:
            comps = {None: members}
            anchors[i] = 0
        else:
            h = lo - half
            anchors[i] = h
            memo = {}

            def anchor(v):
                seen = []
                while v not in memo:
                    if tree.depth[v] == h:
                        memo[v] = v
                        break
                    seen.append(v)
                    v = tree.parent[v]
                a = memo[v]
                for w in seen:
                    memo[w] = a
                return a

            comps = {}
            for v in members:
                comps.setdefault(anchor(v), []).append(v)
        families[i % 2].extend(frozenset(c) for c in comps.values())

    if isinstance(r, Fraction) and r.denominator == 1:
        bound = 3 * int(r) - 2
    else:
        bound = 3 * r
    return TreeCover(
        even=Family.of(families[0], label="even"),
        odd=Family.of(families[1], label="odd"),
        mesh_bound=bound,
        r=r,
        anchors=anchors,
    )


def tree_oracle(tree):
    """Oracle over the tree's metric space; uses tree_cover at the second scale."""
    space = tree.as_space()

    def provide(scales):
        r = max(1, math.ceil(scales.at(2)))
        cover = tree_cover(tree, r)
        fams = [f for f in cover.families() if len(f)]
        return witness_from_families(fams, scales, [cover.mesh_bound] * len(fams))

    return ApcOracle(space, provide, name="tree")


def set_tree_diameter(tree, S):
    """Exact diameter of a vertex subset via two farthest-point sweeps.

    Valid because tree metrics are 0-hyperbolic: the farthest vertex from any
    start is an end of a diametral pair.
    """
    S = list(S)
    if len(S) <= 1:
        return 0
    u = S[0]
    v = max(S, key=lambda x: tree.distance(u, x))
    return max(tree.distance(v, x) for x in S)
