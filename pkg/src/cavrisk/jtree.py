"""Junction-tree construction and message propagation.

Moralizes the DAG, triangulates with the same min-fill heuristic as the
elimination engine, extracts maximal cliques, joins them by a maximum
spanning tree over separator sizes, and calibrates with a two-pass
Shafer-Shenoy sweep.  Works on the dense CPTs only, which makes it an
independent cross-check of the cascaded-max factor rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bncore import BayesNet, Evidence
from .errors import InconsistentEvidence, UnknownVariable, ValidationError
from .inference import Distribution, minfill_order, _contract

_Z_FLOOR = 1e-300


@dataclass
class JunctionTree:
    """Clique tree over a network: cliques, separators, assigned potentials."""

    net: BayesNet
    cliques: list[tuple[str, ...]]
    edges: list[tuple[int, int]]
    potentials: list[np.ndarray] = field(repr=False, default_factory=list)

    def separator(self, i: int, j: int) -> tuple[str, ...]:
        return tuple(sorted(set(self.cliques[i]) & set(self.cliques[j])))

    def containing_clique(self, var_id: str) -> int:
        for i, cl in enumerate(self.cliques):
            if var_id in cl:
                return i
        raise UnknownVariable(var_id)

    def validate(self) -> None:
        """Assert tree-ness, family coverage, and the running intersection."""
        n = len(self.cliques)
        if n and len(self.edges) != n - 1:
            raise ValidationError("clique graph is not a tree")
        # connectivity
        seen = {0}
        frontier = [0]
        adj = {i: [] for i in range(n)}
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        while frontier:
            x = frontier.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    frontier.append(y)
        if len(seen) != n:
            raise ValidationError("clique tree is disconnected")
        # family coverage
        for var_id in self.net.order:
            fam = set(self.net.cpts[var_id].parents) | {var_id}
            if not any(fam <= set(cl) for cl in self.cliques):
                raise ValidationError(f"family of {var_id!r} not covered")
        # running intersection: for each variable the cliques containing it
        # form a connected subtree
        for var_id in self.net.order:
            holders = {i for i, cl in enumerate(self.cliques) if var_id in cl}
            if not holders:
                raise ValidationError(f"{var_id!r} in no clique")
            sub_seen = {min(holders)}
            stack = [min(holders)]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y in holders and y not in sub_seen:
                        sub_seen.add(y)
                        stack.append(y)
            if sub_seen != holders:
                raise ValidationError(f"running intersection fails at {var_id!r}")


@dataclass
class CalibratedTree:
    """Result of propagation: per-clique beliefs plus the evidence mass."""

    tree: JunctionTree
    beliefs: list[np.ndarray] = field(repr=False, default_factory=list)
    z: float = 1.0

    def marginal(self, var_id: str) -> Distribution:
        i = self.tree.containing_clique(var_id)
        scope = self.tree.cliques[i]
        axis = scope.index(var_id)
        keep = self.beliefs[i]
        vec = keep.sum(axis=tuple(a for a in range(keep.ndim) if a != axis))
        total = float(vec.sum())
        if total <= _Z_FLOOR:
            raise InconsistentEvidence("calibrated belief sums to ~0")
        return Distribution(var_id, vec / total,
                            states=self.tree.net.variable(var_id).states)

    def separator_marginals(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Both sides' normalized marginals over the (i, j) separator."""
        sep = self.tree.separator(i, j)
        out = []
        for k in (i, j):
            scope = self.tree.cliques[k]
            axes = tuple(a for a, v in enumerate(scope) if v not in sep)
            m = self.beliefs[k].sum(axis=axes)
            out.append(m / m.sum())
        return out[0], out[1]


def build_junction_tree(net: BayesNet) -> JunctionTree:
    """Moralize, triangulate (min-fill), and assemble the clique tree."""
    family_scopes = [tuple(net.cpts[v].parents) + (v,) for v in net.order]
    var_ids = sorted(net.var_ids())
    order = minfill_order(family_scopes, var_ids)

    # simulate elimination on the moral graph to harvest cliques
    adj: dict[str, set[str]] = {v: set() for v in var_ids}
    for scope in family_scopes:
        for a in scope:
            for b in scope:
                if a != b:
                    adj[a].add(b)
    cliques: list[tuple[str, ...]] = []
    for v in order:
        clique = tuple(sorted(adj[v] | {v}))
        if not any(set(clique) <= set(c) for c in cliques):
            cliques.append(clique)
        nbrs = list(adj[v])
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)
        for a in nbrs:
            adj[a].discard(v)
        adj[v].clear()

    # maximum spanning tree over separator sizes (deterministic tie-breaks)
    n = len(cliques)
    edges: list[tuple[int, int]] = []
    if n > 1:
        candidates = []
        for i in range(n):
            for j in range(i + 1, n):
                w = len(set(cliques[i]) & set(cliques[j]))
                if w:
                    candidates.append((-w, i, j))
        candidates.sort()
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for _, i, j in candidates:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj
                edges.append((i, j))
        # a disconnected moral graph yields a forest; join arbitrarily so the
        # propagation sweep stays a single tree (empty separators are valid)
        for i in range(1, n):
            if find(i) != find(0):
                parent[find(i)] = find(0)
                edges.append((0, i))

    # assign each family to the first clique covering it
    potentials: list[np.ndarray] = []
    shapes = [tuple(net.card(v) for v in cl) for cl in cliques]
    pots = [np.ones(shape) for shape in shapes]
    for var_id in net.order:
        fam = set(net.cpts[var_id].parents) | {var_id}
        dest = next(i for i, cl in enumerate(cliques) if fam <= set(cl))
        cpt = net.cpts[var_id]
        scope = cpt.parents + (var_id,)
        arr = cpt.table.reshape(net.family_shape(var_id))
        pots[dest] = _multiply_into(pots[dest], cliques[dest], arr, scope)
    potentials = pots
    return JunctionTree(net, cliques, edges, potentials)


def _multiply_into(pot: np.ndarray, clique: tuple[str, ...],
                   arr: np.ndarray, scope: tuple[str, ...]) -> np.ndarray:
    shape = [1] * len(clique)
    perm = sorted(range(len(scope)), key=lambda k: clique.index(scope[k]))
    arr = np.transpose(arr, perm)
    spots = sorted(clique.index(v) for v in scope)
    for ax, size in zip(spots, arr.shape):
        shape[ax] = size
    return pot * arr.reshape(shape)


def propagate(jt: JunctionTree, evidence=None) -> CalibratedTree:
    """Two-pass Shafer-Shenoy calibration; returns beliefs and P(evidence)."""
    net = jt.net
    ev = Evidence.coerce(evidence).indices(net)
    pots = [p.copy() for p in jt.potentials]
    for var_id, idx in ev.items():
        i = jt.containing_clique(var_id)
        like = np.zeros(net.card(var_id))
        like[idx] = 1.0
        pots[i] = _multiply_into(pots[i], jt.cliques[i], like, (var_id,))

    n = len(jt.cliques)
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in jt.edges:
        adj[a].append(b)
        adj[b].append(a)
    for k in adj:
        adj[k].sort()

    # iterative post-order (collect) then pre-order (distribute) from root 0
    parent = {0: None}
    order = []
    stack = [0]
    while stack:
        x = stack.pop()
        order.append(x)
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                stack.append(y)
    messages: dict[tuple[int, int], tuple[tuple[str, ...], np.ndarray]] = {}

    def send(src: int, dst: int) -> None:
        sep = jt.separator(src, dst)
        group = [(jt.cliques[src], pots[src])]
        for nb in adj[src]:
            if nb != dst:
                group.append(messages[(nb, src)])
        scope, values = _contract(group, set(jt.cliques[src]) - set(sep),
                                  {}, out_scope=sep)
        total = values.sum()
        if total > 0:  # scale for numeric headroom; ratios are what matter
            messages[(src, dst)] = (scope, values)
        else:
            messages[(src, dst)] = (scope, values)

    for x in reversed(order):  # leaves towards root
        if parent[x] is not None:
            send(x, parent[x])
    for x in order:  # root towards leaves
        for y in adj[x]:
            if parent.get(y) == x:
                send(x, y)

    beliefs = []
    z = None
    for i in range(n):
        group = [(jt.cliques[i], pots[i])]
        for nb in adj[i]:
            group.append(messages[(nb, i)])
        scope, values = _contract(group, set(), {}, out_scope=jt.cliques[i])
        beliefs.append(values)
        if z is None:
            z = float(values.sum())
    if z is None or not np.isfinite(z) or z <= _Z_FLOOR:
        raise InconsistentEvidence(f"evidence has probability {z!r}")
    return CalibratedTree(jt, beliefs, z)
