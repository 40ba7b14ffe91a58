"""Exact inference: variable elimination over a factor representation.

The engine contracts factors with ``numpy.einsum`` using an ellipsis
prefix, so the same code path serves plain queries (no leading axis) and
the Monte-Carlo driver (factor values carrying a leading cycle axis).

CPTs synthesized by the metrics layer carry a max-combination structure;
those are rewritten into exact cascaded-max factor chains (auxiliary
5-state rank variables), which keeps the largest contraction tiny even
for nodes with many parents.  Brute-force enumeration and the junction
tree always use the dense tables, so the rewrite is cross-checked.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .bncore import BayesNet, Evidence
from .errors import InconsistentEvidence, UnknownVariable, ValidationError

PROB_TOL = 1e-9
_Z_FLOOR = 1e-300
N_RANKS = 5  # severity ranks 0..4 shared by all max-structured CPTs


@dataclass(frozen=True)
class Distribution:
    """Posterior probabilities of one variable's states."""

    variable: str
    probs: np.ndarray
    states: tuple[str, ...] = ()

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", p)
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValidationError(
                f"distribution over {self.variable!r} sums to {float(p.sum())!r}"
            )

    def __getitem__(self, state: str) -> float:
        from .bncore import canonical_state

        return float(self.probs[self.states.index(canonical_state(state))])

    def as_dict(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.states, self.probs)}


@dataclass(frozen=True)
class ConditionalTable:
    """P(target | given=g) for every state g of the conditioning variable."""

    target: str
    given: str
    given_states: tuple[str, ...]
    target_states: tuple[str, ...]
    rows: np.ndarray  # shape (|given|, |target|), each row normalized

    def row(self, given_state: str) -> Distribution:
        from .bncore import canonical_state

        idx = self.given_states.index(canonical_state(given_state))
        return Distribution(self.target, self.rows[idx], states=self.target_states)


# ---------------------------------------------------------------------------
# elimination ordering
# ---------------------------------------------------------------------------

def minfill_order(scopes: list[tuple[str, ...]], var_ids: list[str]) -> list[str]:
    """Greedy min-fill elimination order, ties broken by variable id."""
    idx = {v: i for i, v in enumerate(var_ids)}
    adj: list[set[int]] = [set() for _ in var_ids]
    for scope in scopes:
        ids = [idx[v] for v in scope]
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                adj[a].add(b)
                adj[b].add(a)

    def fill(v: int) -> int:
        nbrs = list(adj[v])
        missing = 0
        for i, a in enumerate(nbrs):
            aa = adj[a]
            for b in nbrs[i + 1:]:
                if b not in aa:
                    missing += 1
        return missing

    alive = set(range(len(var_ids)))
    fills = {v: fill(v) for v in alive}
    order: list[str] = []
    while alive:
        v = min(alive, key=lambda u: (fills[u], var_ids[u]))
        nbrs = list(adj[v])
        touched = set()
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b not in adj[a]:
                    adj[a].add(b)
                    adj[b].add(a)
                    touched.add(a)
                    touched.add(b)
        for a in nbrs:
            adj[a].discard(v)
            touched.add(a)
            touched.update(adj[a])
        adj[v].clear()
        alive.discard(v)
        order.append(var_ids[v])
        del fills[v]
        for u in touched & alive:
            fills[u] = fill(u)
    return order


# ---------------------------------------------------------------------------
# factor representation of a network
# ---------------------------------------------------------------------------

def _aux(child: str, i: int) -> str:
    return f"\x00max:{child}:{i}"


def _max_indicator(ranks_a: np.ndarray, ranks_b: np.ndarray) -> np.ndarray:
    """Indicator tensor: out[a, b, m] = 1 iff max(ranks_a[a], ranks_b[b]) == m."""
    m = np.maximum(ranks_a[:, None], ranks_b[None, :])
    out = np.zeros((len(ranks_a), len(ranks_b), N_RANKS))
    i, j = np.indices(m.shape)
    out[i, j, m] = 1.0
    return out


class FactorNet:
    """Rewritten factor view of a network, reusable across queries.

    ``pieces[var]`` lists (scope, values) factors whose product equals the
    variable's CPT; values may later be replaced (same shapes) by batched
    arrays from the Monte-Carlo synthesizer.
    """

    def __init__(self, net: BayesNet, decompose: bool = True):
        self.net = net
        self.cards: dict[str, int] = {v: net.card(v) for v in net.order}
        self.pieces: dict[str, list[tuple[tuple[str, ...], np.ndarray]]] = {}
        for var_id in net.order:
            self.pieces[var_id] = self._factorize(var_id, decompose)
        scopes = [s for ps in self.pieces.values() for s, _ in ps]
        self.global_order = minfill_order(scopes, sorted(self.cards))

    def _factorize(self, var_id, decompose):
        net = self.net
        cpt = net.cpts[var_id]
        st = cpt.structure or {}
        if decompose and st.get("rule") == "max":
            ranks = st["ranks"]
            active = [p for p in cpt.parents
                      if p in ranks and any(ranks[p])]
            gate = st.get("gate")
            g = np.asarray(st["g"], dtype=np.float64)
            if len(active) >= 3:
                return self._cascade(var_id, active, gate, ranks, g)
        shape = net.family_shape(var_id)
        return [(cpt.parents + (var_id,), cpt.table.reshape(shape))]

    def _cascade(self, child, active, gate, ranks, g):
        cards = self.cards
        rank_arrays = {p: np.asarray(ranks[p], dtype=np.intp) for p in active}
        factors = []
        prev = None
        for i in range(1, len(active)):
            aux = _aux(child, i)
            cards[aux] = N_RANKS
            if i == 1:
                a, b = active[0], active[1]
                factors.append(((a, b, aux),
                                _max_indicator(rank_arrays[a], rank_arrays[b])))
            else:
                b = active[i]
                factors.append(((prev, b, aux),
                                _max_indicator(np.arange(N_RANKS), rank_arrays[b])))
            prev = aux
        # terminal factor: child distribution given the accumulated max rank
        if gate is not None:
            factors.append(((prev, gate, child), g))  # g: (rank, gate, child)
        else:
            factors.append(((prev, child), g))  # g: (rank, child)
        return factors

    # -- queries -----------------------------------------------------------

    def relevant_factors(self, targets: set[str]):
        keep = self.net.ancestors(targets)
        out = []
        for var_id in self.net.order:
            if var_id in keep:
                out.extend(self.pieces[var_id])
        return out

    def posterior(self, query: str, evidence_idx: dict[str, int],
                  order_strategy: str = "minfill",
                  value_override=None) -> np.ndarray:
        """Unnormalized-then-normalized posterior vector for ``query``.

        ``value_override``: optional {var -> list of value arrays} replacing
        that variable's factor values (used by the Monte-Carlo driver with a
        leading batch axis; shapes otherwise identical).
        """
        net = self.net
        net.variable(query)
        if query in evidence_idx:
            raise ValidationError(f"query {query!r} also appears in evidence")
        targets = {query, *evidence_idx}
        keep = net.ancestors(targets)
        factors: list[tuple[tuple[str, ...], np.ndarray]] = []
        for var_id in net.order:
            if var_id not in keep:
                continue
            pieces = self.pieces[var_id]
            if value_override and var_id in value_override:
                pieces = [(s, v) for (s, _), v in
                          zip(pieces, value_override[var_id])]
            factors.extend(pieces)

        # slice out evidence (a scope may contain several evidence vars)
        sliced = []
        for scope, values in factors:
            while True:
                hit = next((p for p, v in enumerate(scope) if v in evidence_idx), None)
                if hit is None:
                    break
                axis = values.ndim - len(scope) + hit
                values = np.take(values, evidence_idx[scope[hit]], axis=axis)
                scope = scope[:hit] + scope[hit + 1:]
            sliced.append((scope, values))
        factors = sliced

        if order_strategy == "minfill":
            base_order = self.global_order
        elif order_strategy in ("topological", "reverse_topo"):
            base_order = list(reversed(self.net.order)) + [
                v for v in self.global_order if v.startswith("\x00")]
        else:
            raise ValidationError(f"unknown order strategy {order_strategy!r}")
        active_vars = {v for scope, _ in factors for v in scope}
        elim = [v for v in base_order
                if v in active_vars and v != query]

        for v in elim:
            group = [f for f in factors if v in f[0]]
            factors = [f for f in factors if v not in f[0]]
            factors.append(_contract(group, {v}, self.cards))
        vec = _contract(factors, set(), self.cards, out_scope=(query,))[1]
        z = vec.sum(axis=-1)
        if np.any(~np.isfinite(z)) or np.any(z <= _Z_FLOOR):
            raise InconsistentEvidence(
                f"evidence has probability ~0 (normalizer {np.min(z)!r})")
        return vec / z[..., None]


def _contract(group, sum_vars: set[str], cards: dict[str, int],
              out_scope: tuple[str, ...] | None = None):
    """einsum-contract factors, summing out ``sum_vars``."""
    letters = string.ascii_letters
    var_letter: dict[str, str] = {}
    for scope, _ in group:
        for v in scope:
            if v not in var_letter:
                var_letter[v] = letters[len(var_letter)]
    if out_scope is None:
        out_vars = sorted(set(var_letter) - sum_vars)
    else:
        out_vars = [v for v in out_scope if v in var_letter]
        missing = [v for v in out_scope if v not in var_letter]
    subs = ",".join("..." + "".join(var_letter[v] for v in scope)
                    for scope, _ in group)
    out_sub = "..." + "".join(var_letter[v] for v in out_vars)
    values = _broadcast_batch([vals for _, vals in group],
                              [len(s) for s, _ in group])
    result = np.einsum(f"{subs}->{out_sub}", *values, optimize=True)
    if out_scope is not None and missing:
        # query variable untouched by any factor: uniform over its states
        for v in out_scope:
            if v in missing:
                k = cards[v]
                result = np.multiply.outer(result, np.full(k, 1.0 / k))
        out_vars = list(out_scope)
    return tuple(out_vars), result


def _broadcast_batch(values: list[np.ndarray], ranks: list[int]):
    """Align leading (batch) dims so einsum ellipses broadcast cleanly."""
    lead = [v.ndim - r for v, r in zip(values, ranks)]
    m = max(lead, default=0)
    if m == 0 or all(l == m for l in lead):
        return values
    out = []
    for v, r, l in zip(values, ranks, lead):
        if l < m:
            v = v.reshape((1,) * (m - l) + v.shape)
        out.append(v)
    return out


def _engine(net: BayesNet, decompose: bool = True) -> FactorNet:
    key = "_factor_net" if decompose else "_factor_net_dense"
    eng = getattr(net, key, None)
    if eng is None:
        eng = FactorNet(net, decompose=decompose)
        setattr(net, key, eng)
    return eng


# ---------------------------------------------------------------------------
# public query API
# ---------------------------------------------------------------------------

def eliminate(net: BayesNet, query: str, evidence=None,
              order_strategy: str = "minfill") -> Distribution:
    """Exact posterior of ``query`` given ``evidence`` (variable elimination)."""
    ev = Evidence.coerce(evidence).indices(net)
    eng = _engine(net, decompose=order_strategy == "minfill")
    vec = eng.posterior(query, ev, order_strategy=order_strategy)
    return Distribution(query, vec, states=net.variable(query).states)


def evidence_probability(net: BayesNet, evidence) -> float:
    """P(evidence) under the model."""
    ev = Evidence.coerce(evidence).indices(net)
    if not ev:
        return 1.0
    eng = _engine(net)
    # slice evidence in, then eliminate every remaining relevant variable;
    # the product of the leftover scalars is P(e)
    keep = net.ancestors(set(ev))
    factors = []
    for var_id in net.order:
        if var_id in keep:
            factors.extend(eng.pieces[var_id])
    sliced = []
    for scope, values in factors:
        while True:
            hit = next((p for p, v in enumerate(scope) if v in ev), None)
            if hit is None:
                break
            axis = values.ndim - len(scope) + hit
            values = np.take(values, ev[scope[hit]], axis=axis)
            scope = scope[:hit] + scope[hit + 1:]
        sliced.append((scope, values))
    factors = sliced
    active = {v for scope, _ in factors for v in scope}
    for v in (u for u in eng.global_order if u in active):
        group = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        factors.append(_contract(group, {v}, eng.cards))
    z = 1.0
    for _, values in factors:
        z *= float(np.asarray(values).sum())
    return z


def conditional_table(net: BayesNet, target: str, given: str) -> ConditionalTable:
    """P(target | given=g) for each state g, by repeated evidence-setting."""
    if target == given:
        raise ValidationError("target and given must differ")
    tvar = net.variable(target)
    gvar = net.variable(given)
    rows = np.empty((gvar.card, tvar.card))
    for i, state in enumerate(gvar.states):
        rows[i] = eliminate(net, target, {given: state}).probs
    return ConditionalTable(target, given, gvar.states, tvar.states, rows)
