"""Discrete Bayesian-network data model.

Variables with ordered state spaces, one CPT per variable (row-major over
the declared parent order), DAG validation, and a brute-force
joint-enumeration oracle used to cross-check the inference engines.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArityMismatch,
    CycleDetected,
    InconsistentEvidence,
    MissingCpt,
    RowNotNormalized,
    StateSpaceTooLarge,
    UnknownState,
    UnknownVariable,
    ValidationError,
)

ROW_SUM_TOL = 1e-9
DEFAULT_ENUM_CAP = 10**8

# Case-insensitive aliases for the state codes used throughout the models.
_CANONICAL_STATES = {
    "n": "none", "none": "none",
    "l": "low", "low": "low",
    "m": "med", "med": "med", "medium": "med",
    "h": "high", "high": "high",
    "c": "cri", "cri": "cri", "critical": "cri",
    "t": "true", "true": "true",
    "f": "false", "false": "false",
}


def canonical_state(label: str) -> str:
    """Canonical form of a state label (case-insensitive)."""
    key = str(label).strip().lower()
    return _CANONICAL_STATES.get(key, key)


@dataclass(frozen=True)
class Variable:
    """A discrete variable: unique id, display name, ordered state labels."""

    id: str
    states: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        states = tuple(canonical_state(s) for s in self.states)
        object.__setattr__(self, "states", states)
        if not self.name:
            object.__setattr__(self, "name", self.id)
        if len(states) < 2:
            raise ValidationError(f"variable {self.id!r} needs >=2 states")
        if len(set(states)) != len(states):
            raise ValidationError(f"variable {self.id!r} has duplicate states")

    @property
    def card(self) -> int:
        return len(self.states)

    def index_of(self, state: str) -> int:
        try:
            return self.states.index(canonical_state(state))
        except ValueError:
            raise UnknownState(
                f"state {state!r} not in {self.id!r} (states: {list(self.states)})"
            ) from None


class Cpt:
    """Conditional probability table for one child variable.

    ``table`` has one row per joint parent-state combination, enumerated in
    row-major order of the declared parent order (first parent slowest),
    and one column per child state.  Rows within ``ROW_SUM_TOL`` of 1 are
    renormalized silently; anything worse is rejected.
    """

    __slots__ = ("child", "parents", "table", "structure")

    def __init__(self, child: str, parents: list[str] | tuple[str, ...],
                 table, structure: dict | None = None):
        self.child = child
        self.parents = tuple(parents)
        arr = np.asarray(table, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.table = arr
        # Optional synthesis metadata (e.g. a max-combination rule) that the
        # inference engine may exploit; never serialized, never required.
        self.structure = structure

    def validated(self, variables: dict[str, Variable]) -> "Cpt":
        if self.child not in variables:
            raise UnknownVariable(self.child)
        for p in self.parents:
            if p not in variables:
                raise UnknownVariable(p)
        n_rows = 1
        for p in self.parents:
            n_rows *= variables[p].card
        card = variables[self.child].card
        if self.table.shape != (n_rows, card):
            raise ArityMismatch(
                f"CPT of {self.child!r}: shape {self.table.shape}, "
                f"expected ({n_rows}, {card})"
            )
        if np.any(self.table < -1e-12) or np.any(self.table > 1 + 1e-12):
            raise ValidationError(f"CPT of {self.child!r} has entries outside [0,1]")
        table = np.clip(self.table, 0.0, 1.0)
        sums = table.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
        if bad.size:
            row = int(bad[0])
            raise RowNotNormalized(self.child, row, float(sums[row]))
        table = table / sums[:, None]
        table.flags.writeable = False
        return Cpt(self.child, self.parents, table, self.structure)


@dataclass
class Evidence:
    """Observed states, keyed by variable id."""

    assignments: dict[str, str] = field(default_factory=dict)

    @classmethod
    def coerce(cls, value) -> "Evidence":
        if value is None:
            return cls({})
        if isinstance(value, Evidence):
            return value
        return cls(dict(value))

    def indices(self, net: "BayesNet") -> dict[str, int]:
        """Validated {variable id -> state index} mapping."""
        out = {}
        for var_id, state in self.assignments.items():
            var = net.variable(var_id)
            out[var_id] = var.index_of(state)
        return out

    def __bool__(self) -> bool:
        return bool(self.assignments)


class BayesNet:
    """A validated discrete Bayesian network (immutable after build)."""

    def __init__(self, variables: list[Variable], cpts: list[Cpt], name: str = ""):
        self.name = name
        self._vars: dict[str, Variable] = {}
        for v in variables:
            if v.id in self._vars:
                raise ValidationError(f"duplicate variable id {v.id!r}")
            self._vars[v.id] = v
        self.cpts: dict[str, Cpt] = {}
        for cpt in cpts:
            if cpt.child in self.cpts:
                raise ValidationError(f"multiple CPTs for {cpt.child!r}")
            self.cpts[cpt.child] = cpt.validated(self._vars)
        missing = sorted(set(self._vars) - set(self.cpts))
        if missing:
            raise MissingCpt(f"no CPT for: {', '.join(missing)}")
        self.order: tuple[str, ...] = tuple(self._toposort())

    # -- structure ---------------------------------------------------------

    def _toposort(self) -> list[str]:
        indeg = {v: len(self.cpts[v].parents) for v in self._vars}
        children: dict[str, list[str]] = {v: [] for v in self._vars}
        for cpt in self.cpts.values():
            for p in cpt.parents:
                children[p].append(cpt.child)
        ready = sorted(v for v, d in indeg.items() if d == 0)
        out: list[str] = []
        while ready:
            v = ready.pop(0)
            out.append(v)
            changed = False
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    changed = True
            if changed:
                ready.sort()
        if len(out) != len(self._vars):
            cyclic = sorted(v for v, d in indeg.items() if d > 0)
            raise CycleDetected(f"cycle through: {', '.join(cyclic)}")
        return out

    def variable(self, var_id: str) -> Variable:
        try:
            return self._vars[var_id]
        except KeyError:
            raise UnknownVariable(var_id) from None

    @property
    def variables(self) -> list[Variable]:
        return list(self._vars.values())

    def var_ids(self) -> list[str]:
        return list(self._vars)

    def card(self, var_id: str) -> int:
        return self.variable(var_id).card

    def parents(self, var_id: str) -> tuple[str, ...]:
        self.variable(var_id)
        return self.cpts[var_id].parents

    def ancestors(self, var_ids) -> set[str]:
        """The given variables plus all of their ancestors."""
        seen: set[str] = set()
        stack = list(var_ids)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self.cpts[v].parents)
        return seen

    def family_shape(self, var_id: str) -> tuple[int, ...]:
        cpt = self.cpts[var_id]
        return tuple(self.card(p) for p in cpt.parents) + (self.card(var_id),)


def build_network(variables, cpts, name: str = "") -> BayesNet:
    """Validate and assemble a network; raises on any structural defect."""
    if not variables or not cpts:
        raise ValidationError("variables and cpts must be non-empty")
    return BayesNet(list(variables), list(cpts), name=name)


def topological_order(net: BayesNet) -> list[str]:
    """Parents before children; ties broken by variable id."""
    return list(net.order)


def joint_enumerate(net: BayesNet, query: str, evidence=None,
                    cap: int = DEFAULT_ENUM_CAP):
    """Exact marginal/conditional by materializing the full factored joint.

    Deliberately brute force: this is the oracle the elimination and
    junction-tree engines are tested against, so it shares no code with
    them.  Raises StateSpaceTooLarge when the joint exceeds ``cap`` entries.
    """
    from .inference import Distribution  # local import to avoid a cycle

    qvar = net.variable(query)
    ev = Evidence.coerce(evidence).indices(net)
    if query in ev:
        raise ValidationError(f"query {query!r} also appears in evidence")

    order = list(net.order)
    cards = [net.card(v) for v in order]
    total = 1
    for c in cards:
        total *= c
        if total > cap:
            raise StateSpaceTooLarge(
                f"joint has > {cap} entries ({'x'.join(map(str, cards))})"
            )
    axis_of = {v: i for i, v in enumerate(order)}

    joint = np.ones(cards, dtype=np.float64)
    for var_id in order:
        cpt = net.cpts[var_id]
        fam = list(cpt.parents) + [var_id]
        fam_shape = net.family_shape(var_id)
        arr = cpt.table.reshape(fam_shape)
        # Broadcast the family table across the full joint.
        shape = [1] * len(order)
        src = list(range(len(fam)))
        dst_axes = sorted(axis_of[v] for v in fam)
        perm = np.argsort([axis_of[v] for v in fam])
        arr = np.transpose(arr, perm)
        for ax, v in zip(dst_axes, src):
            shape[ax] = arr.shape[v]
        joint = joint * arr.reshape(shape)

    index: list = [slice(None)] * len(order)
    for var_id, state_idx in ev.items():
        index[axis_of[var_id]] = state_idx
    sub = joint[tuple(index)]
    keep_axis = axis_of[query] - sum(1 for v in ev if axis_of[v] < axis_of[query])
    sum_axes = tuple(i for i in range(sub.ndim) if i != keep_axis)
    vec = sub.sum(axis=sum_axes)
    z = float(vec.sum())
    if not np.isfinite(z) or z <= 1e-300:
        raise InconsistentEvidence(f"evidence has probability {z!r}")
    return Distribution(query, vec / z, states=qvar.states)


def joint_probability(net: BayesNet, assignment: dict[str, str]) -> float:
    """Probability of one full or partial assignment, by direct enumeration."""
    ev = Evidence.coerce(assignment).indices(net)
    order = list(net.order)
    free = [v for v in order if v not in ev]
    total = 1
    for v in free:
        total *= net.card(v)
        if total > DEFAULT_ENUM_CAP:
            raise StateSpaceTooLarge("too many free variables")
    prob = 0.0
    for combo in itertools.product(*(range(net.card(v)) for v in free)):
        full = dict(ev)
        full.update(zip(free, combo))
        p = 1.0
        for var_id in order:
            cpt = net.cpts[var_id]
            row = 0
            for parent in cpt.parents:
                row = row * net.card(parent) + full[parent]
            p *= cpt.table[row, full[var_id]]
        prob += p
    return prob
