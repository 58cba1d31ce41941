"""Collision-expansion hierarchy: collapse maps, expansion trees, and the
iterated-collision experiments built on them.

A *collapse map* records which earlier particle each new collision partner
merges into while unwinding the solution into iterated collision integrals:
level ``j`` (for ``j = 2..k+1``) collides slot ``j`` into slot ``mu(j) < j``.
Each map owns a strictly binary expansion tree (node 1 is the single unary
top node), and its integrand ``J_mu`` can be evaluated two independent ways:

* :func:`expand_tree` — recursion over the tree in the twisted form
  ``U(-t_j) Qt(U(t_j) left, U(t_j) right)`` per node;
* :func:`eval_J_direct` — a flat sweep over live slots, merging level by
  level and free-propagating the survivors between levels.

Both use the plain bilinear collision operator ``Qt = gain - loss``
(:func:`boltzkit.collision.q_full` with ``conserve=False``) so that every
term of the expansion shares one operator with the time stepper run in
``conserve=False, dealias=False`` mode.

Maps split into *echelon classes* under adjacent-level exchanges: swapping
levels ``j, j+1`` is allowed when the two collision events touch disjoint
slot pairs (``mu(j+1) < j`` and ``mu(j+1) != mu(j)``), and conjugating the
map by the transposition gives another map with the same integral.  Each
class carries one nondecreasing representative, and the per-member time
permutations let the member integrals be rewritten as one integral of the
representative's integrand over a union of permuted simplices — the
time-domain union sampled by :func:`time_domain_sample`.

The experiment layer closes the loop with the solver: depth-``k``
reconstruction of ``f(t1) - U(t1) f(0)`` (:func:`duhamel_reconstruction`),
the class-merging integral identity (:func:`boardgame_identity_report`),
and the contraction/decay demonstration (:func:`contraction_demo`).

The permutation identities behind the class merging hold for exchangeable
(identical) leaves; with per-slot leaves the evaluators are still exact and
multilinear, which is what the cross-evaluator equivalence checks use.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalRangeError, RangeError
from .spectral_core import (
    NormSpec,
    PhaseField,
    Trajectory,
    l2_norm,
    norm,
    propagate,
    transform,
)
from .collision import CollisionKernelSpec, q_full
from .solver import SolverConfig, band_limited_random, solve

__all__ = [
    "CollapseMap",
    "DuhamelLeaf",
    "DuhamelNode",
    "DuhamelTree",
    "EchelonClass",
    "SlotState",
    "apply_time_permutation",
    "boardgame_identity_report",
    "build_duhamel_tree",
    "class_table_csv",
    "contraction_demo",
    "duhamel_reconstruction",
    "echelon_reduce",
    "enumerate_collapse_maps",
    "eval_J_direct",
    "expand_tree",
    "iterate_bound",
    "km_classes",
    "simplex_quadrature",
    "time_domain_sample",
    "tree_to_string",
]


MAX_DEPTH = 8

# Catalan numbers C_0..C_8; the class count at depth k is C_k.
_CATALAN = (1, 1, 2, 5, 14, 42, 132, 429, 1430)


# ---------------------------------------------------------------------------
# Collapse maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollapseMap:
    """The merge targets ``(mu(2), ..., mu(k+1))`` of a depth-``k`` expansion.

    Level ``j`` merges slot ``j`` into slot ``mu(j)``, so ``mu(2) = 1`` and
    ``1 <= mu(j) < j`` throughout.
    """

    values: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        k = len(vals)
        if k < 1:
            raise ConfigurationError("a collapse map needs at least one level")
        for pos, v in enumerate(vals):
            j = pos + 2
            if not 1 <= v < j:
                raise ConfigurationError(
                    f"collapse target at level {j} must lie in [1, {j - 1}], got {v}"
                )

    @property
    def k(self) -> int:
        return len(self.values)

    def mu(self, j: int) -> int:
        """Merge target of level ``j`` for ``j in [2, k+1]``."""
        if not 2 <= j <= self.k + 1:
            raise ConfigurationError(
                f"level must lie in [2, {self.k + 1}], got {j}"
            )
        return self.values[j - 2]

    @property
    def is_nondecreasing(self) -> bool:
        return all(a <= b for a, b in zip(self.values, self.values[1:]))

    def lex_index(self) -> int:
        """Position of this map in the lexicographic enumeration at its depth."""
        idx = 0
        for pos, v in enumerate(self.values):
            # levels to the right of position pos have (pos+2), (pos+3), ...
            # choices each; the mixed-radix weight is their product
            weight = 1
            for later in range(pos + 1, self.k):
                weight *= later + 1
            idx += (v - 1) * weight
        return idx

    def __str__(self) -> str:
        return "(" + ",".join(str(v) for v in self.values) + ")"


def enumerate_collapse_maps(k: int) -> tuple[CollapseMap, ...]:
    """All ``k!`` collapse maps of depth ``k`` in lexicographic order."""
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ConfigurationError(f"depth must be an integer, got {k!r}")
    if not 1 <= k <= MAX_DEPTH:
        raise RangeError(f"depth must lie in [1, {MAX_DEPTH}], got {k}")
    ranges = [range(1, j) for j in range(2, k + 2)]
    return tuple(CollapseMap(vals) for vals in itertools.product(*ranges))


# ---------------------------------------------------------------------------
# Expansion trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DuhamelLeaf:
    """Leaf carrying the input field of slot ``slot``."""

    slot: int


@dataclass(frozen=True)
class DuhamelNode:
    """Binary collision node at expansion level ``level``."""

    level: int
    left: "DuhamelNode | DuhamelLeaf"
    right: "DuhamelNode | DuhamelLeaf"


@dataclass(frozen=True)
class DuhamelTree:
    """Expansion tree of one collapse map.

    ``root`` is the level-2 node; level 1 is the implicit unary top node
    (pure propagation to the observation time), rendered as ``D1(...)``.
    """

    cmap: CollapseMap
    root: DuhamelNode


def build_duhamel_tree(cmap: CollapseMap) -> DuhamelTree:
    """Build the strictly binary expansion tree of a collapse map.

    Node ``j``'s left child continues the track of slot ``mu(j)``: it is the
    next level that merges into ``mu(j)`` again, or the leaf ``F_{mu(j)}`` if
    none does.  The right child continues the track of slot ``j``: the next
    level merging into ``j``, or the leaf ``F_j``.
    """
    k = cmap.k

    def build(j: int) -> DuhamelNode:
        tgt = cmap.mu(j)
        l = next((m for m in range(j + 1, k + 2) if cmap.mu(m) == tgt), None)
        r = next((m for m in range(j + 1, k + 2) if cmap.mu(m) == j), None)
        left = build(l) if l is not None else DuhamelLeaf(tgt)
        right = build(r) if r is not None else DuhamelLeaf(j)
        return DuhamelNode(j, left, right)

    return DuhamelTree(cmap, build(2))


def tree_to_string(tree: DuhamelTree) -> str:
    """Canonical string form, e.g. ``D1(D2(F1,F2))`` at depth 1."""

    def render(node) -> str:
        if isinstance(node, DuhamelLeaf):
            return f"F{node.slot}"
        return f"D{node.level}({render(node.left)},{render(node.right)})"

    return f"D1({render(tree.root)})"


# ---------------------------------------------------------------------------
# Evaluators
# ---------------------------------------------------------------------------


@dataclass
class SlotState:
    """Live slots of a sequential expansion evaluation.

    ``slots`` maps slot index to its current field; ``active`` lists the
    surviving slot indices in ascending order.
    """

    slots: dict[int, PhaseField]
    active: list[int] = field(default_factory=list)


def _prop(fld: PhaseField, t: float) -> PhaseField:
    """Free transport, skipping the transform round-trip when ``t == 0``."""
    return fld if t == 0.0 else propagate(fld, t)


def _q_tilde(fa: PhaseField, fb: PhaseField, kernel: CollisionKernelSpec) -> PhaseField:
    """The expansion's bilinear merge: plain gain - loss, no projection."""
    return q_full(fa, fb, kernel, conserve=False, route="bobylev")


def _check_node(fld: PhaseField, level: int) -> PhaseField:
    if not np.all(np.isfinite(fld.data)):
        raise NumericalRangeError(
            f"non-finite field after the collision at node {level}",
            node_index=level,
        )
    return fld


def _coerce_times(times, length: int, what: str) -> tuple[float, ...]:
    try:
        ts = tuple(float(t) for t in times)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{what} must be a sequence of reals") from exc
    if len(ts) != length:
        raise ConfigurationError(
            f"{what} must have length {length}, got {len(ts)}"
        )
    if not all(math.isfinite(t) for t in ts):
        raise ConfigurationError(f"{what} must be finite")
    return ts


def _coerce_leaves(f_leaf, leaves, k: int) -> list[PhaseField]:
    """Per-slot leaf fields (slots 1..k+1), all transformed to ``XV``."""
    if leaves is None:
        if not isinstance(f_leaf, PhaseField):
            raise ConfigurationError("the leaf input must be a PhaseField")
        lv = [f_leaf] * (k + 1)
    else:
        lv = list(leaves)
        if len(lv) != k + 1:
            raise ConfigurationError(
                f"leaves must supply one field per slot ({k + 1}), got {len(lv)}"
            )
    grid = lv[0].grid if isinstance(lv[0], PhaseField) else None
    out = []
    for fld in lv:
        if not isinstance(fld, PhaseField) or fld.grid != grid:
            raise ConfigurationError("all leaves must be fields on one grid")
        out.append(transform(fld, "XV"))
    return out


def expand_tree(
    tree: DuhamelTree,
    f_leaf: PhaseField,
    times,
    kernel: CollisionKernelSpec,
    *,
    leaves=None,
) -> PhaseField:
    """Evaluate the tree's integrand at ``times = (t1, ..., t_{k+1})``.

    Leaves enter as ``U(-t_{k+1})`` of the leaf field, node ``j`` applies
    ``U(-t_j) Qt(U(t_j) left, U(t_j) right)``, and the unary top node applies
    ``U(t1)``.  With ``leaves`` given (one field per slot, overriding
    ``f_leaf``), the evaluation is multilinear in the per-slot inputs.
    Ordinary use keeps the times in the closed simplex
    ``t1 >= ... >= t_{k+1} >= 0``; any finite times are accepted, which the
    permuted-domain identities rely on.  A non-finite intermediate raises
    :class:`NumericalRangeError` carrying the node index.
    """
    k = tree.cmap.k
    ts = _coerce_times(times, k + 1, "times")
    lv = _coerce_leaves(f_leaf, leaves, k)
    if kernel is None or kernel.d != lv[0].grid.d:
        raise ConfigurationError("kernel must match the leaf grid dimension")
    t_last = ts[k]

    def value(node) -> PhaseField:
        if isinstance(node, DuhamelLeaf):
            return _prop(lv[node.slot - 1], -t_last)
        lval = value(node.left)
        rval = value(node.right)
        tj = ts[node.level - 1]
        merged = _q_tilde(_prop(lval, tj), _prop(rval, tj), kernel)
        _check_node(merged, node.level)
        return _prop(merged, -tj)

    return _prop(value(tree.root), ts[0])


def eval_J_direct(
    mu: CollapseMap,
    f: PhaseField,
    t1: float,
    times,
    kernel: CollisionKernelSpec,
    *,
    leaves=None,
) -> PhaseField:
    """Evaluate the integrand of ``mu`` by a flat slot sweep.

    Slots ``1..k+1`` start as the raw leaf fields.  Sweeping ``j`` from
    ``k+1`` down to ``2``: merge slot ``j`` into slot ``mu(j)`` with the
    plain bilinear collision operator, then free-propagate every surviving
    slot by ``t_{j-1} - t_j``.  Slot 1 is the result.  This is the
    independent cross-check of :func:`expand_tree` (the two agree to
    rounding for every map and any per-slot leaves).
    """
    k = mu.k
    ts = (float(t1),) + _coerce_times(times, k, "times")
    if not math.isfinite(ts[0]):
        raise ConfigurationError("t1 must be finite")
    lv = _coerce_leaves(f, leaves, k)
    if kernel is None or kernel.d != lv[0].grid.d:
        raise ConfigurationError("kernel must match the leaf grid dimension")
    state = SlotState(
        slots={i: lv[i - 1] for i in range(1, k + 2)},
        active=list(range(1, k + 2)),
    )
    for j in range(k + 1, 1, -1):
        tgt = mu.mu(j)
        merged = _q_tilde(state.slots[tgt], state.slots[j], kernel)
        _check_node(merged, j)
        state.slots[tgt] = merged
        del state.slots[j]
        state.active.remove(j)
        gap = ts[j - 2] - ts[j - 1]
        if gap != 0.0:
            for i in state.active:
                state.slots[i] = propagate(state.slots[i], gap)
    return state.slots[1]


# ---------------------------------------------------------------------------
# Echelon classes
# ---------------------------------------------------------------------------


def apply_time_permutation(perm: tuple[int, ...], times) -> tuple[float, ...]:
    """Apply a stored time permutation: result ``i`` takes ``times[perm[i]]``."""
    ts = tuple(times)
    if len(perm) != len(ts):
        raise ConfigurationError("permutation and times lengths differ")
    return tuple(ts[p] for p in perm)


def _identity_perm(k: int) -> tuple[int, ...]:
    return tuple(range(k))


def _invert_perm(perm: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def _compose_perm(outer: tuple[int, ...], inner: tuple[int, ...]) -> tuple[int, ...]:
    """Table of ``s -> outer-permute(inner-permute(s))``."""
    return tuple(inner[o] for o in outer)


def _swap_perm(k: int, pos: int) -> tuple[int, ...]:
    """Transposition of positions ``pos, pos+1`` in a length-``k`` time vector."""
    table = list(range(k))
    table[pos], table[pos + 1] = table[pos + 1], table[pos]
    return tuple(table)


def _km_neighbors(cmap: CollapseMap):
    """Adjacent-level exchange moves from ``cmap``.

    Swapping levels ``j, j+1`` requires the two collision events to touch
    disjoint slot pairs: ``mu(j+1) < j`` (so the later event does not consume
    the earlier one's product) and ``mu(j+1) != mu(j)``.  The new map is the
    conjugation of ``cmap`` by the transposition of ``j`` and ``j+1``, and the
    integrands satisfy ``J_new(times) = J_old(swapped times)`` for identical
    leaves.  Yields ``(neighbor, j)`` pairs.
    """
    k = cmap.k
    out = []
    for j in range(3, k + 1):
        if cmap.mu(j + 1) >= j or cmap.mu(j + 1) == cmap.mu(j):
            continue
        vals = []
        for m in range(2, k + 2):
            src = j + 1 if m == j else (j if m == j + 1 else m)
            v = cmap.mu(src)
            v = j + 1 if v == j else (j if v == j + 1 else v)
            vals.append(v)
        out.append((CollapseMap(tuple(vals)), j))
    return out


def _orbit_with_perms(start: CollapseMap) -> dict[CollapseMap, tuple[int, ...]]:
    """BFS orbit of ``start`` under exchange moves.

    Returns ``{member: perm}`` with ``J_start(s) = J_member(perm applied to s)``
    for identical leaves.
    """
    k = start.k
    seen = {start: _identity_perm(k)}
    queue = [start]
    while queue:
        cur = queue.pop(0)
        pi = seen[cur]
        for nbr, j in _km_neighbors(cur):
            if nbr in seen:
                continue
            # J_cur(u) = J_nbr(tau u) with tau swapping positions j-2, j-1,
            # so J_start(s) = J_cur(pi s) = J_nbr(tau (pi s)).
            seen[nbr] = _compose_perm(_swap_perm(k, j - 2), pi)
            queue.append(nbr)
    return seen


@dataclass(frozen=True)
class EchelonClass:
    """One exchange-equivalence class of collapse maps.

    ``time_permutations[i]`` relates member ``i`` to the representative:
    ``J_member(s) = J_representative(apply_time_permutation(perm, s))`` for
    identical leaves, so the member's simplex integral equals the
    representative's integral over the permuted simplex image.
    """

    representative: CollapseMap
    members: tuple[CollapseMap, ...]
    time_permutations: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.members)


def _class_from_orbit(orbit: dict[CollapseMap, tuple[int, ...]]) -> EchelonClass:
    nondec = [m for m in orbit if m.is_nondecreasing]
    if len(nondec) != 1:
        raise RuntimeError(
            "exchange orbit does not contain exactly one nondecreasing map: "
            + ", ".join(str(m) for m in sorted(orbit, key=lambda c: c.values))
        )
    canon = nondec[0]
    pi_canon = orbit[canon]
    members = sorted(orbit, key=lambda c: c.values)
    perms = []
    for m in members:
        # J_m(u) = J_start(inv(pi_m) u) = J_canon(pi_canon inv(pi_m) u)
        perms.append(_compose_perm(pi_canon, _invert_perm(orbit[m])))
    return EchelonClass(canon, tuple(members), tuple(perms))


def echelon_reduce(mu: CollapseMap) -> tuple[CollapseMap, tuple[int, ...]]:
    """Canonical (nondecreasing) representative of ``mu``'s class, plus the
    time permutation with ``J_mu(s) = J_canonical(permuted s)``.

    Idempotent: a nondecreasing map returns itself with the identity.
    """
    if not isinstance(mu, CollapseMap):
        raise ConfigurationError("echelon_reduce expects a CollapseMap")
    cls = _class_from_orbit(_orbit_with_perms(mu))
    idx = cls.members.index(mu)
    return cls.representative, cls.time_permutations[idx]


def km_classes(k: int) -> tuple[EchelonClass, ...]:
    """All exchange classes at depth ``k``, sorted by representative.

    The class count is the ``k``-th Catalan number; every class holds exactly
    one nondecreasing member (enforced internally).
    """
    maps = enumerate_collapse_maps(k)  # validates k
    seen: set[CollapseMap] = set()
    classes = []
    for m in maps:
        if m in seen:
            continue
        orbit = _orbit_with_perms(m)
        seen.update(orbit)
        classes.append(_class_from_orbit(orbit))
    classes.sort(key=lambda c: c.representative.values)
    return tuple(classes)


def class_table_csv(k: int) -> str:
    """RFC-4180 CSV table of the classes: ``k, canonical_map, class_size``."""
    classes = km_classes(k)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["k", "canonical_map", "class_size"])
    for cls in classes:
        writer.writerow([k, str(cls.representative), cls.size])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Time-domain unions and the iterate bound
# ---------------------------------------------------------------------------


def time_domain_sample(cls: EchelonClass, t1: float, n_points: int, seed) -> dict:
    """Monte-Carlo sample of the class's merged time domain.

    The domain is the union over members of the permuted images of the
    descending simplex ``{t1 >= s_2 >= ... >= s_{k+1} >= 0}`` inside the cube
    ``[0, t1]^k``.  Returns the sample points, per-point membership counts,
    the union volume estimate with its one-sigma error, the sum of member
    simplex volumes, and the fraction of points covered more than once
    (zero when the member images are disjoint up to boundaries).
    """
    if not isinstance(cls, EchelonClass):
        raise ConfigurationError("time_domain_sample expects an EchelonClass")
    if not (float(t1) > 0.0):
        raise ConfigurationError(f"t1 must be positive, got {t1}")
    if int(n_points) != n_points or n_points < 1000:
        raise ConfigurationError(
            f"n_points must be an integer >= 1000, got {n_points}"
        )
    t1 = float(t1)
    n_points = int(n_points)
    k = cls.representative.k
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, t1, size=(n_points, k))
    counts = np.zeros(n_points, dtype=np.int64)
    for perm in cls.time_permutations:
        # s lies in the member's image iff the inverse-permuted coordinates
        # descend (i.e. land back inside the canonical simplex)
        mapped = pts[:, list(_invert_perm(perm))]
        inside = np.all(mapped[:, :-1] >= mapped[:, 1:], axis=1)
        counts += inside
    covered = counts > 0
    cube = t1**k
    volume = cube * float(np.mean(covered))
    sigma = cube * float(np.std(covered)) / math.sqrt(n_points)
    return {
        "k": k,
        "t1": t1,
        "n_points": n_points,
        "points": pts,
        "member_counts": counts,
        "volume": volume,
        "sigma": sigma,
        "member_volume_sum": cls.size * cube / math.factorial(k),
        "overlap_fraction": float(np.mean(counts >= 2)),
    }


def iterate_bound(k: int, T: float, C: float, C0: float) -> float:
    """The depth-``k`` a-priori factor ``(4 C C0 sqrt(T))^k``."""
    if int(k) != k or k < 0:
        raise ConfigurationError(f"depth must be a nonnegative integer, got {k}")
    if not (T >= 0.0):
        raise ConfigurationError(f"horizon must be nonnegative, got {T}")
    if not (C >= 0.0 and C0 >= 0.0):
        raise ConfigurationError("constants C and C0 must be nonnegative")
    return float((4.0 * C * C0 * math.sqrt(T)) ** int(k))


# ---------------------------------------------------------------------------
# Simplex quadrature and trajectory interpolation
# ---------------------------------------------------------------------------


def simplex_quadrature(k: int, t1: float, n_nodes: int):
    """Tensor Gauss-Legendre rule on the descending simplex of depth ``k``.

    Uses the telescoping substitution ``s_{j+1} = s_j * u_j`` mapping the
    unit cube onto ``{t1 >= s_2 >= ... >= s_{k+1} >= 0}``; returns
    ``(times, weights)`` with ``times`` of shape ``(n_nodes**k, k)`` in
    descending order per row and ``sum(weights) = t1^k / k!`` to rounding.
    """
    if int(k) != k or not 1 <= k <= MAX_DEPTH:
        raise ConfigurationError(f"depth must lie in [1, {MAX_DEPTH}], got {k}")
    if not (float(t1) >= 0.0):
        raise ConfigurationError(f"t1 must be nonnegative, got {t1}")
    if int(n_nodes) != n_nodes or n_nodes < 1:
        raise ConfigurationError(f"n_nodes must be a positive integer, got {n_nodes}")
    x, w = np.polynomial.legendre.leggauss(int(n_nodes))
    u1 = 0.5 * (x + 1.0)
    w1 = 0.5 * w
    k = int(k)
    grids = np.meshgrid(*([u1] * k), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)  # (N, k)
    wgrids = np.meshgrid(*([w1] * k), indexing="ij")
    W = np.ones(U.shape[0])
    for g in wgrids:
        W = W * g.ravel()
    times = np.empty_like(U)
    jac = np.ones(U.shape[0])
    prev = np.full(U.shape[0], float(t1))
    for jj in range(k):
        jac *= prev
        times[:, jj] = prev * U[:, jj]
        prev = times[:, jj]
    return times, W * jac


def _trajectory_interpolator(traj: Trajectory):
    """Cubic-Lagrange-in-time interpolator over uniformly sampled fields.

    Exact at the sample times; off the grid it combines the four nearest
    samples (or all of them when fewer exist).
    """
    times = np.asarray(traj.times, dtype=float)
    n = len(times)
    if n == 1:
        only = transform(traj.fields[0], "XV")
        return lambda t: only
    dt = times[1] - times[0]
    data = [transform(f, "XV").data for f in traj.fields]
    grid = traj.grid

    def interp(t: float) -> PhaseField:
        t = float(t)
        if not (times[0] - 1e-9 <= t <= times[-1] + 1e-9):
            raise ConfigurationError(
                f"time {t} lies outside the sampled trajectory range"
            )
        pos = (t - times[0]) / dt
        near = int(round(pos))
        if abs(pos - near) < 1e-12 and 0 <= near < n:
            return PhaseField(grid, "XV", data[near])
        width = min(4, n)
        i0 = min(max(int(math.floor(pos)) - (width - 2) // 2, 0), n - width)
        out = np.zeros_like(data[0])
        for a in range(i0, i0 + width):
            lag = 1.0
            for b in range(i0, i0 + width):
                if b != a:
                    lag *= (t - times[b]) / (times[a] - times[b])
            out = out + lag * data[a]
        return PhaseField(grid, "XV", out)

    return interp


def _dense_solve(f0: PhaseField, cfg: SolverConfig) -> Trajectory:
    """Run the solver sampling every step boundary."""
    samples = [i * cfg.dt for i in range(cfg.n_steps + 1)]
    return solve(f0, cfg, sample_times=samples)


# ---------------------------------------------------------------------------
# Duhamel reconstruction (solver <-> expansion consistency)
# ---------------------------------------------------------------------------


def duhamel_reconstruction(
    f0: PhaseField,
    kernel: CollisionKernelSpec,
    *,
    t1: float,
    k: int,
    dt: float,
    n_gl: int = 8,
) -> dict:
    """Reconstruct ``f(t1) - U(t1) f(0)`` from the depth-``k`` expansion.

    The solver runs with the unprojected bilinear operator
    (``conserve=False, dealias=False``) so the stepping and the expansion
    share one collision operator exactly.  The expansion is the mixed-leaf
    identity: depths ``j < k`` use free-transported initial data
    ``U(t_{j+1}) f(0)`` as leaves, and the closing depth ``j = k`` uses the
    solved trajectory itself at the innermost time.  In exact arithmetic and
    exact time integration the identity is exact at every depth; the
    reported error is dominated by the time quadrature, the trajectory's
    step error, and the interpolation between step samples.
    """
    if int(k) != k or not 1 <= k <= MAX_DEPTH:
        raise ConfigurationError(f"depth must lie in [1, {MAX_DEPTH}], got {k}")
    grid = f0.grid
    cfg = SolverConfig(
        grid=grid,
        dt=dt,
        t_end=t1,
        kernel=kernel,
        scheme="strang",
        conserve=False,
        dealias=False,
    )
    traj = _dense_solve(f0, cfg)
    start = traj.fields[0]
    target = traj.fields[-1].data - propagate(start, t1).data
    interp = _trajectory_interpolator(traj)
    total = np.zeros_like(target)
    depth_norms = []
    for depth in range(1, int(k) + 1):
        nodes, weights = simplex_quadrature(depth, t1, n_gl)
        acc = np.zeros_like(target)
        for mu in enumerate_collapse_maps(depth):
            for node, w in zip(nodes, weights):
                t_inner = node[-1]
                if depth == k:
                    leaf = interp(t_inner)
                else:
                    leaf = propagate(start, t_inner)
                val = eval_J_direct(mu, leaf, t1, tuple(node), kernel)
                acc = acc + w * val.data
        depth_norms.append(l2_norm(PhaseField(grid, "XV", acc)))
        total = total + acc
    target_norm = l2_norm(PhaseField(grid, "XV", target))
    abs_err = l2_norm(PhaseField(grid, "XV", total - target))
    return {
        "t1": float(t1),
        "k": int(k),
        "dt": float(dt),
        "n_gl": int(n_gl),
        "n_steps": cfg.n_steps,
        "target_norm": target_norm,
        "recon_norm": l2_norm(PhaseField(grid, "XV", total)),
        "abs_err": abs_err,
        "rel_err": abs_err / target_norm if target_norm > 0.0 else math.inf,
        "depth_term_norms": depth_norms,
    }


# ---------------------------------------------------------------------------
# Board-game integral identity
# ---------------------------------------------------------------------------


def _simplex_mc_points(rng, t1: float, n: int, k: int) -> np.ndarray:
    """Uniform points of the descending simplex, one row per draw."""
    pts = rng.uniform(0.0, t1, size=(n, k))
    pts.sort(axis=1)
    return pts[:, ::-1]


def boardgame_identity_report(
    f: PhaseField,
    kernel: CollisionKernelSpec,
    *,
    t1: float,
    k_max: int,
    n_points: int,
    seed: int = 0,
) -> dict:
    """Check the class-merging integral identity by matched-seed Monte Carlo.

    Per depth ``k``: the left side sums, over every collapse map, the simplex
    integral of its integrand (Monte Carlo with a per-map substream keyed by
    the map's lexicographic index).  The right side sums over classes,
    re-drawing each member's identical substream and evaluating the
    *representative's* integrand at the member's permuted times — the
    operational form of integrating the representative over the merged time
    domain.  Matched seeds make the two sides agree point-for-point up to
    rounding; the reported ``3 sigma`` bar comes from the left side's spread.

    The exchange identity holds for identical leaves referenced at a fixed
    absolute time, so every evaluation enters the leaf as ``U(t_inner) f``
    of one shared field ``f`` — each side pre-propagated by its *own*
    innermost time.  (The evaluator's raw convention references leaves at
    the floating innermost time; swapping the last two levels changes that
    reference, which is why the fixed-time form is the one that merges.)
    """
    if int(k_max) != k_max or not 1 <= k_max <= 4:
        raise ConfigurationError(f"k_max must lie in [1, 4], got {k_max}")
    if int(n_points) != n_points or n_points < 8:
        raise ConfigurationError(f"n_points must be an integer >= 8, got {n_points}")
    if not (float(t1) > 0.0):
        raise ConfigurationError(f"t1 must be positive, got {t1}")
    f = transform(f, "XV")
    grid = f.grid
    rows = []
    for k in range(1, int(k_max) + 1):
        vol = float(t1) ** k / math.factorial(k)
        lhs = np.zeros_like(f.data)
        var_sum = 0.0
        for mu in enumerate_collapse_maps(k):
            rng = np.random.default_rng((seed, k, mu.lex_index()))
            pts = _simplex_mc_points(rng, float(t1), int(n_points), k)
            samples = np.empty(int(n_points))
            mean = np.zeros_like(f.data)
            vals = []
            for row in pts:
                leaf = _prop(f, float(row[-1]))
                val = eval_J_direct(mu, leaf, float(t1), tuple(row), kernel).data
                vals.append(val)
                mean = mean + val
            mean = mean / len(pts)
            lhs = lhs + vol * mean
            for i, val in enumerate(vals):
                samples[i] = l2_norm(PhaseField(grid, "XV", val - mean))
            if len(pts) > 1:
                var_sum += float(np.sum(samples**2)) / (
                    len(pts) * (len(pts) - 1)
                )
        sigma = vol * math.sqrt(var_sum)
        rhs = np.zeros_like(f.data)
        classes = km_classes(k)
        for cls in classes:
            for member, perm in zip(cls.members, cls.time_permutations):
                rng = np.random.default_rng((seed, k, member.lex_index()))
                pts = _simplex_mc_points(rng, float(t1), int(n_points), k)
                mean = np.zeros_like(f.data)
                for row in pts:
                    mapped = apply_time_permutation(perm, tuple(row))
                    leaf = _prop(f, float(mapped[-1]))
                    val = eval_J_direct(
                        cls.representative, leaf, float(t1), mapped, kernel
                    ).data
                    mean = mean + val
                rhs = rhs + vol * (mean / len(pts))
        diff = l2_norm(PhaseField(grid, "XV", lhs - rhs))
        rows.append(
            {
                "k": k,
                "n_maps": math.factorial(k),
                "n_classes": len(classes),
                "lhs_norm": l2_norm(PhaseField(grid, "XV", lhs)),
                "rhs_norm": l2_norm(PhaseField(grid, "XV", rhs)),
                "diff": diff,
                "three_sigma": 3.0 * sigma,
                "pass": bool(diff <= 3.0 * sigma),
            }
        )
    return {
        "t1": float(t1),
        "n_points": int(n_points),
        "seed": int(seed),
        "rows": rows,
        "pass": all(r["pass"] for r in rows),
    }


# ---------------------------------------------------------------------------
# Contraction demonstration
# ---------------------------------------------------------------------------


def contraction_demo(
    f0: PhaseField,
    cfg_a: SolverConfig,
    cfg_b: SolverConfig,
    k_max: int,
    T: float,
    *,
    s: float = 0.8,
    r: float = 1.3,
    n_gl: int = 6,
    n_t1: int = 3,
    pair_seed: int = 0,
) -> dict:
    """Per-depth decay of the expansion difference of two trajectories.

    Runs both configurations from ``f0`` on ``[0, T]``, then for each depth
    ``k`` and each echelon class sums the member simplex integrals of the
    signed difference ``J_mu(a-leaves) - J_mu(b-leaves)`` (leaves are the
    respective solved trajectories at the innermost time, each side using
    its own collision kernel).  Reports ``D_k``: the sum over classes of the
    largest ``L^2`` norm over the observation grid ``t1 in (0, T]``, the
    decay ratios ``D_k / D_{k-1}`` (with ``D_0`` the largest trajectory
    difference itself), the measured constants ``C`` (bilinear against the
    ``H^s_x H^r`` twisted norm), ``C0`` (largest twisted norm along the
    trajectories), and the factor ``4 C C0 sqrt(T)`` — flagged as a warning,
    not an error, when it reaches 1.  Identical configurations give exact
    zeros at every depth.
    """
    if int(k_max) != k_max or not 1 <= k_max <= 4:
        raise ConfigurationError(f"k_max must lie in [1, 4], got {k_max}")
    if cfg_a.grid != cfg_b.grid or cfg_a.grid != f0.grid:
        raise ConfigurationError(
            "both configurations must share the initial field's grid"
        )
    if cfg_a.kernel is None or cfg_b.kernel is None:
        raise ConfigurationError("contraction_demo needs collision kernels")
    for name, cfg in (("cfg_a", cfg_a), ("cfg_b", cfg_b)):
        if abs(cfg.t_end - T) > 1e-12 * max(1.0, abs(T)):
            raise ConfigurationError(f"{name}.t_end must equal the horizon T")
    f0 = transform(f0, "XV")
    grid = f0.grid
    traj_a = _dense_solve(f0, cfg_a)
    traj_b = _dense_solve(f0, cfg_b)
    interp_a = _trajectory_interpolator(traj_a)
    interp_b = _trajectory_interpolator(traj_b)
    sob = NormSpec("Sobolev-HsHr", s=s, r=r)

    c0 = 0.0
    for traj in (traj_a, traj_b):
        stride = max(1, len(traj.times) // 16)
        picks = list(range(0, len(traj.times), stride))
        if picks[-1] != len(traj.times) - 1:
            picks.append(len(traj.times) - 1)
        for i in picks:
            twisted = propagate(traj.fields[i], -traj.times[i])
            c0 = max(c0, norm(twisted, sob))

    c_bil = 0.0
    for i in range(8):
        u = band_limited_random(grid, (pair_seed, 2 * i), s=s, r=r)
        w = band_limited_random(grid, (pair_seed, 2 * i + 1), s=s, r=r)
        qv = _q_tilde(u, w, cfg_a.kernel)
        c_bil = max(c_bil, l2_norm(qv) / (norm(u, sob) * norm(w, sob)))

    bound_factor = 4.0 * c_bil * c0 * math.sqrt(T)
    t1_grid = [T * (i + 1) / n_t1 for i in range(n_t1)]

    d0 = 0.0
    for t1 in t1_grid:
        gap = interp_a(t1).data - interp_b(t1).data
        d0 = max(d0, l2_norm(PhaseField(grid, "XV", gap)))

    depth_norms = [d0]
    class_tables = []
    for k in range(1, int(k_max) + 1):
        classes = km_classes(k)
        dk = 0.0
        table = []
        for cls in classes:
            best = 0.0
            for t1 in t1_grid:
                nodes, weights = simplex_quadrature(k, t1, n_gl)
                acc = np.zeros_like(f0.data)
                for member in cls.members:
                    for node, w in zip(nodes, weights):
                        t_inner = node[-1]
                        ja = eval_J_direct(
                            member, interp_a(t_inner), t1, tuple(node), cfg_a.kernel
                        )
                        jb = eval_J_direct(
                            member, interp_b(t_inner), t1, tuple(node), cfg_b.kernel
                        )
                        acc = acc + w * (ja.data - jb.data)
                best = max(best, l2_norm(PhaseField(grid, "XV", acc)))
            table.append(
                {"representative": str(cls.representative), "size": cls.size,
                 "norm": best}
            )
            dk += best
        class_tables.append(table)
        depth_norms.append(dk)

    ratios = []
    for k in range(1, int(k_max) + 1):
        prev, cur = depth_norms[k - 1], depth_norms[k]
        ratios.append(cur / prev if prev > 0.0 else 0.0)

    return {
        "T": float(T),
        "C": c_bil,
        "C0": c0,
        "bound_factor": bound_factor,
        "bound_warning": bool(bound_factor >= 1.0),
        "iterate_bounds": [
            iterate_bound(k, T, c_bil, c0) for k in range(0, int(k_max) + 1)
        ],
        "depth_norms": depth_norms,
        "ratios": ratios,
        "classes": class_tables,
        "t1_grid": t1_grid,
        "s": s,
        "r": r,
    }
