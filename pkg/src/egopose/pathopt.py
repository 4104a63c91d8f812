"""Global pose-path optimization over the exemplar bank.

A path assigns one exemplar pose index to every frame. Its energy is

    U + T + V + S

where U sums the unary costs, T charges each step by its kind (0 for a
forward step of at most 2 within temporally adjacent exemplars, delta for
any other step between neighboring clusters, infeasible otherwise), V is a
truncated-linear penalty q on the change in step size between consecutive
steps, and S a truncated-linear penalty t on the length of a stationary run.

solve_paper_dp runs the first-order recursion

    H(i, n) = e_{i,n} + min_j [ H(j, n-1) + w_{j,i}
                                + q(|s(j, n-1) - (i - j)|) + r(u(j, n-1), i) ]

carrying each node's running step s and stationary count u from its best
predecessor. The second-order terms make this a heuristic: the energy of the
returned path can exceed the true optimum. solve_exact_dp augments the node
state with the exact previous step and a saturation-clamped stationary count,
which makes it a true minimizer, and brute_force enumerates everything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clustering import ExemplarBank
from .costs import UnaryCosts
from .errors import Infeasible, InfeasiblePath, StateExplosion, TooLarge


@dataclass
class PathParams:
    delta: float = 0.1  # backward / long-step / cluster-jump penalty
    speed_gamma: float = 10.0
    speed_mu: float = 0.01
    stat_gamma: float = 5.0
    stat_mu: float = 0.02

    def __post_init__(self):
        if self.delta < 0 or self.speed_mu < 0 or self.stat_mu < 0:
            raise ValueError("penalties must be non-negative")
        if self.speed_gamma < 0 or self.stat_gamma < 0:
            raise ValueError("saturation points must be non-negative")


@dataclass
class NodeState:
    """Per-node record of the first-order recursion."""

    h: float  # best energy of any path ending here
    u: int  # stationary count along that path
    s: int  # last step taken along that path
    p: int  # predecessor position in the previous frame (-1 at frame 0)


@dataclass
class Trellis:
    """Per-frame candidate exemplar indices with unary costs.

    Candidates are stored sorted by exemplar index (so first-minimum argmin
    implements the smaller-index tie rule) and must be unique per frame.
    """

    frames: list  # per frame: (indices int array, costs float array)
    bank: ExemplarBank

    def __post_init__(self):
        if not self.frames:
            raise ValueError("trellis needs at least one frame")
        clean = []
        for n, (idx, e) in enumerate(self.frames):
            idx = np.asarray(idx, dtype=int)
            e = np.asarray(e, dtype=float)
            if len(idx) == 0:
                raise ValueError(f"frame {n} has no candidates")
            if len(idx) != len(e):
                raise ValueError(f"frame {n}: index/cost length mismatch")
            order = np.argsort(idx, kind="stable")
            idx, e = idx[order], e[order]
            if len(np.unique(idx)) != len(idx):
                raise ValueError(f"frame {n} repeats an exemplar index")
            if idx[0] < 0 or idx[-1] >= len(self.bank.poses):
                raise ValueError(f"frame {n}: exemplar index out of bank range")
            clean.append((idx, e))
        self.frames = clean

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @classmethod
    def from_costs(cls, costs: UnaryCosts, bank: ExemplarBank) -> "Trellis":
        return cls([(i, c) for i, c in zip(costs.indices, costs.costs)], bank)

    def cost_of(self, n: int, exemplar: int) -> float:
        idx, e = self.frames[n]
        pos = int(np.searchsorted(idx, exemplar))
        if pos >= len(idx) or idx[pos] != exemplar:
            raise ValueError(f"exemplar {exemplar} not a candidate at frame {n}")
        return float(e[pos])


@dataclass
class PosePath:
    """A decoded path with its energy split into U/T/V/S."""

    indices: list
    unary: float
    transition: float
    speed: float
    stationary: float
    total: float

    def __post_init__(self):
        parts = self.unary + self.transition + self.speed + self.stationary
        if abs(parts - self.total) > 1e-9:
            raise ValueError("energy components must sum to the total")

    def energy_dict(self) -> dict:
        return {
            "U": self.unary,
            "T": self.transition,
            "V": self.speed,
            "S": self.stationary,
            "total": self.total,
        }

    def save(self, path, bank: ExemplarBank) -> None:
        with open(path, "w") as f:
            for n, i in enumerate(self.indices):
                rec = {"t": n, "exemplar": int(i), "cluster": int(bank.cluster_of[i])}
                f.write(json.dumps(rec) + "\n")

    def save_energy(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.energy_dict(), f)


def step_weight(j: int, i: int, bank: ExemplarBank, params: PathParams) -> float:
    """w_{j,i}: 0 for a small forward step inside one source sequence, delta
    for any other step between neighboring clusters, +inf otherwise."""
    cj, ci = int(bank.cluster_of[j]), int(bank.cluster_of[i])
    nb = bank.neighbors[cj]
    pos = int(np.searchsorted(nb, ci))
    if pos >= len(nb) or nb[pos] != ci:
        return float("inf")
    if 0 <= i - j <= 2 and not bank.crosses_break(j, i):
        return 0.0
    return params.delta


def speed_term(prev_speed: int, step: int, params: PathParams) -> float:
    """q(|s_prev - step|), linear with slope mu, saturated at gamma."""
    x = abs(prev_speed - step)
    return params.speed_mu * min(x, params.speed_gamma)


def stationary_term(u_prev: int, j: int, i: int, params: PathParams) -> float:
    """t(u_prev + 1) when the step j -> i stays on the same exemplar."""
    if i != j:
        return 0.0
    return params.stat_mu * min(u_prev + 1, params.stat_gamma)


def energy_of_path(trellis: Trellis, indices, params: PathParams = PathParams()) -> PosePath:
    """Recompute the exact energy of a given index-per-frame path.

    The first frame starts with s = 0 and u = 0; u resets whenever the path
    moves. Raises InfeasiblePath on a non-neighbor cluster step.
    """
    indices = [int(i) for i in indices]
    if len(indices) != trellis.n_frames:
        raise ValueError("one exemplar index per frame required")
    bank = trellis.bank
    unary = sum(trellis.cost_of(n, i) for n, i in enumerate(indices))
    transition = speed = stationary = 0.0
    s_prev = 0
    u = 0
    for n in range(1, len(indices)):
        j, i = indices[n - 1], indices[n]
        w = step_weight(j, i, bank, params)
        if not np.isfinite(w):
            raise InfeasiblePath(f"step {j} -> {i} crosses non-neighbor clusters")
        transition += w
        step = i - j
        speed += speed_term(s_prev, step, params)
        stationary += stationary_term(u, j, i, params)
        u = u + 1 if step == 0 else 0
        s_prev = step
    total = unary + transition + speed + stationary
    return PosePath(indices, unary, transition, speed, stationary, total)


def _frame_tables(trellis: Trellis):
    """Cluster ids and break ranks for each frame's candidates."""
    bank = trellis.bank
    out = []
    for idx, _ in trellis.frames:
        clusters = bank.cluster_of[idx]
        br = np.searchsorted(bank.sequence_breaks, idx, side="right")
        out.append((clusters, br))
    return out


def solve_paper_dp(trellis: Trellis, params: PathParams = PathParams(), keep_tables: bool = False):
    """First-order recursion with carried (s, u); ties take the smaller index.

    Returns a PosePath, or (PosePath, tables) with keep_tables where tables
    is a per-frame list of NodeState records.
    """
    bank = trellis.bank
    meta = _frame_tables(trellis)
    idx0, e0 = trellis.frames[0]
    h = e0.copy()
    u = np.zeros(len(idx0), dtype=int)
    s = np.zeros(len(idx0), dtype=int)
    parents = [np.full(len(idx0), -1, dtype=int)]
    tables = [None] * trellis.n_frames

    for n in range(1, trellis.n_frames):
        idx, e = trellis.frames[n]
        clusters, br = meta[n]
        p_idx, _ = trellis.frames[n - 1]
        p_clusters, p_br = meta[n - 1]

        by_cluster: dict = {}
        for pos, c in enumerate(p_clusters):
            by_cluster.setdefault(int(c), []).append(pos)

        h_new = np.full(len(idx), np.inf)
        u_new = np.zeros(len(idx), dtype=int)
        s_new = np.zeros(len(idx), dtype=int)
        par = np.full(len(idx), -1, dtype=int)

        for c in np.unique(clusters):
            rows = np.flatnonzero(clusters == c)
            j_pos = [p for nb in bank.neighbors[int(c)] for p in by_cluster.get(int(nb), [])]
            if not j_pos:
                continue
            j_pos = np.array(sorted(j_pos), dtype=int)  # ascending exemplar index
            pj = p_idx[j_pos]
            step = idx[rows][:, None] - pj[None, :]
            small_fwd = (step >= 0) & (step <= 2) & ~(br[rows][:, None] > p_br[j_pos][None, :])
            w = np.where(small_fwd, 0.0, params.delta)
            q = params.speed_mu * np.minimum(np.abs(s[j_pos][None, :] - step), params.speed_gamma)
            r = np.where(
                step == 0,
                params.stat_mu * np.minimum(u[j_pos][None, :] + 1, params.stat_gamma),
                0.0,
            )
            tot = h[j_pos][None, :] + w + q + r
            best = tot.argmin(axis=1)  # first minimum -> smallest exemplar index
            span = np.arange(len(rows))
            h_new[rows] = e[rows] + tot[span, best]
            chosen_step = step[span, best]
            s_new[rows] = chosen_step
            u_new[rows] = np.where(chosen_step == 0, u[j_pos[best]] + 1, 0)
            par[rows] = j_pos[best]

        if keep_tables:
            tables[n] = [
                NodeState(float(h_new[p]), int(u_new[p]), int(s_new[p]), int(par[p]))
                for p in range(len(idx))
            ]
        h, u, s = h_new, u_new, s_new
        parents.append(par)

    if keep_tables:
        tables[0] = [
            NodeState(float(e0[p]), 0, 0, -1) for p in range(len(idx0))
        ]

    end = int(h.argmin())
    if not np.isfinite(h[end]):
        raise Infeasible("no finite-energy path through the trellis")
    positions = [end]
    for n in range(trellis.n_frames - 1, 0, -1):
        positions.append(int(parents[n][positions[-1]]))
    positions.reverse()
    indices = [int(trellis.frames[n][0][p]) for n, p in enumerate(positions)]
    result = energy_of_path(trellis, indices, params)
    return (result, tables) if keep_tables else result


def solve_exact_dp(trellis: Trellis, params: PathParams = PathParams()) -> PosePath:
    """True minimizer of the path energy.

    The state is (candidate, exact previous step, stationary count clamped at
    gamma_s). The stationary clamp is lossless because t saturates there; the
    step is kept exact because q compares the previous step against the next
    one below saturation. Raises StateExplosion when a frame's projected
    state count exceeds 1e7.
    """
    bank = trellis.bank
    meta = _frame_tables(trellis)
    stat_cap = int(params.stat_gamma)
    nbr_sets = [set(int(x) for x in bank.neighbors[c]) for c in range(bank.k)]

    idx0, e0 = trellis.frames[0]
    # state key: (position, previous step, clamped stationary count)
    layers = [{(p, 0, 0): (float(e0[p]), None) for p in range(len(idx0))}]

    for n in range(1, trellis.n_frames):
        idx, e = trellis.frames[n]
        clusters, br = meta[n]
        p_idx, _ = trellis.frames[n - 1]
        p_clusters, p_br = meta[n - 1]
        if len(idx) * (len(p_idx) + stat_cap + 1) > 10_000_000:
            raise StateExplosion(f"frame {n}: state budget exceeded")

        prev = layers[-1]
        new_states: dict = {}
        for key in sorted(prev):  # ascending keys; first writer wins ties
            j_pos, s_prev, u_prev = key
            h_prev = prev[key][0]
            cj = int(p_clusters[j_pos])
            pj = int(p_idx[j_pos])
            for i_pos in range(len(idx)):
                if int(clusters[i_pos]) not in nbr_sets[cj]:
                    continue
                step = int(idx[i_pos]) - pj
                if 0 <= step <= 2 and not br[i_pos] > p_br[j_pos]:
                    w = 0.0
                else:
                    w = params.delta
                q = params.speed_mu * min(abs(s_prev - step), params.speed_gamma)
                r = params.stat_mu * min(u_prev + 1, params.stat_gamma) if step == 0 else 0.0
                energy = h_prev + w + q + r + float(e[i_pos])
                new_key = (i_pos, step, min(u_prev + 1, stat_cap) if step == 0 else 0)
                cur = new_states.get(new_key)
                if cur is None or energy < cur[0]:
                    new_states[new_key] = (energy, key)
        if not new_states:
            raise Infeasible("no finite-energy path through the trellis")
        layers.append(new_states)

    last = layers[-1]
    best_key = min(sorted(last), key=lambda k: last[k][0])
    positions = []
    key = best_key
    for n in range(trellis.n_frames - 1, -1, -1):
        positions.append(key[0])
        key = layers[n][key][1]
    positions.reverse()
    indices = [int(trellis.frames[n][0][p]) for n, p in enumerate(positions)]
    return energy_of_path(trellis, indices, params)


def brute_force(trellis: Trellis, params: PathParams = PathParams()) -> PosePath:
    """Enumerate every cluster-feasible path; ties keep the lexicographically
    smallest index sequence. Guarded by a 1e6 path budget."""
    sizes = [len(idx) for idx, _ in trellis.frames]
    total = 1
    for m in sizes:
        total *= m
        if total > 1_000_000:
            raise TooLarge("more than 1e6 candidate paths")

    bank = trellis.bank
    n_frames = trellis.n_frames
    frames = trellis.frames
    best_energy = np.inf
    best_path = None

    choice = [-1] * n_frames
    # arrival state per depth: (s, u, energy)
    state = [(0, 0, 0.0)] * n_frames
    d = 0
    while d >= 0:
        choice[d] += 1
        if choice[d] >= sizes[d]:
            choice[d] = -1
            d -= 1
            continue
        idx, e = frames[d]
        i = int(idx[choice[d]])
        if d == 0:
            arrived = (0, 0, float(e[choice[d]]))
        else:
            s_prev, u_prev, en_prev = state[d - 1]
            j = int(frames[d - 1][0][choice[d - 1]])
            w = step_weight(j, i, bank, params)
            if not np.isfinite(w):
                continue
            step = i - j
            en = (
                en_prev
                + w
                + speed_term(s_prev, step, params)
                + stationary_term(u_prev, j, i, params)
                + float(e[choice[d]])
            )
            arrived = (step, u_prev + 1 if step == 0 else 0, en)
        if arrived[2] > best_energy:  # extensions only add cost
            continue
        state[d] = arrived
        if d == n_frames - 1:
            if arrived[2] < best_energy:
                best_energy = arrived[2]
                best_path = [int(frames[k][0][choice[k]]) for k in range(n_frames)]
        else:
            d += 1
    if best_path is None:
        raise Infeasible("no cluster-feasible path exists")
    return energy_of_path(trellis, best_path, params)


def solve_path_cluster(trellis: Trellis, dists: np.ndarray, params: PathParams = PathParams()) -> PosePath:
    """Two-stage baseline: per-frame argmax cluster, then the first-order DP
    restricted to that cluster's candidates.

    The argmax runs over clusters actually present among the frame's
    candidates (ties -> smaller cluster id). If the restriction is infeasible
    a neighbor-feasible cluster-level Viterbi replaces stage 1.
    """
    dists = np.asarray(dists, dtype=float)
    if len(dists) != trellis.n_frames:
        raise ValueError("one distribution per frame required")
    meta = _frame_tables(trellis)
    chosen = []
    for n in range(trellis.n_frames):
        present = np.unique(meta[n][0])
        chosen.append(int(present[int(dists[n][present].argmax())]))
    try:
        return solve_paper_dp(_restrict(trellis, chosen), params)
    except Infeasible:
        chosen = _cluster_viterbi(trellis, dists, meta)
        return solve_paper_dp(_restrict(trellis, chosen), params)


def _restrict(trellis: Trellis, chosen_clusters) -> Trellis:
    meta = _frame_tables(trellis)
    frames = []
    for n, (idx, e) in enumerate(trellis.frames):
        keep = meta[n][0] == chosen_clusters[n]
        frames.append((idx[keep], e[keep]))
    return Trellis(frames, trellis.bank)


def _cluster_viterbi(trellis: Trellis, dists: np.ndarray, meta) -> list:
    """Cheapest neighbor-feasible cluster sequence under unary 1 - probs."""
    bank = trellis.bank
    nbr_sets = [set(int(x) for x in bank.neighbors[c]) for c in range(bank.k)]
    present = [np.unique(m[0]) for m in meta]
    h = {int(c): 1.0 - float(dists[0][c]) for c in present[0]}
    back = []
    for n in range(1, trellis.n_frames):
        new_h = {}
        bk = {}
        for c in present[n]:
            c = int(c)
            best = None
            for cp, hp in sorted(h.items()):
                if c not in nbr_sets[cp]:
                    continue
                if best is None or hp < best[0]:
                    best = (hp, cp)
            if best is not None:
                new_h[c] = best[0] + 1.0 - float(dists[n][c])
                bk[c] = best[1]
        if not new_h:
            raise Infeasible("no neighbor-feasible cluster sequence")
        h = new_h
        back.append(bk)
    end = min(sorted(h), key=lambda c: h[c])
    seq = [end]
    for bk in reversed(back):
        seq.append(bk[seq[-1]])
    seq.reverse()
    return seq
