"""Distributed tabular Q-learning for task-cluster mapping.

Scheduler agents pull clusters from per-agent queues (balls into bins with a
workload cap), pick map/reconfigure actions epsilon-greedily against a shared
Q table, and learn from simulator rewards. All table read-modify-write cycles
run under one lock, so concurrent agents are serialized per the shared-table
contract.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .arch import ArchGraph, ElementKind, LogicType, PESubtype
from .trace import AffinityClass


@dataclass
class RLParams:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.1
    epsilon_decay: float = 0.0  # subtracted per episode; 0 keeps epsilon constant
    busy_penalty: float = -100.0
    w_affinity: float = 10.0
    w_logic: float = 5.0
    w_comm: float = -0.01  # per byte*hop
    w_migrate: float = -2.0  # per hop
    w_compromised: float = -100.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.epsilon_decay < 0.0:
            raise ValueError(f"epsilon_decay must be >= 0, got {self.epsilon_decay}")


@dataclass(frozen=True)
class Action:
    """Map the cluster onto ``element``, optionally reconfiguring it first."""

    element: int
    reconfig_logic: LogicType | None = None

    @property
    def action_id(self) -> str:
        if self.reconfig_logic is None:
            return f"m{self.element}"
        return f"r{self.element}:{self.reconfig_logic.value}"


def action_sort_key(action):
    """Deterministic tie-break order: lowest element id, plain map first."""
    if isinstance(action, Action):
        logic = action.reconfig_logic.value if action.reconfig_logic else ""
        return (action.element, action.reconfig_logic is not None, logic)
    return action


def avail_bucket(available: float) -> int:
    """Quartile bucket of an availability level: [0,1] -> {0, 1, 2, 3}."""
    if not 0.0 <= available <= 1.0:
        raise ValueError(f"availability {available} outside [0, 1]")
    return min(3, int(available * 4))


def make_state(affinity, sec, logic_pref, element_digests) -> tuple:
    """State key: task feature class plus a digest of every candidate element.

    element_digests is an iterable of (subtype, logic, availability bucket,
    compromised) tuples in a fixed element order.
    """
    return (affinity, sec, logic_pref, tuple(tuple(d) for d in element_digests))


def _canon(obj) -> str:
    if isinstance(obj, Action):
        return obj.action_id
    if isinstance(obj, Enum):
        return f"{type(obj).__name__}.{obj.name}"
    if isinstance(obj, bool):
        return "T" if obj else "F"
    if isinstance(obj, (int, float)):
        return repr(obj)
    if isinstance(obj, str):
        return f"'{obj}'"
    if obj is None:
        return "~"
    if isinstance(obj, (tuple, list)):
        return "(" + ",".join(_canon(x) for x in obj) + ")"
    raise TypeError(f"cannot canonicalize {type(obj).__name__} for the Q table")


def action_id(action) -> str:
    return action.action_id if isinstance(action, Action) else _canon(action)


class QTable:
    """Shared (state, action) -> value store; missing entries read as 0.

    Entries are keyed by a content hash of the state plus the action id, so
    dumps are stable across processes regardless of hash randomization.
    """

    def __init__(self):
        self._values: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        self._digest_memo: dict = {}

    def state_digest(self, state) -> str:
        try:
            cached = self._digest_memo.get(state)
        except TypeError:  # unhashable state: digest without memoization
            return hashlib.sha1(_canon(state).encode()).hexdigest()[:16]
        if cached is None:
            cached = hashlib.sha1(_canon(state).encode()).hexdigest()[:16]
            self._digest_memo[state] = cached
        return cached

    def _key(self, state, action) -> tuple[str, str]:
        return (self.state_digest(state), action_id(action))

    def get(self, state, action) -> float:
        return self._values.get(self._key(state, action), 0.0)

    def set(self, state, action, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"Q value must be finite, got {value}")
        with self._lock:
            self._values[self._key(state, action)] = value

    def accumulate(self, state, action, delta: float) -> float:
        """Atomic in-place adjustment; exercises the serialized-update contract."""
        if not math.isfinite(delta):
            raise ValueError(f"delta must be finite, got {delta}")
        key = self._key(state, action)
        with self._lock:
            value = self._values.get(key, 0.0) + delta
            self._values[key] = value
        return value

    def best_value(self, state, candidates) -> float:
        if not candidates:
            return 0.0
        digest = self.state_digest(state)
        return max(self._values.get((digest, action_id(a)), 0.0) for a in candidates)

    def __len__(self) -> int:
        return len(self._values)

    def dump(self) -> str:
        """Text lines `statekey_hash action_id qvalue`, sorted for stable bytes."""
        lines = [f"{h} {a} {v!r}" for (h, a), v in sorted(self._values.items())]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def load(cls, text: str) -> "QTable":
        table = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"Q-table dump line {lineno}: expected 3 fields")
            h, a, v = parts
            value = float(v)
            if not math.isfinite(value):
                raise ValueError(f"Q-table dump line {lineno}: non-finite value")
            table._values[(h, a)] = value
        return table


@dataclass
class DecisionStats:
    decisions: int = 0
    explorations: int = 0
    migrations: int = 0


def select_action(q: QTable, state, candidates, eps: float, rng, stats: DecisionStats | None = None):
    """Epsilon-greedy pick from candidates.

    With probability eps: a uniformly random candidate (busy or compromised
    targets stay eligible during exploration). Otherwise the argmax Q value,
    ties broken by the lowest element id.
    """
    if not candidates:
        raise ValueError("no candidate actions")
    if stats is not None:
        stats.decisions += 1
    if rng.random() < eps:
        if stats is not None:
            stats.explorations += 1
        return candidates[rng.randrange(len(candidates))]
    digest = q.state_digest(state)
    best = None
    best_rank = None
    for a in candidates:
        rank = (-q._values.get((digest, action_id(a)), 0.0), action_sort_key(a))
        if best_rank is None or rank < best_rank:
            best_rank = rank
            best = a
    return best


def q_update(q: QTable, state, action, reward_value: float, next_state, next_candidates, params: RLParams) -> None:
    """One-step Q-learning update, applied atomically against other agents."""
    if not math.isfinite(reward_value):
        raise ValueError(f"reward must be finite, got {reward_value}")
    key = q._key(state, action)
    with q._lock:
        if next_state is not None and next_candidates:
            digest = q.state_digest(next_state)
            bootstrap = max(
                q._values.get((digest, action_id(a)), 0.0) for a in next_candidates
            )
        else:
            bootstrap = 0.0
        current = q._values.get(key, 0.0)
        updated = current + params.alpha * (reward_value + params.gamma * bootstrap - current)
        if not math.isfinite(updated):
            raise ValueError("Q update produced a non-finite value")
        q._values[key] = updated


# -- environment feedback ----------------------------------------------------

# PE subtypes that count as an affinity match (and earn w_affinity).
AFFINITY_TARGETS: dict[AffinityClass, frozenset[PESubtype]] = {
    AffinityClass.CRYPTO: frozenset({PESubtype.HWA_CRYPTO}),
    AffinityClass.FFT: frozenset({PESubtype.HWA_FFT}),
    AffinityClass.MATRIX_MUL: frozenset({PESubtype.HWA_MM, PESubtype.GPU}),
    AffinityClass.LOOP: frozenset({PESubtype.GPU}),
    AffinityClass.GENERAL: frozenset(),
}


def affinity_matches(affinity: AffinityClass, subtype: PESubtype | None) -> bool:
    return subtype is not None and subtype in AFFINITY_TARGETS[affinity]


def reward(
    env,
    cluster,
    action: Action,
    *,
    final_element: int | None = None,
    chosen_busy: bool = False,
    migration_hops: int = 0,
    params: RLParams | None = None,
) -> float:
    """Reward for mapping ``cluster`` via ``action`` in the environment.

    final_element is where the cluster actually landed (differs from the
    action target after a migration; None when the commit failed entirely,
    which earns just the busy penalty). Communication cost counts bytes*hops
    to every already-placed neighbor cluster.
    """
    params = params or env.rl
    if final_element is None:
        return params.busy_penalty
    el = env.arch.element(final_element)
    r = 0.0
    if affinity_matches(cluster.affinity, el.subtype):
        r += params.w_affinity
    logic = action.reconfig_logic if (action.reconfig_logic and final_element == action.element) else el.logic
    if logic == cluster.logic:
        r += params.w_logic
    for other, nbytes in env.neighbor_traffic(cluster.id):
        loc = env.location(other)
        if loc is None:
            continue
        hops = env.arch.hop_distance(final_element, loc)
        if hops:
            r += params.w_comm * nbytes * hops
    if chosen_busy:
        r += params.busy_penalty
    if el.compromised:
        r += params.w_compromised
    if migration_hops:
        r += params.w_migrate * migration_hops
    return r


def migrate(env, cluster, busy_element: int) -> int | None:
    """Local search for an idle PE near a busy mapping target.

    Prefers an element already holding the cluster's logic type, then any
    idle PE; None re-queues the cluster for the next step.
    """
    arch: ArchGraph = env.arch
    alt = arch.nearest_available(busy_element, kind=ElementKind.PE, logic=cluster.logic)
    if alt is None:
        alt = arch.nearest_available(busy_element, kind=ElementKind.PE)
    return alt


# -- agent queues ------------------------------------------------------------


class AgentPool:
    """Per-agent task queues with a workload cap (balls into bins).

    With no explicit cap, the cap tracks the arrival rate over a sliding
    window of recent steps: ceil(2 * ready-rate / n_agents), at least 1.
    """

    WINDOW = 16

    def __init__(self, n_agents: int, workload_cap: int | None = None):
        if n_agents < 1:
            raise ValueError(f"n_agents must be >= 1, got {n_agents}")
        if workload_cap is not None and workload_cap < 1:
            raise ValueError(f"workload_cap must be >= 1, got {workload_cap}")
        self.n_agents = n_agents
        self.workload_cap = workload_cap
        self.queues: list[deque] = [deque() for _ in range(n_agents)]
        self.in_flight = [0] * n_agents
        self.max_in_flight_seen = 0
        self._arrivals: deque[int] = deque(maxlen=self.WINDOW)

    def note_step(self, n_arrived: int) -> None:
        self._arrivals.append(n_arrived)

    def effective_cap(self) -> int:
        if self.workload_cap is not None:
            return self.workload_cap
        if not self._arrivals:
            return 1
        rate = sum(self._arrivals) / len(self._arrivals)
        return max(1, math.ceil(2.0 * rate / self.n_agents))

    def dispatch(self, cluster_ids) -> None:
        """Append each ready cluster to the least-loaded queue (ties: lowest agent)."""
        for cid in cluster_ids:
            agent = min(
                range(self.n_agents), key=lambda a: (self.in_flight[a] + len(self.queues[a]), a)
            )
            self.queues[agent].append(cid)

    def can_pull(self, agent: int) -> bool:
        return bool(self.queues[agent]) and self.in_flight[agent] < self.effective_cap()

    def peek(self, agent: int):
        return self.queues[agent][0]

    def pop(self, agent: int):
        return self.queues[agent].popleft()

    def requeue(self, agent: int, cid) -> None:
        self.queues[agent].appendleft(cid)

    def started(self, agent: int) -> None:
        self.in_flight[agent] += 1
        cap = self.effective_cap()
        if self.in_flight[agent] > cap:
            raise AssertionError(
                f"agent {agent} exceeded workload cap {cap} with {self.in_flight[agent]} in flight"
            )
        self.max_in_flight_seen = max(self.max_in_flight_seen, self.in_flight[agent])

    def finished(self, agent: int) -> None:
        self.in_flight[agent] -= 1

    def idle(self) -> bool:
        return all(not q for q in self.queues) and not any(self.in_flight)

    def pending(self) -> int:
        return sum(len(q) for q in self.queues) + sum(self.in_flight)
