"""Security-aware manycore task mapping toolkit.

Pipeline: parse IR-style traces into weighted task graphs (`trace`), cluster
them with security-weighted modularity (`communities`), and map the clusters
onto a four-layer architecture graph (`arch`) with distributed Q-learning
agents inside a discrete-event simulator (`sim`).
"""

from .arch import ArchGraph, ArchError, Element, ElementKind, Link, LogicType, PESubtype, build_arch, load_arch
from .communities import QualityParams, detect_communities, modularity, quality, security_cohesion
from .qlearn import Action, AgentPool, QTable, RLParams, q_update, reward, select_action
from .sim import Env, SimParams, SimReport, comm_time, exec_time, load_scenario
from .trace import (
    AffinityClass,
    Instruction,
    SecurityClass,
    TraceError,
    active_kernel,
    build_dag,
    build_idg,
    classify_affinity,
    parse_trace,
    serialize_trace,
)

__version__ = "0.1.0"
