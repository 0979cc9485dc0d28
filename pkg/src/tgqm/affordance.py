"""Hand-designed affordance functions for beating, cutting and picking, plus
the viability predicate used to label datasets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .metrics import MetricVector

NEG_INF = -math.inf
BEAT_CAP = 1e18   # score cap when impact effort is exactly zero


class Task(Enum):
    BEAT = "beat"
    CUT = "cut"
    PICK = "pick"


@dataclass(frozen=True)
class AffordanceConfig:
    tau_eps: float = 0.3
    tau_ug: float = 10.0
    tau_delta: float = 0.95
    viab_eps: float = 0.15
    viab_eh_sum: float = 250.0
    viab_ei: float = 100.0


# threshold presets: default / no robustness / extra robustness
PRESETS = {
    "default": AffordanceConfig(),
    "no_robustness": AffordanceConfig(tau_eps=NEG_INF),
    "extra_robustness": AffordanceConfig(tau_eps=0.5),
}


def preset(name: str) -> AffordanceConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choices: {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class TaskScore:
    task: Task
    score: float

    @property
    def gated(self):
        return self.score == NEG_INF


def f_beat(phi: MetricVector, cfg: AffordanceConfig = AffordanceConfig()) -> TaskScore:
    """Rotational energy available per unit of impact-balancing effort; gated
    on robustness, discharge alignment and holdability in every direction."""
    if (phi.eps < cfg.tau_eps or phi.discharge < cfg.tau_delta
            or math.isinf(phi.effort_hold_sum)):
        return TaskScore(Task.BEAT, NEG_INF)
    if phi.effort_impact == 0.0:
        return TaskScore(Task.BEAT, BEAT_CAP)
    if math.isinf(phi.effort_impact):
        return TaskScore(Task.BEAT, 0.0)
    return TaskScore(Task.BEAT, phi.inertia / phi.effort_impact)


def f_cut(phi: MetricVector, cfg: AffordanceConfig = AffordanceConfig()) -> TaskScore:
    """Transmittable force, gated on robustness and edge-like use geometry."""
    if phi.eps < cfg.tau_eps or phi.use_geometry < cfg.tau_ug:
        return TaskScore(Task.CUT, NEG_INF)
    return TaskScore(Task.CUT, phi.use_force)


def f_pick(phi: MetricVector) -> TaskScore:
    """Negated total holding effort; any unholdable gravity direction gates."""
    s = phi.effort_hold_sum
    if math.isinf(s):
        return TaskScore(Task.PICK, NEG_INF)
    return TaskScore(Task.PICK, -s)


def score(task: Task, phi: MetricVector,
          cfg: AffordanceConfig = AffordanceConfig()) -> TaskScore:
    if task is Task.BEAT:
        return f_beat(phi, cfg)
    if task is Task.CUT:
        return f_cut(phi, cfg)
    return f_pick(phi)


def is_viable(phi: MetricVector, cfg: AffordanceConfig = AffordanceConfig()) -> bool:
    """Strict-inequality filter defining 'good' grasps for learning."""
    return (phi.eps > cfg.viab_eps
            and phi.effort_hold_sum < cfg.viab_eh_sum
            and phi.effort_impact < cfg.viab_ei)


def config_from_dict(cfg: dict | None) -> AffordanceConfig:
    if not cfg:
        return AffordanceConfig()
    base = preset(cfg["preset"]) if "preset" in cfg else AffordanceConfig()
    fields = {k: v for k, v in cfg.items() if k != "preset"}
    known = set(AffordanceConfig.__dataclass_fields__)
    bad = set(fields) - known
    if bad:
        raise ValueError(f"unknown affordance config keys: {sorted(bad)}")
    fields = {k: (-math.inf if v == "-inf" else float(v)) for k, v in fields.items()}
    return replace(base, **fields)
