"""Friction-cone wrench machinery and the seven basic grasp metrics.

All metrics are pure functions of (mesh, grasp, use point, config); torques
are scaled by 1/bounding_radius so the wrench-space metrics are invariant to
uniform object scale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from . import _kernels, lpsolve
from .geom import Mesh, Ray, tangent_basis
from .hand import Grasp


class NoContacts(Exception):
    pass


GRAVITY_DIRS = np.array([
    [1, 0, 0], [-1, 0, 0],
    [0, 1, 0], [0, -1, 0],
    [0, 0, 1], [0, 0, -1],
], dtype=float)


@dataclass(frozen=True)
class FrictionModel:
    mu: float = 0.4
    cone_edges: int = 8

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.cone_edges < 4:
            raise ValueError("cone_edges must be >= 4")


@dataclass(frozen=True)
class MetricsConfig:
    friction: FrictionModel = FrictionModel()
    kappa: float = 1.0                   # impact torque per unit inertia
    epsilon_directions: int = 4096
    epsilon_refine_starts: int = 32
    wrist_axis: str = "roll"             # "roll" (approach) or "pitch" (in-palm)

    @classmethod
    def from_config(cls, cfg: dict | None):
        if not cfg:
            return cls()
        fm = FrictionModel(mu=cfg.get("mu", 0.4),
                           cone_edges=cfg.get("cone_edges", 8))
        return cls(friction=fm,
                   kappa=cfg.get("kappa", 1.0),
                   epsilon_directions=cfg.get("epsilon_directions", 4096),
                   epsilon_refine_starts=cfg.get("epsilon_refine_starts", 32),
                   wrist_axis=cfg.get("wrist_axis", "roll"))


@dataclass(frozen=True)
class UsePoint:
    point: np.ndarray
    inward_normal: np.ndarray
    triangle_index: int


@dataclass
class WrenchSet:
    """Primitive contact wrenches: m linearized cone edges per contact.

    wrenches[k] = (f_k, lam * (p_i - com) x f_k) with unit normal component
    per edge force; contact_index[k] maps edges back to contacts.
    """
    wrenches: np.ndarray       # (K, 6)
    contact_index: np.ndarray  # (K,)
    n_contacts: int
    torque_scale: float


@dataclass(frozen=True)
class MetricVector:
    eps: float
    inertia: float
    effort_impact: float
    effort_hold: tuple          # 6 values, may contain inf
    discharge: float
    use_force: float
    use_geometry: float

    def as_array(self):
        return np.array([self.eps, self.inertia, self.effort_impact,
                         *self.effort_hold, self.discharge, self.use_force,
                         self.use_geometry])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).reshape(12)
        return cls(eps=float(a[0]), inertia=float(a[1]), effort_impact=float(a[2]),
                   effort_hold=tuple(float(x) for x in a[3:9]),
                   discharge=float(a[9]), use_force=float(a[10]),
                   use_geometry=float(a[11]))

    @property
    def effort_hold_sum(self):
        return float(sum(self.effort_hold))


def cone_edge_forces(inward_normal, fm: FrictionModel):
    """Linearized Coulomb cone edges with unit normal component."""
    n = np.asarray(inward_normal, dtype=float)
    if fm.mu == 0.0:
        return n[None, :]
    u, v = tangent_basis(n)
    ang = 2.0 * math.pi * np.arange(fm.cone_edges) / fm.cone_edges
    return n[None, :] + fm.mu * (np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * v)


def cone_wrenches(grasp: Grasp, mesh: Mesh, fm: FrictionModel = FrictionModel()) -> WrenchSet:
    if not grasp.reached_object or not grasp.contacts:
        raise NoContacts("grasp has no contacts")
    lam = 1.0 / mesh.bounding_radius
    com = mesh.center_of_mass
    rows = []
    idx = []
    for i, c in enumerate(grasp.contacts):
        forces = cone_edge_forces(-c.normal, fm)
        arm = c.point - com
        torques = lam * np.cross(np.broadcast_to(arm, forces.shape), forces)
        rows.append(np.hstack([forces, torques]))
        idx.extend([i] * len(forces))
    return WrenchSet(wrenches=np.vstack(rows), contact_index=np.array(idx),
                     n_contacts=len(grasp.contacts), torque_scale=lam)


# -- epsilon (wrench-space robustness) ---------------------------------------

_DIR_CACHE = {}


def _sphere_directions(n, dim=6, seed=12345):
    key = (n, dim, seed)
    cached = _DIR_CACHE.get(key)
    if cached is not None:
        return cached
    sob = qmc.Sobol(d=dim, scramble=True, seed=seed)
    x = sob.random(n)
    from scipy.special import ndtri
    g = ndtri(np.clip(x, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g.setflags(write=False)
    _DIR_CACHE[key] = g
    return g


def epsilon_quality(ws: WrenchSet, cfg: MetricsConfig = MetricsConfig()):
    """Support-function minimization: eps = min_{|u|=1} max_k w_k . u,
    clamped at zero (negative support means no force closure).

    Returns (eps, force_closure)."""
    W = ws.wrenches
    if len(W) == 0:
        raise NoContacts("empty wrench set")
    # the support function depends only on the point set, so drop duplicate
    # wrenches; this makes repeated contacts exactly invariant
    W = np.unique(W, axis=0)
    U = _sphere_directions(cfg.epsilon_directions)
    # the signed coordinate axes catch the exact zero-support directions of
    # degenerate contact sets (e.g. two contacts collinear with the com)
    axes = np.vstack([np.eye(6), -np.eye(6)])
    U = np.vstack([U, axes])
    support = W @ U.T                       # (K, N)
    vals = support.max(axis=0)
    order = np.argsort(vals)
    best = float(vals[order[0]])
    starts = np.ascontiguousarray(U[order[:cfg.epsilon_refine_starts]])
    if len(starts):
        refined = _kernels.refine_support_min(np.ascontiguousarray(W),
                                              starts, 60)
        best = min(best, float(refined))
    return (max(0.0, best), best > 0.0)


# -- scalar metrics -----------------------------------------------------------

def wrist_rotation_axis(grasp: Grasp, cfg: MetricsConfig = MetricsConfig()):
    return grasp.pose.e1 if cfg.wrist_axis == "pitch" else grasp.pose.approach


def rotational_inertia(mesh: Mesh, grasp: Grasp, cfg: MetricsConfig = MetricsConfig()):
    """Unit-density inertia of the object about the wrist rotation axis."""
    a = wrist_rotation_axis(grasp, cfg)
    rel = mesh.center_of_mass - grasp.wrist
    d2 = float(rel @ rel - (rel @ a) ** 2)
    return float(a @ mesh.inertia_tensor @ a + mesh.volume * max(0.0, d2))


def _min_force_lp(W, extra_cols, rhs):
    """min sum(alpha) s.t. W^T alpha + extra_cols @ beta = rhs, alpha,beta >= 0.
    Returns the optimal objective, or inf when infeasible."""
    K = W.shape[0]
    cols = [W.T]
    nb = 0
    if extra_cols is not None:
        cols.append(extra_cols)
        nb = extra_cols.shape[1]
    A = np.ascontiguousarray(np.hstack(cols))
    c = np.concatenate([np.ones(K), np.zeros(nb)])
    rhs = np.ascontiguousarray(rhs, dtype=float)
    status, obj = _kernels.equality_simplex_min(A, rhs, c)
    if status == 3:
        # The fast solver hit its pivot cap on a degenerate instance;
        # re-solve with the slower but stall-resistant solver.
        prob = lpsolve.LinearProgram(
            c=c, A=A, relations=["="] * A.shape[0], b=rhs)
        res = lpsolve.solve(prob)
        return float(res.objective) if res.status == lpsolve.Status.OPTIMAL else math.inf
    return float(obj) if status == 0 else math.inf


def effort_hold(ws: WrenchSet) -> tuple:
    """Six minimum total contact forces balancing unit gravity along the
    object-frame axes (+x,-x,+y,-y,+z,-z); inf where infeasible."""
    out = []
    for g in GRAVITY_DIRS:
        w_g = np.concatenate([g, np.zeros(3)])     # applied at com: no torque
        out.append(_min_force_lp(ws.wrenches, None, -w_g))
    return tuple(out)


def use_wrench(ws_scale, com, use: UsePoint):
    n = use.inward_normal
    return np.concatenate([n, ws_scale * np.cross(use.point - com, n)])


def effort_impact(ws: WrenchSet, grasp: Grasp, use: UsePoint, inertia: float,
                  mesh: Mesh, cfg: MetricsConfig = MetricsConfig()) -> float:
    """Minimum total hand force balancing the inertial torque of a wrist
    rotation, helped by an unpenalized push on the use location."""
    axis = wrist_rotation_axis(grasp, cfg)
    tau = cfg.kappa * inertia * axis
    ext = np.concatenate([np.zeros(3), ws.torque_scale * tau])
    wu = use_wrench(ws.torque_scale, mesh.center_of_mass, use)
    return _min_force_lp(ws.wrenches, wu[:, None], -ext)


def discharge_efficiency(grasp: Grasp, use: UsePoint,
                         cfg: MetricsConfig = MetricsConfig()) -> float:
    """Alignment of the wrist inertial torque with the torque a push on the
    use point generates about the wrist; clipped to [0, 1]."""
    axis = wrist_rotation_axis(grasp, cfg)
    tau_use = np.cross(use.point - grasp.wrist, use.inward_normal)
    nrm = np.linalg.norm(tau_use)
    if nrm < 1e-12:
        return 0.0
    return float(min(1.0, max(0.0, axis @ (tau_use / nrm))))


def force_to_use(ws: WrenchSet, use: UsePoint, mesh: Mesh) -> float:
    """Max force transmittable to the use point along its inward normal with
    per-contact normal forces capped at 1."""
    W = ws.wrenches
    K = W.shape[0]
    wu = use_wrench(ws.torque_scale, mesh.center_of_mass, use)
    nvar = K + 1
    A_eq = np.hstack([W.T, wu[:, None]])
    # per-contact normal force (sum of edge weights) <= 1
    A_cap = np.zeros((ws.n_contacts, nvar))
    for i in range(ws.n_contacts):
        A_cap[i, :K] = (ws.contact_index == i).astype(float)
    A = np.vstack([A_eq, A_cap])
    b = np.concatenate([np.zeros(6), np.ones(ws.n_contacts)])
    rel = ["="] * 6 + ["<="] * ws.n_contacts
    c = np.zeros(nvar)
    c[-1] = 1.0
    res = lpsolve.solve(lpsolve.LinearProgram(c=c, A=A, relations=rel, b=b,
                                              sense="max"))
    if res.status == lpsolve.Status.OPTIMAL:
        return float(max(0.0, res.objective))
    return math.inf   # unbounded only for a degenerate use wrench


def use_geometry(mesh: Mesh, use: UsePoint) -> float:
    """Edge-ness of the use location: squared principal-curvature spread."""
    from .geom import SurfaceHit
    hit = SurfaceHit(point=use.point, triangle_index=use.triangle_index,
                     distance=0.0, normal=-use.inward_normal)
    l1, l2, ok = mesh.local_quadric_curvatures(hit)
    if not ok:
        return 0.0
    return float((l1 - l2) ** 2)


def compute_phi(mesh: Mesh, grasp: Grasp, use: UsePoint | None,
                cfg: MetricsConfig = MetricsConfig()) -> MetricVector:
    """Assemble the full metric vector.

    No contacts: eps=0, efforts inf, delta and use force 0 (geometry metrics
    still computed). use=None (failed direction mapping): the use-dependent
    entries delta, U_tau, U_g are zeroed and the impact effort drops its
    use-point helper force.
    """
    inertia = rotational_inertia(mesh, grasp, cfg)
    u_g = use_geometry(mesh, use) if use is not None else 0.0
    if not grasp.reached_object or not grasp.contacts:
        return MetricVector(eps=0.0, inertia=inertia, effort_impact=math.inf,
                            effort_hold=(math.inf,) * 6, discharge=0.0,
                            use_force=0.0, use_geometry=u_g)
    ws = cone_wrenches(grasp, mesh, cfg.friction)
    eps, _ = epsilon_quality(ws, cfg)
    e_h = effort_hold(ws)
    if use is not None:
        e_i = effort_impact(ws, grasp, use, inertia, mesh, cfg)
        delta = discharge_efficiency(grasp, use, cfg)
        u_tau = force_to_use(ws, use, mesh)
    else:
        axis = wrist_rotation_axis(grasp, cfg)
        ext = np.concatenate([np.zeros(3),
                              ws.torque_scale * cfg.kappa * inertia * axis])
        e_i = _min_force_lp(ws.wrenches, None, -ext)
        delta = 0.0
        u_tau = 0.0
    return MetricVector(eps=eps, inertia=inertia, effort_impact=e_i,
                        effort_hold=e_h, discharge=delta, use_force=u_tau,
                        use_geometry=u_g)
