"""Simplified three-finger gripper and the deterministic grasp policy.

The hand mimics the topology of a three-finger spread-capable gripper: a disk
palm, two fingers whose bases rotate symmetrically by the spread angle, and
one fixed opposing finger. Each finger has two links. The policy is: approach
in a straight line until first contact, then close each finger joint by joint
until contact or joint limit.

Geometry is checked with sampled proxy points along the palm and links against
mesh proximity; sweeps skip grid steps that a Lipschitz bound proves free of
contact, so the result is identical to checking every grid step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Mesh, tangent_basis

CLOSE_STEP_DEG = 0.5
APPROACH_STEP_FACTOR = 1e-3   # of bounding radius
MAX_TRAVEL_FACTOR = 4.0       # of bounding radius
MERGE_DIST = 1e-3


@dataclass(frozen=True)
class Pregrasp:
    """Normalized policy input: [-1,1]^5 x [0,1]."""
    approach_theta: float
    approach_phi: float
    roll: float
    offset_x: float
    offset_y: float
    spread: float

    def __post_init__(self):
        for name in ("approach_theta", "approach_phi", "roll", "offset_x", "offset_y"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [-1, 1]")
        if not 0.0 <= self.spread <= 1.0:
            raise ValueError(f"spread={self.spread} outside [0, 1]")

    def as_array(self):
        return np.array([self.approach_theta, self.approach_phi, self.roll,
                         self.offset_x, self.offset_y, self.spread])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float).reshape(6)
        return cls(*a.tolist())


@dataclass(frozen=True)
class HandModel:
    palm_radius: float = 0.05
    link1: float = 0.07
    link2: float = 0.055
    joint_limit_deg: float = 150.0
    standoff_factor: float = 2.0
    contact_tol: float = 1e-4
    sample_spacing: float = 0.005

    @classmethod
    def from_config(cls, cfg: dict | None):
        if not cfg:
            return cls()
        known = {f for f in cls.__dataclass_fields__}
        bad = set(cfg) - known
        if bad:
            raise ValueError(f"unknown hand config keys: {sorted(bad)}")
        return cls(**cfg)


@dataclass(frozen=True)
class HandPose:
    wrist: np.ndarray        # palm center
    approach: np.ndarray     # unit, points at the object
    e1: np.ndarray           # rolled in-palm basis
    e2: np.ndarray

    def rotated(self, R):
        R = np.asarray(R, dtype=float)
        return HandPose(R @ self.wrist, R @ self.approach, R @ self.e1, R @ self.e2)

    def translated(self, t):
        return HandPose(self.wrist + t, self.approach, self.e1, self.e2)


@dataclass(frozen=True)
class Contact:
    point: np.ndarray
    normal: np.ndarray       # outward from the object
    source: tuple            # ("palm",) or ("link", finger, link)


@dataclass
class Grasp:
    pose: HandPose
    spread_angle: float
    joint_angles: np.ndarray     # (3, 2) closure angles, radians
    contacts: list
    reached_object: bool

    @property
    def wrist(self):
        return self.pose.wrist

    @property
    def roll_axis(self):
        return self.pose.approach


def decode_approach(p0: Pregrasp):
    """Normalized spherical coords -> unit approach direction."""
    theta = (p0.approach_theta + 1.0) / 2.0 * math.pi      # [0, pi]
    phi = p0.approach_phi * math.pi                        # [-pi, pi]
    return np.array([math.sin(theta) * math.cos(phi),
                     math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def pregrasp_pose(p0: Pregrasp, mesh: Mesh, hand: HandModel = HandModel()) -> HandPose:
    """Initial wrist pose: standoff along -approach from the center of mass,
    offset in the perpendicular plane by fractions of the projected
    bounding-box half extents, rolled about the approach axis."""
    a = decode_approach(p0)
    u, v = tangent_basis(a)
    r = p0.roll * math.pi
    e1 = math.cos(r) * u + math.sin(r) * v
    e2 = -math.sin(r) * u + math.cos(r) * v
    half = (mesh.bounding_box[1] - mesh.bounding_box[0]) / 2.0
    h1 = float(np.abs(e1) @ half)
    h2 = float(np.abs(e2) @ half)
    wrist = (mesh.center_of_mass
             - hand.standoff_factor * mesh.bounding_radius * a
             + p0.offset_x * h1 * e1 + p0.offset_y * h2 * e2)
    return HandPose(wrist=wrist, approach=a, e1=e1, e2=e2)


def _linspace_step(length, spacing):
    n = max(2, int(math.ceil(length / spacing)) + 1)
    return np.linspace(0.0, length, n)


class _HandGeometry:
    """Proxy sample points of the hand in a given pose/spread, as functions of
    the joint state."""

    def __init__(self, pose: HandPose, spread_angle: float, hand: HandModel):
        self.pose = pose
        self.hand = hand
        a, e1, e2 = pose.approach, pose.e1, pose.e2
        # palm disk: concentric rings every 2*sample_spacing
        pts = [np.zeros(3)]
        radii = np.arange(1, int(hand.palm_radius / (2 * hand.sample_spacing)) + 1)
        for k in radii:
            r = min(k * 2 * hand.sample_spacing, hand.palm_radius)
            nph = max(6, int(round(2 * math.pi * r / (2 * hand.sample_spacing))))
            ph = 2 * math.pi * np.arange(nph) / nph
            pts.extend(r * np.cos(p) * e1 + r * np.sin(p) * e2 for p in ph)
        self.palm_local = np.array(pts)
        # finger bases: two spread fingers around +e1, fixed opposer at -e1
        gammas = [spread_angle / 2.0, -spread_angle / 2.0, math.pi]
        self.radial = [math.cos(g) * e1 + math.sin(g) * e2 for g in gammas]
        self.s1 = _linspace_step(hand.link1, hand.sample_spacing)
        self.s2 = _linspace_step(hand.link2, hand.sample_spacing)

    def palm_points(self, wrist):
        return wrist + self.palm_local

    def _dirs(self, finger, angle):
        a = self.pose.approach
        r = self.radial[finger]
        return math.cos(angle) * r + math.sin(angle) * a

    def base(self, wrist, finger):
        return wrist + self.hand.palm_radius * self.radial[finger]

    def proximal_points(self, wrist, finger, q1):
        d1 = self._dirs(finger, q1)
        return self.base(wrist, finger) + self.s1[:, None] * d1

    def distal_points(self, wrist, finger, q1, q2):
        d1 = self._dirs(finger, q1)
        knuckle = self.base(wrist, finger) + self.hand.link1 * d1
        d2 = self._dirs(finger, q1 + q2)
        return knuckle + self.s2[:, None] * d2

    def finger_points(self, wrist, finger, q1, q2):
        return np.vstack([self.proximal_points(wrist, finger, q1),
                          self.distal_points(wrist, finger, q1, q2)])

    def all_points(self, wrist, joints):
        parts = [self.palm_points(wrist)]
        for f in range(3):
            parts.append(self.finger_points(wrist, f, joints[f, 0], joints[f, 1]))
        return np.vstack(parts)


def _contact_mask(mesh: Mesh, points, tol, move):
    """(any_contact, per-point mask, dist, tri, surf_points).

    A point is in contact when it is within tol of the surface or inside the
    mesh. The inside test only runs when the proximity bound allows a surface
    crossing since the last checked grid step (callers guarantee steps of at
    most `move`)."""
    dist, tri, q = mesh.closest_points(points, cap_floor=tol + 2.0 * move)
    mask = dist <= tol
    if np.min(dist) <= tol + 2.0 * move:
        near = dist <= tol + 2.0 * move
        inside = np.zeros(len(points), dtype=bool)
        inside[near] = mesh.contains(points[near])
        mask |= inside
    return bool(mask.any()), mask, dist, tri, q


def _sweep(mesh, point_fn, grid, move_per_step, tol):
    """March along a 1-D configuration grid, skipping steps the Lipschitz
    bound proves free. Returns the first grid index in contact, or -1."""
    i = 0
    n = len(grid)
    while i < n:
        pts = point_fn(grid[i])
        hit, mask, dist, tri, q = _contact_mask(mesh, pts, tol, move_per_step)
        if hit:
            return i, mask, tri, q
        skip = int((np.min(dist) - tol) / move_per_step)
        i += max(1, skip)
    return -1, None, None, None


def execute_policy(mesh: Mesh, p0: Pregrasp, hand: HandModel = HandModel()) -> Grasp:
    """Deterministic grasp policy: approach until first contact, then close
    joints finger by finger."""
    pose = pregrasp_pose(p0, mesh, hand)
    return execute_policy_pose(mesh, pose, p0.spread * math.pi, hand)


def execute_policy_pose(mesh: Mesh, pose: HandPose, spread_angle: float,
                        hand: HandModel = HandModel()) -> Grasp:
    geo = _HandGeometry(pose, spread_angle, hand)
    tol = hand.contact_tol
    a = pose.approach

    # phase 1: straight-line approach
    step = APPROACH_STEP_FACTOR * mesh.bounding_radius
    max_travel = MAX_TRAVEL_FACTOR * mesh.bounding_radius
    grid = np.arange(0.0, max_travel + step, step)
    joints0 = np.zeros((3, 2))

    def at_travel(t):
        return geo.all_points(pose.wrist + t * a, joints0)

    idx, mask, tri, q = _sweep(mesh, at_travel, grid, step, tol)
    if idx < 0:
        return Grasp(pose=pose, spread_angle=spread_angle, joint_angles=joints0,
                     contacts=[], reached_object=False)
    wrist = pose.wrist + grid[idx] * a
    final_pose = HandPose(wrist=wrist, approach=a, e1=pose.e1, e2=pose.e2)

    npalm = len(geo.palm_local)
    nfing = len(geo.s1) + len(geo.s2)
    sources = [("palm",)] * npalm
    for f in range(3):
        sources += [("link", f, 1)] * len(geo.s1)
        sources += [("link", f, 2)] * len(geo.s2)

    contacts = []

    def record(mask, tri, q, srcs):
        for j in np.where(mask)[0]:
            contacts.append(Contact(point=q[j].copy(),
                                    normal=mesh.normals[int(tri[j])].copy(),
                                    source=srcs[j]))

    record(mask, tri, q, sources)

    # phase 2: close fingers; proximal sweep moves the whole finger, then the
    # distal joint alone
    dq = math.radians(CLOSE_STEP_DEG)
    limit = math.radians(hand.joint_limit_deg)
    qgrid = np.arange(0.0, limit + dq / 2, dq)
    joints = joints0.copy()
    for f in range(3):
        move1 = (hand.link1 + hand.link2) * dq
        idx1, mask, tri, q = _sweep(
            mesh, lambda ang: geo.finger_points(wrist, f, ang, 0.0),
            qgrid[1:], move1, tol)
        if idx1 >= 0:
            joints[f, 0] = qgrid[1 + idx1]
            srcs = ([("link", f, 1)] * len(geo.s1) + [("link", f, 2)] * len(geo.s2))
            record(mask, tri, q, srcs)
        else:
            joints[f, 0] = limit
        move2 = hand.link2 * dq
        idx2, mask, tri, q = _sweep(
            mesh, lambda ang: geo.distal_points(wrist, f, joints[f, 0], ang),
            qgrid[1:], move2, tol)
        if idx2 >= 0:
            joints[f, 1] = qgrid[1 + idx2]
            record(mask, tri, q, [("link", f, 2)] * len(geo.s2))
        else:
            joints[f, 1] = limit

    merged = _merge_contacts(contacts)
    return Grasp(pose=final_pose, spread_angle=spread_angle, joint_angles=joints,
                 contacts=merged, reached_object=True)


def _merge_contacts(contacts):
    """Drop contacts within MERGE_DIST of an earlier one (deterministic order)."""
    kept = []
    for c in contacts:
        if all(np.linalg.norm(c.point - k.point) > MERGE_DIST for k in kept):
            kept.append(c)
    return kept
