"""Robot model definition, JSON loading/saving and validation.

A model is a kinematic tree of rigid links connected by revolute joints,
optionally with a free-floating root, plus rectangular contact patches and
the motor/transmission parameters (coupling matrix, rotor inertia, viscous
and Coulomb friction, regularizer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class ModelParseError(ValueError):
    pass


class ModelValidationError(ValueError):
    def __init__(self, report: list[str]):
        self.report = list(report)
        super().__init__("; ".join(self.report))


def rpy_to_matrix(rpy) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw (R = Rz(yaw) Ry(pitch) Rx(roll))."""
    r, p, y = rpy
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    inertia: np.ndarray  # 3x3 about the link CoM, link frame
    com: np.ndarray  # CoM offset in the link frame


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str
    child: str
    axis: np.ndarray
    origin_xyz: np.ndarray
    origin_rpy: np.ndarray
    type: str = "revolute"


@dataclass(frozen=True)
class ContactSpec:
    link: str
    origin_xyz: np.ndarray
    origin_rpy: np.ndarray
    half_extents: np.ndarray  # (lx, ly) of the foot rectangle, m
    mu: float
    f_min: float = 0.0
    torsional_mu: float = 0.02  # |tau_z| <= torsional_mu * f_z, m

    @property
    def rotation(self) -> np.ndarray:
        return rpy_to_matrix(self.origin_rpy)


@dataclass(frozen=True)
class Actuation:
    gamma: np.ndarray
    im: np.ndarray  # n x n diagonal
    kv: np.ndarray
    kc: np.ndarray
    epsilon: float = 1e-4


@dataclass(frozen=True)
class RobotModel:
    name: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    floating_base: bool
    contacts: tuple[ContactSpec, ...]
    actuation: Actuation
    gravity_norm: float = 9.81
    home_s: Optional[np.ndarray] = None
    home_base_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    home_base_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def nc(self) -> int:
        return len(self.contacts)

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    @property
    def gamma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.actuation.gamma)

    def link_index(self, name: str) -> int:
        for i, link in enumerate(self.links):
            if link.name == name:
                return i
        raise KeyError(name)

    def root_link(self) -> str:
        children = {j.child for j in self.joints}
        roots = [lk.name for lk in self.links if lk.name not in children]
        return roots[0]

    def home(self) -> np.ndarray:
        if self.home_s is None:
            return np.zeros(self.n)
        return np.array(self.home_s, dtype=float)


# ---------------------------------------------------------------------------
# validation


def _is_spd(a: np.ndarray) -> bool:
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        return False
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return False
    return True


def _find_cycle(edges: dict[str, list[str]]) -> Optional[list[str]]:
    color: dict[str, int] = {}
    stack: list[str] = []

    def visit(u):
        color[u] = 1
        stack.append(u)
        for v in edges.get(u, []):
            if color.get(v, 0) == 1:
                return stack[stack.index(v):] + [v]
            if color.get(v, 0) == 0:
                found = visit(v)
                if found:
                    return found
        stack.pop()
        color[u] = 2
        return None

    for node in list(edges):
        if color.get(node, 0) == 0:
            found = visit(node)
            if found:
                return found
    return None


def validate(model: RobotModel) -> list[str]:
    """Return a list of invariant violations; empty when the model is valid."""
    report: list[str] = []
    names = [lk.name for lk in model.links]
    name_set = set(names)
    if len(name_set) != len(names):
        report.append("duplicate link names")

    for lk in model.links:
        if not lk.mass > 0:
            report.append(f"link '{lk.name}': mass must be > 0")
        inertia = np.asarray(lk.inertia, dtype=float)
        if inertia.shape != (3, 3) or not _is_spd(inertia):
            report.append(f"link '{lk.name}': inertia must be symmetric positive definite")

    edges: dict[str, list[str]] = {}
    child_count: dict[str, int] = {}
    for j in model.joints:
        if j.type != "revolute":
            report.append(f"joint '{j.name}': unsupported type '{j.type}'")
        for end in (j.parent, j.child):
            if end not in name_set:
                report.append(f"joint '{j.name}': unknown link '{end}'")
        if not np.isclose(np.linalg.norm(j.axis), 1.0, atol=1e-9):
            report.append(f"joint '{j.name}': axis must be a unit vector")
        edges.setdefault(j.parent, []).append(j.child)
        child_count[j.child] = child_count.get(j.child, 0) + 1

    cycle = _find_cycle(edges)
    if cycle:
        report.append("kinematic cycle: " + " -> ".join(cycle))
    for name, count in child_count.items():
        if count > 1:
            report.append(f"link '{name}' has {count} parent joints")
    roots = [nm for nm in names if nm not in child_count]
    if len(roots) != 1:
        report.append(f"kinematic tree must have exactly one root, found {len(roots)}")

    n = model.n
    act = model.actuation
    gamma = np.asarray(act.gamma, dtype=float)
    if gamma.shape != (n, n):
        report.append(f"Gamma must be {n}x{n}")
    elif n and (not np.all(np.isfinite(gamma)) or np.linalg.matrix_rank(gamma) < n
                or not np.isfinite(np.linalg.cond(gamma)) or np.linalg.cond(gamma) > 1e12):
        report.append("Gamma not invertible")

    def diag_check(mat, label, strict):
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (n, n):
            report.append(f"{label} must be {n}x{n}")
            return
        if np.any(mat - np.diag(np.diag(mat))):
            report.append(f"{label} must be diagonal")
        d = np.diag(mat)
        if strict and np.any(d <= 0):
            report.append(f"{label} diagonal entries must be > 0")
        if not strict and np.any(d < 0):
            word = {"Kv": "viscous", "Kc": "Coulomb"}[label]
            report.append(f"{word} coefficient must be ≥ 0")

    diag_check(act.im, "Im", True)
    diag_check(act.kv, "Kv", False)
    diag_check(act.kc, "Kc", False)
    if not act.epsilon > 0:
        report.append("epsilon must be > 0")
    if not model.gravity_norm >= 0:
        report.append("gravity_norm must be >= 0")

    for c in model.contacts:
        if c.link not in name_set:
            report.append(f"contact on unknown link '{c.link}'")
        if not c.mu > 0:
            report.append(f"contact '{c.link}': mu must be > 0")
        if np.any(np.asarray(c.half_extents) <= 0):
            report.append(f"contact '{c.link}': half-extents must be > 0")
        if not c.f_min >= 0:
            report.append(f"contact '{c.link}': f_min must be >= 0")
        if not c.torsional_mu >= 0:
            report.append(f"contact '{c.link}': torsional_mu must be >= 0")
    if model.contacts and not model.floating_base:
        report.append("contacts are only supported on floating-base models")
    if model.home_s is not None and len(model.home_s) != n:
        report.append(f"home configuration must have {n} entries")
    return report


# ---------------------------------------------------------------------------
# JSON I/O


def _matrix(value, n, label):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (n, n):
        raise ModelParseError(f"actuation.{label}: expected {n}x{n} matrix, got shape {arr.shape}")
    return arr


def _origin(d):
    d = d or {}
    return (np.asarray(d.get("xyz", [0.0, 0.0, 0.0]), dtype=float),
            np.asarray(d.get("rpy", [0.0, 0.0, 0.0]), dtype=float))


def model_from_dict(doc: dict) -> RobotModel:
    try:
        links = tuple(
            Link(name=str(lk["name"]), mass=float(lk["mass"]),
                 inertia=np.asarray(lk["inertia"], dtype=float),
                 com=np.asarray(lk.get("com", [0.0, 0.0, 0.0]), dtype=float))
            for lk in doc["links"])
        joints = []
        for j in doc["joints"]:
            xyz, rpy = _origin(j.get("origin"))
            joints.append(Joint(name=str(j["name"]), parent=str(j["parent"]), child=str(j["child"]),
                                axis=np.asarray(j["axis"], dtype=float), origin_xyz=xyz,
                                origin_rpy=rpy, type=str(j.get("type", "revolute"))))
        contacts = []
        for c in doc.get("contacts", []):
            xyz, rpy = _origin(c.get("origin"))
            contacts.append(ContactSpec(
                link=str(c["link"]), origin_xyz=xyz, origin_rpy=rpy,
                half_extents=np.asarray(c["half_extents"], dtype=float), mu=float(c["mu"]),
                f_min=float(c.get("f_min", 0.0)), torsional_mu=float(c.get("torsional_mu", 0.02))))
        n = len(joints)
        act = doc["actuation"]
        actuation = Actuation(
            gamma=_matrix(act["gamma"], n, "gamma"), im=_matrix(act["im"], n, "im"),
            kv=_matrix(act["kv"], n, "kv"), kc=_matrix(act.get("kc", np.zeros(n)), n, "kc"),
            epsilon=float(act.get("epsilon", 1e-4)))
        home = doc.get("home", {})
        model = RobotModel(
            name=str(doc.get("name", "robot")), links=links, joints=tuple(joints),
            floating_base=bool(doc["floating_base"]), contacts=tuple(contacts),
            actuation=actuation, gravity_norm=float(doc.get("gravity_norm", 9.81)),
            home_s=np.asarray(home["s"], dtype=float) if "s" in home else None,
            home_base_xyz=np.asarray(home.get("base_xyz", [0.0, 0.0, 0.0]), dtype=float),
            home_base_rpy=np.asarray(home.get("base_rpy", [0.0, 0.0, 0.0]), dtype=float))
    except ModelParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelParseError(f"malformed model document: {exc!r}") from exc
    return model


def model_to_dict(model: RobotModel) -> dict:
    def origin(xyz, rpy):
        return {"xyz": np.asarray(xyz).tolist(), "rpy": np.asarray(rpy).tolist()}

    act = model.actuation
    doc = {
        "name": model.name,
        "floating_base": model.floating_base,
        "gravity_norm": model.gravity_norm,
        "links": [{"name": lk.name, "mass": lk.mass, "inertia": np.asarray(lk.inertia).tolist(),
                   "com": np.asarray(lk.com).tolist()} for lk in model.links],
        "joints": [{"name": j.name, "type": j.type, "parent": j.parent, "child": j.child,
                    "axis": np.asarray(j.axis).tolist(), "origin": origin(j.origin_xyz, j.origin_rpy)}
                   for j in model.joints],
        "contacts": [{"link": c.link, "origin": origin(c.origin_xyz, c.origin_rpy),
                      "half_extents": np.asarray(c.half_extents).tolist(), "mu": c.mu,
                      "f_min": c.f_min, "torsional_mu": c.torsional_mu} for c in model.contacts],
        "actuation": {"gamma": act.gamma.tolist(), "im": act.im.tolist(), "kv": act.kv.tolist(),
                      "kc": act.kc.tolist(), "epsilon": act.epsilon},
        "home": {"base_xyz": np.asarray(model.home_base_xyz).tolist(),
                 "base_rpy": np.asarray(model.home_base_rpy).tolist()},
    }
    if model.home_s is not None:
        doc["home"]["s"] = np.asarray(model.home_s).tolist()
    return doc


def load_model(path) -> RobotModel:
    """Load and validate a JSON model file.

    Raises FileNotFoundError, ModelParseError or ModelValidationError.
    """
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelParseError(f"{path}: top-level JSON value must be an object")
    model = model_from_dict(doc)
    report = validate(model)
    if report:
        raise ModelValidationError(report)
    return model


def save_model(model: RobotModel, path) -> None:
    # json writes floats with repr, which round-trips exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


FIXTURES = {
    "pendulum2": "pendulum2.json",
    "arm4": "arm4.json",
    "biped": "biped.json",
}


def fixture_path(name: str) -> Path:
    return Path(__file__).parent / "data" / FIXTURES[name]


def load_fixture(name: str) -> RobotModel:
    return load_model(fixture_path(name))
