"""Regenerate the JSON fixture models shipped in src/frictorq/data/."""

import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def diag(*d):
    return [[d[i] if i == j else 0.0 for j in range(len(d))] for i in range(len(d))]


def link(name, mass, inertia, com=(0.0, 0.0, 0.0)):
    return {"name": name, "mass": mass, "inertia": diag(*inertia), "com": list(com)}


def joint(name, parent, child, axis, xyz=(0.0, 0.0, 0.0)):
    return {"name": name, "type": "revolute", "parent": parent, "child": child,
            "axis": list(axis), "origin": {"xyz": list(xyz), "rpy": [0.0, 0.0, 0.0]}}


def actuation(n, gamma=None, ratio=0.01, im=1e-5, kv=1e-4, kc=0.0):
    return {"gamma": gamma or diag(*[ratio] * n), "im": diag(*[im] * n),
            "kv": diag(*[kv] * n), "kc": diag(*[kc] * n), "epsilon": 1e-4}


X, Y, Z = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)


def pendulum2():
    # distal link is balanced on its own axis, so M_s does not depend on s
    return {
        "name": "pendulum2", "floating_base": False, "gravity_norm": 9.81,
        "links": [link("base", 1.0, (1e-3, 1e-3, 1e-3)),
                  link("link1", 0.5, (1.7e-3, 1.7e-3, 1e-4), (0.0, 0.0, -0.1)),
                  link("link2", 0.3, (2e-3, 3e-3, 2e-3))],
        "joints": [joint("j1", "base", "link1", Y),
                   joint("j2", "link1", "link2", Y, (0.0, 0.0, -0.2))],
        "contacts": [],
        "actuation": actuation(2),
        "home": {"s": [0.0, 0.0]},
    }


def arm4():
    gamma = diag(0.01, 0.01, 0.01, 0.01)
    gamma[1][0] = 0.01  # shoulder-style differential coupling
    return {
        "name": "arm4", "floating_base": False, "gravity_norm": 9.81,
        "links": [link("base", 2.0, (1e-2, 1e-2, 1e-2)),
                  link("shoulder", 0.5, (5e-4, 5e-4, 4e-4), (0.0, 0.0, 0.05)),
                  link("upper_arm", 1.0, (7.5e-3, 7.5e-3, 5e-4), (0.0, 0.0, 0.15)),
                  link("forearm", 0.6, (3.2e-3, 3.2e-3, 3e-4), (0.0, 0.0, 0.12)),
                  link("hand", 0.2, (2e-4, 2e-4, 1e-4), (0.0, 0.0, 0.04))],
        "joints": [joint("shoulder_yaw", "base", "shoulder", Z, (0.0, 0.0, 0.1)),
                   joint("shoulder_pitch", "shoulder", "upper_arm", Y, (0.0, 0.0, 0.1)),
                   joint("elbow", "upper_arm", "forearm", Y, (0.0, 0.0, 0.3)),
                   joint("wrist", "forearm", "hand", Y, (0.0, 0.0, 0.25))],
        "contacts": [],
        "actuation": actuation(4, gamma=gamma),
        "home": {"s": [0.0, 0.6, 0.8, 0.3]},
    }


def biped():
    links = [link("pelvis", 5.0, (0.04, 0.03, 0.04)),
             link("torso", 10.0, (0.3, 0.25, 0.1), (0.0, 0.0, 0.2))]
    joints = [joint("torso_pitch", "pelvis", "torso", Y, (0.0, 0.0, 0.05))]
    contacts = []
    for side, y in (("l", 0.1), ("r", -0.1)):
        links += [link(f"{side}_hip_yaw_link", 0.3, (3e-4, 3e-4, 3e-4)),
                  link(f"{side}_hip_roll_link", 0.3, (3e-4, 3e-4, 3e-4)),
                  link(f"{side}_thigh", 2.5, (0.035, 0.035, 0.004), (0.0, 0.0, -0.2)),
                  link(f"{side}_shin", 1.5, (0.02, 0.02, 0.002), (0.0, 0.0, -0.2)),
                  link(f"{side}_ankle_link", 0.2, (1e-4, 1e-4, 1e-4)),
                  link(f"{side}_foot", 0.6, (5e-4, 1.5e-3, 1.5e-3), (0.03, 0.0, -0.03))]
        joints += [joint(f"{side}_hip_yaw", "pelvis", f"{side}_hip_yaw_link", Z, (0.0, y, -0.05)),
                   joint(f"{side}_hip_roll", f"{side}_hip_yaw_link", f"{side}_hip_roll_link", X),
                   joint(f"{side}_hip_pitch", f"{side}_hip_roll_link", f"{side}_thigh", Y),
                   joint(f"{side}_knee", f"{side}_thigh", f"{side}_shin", Y, (0.0, 0.0, -0.4)),
                   joint(f"{side}_ankle_pitch", f"{side}_shin", f"{side}_ankle_link", Y, (0.0, 0.0, -0.4)),
                   joint(f"{side}_ankle_roll", f"{side}_ankle_link", f"{side}_foot", X)]
        contacts.append({"link": f"{side}_foot",
                         "origin": {"xyz": [0.03, 0.0, -0.06], "rpy": [0.0, 0.0, 0.0]},
                         "half_extents": [0.1, 0.05], "mu": 0.6, "f_min": 5.0,
                         "torsional_mu": 0.02})
    leg = [0.0, 0.0, -0.3, 0.6, -0.3, 0.0]
    height = 0.05 + 0.8 * math.cos(0.3) + 0.06
    return {
        "name": "biped", "floating_base": True, "gravity_norm": 9.81,
        "links": links, "joints": joints, "contacts": contacts,
        "actuation": actuation(len(joints), im=5e-6),
        "home": {"s": [0.0] + leg + leg, "base_xyz": [0.0, 0.0, height], "base_rpy": [0.0, 0.0, 0.0]},
    }


def planar_biped5():
    links = [link("pelvis", 4.0, (0.03, 0.03, 0.03)),
             link("torso", 8.0, (0.2, 0.2, 0.05), (0.0, 0.0, 0.2))]
    joints = [joint("torso_pitch", "pelvis", "torso", Y, (0.0, 0.0, 0.05))]
    contacts = []
    for side, y in (("l", 0.1), ("r", -0.1)):
        links += [link(f"{side}_thigh", 2.0, (0.03, 0.03, 0.003), (0.0, 0.0, -0.2)),
                  link(f"{side}_shin", 1.2, (0.02, 0.02, 0.002), (0.0, 0.0, -0.2))]
        joints += [joint(f"{side}_hip", "pelvis", f"{side}_thigh", Y, (0.0, y, -0.05)),
                   joint(f"{side}_knee", f"{side}_thigh", f"{side}_shin", Y, (0.0, 0.0, -0.4))]
        contacts.append({"link": f"{side}_shin", "origin": {"xyz": [0.0, 0.0, -0.42], "rpy": [0.0, 0.0, 0.0]},
                         "half_extents": [0.08, 0.04], "mu": 0.5, "f_min": 0.0})
    return {"name": "planar_biped5", "floating_base": True, "gravity_norm": 9.81,
            "links": links, "joints": joints, "contacts": contacts,
            "actuation": actuation(len(joints))}


def main():
    data = ROOT / "src" / "frictorq" / "data"
    for name, fn in (("pendulum2", pendulum2), ("arm4", arm4), ("biped", biped)):
        (data / f"{name}.json").write_text(json.dumps(fn(), indent=1))
    (ROOT / "tests" / "data" / "planar_biped5.json").write_text(json.dumps(planar_biped5(), indent=1))


if __name__ == "__main__":
    main()
