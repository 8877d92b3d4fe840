"""Regenerate src/contactrecon/data/human_default.json."""
import json
from pathlib import Path

J = [
    # name, parent, offset
    ("pelvis", None, [0.0, 0.0, 0.0]),
    ("l_hip", "pelvis", [0.09, -0.08, 0.0]),
    ("r_hip", "pelvis", [-0.09, -0.08, 0.0]),
    ("spine1", "pelvis", [0.0, 0.11, -0.01]),
    ("l_knee", "l_hip", [0.0, -0.40, 0.0]),
    ("r_knee", "r_hip", [0.0, -0.40, 0.0]),
    ("spine2", "spine1", [0.0, 0.13, 0.01]),
    ("l_ankle", "l_knee", [0.0, -0.40, 0.0]),
    ("r_ankle", "r_knee", [0.0, -0.40, 0.0]),
    ("spine3", "spine2", [0.0, 0.05, 0.0]),
    ("l_foot", "l_ankle", [0.0, -0.05, 0.12]),
    ("r_foot", "r_ankle", [0.0, -0.05, 0.12]),
    ("neck", "spine3", [0.0, 0.21, -0.02]),
    ("l_collar", "spine3", [0.08, 0.12, -0.01]),
    ("r_collar", "spine3", [-0.08, 0.12, -0.01]),
    ("head", "neck", [0.0, 0.09, 0.05]),
    ("l_shoulder", "l_collar", [0.11, 0.03, -0.01]),
    ("r_shoulder", "r_collar", [-0.11, 0.03, -0.01]),
    ("l_elbow", "l_shoulder", [0.26, 0.0, 0.0]),
    ("r_elbow", "r_shoulder", [-0.26, 0.0, 0.0]),
    ("l_wrist", "l_elbow", [0.25, 0.0, 0.0]),
    ("r_wrist", "r_elbow", [-0.25, 0.0, 0.0]),
    ("l_hand", "l_wrist", [0.08, 0.0, 0.0]),
    ("r_hand", "r_wrist", [-0.08, 0.0, 0.0]),
]


def seg(d, r, frac):
    return {"mass_fraction": frac, "com": [x / 2 for x in d],
            "shape": {"type": "cylinder", "radius": r, "length": sum(x * x for x in d) ** 0.5,
                      "axis": [x / (sum(y * y for y in d) ** 0.5) for x in d]}}


def box(size, com, frac):
    return {"mass_fraction": frac, "com": com, "shape": {"type": "box", "size": size}}


off = {n: o for n, _, o in J}
links = {
    "pelvis": box([0.28, 0.12, 0.18], [0.0, 0.0, 0.0], 0.142),
    "l_hip": seg(off["l_knee"], 0.065, 0.10),
    "r_hip": seg(off["r_knee"], 0.065, 0.10),
    "spine1": box([0.26, 0.13, 0.16], [0.0, 0.065, 0.0], 0.07),
    "l_knee": seg(off["l_ankle"], 0.045, 0.0465),
    "r_knee": seg(off["r_ankle"], 0.045, 0.0465),
    "spine2": box([0.28, 0.10, 0.17], [0.0, 0.03, 0.0], 0.08),
    "l_ankle": box([0.08, 0.07, 0.22], [0.0, -0.04, 0.03], 0.0145),
    "r_ankle": box([0.08, 0.07, 0.22], [0.0, -0.04, 0.03], 0.0145),
    "spine3": box([0.32, 0.20, 0.18], [0.0, 0.10, 0.0], 0.15),
    "l_foot": box([0.08, 0.04, 0.06], [0.0, 0.0, 0.03], 0.002),
    "r_foot": box([0.08, 0.04, 0.06], [0.0, 0.0, 0.03], 0.002),
    "neck": seg(off["head"], 0.05, 0.014),
    "l_collar": seg(off["l_shoulder"], 0.04, 0.01),
    "r_collar": seg(off["r_shoulder"], 0.04, 0.01),
    "head": {"mass_fraction": 0.068, "com": [0.0, 0.08, 0.02], "shape": {"type": "sphere", "radius": 0.1}},
    "l_shoulder": seg(off["l_elbow"], 0.045, 0.027),
    "r_shoulder": seg(off["r_elbow"], 0.045, 0.027),
    "l_elbow": seg(off["l_wrist"], 0.035, 0.016),
    "r_elbow": seg(off["r_wrist"], 0.035, 0.016),
    "l_wrist": seg(off["l_hand"], 0.04, 0.006),
    "r_wrist": seg(off["r_hand"], 0.04, 0.006),
    "l_hand": box([0.08, 0.03, 0.08], [0.04, 0.0, 0.0], 0.004),
    "r_hand": box([0.08, 0.03, 0.08], [-0.04, 0.0, 0.0], 0.004),
}

markers = [
    ("nose", "head", [0.0, 0.06, 0.11]),
    ("neck", "neck", [0.0, 0.0, 0.0]),
    ("r_shoulder", "r_shoulder", [0.0, 0.0, 0.0]),
    ("r_elbow", "r_elbow", [0.0, 0.0, 0.0]),
    ("r_wrist", "r_wrist", [0.0, 0.0, 0.0]),
    ("l_shoulder", "l_shoulder", [0.0, 0.0, 0.0]),
    ("l_elbow", "l_elbow", [0.0, 0.0, 0.0]),
    ("l_wrist", "l_wrist", [0.0, 0.0, 0.0]),
    ("r_hip", "r_hip", [0.0, 0.0, 0.0]),
    ("r_knee", "r_knee", [0.0, 0.0, 0.0]),
    ("r_ankle", "r_ankle", [0.0, 0.0, 0.0]),
    ("l_hip", "l_hip", [0.0, 0.0, 0.0]),
    ("l_knee", "l_knee", [0.0, 0.0, 0.0]),
    ("l_ankle", "l_ankle", [0.0, 0.0, 0.0]),
    ("r_eye", "head", [-0.035, 0.09, 0.09]),
    ("l_eye", "head", [0.035, 0.09, 0.09]),
    ("r_ear", "head", [-0.075, 0.06, 0.0]),
    ("l_ear", "head", [0.075, 0.06, 0.0]),
]

spec = {
    "schema_version": "1.0",
    "total_mass": 74.6,
    "joints": [{"name": n, "parent": p, "offset": o, "kind": "free" if p is None else "spherical"}
               for n, p, o in J],
    "links": [dict(joint=n, **links[n]) for n, _, _ in J],
    "markers": [{"name": n, "joint": j, "offset": o} for n, j, o in markers],
    "sole": {"joints": ["l_ankle", "r_ankle"], "length": 0.2, "width": 0.08,
             "vertical_offset": -0.08, "forward_offset": 0.0},
}
out = Path(__file__).resolve().parents[1] / "src" / "contactrecon" / "data" / "human_default.json"
out.write_text(json.dumps(spec, indent=1) + "\n")
print(out)
