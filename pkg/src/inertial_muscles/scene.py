"""YAML scene files.

Positions in a scene are given in *link* frames (joint at the origin); they
are converted to body (COM) frames on load. Every error names the file, line
and field that caused it, and a malformed scene never yields a model.

Minimal example::

    format_version: 1
    gravity: [0, -9.81, 0]
    bodies:
      - {name: upper, mass: 1.0, inertia: [0.013, 0.0001, 0.013], com: [0, -0.2, 0]}
    joints:
      - {body: upper, kind: revolute, parent: world, axis: [0, 0, 1]}
    muscles:
      - name: m0
        type: I
        origin: {body: world, pos: [0.05, 0.0, 0]}
        insertion: {body: upper, pos: [0.02, -0.3, 0]}
        mass: 0.3
        mass_points: 20
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import Model
from .hill import MusculotendonActuator
from .integrators import canonical
from .muscles import Musculotendon
from .paths import Anchor, MassPointLayout
from .skeleton import WORLD, Body, Joint, ReducedState, Skeleton
from .spatial import Transform, exp_so3
from .wrap.cylinder import WrapCylinder, parse_side
from .wrap.mlp import MLPWeights

FORMAT_VERSION = 1
SCENE_DIR = Path(__file__).parent / "scenes"


class SceneError(ValueError):
    def __init__(self, message, source=None, line=None, field=None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        what = f"{field}: " if field else ""
        super().__init__(f"{where}{what}{message}")
        self.source, self.line, self.field = source, line, field


# -- YAML with line numbers ------------------------------------------------------


class _Map(dict):
    line = None
    key_lines: dict


class _Seq(list):
    line = None
    item_lines: list


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for k_node, v_node in node.value:
        key = loader.construct_object(k_node, deep=True)
        if key in out:
            raise SceneError(f"duplicate key {key!r}", loader.name, k_node.start_mark.line + 1)
        out[key] = loader.construct_object(v_node, deep=True)
        out.key_lines[key] = v_node.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _Seq(loader.construct_object(n, deep=True) for n in node.value)
    out.line = node.start_mark.line + 1
    out.item_lines = [n.start_mark.line + 1 for n in node.value]
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


class _Node:
    """A mapping in the scene plus where it came from, for error reporting."""

    def __init__(self, data, source, path, line=None):
        self.data, self.source, self.path = data, source, path
        self.line = getattr(data, "line", None) if line is None else line

    def error(self, message, key=None):
        line = self.line
        if key is not None and isinstance(self.data, _Map):
            line = self.data.key_lines.get(key, line)
        fld = self.path if key is None else (f"{self.path}.{key}" if self.path else key)
        return SceneError(message, self.source, line, fld)

    def mapping(self):
        if not isinstance(self.data, dict):
            raise self.error("expected a mapping")
        return self

    def has(self, key):
        return key in self.data

    def get(self, key, default=None, required=False):
        self.mapping()
        if key not in self.data:
            if required:
                raise self.error(f"missing required field {key!r}")
            return default
        return self.data[key]

    def child(self, key, required=True):
        v = self.get(key, required=required)
        if v is None:
            return None
        return _Node(v, self.source, f"{self.path}.{key}" if self.path else key,
                     self.data.key_lines.get(key) if isinstance(self.data, _Map) else None)

    def items(self, key, required=False):
        v = self.get(key, [] if not required else None, required)
        if not isinstance(v, list):
            raise self.error("expected a list", key)
        lines = getattr(v, "item_lines", [None] * len(v))
        base = f"{self.path}.{key}" if self.path else key
        return [_Node(x, self.source, f"{base}[{i}]", ln) for i, (x, ln) in enumerate(zip(v, lines))]

    def number(self, key, default=None, required=False, lo=-math.inf, hi=math.inf, positive=False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.error(f"expected a number, got {v!r}", key)
        v = float(v)
        if not math.isfinite(v) or not lo <= v <= hi or (positive and v <= 0.0):
            bound = "positive" if positive else f"in [{lo}, {hi}]"
            raise self.error(f"value {v} must be finite and {bound}", key)
        return v

    def vector(self, key, size=3, default=None, required=False):
        v = self.get(key, default, required)
        if v is None:
            return None
        try:
            arr = np.asarray(v, dtype=float)
        except (TypeError, ValueError):
            raise self.error(f"expected {size} numbers", key) from None
        if arr.shape != (size,) or not np.all(np.isfinite(arr)):
            raise self.error(f"expected {size} finite numbers, got {v!r}", key)
        return arr

    def string(self, key, default=None, required=False, choices=None):
        v = self.get(key, default, required)
        if v is None:
            return None
        v = str(v)
        if choices is not None and v not in choices:
            raise self.error(f"expected one of {sorted(choices)}, got {v!r}", key)
        return v


# -- scene ------------------------------------------------------------------------


@dataclass
class SimulationDefaults:
    integrator: str = "sdirk2"
    dt: float = 1e-3
    steps: int = 1000


@dataclass
class ReachSpec:
    effector: Anchor
    target: np.ndarray
    horizon: float
    dt: float
    integrator: str = "forward_euler"


@dataclass
class Scene:
    name: str
    model: Model
    initial_state: ReducedState
    defaults: SimulationDefaults
    body_names: list[str]
    joint_names: list[str]
    source: str | None = None
    reach: ReachSpec | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dof(self) -> int:
        return self.model.dof

    def coordinate_names(self) -> list[str]:
        out = []
        sk = self.model.skeleton
        for name, j, sl in zip(self.joint_names, sk.joints, sk.dof_index):
            n = sl.stop - sl.start
            out += [name] if n == 1 else [f"{name}_{c}" for c in "xyz"[:n]]
        return out


def _rotation(node: _Node, key="rotation"):
    """Rotation given as an exponential-coordinate vector (radians)."""
    w = node.vector(key, default=np.zeros(3))
    return exp_so3(w)


def _inertia(node: _Node):
    v = node.get("inertia", required=True)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise node.error("expected 3 diagonal entries or a 3x3 matrix", "inertia") from None
    if arr.shape == (3,):
        arr = np.diag(arr)
    if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
        raise node.error("expected 3 diagonal entries or a 3x3 matrix", "inertia")
    return arr


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read scene: {exc.strerror}", str(path)) from None
    return parse_scene(text, source=str(path), base_dir=path.parent)


def parse_scene(text: str, source: str = "<scene>", base_dir=None) -> Scene:
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    loader = _LineLoader(text)
    loader.name = source
    try:
        data = loader.get_single_data()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SceneError(f"invalid YAML: {getattr(exc, 'problem', exc)}", source,
                         None if mark is None else mark.line + 1) from None
    finally:
        loader.dispose()
    root = _Node(data, source, "", 1).mapping()

    version = root.get("format_version", required=True)
    if version != FORMAT_VERSION:
        raise root.error(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})",
                         "format_version")
    known = {"format_version", "name", "description", "gravity", "bodies", "joints", "muscles",
             "initial_state", "simulation", "reach"}
    for key in root.data:
        if key not in known:
            raise root.error(f"unknown top-level field {key!r}", key)

    # bodies
    bodies, names = [], {}
    com_link = []
    for bn in root.items("bodies", required=True):
        bn.mapping()
        name = bn.string("name", required=True)
        if name in names or name == "world":
            raise bn.error(f"duplicate or reserved body name {name!r}", "name")
        mass = bn.number("mass", required=True, lo=0.0)
        inertia = _inertia(bn)
        if not np.allclose(inertia, inertia.T) or np.min(np.linalg.eigvalsh(inertia)) < -1e-12:
            raise bn.error("inertia must be symmetric positive semidefinite", "inertia")
        com = bn.vector("com", default=np.zeros(3))
        names[name] = len(bodies)
        com_link.append(com)
        bodies.append(Body(name, mass, inertia, com, bn.string("mesh")))
    if not bodies:
        raise root.error("scene needs at least one body", "bodies")

    def body_ref(node: _Node, key="body"):
        b = node.string(key, required=True)
        if b == "world":
            return WORLD
        if b not in names:
            raise node.error(f"unknown body {b!r}", key)
        return names[b]

    def anchor(node: _Node) -> Anchor:
        node.mapping()
        b = body_ref(node)
        pos = node.vector("pos", required=True)
        return Anchor(b, pos if b == WORLD else pos - com_link[b])

    # joints: exactly one per body, in body order
    joints: list[Joint | None] = [None] * len(bodies)
    joint_names = [""] * len(bodies)
    for jn in root.items("joints", required=True):
        jn.mapping()
        b = body_ref(jn)
        if b == WORLD:
            raise jn.error("a joint cannot move the world", "body")
        if joints[b] is not None:
            raise jn.error(f"body {bodies[b].name!r} already has a joint", "body")
        parent = WORLD if jn.get("parent", "world") == "world" else body_ref(jn, "parent")
        if parent != WORLD and parent >= b:
            raise jn.error("parent must be listed before its child in bodies", "parent")
        kind = jn.string("kind", required=True, choices={"revolute", "spherical", "fixed"})
        axis = jn.vector("axis", default=np.array([0.0, 0.0, 1.0]))
        n_axis = np.linalg.norm(axis)
        if kind == "revolute" and abs(n_axis - 1.0) > 1e-12:
            if n_axis == 0.0:
                raise jn.error("axis must be nonzero", "axis")
            axis = axis / n_axis
        rest = Transform(_rotation(jn), jn.vector("origin", default=np.zeros(3)))
        joints[b] = Joint(kind, parent, rest, axis, jn.number("damping", default=0.0, lo=0.0))
        joint_names[b] = jn.string("name", default=bodies[b].name)
    for i, j in enumerate(joints):
        if j is None:
            raise root.error(f"body {bodies[i].name!r} has no joint", "joints")
    skeleton = Skeleton(bodies, joints)

    # initial state
    q0, v0 = np.zeros(skeleton.dof), np.zeros(skeleton.dof)
    if root.has("initial_state"):
        st = root.child("initial_state").mapping()
        q0 = st.vector("q", size=skeleton.dof, default=q0)
        v0 = st.vector("qdot", size=skeleton.dof, default=v0)
    q_rest = np.zeros(skeleton.dof)

    muscles = []
    for mn in root.items("muscles"):
        muscles.append(_parse_muscle(mn, anchor, body_ref, com_link, base_dir))
    seen = set()
    for mn, m in zip(root.items("muscles"), muscles):
        if m.name in seen:
            raise mn.error(f"duplicate muscle name {m.name!r}", "name")
        seen.add(m.name)

    gravity = root.vector("gravity", default=np.array([0.0, -9.81, 0.0]))
    try:
        model = Model(skeleton, muscles, gravity, q_rest)
    except ValueError as exc:
        raise root.error(str(exc), "muscles") from None

    defaults = SimulationDefaults()
    if root.has("simulation"):
        sn = root.child("simulation").mapping()
        integ = sn.string("integrator", default=defaults.integrator)
        try:
            integ = canonical(integ)
        except ValueError as exc:
            raise sn.error(str(exc), "integrator") from None
        steps = sn.get("steps", defaults.steps)
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 0:
            raise sn.error("steps must be a non-negative integer", "steps")
        defaults = SimulationDefaults(integ, sn.number("dt", default=defaults.dt, positive=True), steps)

    reach = None
    if root.has("reach"):
        rn = root.child("reach").mapping()
        integ = rn.string("integrator", default="forward_euler")
        try:
            integ = canonical(integ)
        except ValueError as exc:
            raise rn.error(str(exc), "integrator") from None
        reach = ReachSpec(anchor(rn.child("effector")), rn.vector("target", required=True),
                          rn.number("horizon", required=True, positive=True),
                          rn.number("dt", default=1e-3, positive=True), integ)

    return Scene(
        name=root.string("name", default=Path(source).stem),
        model=model,
        initial_state=ReducedState(q0, v0),
        defaults=defaults,
        body_names=[b.name for b in bodies],
        joint_names=joint_names,
        source=source,
        reach=reach,
        meta={"description": root.get("description", "")},
    )


def _parse_muscle(mn: _Node, anchor, body_ref, com_link, base_dir: Path) -> Musculotendon:
    mn.mapping()
    name = mn.string("name", required=True)
    kind = mn.string("type", required=True, choices={"I", "II", "III"})
    origin = anchor(mn.child("origin"))
    insertion = anchor(mn.child("insertion"))
    via = [anchor(v) for v in mn.items("via_points")]
    if kind == "II" and not via:
        raise mn.error("Type II muscles need at least one via point", "via_points")
    if kind != "II" and via:
        raise mn.error(f"Type {kind} muscles take no via points", "via_points")

    if mn.has("layout"):
        ln = mn.child("layout").mapping()
        try:
            layout = MassPointLayout(ln.get("alphas", required=True), ln.get("masses", required=True))
        except (ValueError, TypeError) as exc:
            raise ln.error(str(exc)) from None
    else:
        mass = mn.number("mass", required=True, lo=0.0)
        count = mn.get("mass_points", 20)
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise mn.error("mass_points must be a positive integer", "mass_points")
        layout = MassPointLayout.uniform(count, mass)

    cylinder = weights = None
    if kind == "III":
        wn = mn.child("wrap").mapping()
        b = body_ref(wn)
        center = wn.vector("origin", default=np.zeros(3))
        if b != WORLD:
            center = center - com_link[b]
        surf = Transform(_rotation(wn), center)
        try:
            side = parse_side(wn.get("side", required=True))
        except ValueError as exc:
            raise wn.error(str(exc), "side") from None
        cylinder = WrapCylinder(b, surf, wn.number("radius", required=True, positive=True), side)
        ref = mn.string("weights", required=True)
        wpath = _resolve_weights(ref, base_dir)
        if wpath is None:
            raise mn.error(f"weights file {ref!r} not found", "weights")
        try:
            weights = MLPWeights.load(wpath)
        except (OSError, ValueError, KeyError) as exc:
            raise mn.error(f"cannot load weights {str(wpath)!r}: {exc}", "weights") from None
    elif mn.has("wrap"):
        raise mn.error("only Type III muscles take a wrap surface", "wrap")

    actuator = None
    if mn.has("hill"):
        hn = mn.child("hill").mapping()
        try:
            actuator = MusculotendonActuator(
                hn.number("max_isometric_force", required=True, positive=True),
                hn.number("optimal_fiber_length", required=True, positive=True),
                hn.number("tendon_slack_length", default=0.0, lo=0.0),
                hn.number("activation", default=0.0, lo=0.0, hi=1.0),
                hn.number("activation_time_constant", default=0.01, positive=True),
                hn.number("deactivation_time_constant", default=0.04, positive=True),
                hn.number("damping", default=0.1, lo=0.0),
                hn.number("max_contraction_velocity", default=10.0, positive=True),
            )
        except ValueError as exc:
            raise hn.error(str(exc)) from None

    lump = mn.number("lump_to_origin", default=0.5, lo=0.0, hi=1.0)
    try:
        return Musculotendon(name, kind, origin, insertion, layout, via, cylinder, weights, actuator, lump)
    except ValueError as exc:
        raise mn.error(str(exc)) from None


def _resolve_weights(ref: str, base_dir: Path):
    """Weights paths resolve relative to the scene file, then to the bundled data directory."""
    for cand in (base_dir / ref, Path(__file__).parent / "data" / ref):
        if cand.is_file():
            return cand
    return None


def bundled_scene(name: str) -> Path:
    p = SCENE_DIR / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not p.is_file():
        raise SceneError(f"no bundled scene named {name!r}", str(SCENE_DIR))
    return p


def resolve_scene_path(ref) -> Path:
    """A filesystem path, or the name of a bundled scene."""
    p = Path(ref)
    if p.is_file():
        return p
    return bundled_scene(str(ref))


__all__ = [
    "FORMAT_VERSION",
    "ReachSpec",
    "Scene",
    "SceneError",
    "SimulationDefaults",
    "bundled_scene",
    "load_scene",
    "parse_scene",
    "resolve_scene_path",
]
