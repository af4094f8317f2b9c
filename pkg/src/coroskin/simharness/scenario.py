"""Scripted replay of wire advancement and contrast injection over a sequence."""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InputError
from .bvh import BoundingHierarchy
from .contrast import ContrastParticles, advect_contrast, inject
from .wire import advance_guidewire, collide_step

log = logging.getLogger(__name__)


@dataclass
class Tick:
    phase: int
    advance_mm: float = 0.0
    inject: int = 0


@dataclass
class Scenario:
    ticks: list = field(default_factory=list)
    dt_s: float = 0.05
    speed_mm_s: float = 20.0
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        self.ticks = [t if isinstance(t, Tick) else Tick(**t) for t in self.ticks]
        if not self.dt_s > 0:
            raise InputError(f"scenario dt_s must be positive, got {self.dt_s}")
        for i, t in enumerate(self.ticks):
            if t.advance_mm < 0:
                raise InputError(f"tick {i}: advance_mm must be >= 0")
            if t.inject < 0:
                raise InputError(f"tick {i}: inject must be >= 0")

    def to_dict(self):
        return {"name": self.name, "dt_s": self.dt_s, "speed_mm_s": self.speed_mm_s, "seed": self.seed, "ticks": [asdict(t) for t in self.ticks]}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def scripted(cls, n_ticks, n_phases, advance_mm=0.25, inject_every=5, inject_count=20, seed=0, **kw):
        """Cyclic phases, constant advancement and periodic injections."""
        ticks = [
            Tick(i % n_phases, advance_mm, inject_count if inject_every and i % inject_every == 0 else 0)
            for i in range(n_ticks)
        ]
        return cls(ticks, seed=seed, **kw)


def phase_frames(sequence):
    """Frame index of every key-pose phase of a motion sequence."""
    if hasattr(sequence, "key_frame_indices") and sequence.key_frame_indices is not None:
        return {int(p.phase_index): int(i) for p, i in zip(sequence.key_poses, sequence.key_frame_indices)}
    return {i: i for i in range(len(sequence.frames))}


def tree_at_frame(tree, handles, sequence, frame):
    """Centerline tree carried along by each point's handle transform."""
    if handles is None or sequence.rotations is None:
        return tree
    pos = tree.positions.copy()
    R, t, c = sequence.rotations[frame], sequence.translations[frame], sequence.pivots[frame]
    arc = tree.arc_length
    for i in range(len(pos)):
        b = tree.branch_of[i]
        on = np.flatnonzero(handles.branch_ids == b)
        if on.size == 0:
            continue
        lo = handles.arc_ranges[on, 0]
        h = on[max(int(np.searchsorted(lo, arc[i], side="right")) - 1, 0)]
        pos[i] = R[h] @ (pos[i] - c[h]) + c[h] + t[h]
    return tree.copy_with_positions(pos)


def run_scenario(scenario, sequence, wire, surface, tree=None, handles=None):
    """Replay ``scenario`` and return the per-tick log (list of dicts).

    Each tick selects the phase mesh, refits the hierarchy, advances and
    resolves the wire, then injects and advects contrast particles.
    """
    frames = phase_frames(sequence)
    for i, t in enumerate(scenario.ticks):
        if t.phase not in frames:
            raise InputError(f"tick {i} references phase {t.phase}, which the sequence does not contain")
    log_rows = []
    if not scenario.ticks:
        return log_rows
    bvh = None
    particles = ContrastParticles(seed=scenario.seed)
    trees = {}
    for i, tick in enumerate(scenario.ticks):
        f = frames[tick.phase]
        mesh = surface.with_vertices(sequence.frames[f])
        if bvh is None:
            bvh = BoundingHierarchy(mesh.vertices, mesh.triangles)
        else:
            bvh.mark_dirty()
            bvh.refit(mesh.vertices)
        moved = advance_guidewire(wire, tick.advance_mm)
        contacts = collide_step(moved, mesh, bvh)
        wire = advance_guidewire(moved, 0.0, contacts, mesh, bvh)
        if tree is not None:
            if f not in trees:
                trees[f] = tree_at_frame(tree, handles, sequence, f)
            inject(particles, trees[f], tick.inject)
            advect_contrast(particles, trees[f], scenario.dt_s, scenario.speed_mm_s)
        log_rows.append(
            {
                "tick": i,
                "phase": int(tick.phase),
                "wire_nodes": wire.nodes.tolist(),
                "contacts": len(contacts),
                "particles": len(particles),
                "injected": particles.injected,
                "outflow": particles.outflow,
            }
        )
    return log_rows


def log_to_json(rows):
    return json.dumps(rows, sort_keys=True, separators=(",", ":"))
