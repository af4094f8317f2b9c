"""Phase-by-phase comparison of two mesh sequences."""

import hashlib
import logging

import numpy as np

from ..errors import InputError
from ..volumetric import analyze_topology, extract_centerline
from .branches import MATCH_GATE_MM, branch_metrics
from .distances import hausdorff_distance, mean_surface_distance
from .report import MetricsRow
from .voxelize import voxelize

log = logging.getLogger(__name__)


def phase_meshes(seq):
    """``{phase: SurfaceMesh}`` from a dict, a list or a MotionSequence-like object.

    For a motion sequence the key frames are used, keyed by their key-pose
    phase index; ``surface`` must then be attached as ``seq.surface``.
    """
    if isinstance(seq, dict):
        return dict(seq)
    if hasattr(seq, "key_frame_indices"):
        base = getattr(seq, "surface", None)
        if base is None:
            raise InputError("motion sequence has no surface attached")
        return {
            int(p.phase_index): base.with_vertices(seq.frames[i])
            for p, i in zip(seq.key_poses, seq.key_frame_indices)
        }
    return {i: m for i, m in enumerate(seq)}


def mesh_tree(mesh, spacing_mm=0.25):
    """Centerline tree of a surface, via voxelization and centerline extraction."""
    mask = voxelize(mesh, spacing_mm)
    tree = extract_centerline(mask)
    if tree.bifurcations:
        analyze_topology(tree)
    return tree


def _key(mesh):
    h = hashlib.sha256(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.triangles).tobytes())
    return h.hexdigest()


def validate_sequence(interp, ref, spacing_mm=0.25, gate_mm=MATCH_GATE_MM):
    """One MetricsRow per common phase, ordered by phase.

    HD and MSD compare vertex samplings (MSD from the interpolated mesh to the
    reference); BCR and BCS compare centerline trees extracted the same way
    from both meshes.
    """
    mi, mr = phase_meshes(interp), phase_meshes(ref)
    if set(mi) != set(mr):
        raise InputError(f"phase sets differ: {sorted(mi)} vs {sorted(mr)}")
    if not mi:
        raise InputError("no phases to compare")
    trees = {}

    def tree_of(m):
        k = _key(m)
        if k not in trees:
            trees[k] = mesh_tree(m, spacing_mm)
        return trees[k]

    rows = []
    for ph in sorted(mi):
        a, b = mi[ph], mr[ph]
        hd = hausdorff_distance(a, b)
        msd = mean_surface_distance(a, b)
        bcr, bcs = branch_metrics(tree_of(a), tree_of(b), gate_mm)
        rows.append(MetricsRow(ph, hd, msd, bcr, bcs))
        log.info("phase %02d: HD %.4f MSD %.4f BCR %.3f BCS %.3f", ph, hd, msd, bcr, bcs)
    return rows
