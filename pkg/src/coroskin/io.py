"""File formats for every artifact.

All writers are deterministic: identical objects produce identical bytes.
Floats are written with 17 significant digits (or JSON's shortest repr), so
every format round-trips exactly.
"""

import json
import os
from pathlib import Path

import numpy as np

from .errors import FormatError
from .geometry import PathLayout, SurfaceMesh, TetMesh
from .geometry.mesh import Junction
from .skinning import HandleSet, WeightMatrix
from .volumetric import VoxelVolume
from .volumetric.tree import Bifurcation, Branch, VesselTree

SUFFIXES = {
    "volume": ".vol.json",
    "tree": ".tree.json",
    "surface": ".obj",
    "layout": ".layout.json",
    "tetmesh": ".tet.json",
    "weights": ".wts.json",
    "handles": ".handles.json",
    "keyposes": ".keyposes.json",
    "sequence": ".seq.json",
    "report": ".report.json",
    "scenario": ".scenario.json",
    "simlog": ".simlog.json",
}


def _stem(path, suffix):
    p = str(path)
    return p[: -len(suffix)] if p.endswith(suffix) else p


def write_json(path, obj):
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_text(text)
    return Path(path)


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise FormatError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc


# --- volume -----------------------------------------------------------------


def save_volume(volume, path):
    """Write ``<name>.vol.json`` plus ``<name>.raw`` (little-endian f32, x fastest)."""
    stem = _stem(path, SUFFIXES["volume"])
    raw = Path(stem + ".raw")
    header = {
        "dims": list(volume.dims),
        "spacing_mm": list(volume.spacing_mm),
        "origin_mm": list(volume.origin_mm),
        "dtype": "f32",
        "data": raw.name,
    }
    raw.write_bytes(np.asarray(volume.values, dtype="<f4").ravel(order="F").tobytes())
    return write_json(stem + SUFFIXES["volume"], header)


def load_volume(path):
    header_path = Path(_stem(path, SUFFIXES["volume"]) + SUFFIXES["volume"])
    h = read_json(header_path)
    for key in ("dims", "spacing_mm", "origin_mm", "dtype", "data"):
        if key not in h:
            raise FormatError(f"{header_path}: missing field '{key}'")
    if h["dtype"] != "f32":
        raise FormatError(f"{header_path}: unknown dtype {h['dtype']!r} (only 'f32' is supported)")
    dims = tuple(int(d) for d in h["dims"])
    raw = header_path.parent / h["data"]
    if not raw.exists():
        raise FormatError(f"raw data file {raw} does not exist")
    nbytes = raw.stat().st_size
    expected = int(np.prod(dims)) * 4
    if nbytes != expected:
        raise FormatError(f"{raw}: raw size {nbytes} bytes does not match dims {list(dims)} x 4 = {expected} bytes")
    values = np.frombuffer(raw.read_bytes(), dtype="<f4").reshape(dims, order="F").astype(np.float32)
    return VoxelVolume(values, tuple(h["spacing_mm"]), tuple(h["origin_mm"]))


# --- tree -------------------------------------------------------------------


def tree_to_dict(tree):
    return {
        "positions": tree.positions.tolist(),
        "radii": tree.radii.tolist(),
        "branches": [
            {"branch_id": int(b.branch_id), "point_ids": [int(i) for i in b.point_ids], "parent_branch": b.parent_branch}
            for b in tree.branches
        ],
        "bifurcations": [
            {
                "point_id": int(f.point_id),
                "child_branches": [int(c) for c in f.child_branches],
                "angles_deg": [float(a) for a in f.angles_deg],
                "murray_residual_mm3": None if f.murray_residual_mm3 is None else float(f.murray_residual_mm3),
                "parent_branch": None if f.parent_branch is None else int(f.parent_branch),
            }
            for f in tree.bifurcations
        ],
        "main_branches": [int(b) for b in tree.main_branches],
    }


def tree_from_dict(d):
    try:
        return VesselTree(
            d["positions"],
            d["radii"],
            [Branch(b["branch_id"], list(b["point_ids"]), b.get("parent_branch")) for b in d["branches"]],
            [Bifurcation(**f) for f in d.get("bifurcations", [])],
            d.get("main_branches", []),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed tree record: {exc}") from exc


def save_tree(tree, path):
    return write_json(_stem(path, SUFFIXES["tree"]) + SUFFIXES["tree"], tree_to_dict(tree))


def load_tree(path):
    return tree_from_dict(read_json(_stem(path, SUFFIXES["tree"]) + SUFFIXES["tree"]))


# --- surface ----------------------------------------------------------------


def write_obj(path, vertices, triangles):
    lines = ["v %.17g %.17g %.17g" % tuple(v) for v in np.asarray(vertices, dtype=float)]
    lines += ["f %d %d %d" % tuple(t) for t in np.asarray(triangles, dtype=np.int64) + 1]
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def read_obj(path):
    verts, tris = [], []
    try:
        text = Path(path).read_text()
    except FileNotFoundError as exc:
        raise FormatError(f"file not found: {path}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            if len(parts) != 4:
                raise FormatError(f"{path}:{n}: only triangular faces are supported")
            tris.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3)


def _layout_to_dict(surface):
    def arr(x):
        return None if x is None else np.asarray(x).tolist()

    return {
        "paths": [
            {
                "path_id": int(p.path_id),
                "branch_ids": [int(b) for b in p.branch_ids],
                "rings": arr(p.rings),
                "centers": arr(p.centers),
                "ring_s": arr(p.ring_s),
                "ring_branch": arr(p.ring_branch),
                "ring_branch_s": arr(p.ring_branch_s),
                "start_cap": p.start_cap,
                "end_cap": p.end_cap,
                "parent_path": p.parent_path,
                "ring_ab": arr(p.ring_ab),
            }
            for p in surface.paths
        ],
        "junctions": [
            {
                "child_path": int(j.child_path),
                "parent_path": int(j.parent_path),
                "hole_triangles": arr(j.hole_triangles),
                "zipper": arr(j.zipper),
                "apex": arr(j.apex),
            }
            for j in surface.junctions
        ],
    }


def _layout_from_dict(d):
    def arr(x, dtype=float):
        return None if x is None else np.asarray(x, dtype=dtype)

    paths = [
        PathLayout(
            p["path_id"],
            p["branch_ids"],
            arr(p["rings"], np.int64),
            arr(p["centers"]),
            arr(p["ring_s"]),
            arr(p["ring_branch"], np.int64),
            arr(p["ring_branch_s"]),
            p["start_cap"],
            p["end_cap"],
            p["parent_path"],
            arr(p["ring_ab"]),
        )
        for p in d.get("paths", [])
    ]
    juncs = [
        Junction(j["child_path"], j["parent_path"], arr(j["hole_triangles"], np.int64).reshape(-1, 3), arr(j["zipper"], np.int64), arr(j["apex"]))
        for j in d.get("junctions", [])
    ]
    return paths, juncs


def save_surface(surface, path):
    """OBJ geometry plus a ``.layout.json`` sidecar with the ring layout."""
    stem = _stem(path, SUFFIXES["surface"])
    write_obj(stem + SUFFIXES["surface"], surface.vertices, surface.triangles)
    if surface.paths:
        write_json(stem + SUFFIXES["layout"], _layout_to_dict(surface))
    return Path(stem + SUFFIXES["surface"])


def load_surface(path):
    stem = _stem(path, SUFFIXES["surface"])
    V, T = read_obj(stem + SUFFIXES["surface"])
    paths, juncs = [], []
    if os.path.exists(stem + SUFFIXES["layout"]):
        paths, juncs = _layout_from_dict(read_json(stem + SUFFIXES["layout"]))
    return SurfaceMesh(V, T, paths, juncs)


# --- tet mesh ----------------------------------------------------------------


def save_tetmesh(tm, path):
    d = {
        "nodes": tm.nodes.tolist(),
        "tets": tm.tets.tolist(),
        "wall_node_ids": np.asarray(tm.wall_node_ids).tolist(),
        "centerline_node_ids": np.asarray(tm.centerline_node_ids).tolist(),
        "centerline_branch": None if tm.centerline_branch is None else np.asarray(tm.centerline_branch).tolist(),
        "centerline_arc": None if tm.centerline_arc is None else np.asarray(tm.centerline_arc).tolist(),
    }
    return write_json(_stem(path, SUFFIXES["tetmesh"]) + SUFFIXES["tetmesh"], d)


def load_tetmesh(path):
    d = read_json(_stem(path, SUFFIXES["tetmesh"]) + SUFFIXES["tetmesh"])
    try:
        return TetMesh(
            np.asarray(d["nodes"], dtype=float),
            np.asarray(d["tets"], dtype=np.int64),
            np.asarray(d["wall_node_ids"], dtype=np.int64),
            np.asarray(d["centerline_node_ids"], dtype=np.int64),
            None if d.get("centerline_branch") is None else np.asarray(d["centerline_branch"], dtype=np.int64),
            None if d.get("centerline_arc") is None else np.asarray(d["centerline_arc"], dtype=float),
        )
    except KeyError as exc:
        raise FormatError(f"tet mesh file lacks field {exc}") from exc


# --- weights and handles ------------------------------------------------------


def save_weights(W, path):
    """``<name>.wts.json`` header plus ``<name>.wts.raw`` (little-endian f64, row-major)."""
    stem = _stem(path, SUFFIXES["weights"])
    values = W.values if hasattr(W, "values") else np.asarray(W)
    raw = Path(stem + ".wts.raw")
    raw.write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
    header = {"n_rows": int(values.shape[0]), "n_handles": int(values.shape[1]), "data": raw.name}
    if hasattr(W, "nearest") and W.nearest is not None:
        header["nearest"] = np.asarray(W.nearest).tolist()
    return write_json(stem + SUFFIXES["weights"], header)


def load_weights(path):
    hp = Path(_stem(path, SUFFIXES["weights"]) + SUFFIXES["weights"])
    h = read_json(hp)
    raw = hp.parent / h["data"]
    if not raw.exists():
        raise FormatError(f"raw data file {raw} does not exist")
    n, nb = int(h["n_rows"]), int(h["n_handles"])
    size = raw.stat().st_size
    if size != n * nb * 8:
        raise FormatError(f"{raw}: raw size {size} bytes does not match {n} x {nb} x 8 = {n * nb * 8} bytes")
    vals = np.frombuffer(raw.read_bytes(), dtype="<f8").reshape(n, nb).astype(float)
    nearest = None if "nearest" not in h else np.asarray(h["nearest"], dtype=np.int64)
    return WeightMatrix(vals, nearest)


def save_handles(handles, path):
    d = {
        "handles": [np.asarray(h).tolist() for h in handles.handles],
        "pivots": handles.pivots.tolist(),
        "branch_ids": handles.branch_ids.tolist(),
        "arc_ranges": None if handles.arc_ranges is None else np.asarray(handles.arc_ranges).tolist(),
    }
    return write_json(_stem(path, SUFFIXES["handles"]) + SUFFIXES["handles"], d)


def load_handles(path):
    d = read_json(_stem(path, SUFFIXES["handles"]) + SUFFIXES["handles"])
    ar = d.get("arc_ranges")
    return HandleSet(d["handles"], d["pivots"], d["branch_ids"], None if ar is None else np.asarray(ar, dtype=float))


# --- key poses, sequences, reports, scenarios ------------------------------------


def save_keyposes(poses, path):
    return write_json(_stem(path, SUFFIXES["keyposes"]) + SUFFIXES["keyposes"], [p.to_dict() for p in poses])


def load_keyposes(path):
    from .dynamics import KeyPose

    return [KeyPose.from_dict(d) for d in read_json(_stem(path, SUFFIXES["keyposes"]) + SUFFIXES["keyposes"])]


def save_sequence(seq, path, triangles=None):
    """One OBJ per frame plus the ``.seq.json`` manifest and the ``.report.json``."""
    stem = Path(_stem(path, SUFFIXES["sequence"]))
    frame_dir = stem.parent / (stem.name + "_frames")
    frame_dir.mkdir(parents=True, exist_ok=True)
    tris = seq.surface.triangles if triangles is None else triangles
    entries = []
    for i, (P, t) in enumerate(zip(seq.frames, seq.t)):
        obj = frame_dir / f"frame_{i:04d}.obj"
        write_obj(obj, P, tris)
        entries.append(
            {
                "frame_index": i,
                "t": float(t),
                "rr_percent": float(seq.rr_percent[i]) if seq.rr_percent is not None else None,
                "mesh": str(obj.relative_to(stem.parent)),
            }
        )
    keys = {int(p.phase_index): int(i) for p, i in zip(seq.key_poses, seq.key_frame_indices)}
    manifest = {"frames": entries, "key_frames": {str(k): v for k, v in sorted(keys.items())}, "period_T": seq.period_T}
    write_json(str(stem) + SUFFIXES["sequence"], manifest)
    report = {"energies": seq.energies, "constraints": seq.report.to_dict() if seq.report is not None else None}
    write_json(str(stem) + SUFFIXES["report"], report)
    return Path(str(stem) + SUFFIXES["sequence"])


def load_sequence_meshes(path, layout_surface=None):
    """``{phase: SurfaceMesh}`` for the key frames of a saved sequence."""
    mp = Path(_stem(path, SUFFIXES["sequence"]) + SUFFIXES["sequence"])
    m = read_json(mp)
    out = {}
    for phase, idx in m["key_frames"].items():
        entry = m["frames"][idx]
        V, T = read_obj(mp.parent / entry["mesh"])
        if layout_surface is not None:
            out[int(phase)] = layout_surface.with_vertices(V)
        else:
            out[int(phase)] = SurfaceMesh(V, T)
    return out


def save_scenario(scenario, path):
    return write_json(_stem(path, SUFFIXES["scenario"]) + SUFFIXES["scenario"], scenario.to_dict())


def load_scenario(path):
    from .simharness import Scenario

    return Scenario.from_dict(read_json(_stem(path, SUFFIXES["scenario"]) + SUFFIXES["scenario"]))


def save_simlog(rows, path):
    return write_json(_stem(path, SUFFIXES["simlog"]) + SUFFIXES["simlog"], rows)
