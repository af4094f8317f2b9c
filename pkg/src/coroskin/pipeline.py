"""Stage orchestration and the run manifest."""

import hashlib
import logging
import time
from pathlib import Path

import numpy as np

from . import io
from .dynamics import build_skeleton, generate_sequence
from .errors import InputError, StageInputError
from .geometry import build_cross_sections, check_surface, check_tetmesh, loft_surface, tetrahedralize
from .phantoms import make_motion_keyposes, make_phantom
from .simharness import Guidewire, Scenario, advance_guidewire, run_scenario
from .simharness.wire import follow_the_leader
from .skinning import build_handles, solve_weights
from .validation import emit_report, validate_sequence
from .volumetric import analyze_topology, compute_vesselness, extract_centerline, segment

log = logging.getLogger(__name__)

STAGES = (
    "phantom",
    "vesselness",
    "centerline",
    "topology",
    "surface",
    "tetmesh",
    "weights",
    "sequence",
    "validate",
    "simulate",
)

MANIFEST = "manifest.json"

# artifact name -> loader for files given on the command line
LOADERS = {
    "volume": io.load_volume,
    "vesselness": io.load_volume,
    "mask": io.load_volume,
    "tree": io.load_tree,
    "surface": io.load_surface,
    "tetmesh": io.load_tetmesh,
    "weights": io.load_weights,
    "handles": io.load_handles,
    "keyposes": io.load_keyposes,
    "scenario": io.load_scenario,
    # key-frame meshes of saved sequences, for the validate stage
    "sequence": io.load_sequence_meshes,
    "reference": io.load_sequence_meshes,
}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Pipeline:
    """Holds the artifacts of one run; stages read and add to them."""

    def __init__(self, config, out_dir, inputs=None):
        self.cfg = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {k: v for k, v in (inputs or {}).items() if v is not None}
        unknown = set(self.inputs) - set(LOADERS)
        if unknown:
            raise InputError(f"unknown input artifact(s): {', '.join(sorted(unknown))}")
        self.art = {}
        self.timings = {}

    def need(self, stage, name):
        if name not in self.art:
            if name not in self.inputs:
                raise StageInputError(stage, name)
            self.art[name] = LOADERS[name](self.inputs[name])
        return self.art[name]

    def have(self, name):
        return name in self.art or name in self.inputs

    def path(self, name):
        return self.out / name

    def run(self, stages):
        for st in stages:
            if st not in STAGES:
                raise InputError(f"unknown stage {st!r}; choose from {', '.join(STAGES)}")
        for st in STAGES:
            if st in stages:
                t0 = time.perf_counter()
                getattr(self, f"stage_{st}")()
                self.timings[st] = time.perf_counter() - t0
                log.info("stage %s done in %.2f s", st, self.timings[st])
        return self

    # --- stages ---------------------------------------------------------------

    def stage_phantom(self):
        ph = make_phantom(self.cfg.phantom)
        self.art.update(volume=ph.volume, truth_tree=ph.tree, truth_surface=ph.surface, phantom=ph)
        io.save_volume(ph.volume, self.path("phantom.vol.json"))
        io.save_tree(ph.tree, self.path("truth.tree.json"))
        io.save_surface(ph.surface, self.path("truth.obj"))

    def stage_vesselness(self):
        v = compute_vesselness(self.need("vesselness", "volume"), self.cfg.frangi)
        self.art["vesselness"] = v
        io.save_volume(v, self.path("vesselness.vol.json"))

    def stage_centerline(self):
        seg = self.cfg.segmentation
        mask = segment(self.need("centerline", "vesselness"), seg.threshold)
        self.art["mask"] = mask
        io.save_volume(mask, self.path("mask.vol.json"))
        tree = extract_centerline(mask, min_branch_mm=seg.min_branch_mm)
        self.art["tree"] = tree
        io.save_tree(tree, self.path("centerline.tree.json"))

    def stage_topology(self):
        tree = self.need("topology", "tree")
        if tree.bifurcations:
            analyze_topology(tree)
        io.save_tree(tree, self.path("topology.tree.json"))

    def stage_surface(self):
        tree = self.need("surface", "tree")
        sections = build_cross_sections(tree, self.cfg.surface.sections_per_mm)
        surface = loft_surface(sections, self.cfg.surface.sizing(float(np.mean(tree.radii))))
        check_surface(surface)
        self.art["surface"] = surface
        io.save_surface(surface, self.path("surface.obj"))

    def stage_tetmesh(self):
        surface = self.need("tetmesh", "surface")
        tm = tetrahedralize(surface, self.art.get("tree"))
        check_tetmesh(tm)
        self.art["tetmesh"] = tm
        io.save_tetmesh(tm, self.path("mesh.tet.json"))

    def stage_weights(self):
        tm = self.need("weights", "tetmesh")
        p = self.cfg.weights
        handles = build_handles(tm, p.handle_segment_mm)
        W = solve_weights(tm, handles, tol=p.kkt_tol, max_iter=p.max_iter)
        self.art.update(handles=handles, weights=W)
        io.save_handles(handles, self.path("handles.handles.json"))
        io.save_weights(W, self.path("weights.wts.json"))

    def _keyposes(self, stage):
        if self.have("keyposes"):
            return self.need(stage, "keyposes")
        tree, surface = self.need(stage, "tree"), self.need(stage, "surface")
        handles = self.need(stage, "handles")
        sp = self.cfg.sequence
        rest = np.concatenate([p.ring_ab for p in surface.paths]) if surface.paths else None
        kp = make_motion_keyposes(tree, sp.mode, sp.n_phases, sp.amplitude, handles, rest)
        self.art["keyposes"] = kp
        return kp

    def _generate(self, stage, poses, subdivision):
        surface, W = self.need(stage, "surface"), self.need(stage, "weights")
        skel = self.art.get("skeleton")
        if skel is None and self.have("tetmesh") and self.have("handles"):
            skel = build_skeleton(self.need(stage, "tetmesh"), self.need(stage, "handles"), self.art.get("tree"))
            self.art["skeleton"] = skel
        sp = self.cfg.sequence
        return generate_sequence(poses, subdivision, surface, W, self.cfg.constraints, self.cfg.energy, skel, sp.regularize)

    def stage_sequence(self):
        kp = self._keyposes("sequence")
        io.save_keyposes(kp, self.path("keyposes.keyposes.json"))
        seq = self._generate("sequence", kp, self.cfg.sequence.subdivision)
        self.art["sequence"] = seq
        io.save_sequence(seq, self.path("sequence.seq.json"))
        if self.cfg.validation.figures:
            from .plotting import constraints_figure

            constraints_figure(seq.report, self.path("constraints.png"), seq.t)

    def _motion(self):
        seq = self.art.get("sequence")
        return seq if hasattr(seq, "frames") else None

    def stage_validate(self):
        """Compare the sequence with a given reference sequence or, without one,
        interpolate the key poses of every second phase and compare with the
        sequence built from all key poses."""
        vp = self.cfg.validation
        if self.have("reference"):
            rows = validate_sequence(self.need("validate", "sequence"), self.need("validate", "reference"), vp.voxel_mm, vp.gate_mm)
            return self._report(rows)
        kp = self._keyposes("validate")
        ref = self._motion() or self._generate("validate", kp, self.cfg.sequence.subdivision)
        n = len(kp)
        sub = self.cfg.sequence.subdivision
        if n % 2 == 0 and n >= 4:
            interp = self._generate("validate", kp[::2], 2 * sub)
        else:
            interp = ref
        phases = [int(p.phase_index) for p in kp]
        ref_frames = dict(zip(phases, ref.key_frame_indices))
        mi, mr = {}, {}
        for ph in phases:
            fi = interp.phase_frame(ph, n)
            if fi is None:
                raise InputError(f"interpolated sequence has no frame at phase {ph}")
            mi[ph] = ref.surface.with_vertices(interp.frames[fi])
            mr[ph] = ref.surface.with_vertices(ref.frames[ref_frames[ph]])
        self._report(validate_sequence(mi, mr, vp.voxel_mm, vp.gate_mm))

    def _report(self, rows):
        vp = self.cfg.validation
        self.art["metrics"] = rows
        emit_report(rows, self.path("metrics.csv"))
        if vp.figures:
            from .plotting import metrics_figure

            metrics_figure(rows, self.path("metrics.png"))

    def stage_simulate(self):
        sp = self.cfg.simulation
        kp = self._keyposes("simulate")
        seq = self._motion() or self._generate("simulate", kp, self.cfg.sequence.subdivision)
        tree, surface = self.need("simulate", "tree"), self.need("simulate", "surface")
        handles = self.need("simulate", "handles")
        if self.have("scenario"):
            scenario = self.need("simulate", "scenario")
        else:
            scenario = Scenario.scripted(
                sp.n_ticks, len(kp), sp.advance_mm, sp.inject_every, sp.inject_count,
                seed=self.cfg.seed, dt_s=sp.dt_s, speed_mm_s=sp.speed_mm_s, name="pipeline",
            )
        wire = initial_wire(tree, surface.with_vertices(seq.frames[0]), sp)
        rows = run_scenario(scenario, seq, wire, surface, tree, handles)
        self.art["simlog"] = rows
        io.save_scenario(scenario, self.path("run.scenario.json"))
        io.save_simlog(rows, self.path("run.simlog.json"))

    # --- manifest ---------------------------------------------------------------

    def write_manifest(self, stages):
        files = sorted(p for p in self.out.rglob("*") if p.is_file() and p.name != MANIFEST)
        manifest = {
            "config_sha256": self.cfg.digest(),
            "config": self.cfg.to_dict(),
            "stages": [s for s in STAGES if s in stages],
            "inputs": {k: sha256_file_or_none(v) for k, v in sorted(self.inputs.items())},
            "artifacts": {str(p.relative_to(self.out)): sha256_file(p) for p in files},
        }
        io.write_json(self.out / MANIFEST, manifest)
        return manifest


def sha256_file_or_none(path):
    p = Path(path)
    return sha256_file(p) if p.is_file() else None


def initial_wire(tree, mesh, params):
    """Wire laid along the start of the root branch, tip first, settled inside ``mesh``."""
    root = tree.roots()[0]
    P, s = tree.branch_polyline(root), tree.branch_arc(root)
    L, n = params.segment_mm, params.wire_nodes
    start = min(params.tip_radius_mm + 0.2, 0.1 * s[-1])
    arcs = start + L * np.arange(n)[::-1]
    if arcs[0] > s[-1]:
        raise InputError(f"root branch ({s[-1]:.2f} mm) is too short for a {n}-node wire")
    nodes = np.column_stack([np.interp(arcs, s, P[:, k]) for k in range(3)])
    wire = Guidewire(follow_the_leader(nodes, L), L, params.tip_radius_mm)
    return advance_guidewire(wire, 0.0, (), mesh)


def run_pipeline(config, out_dir, inputs=None, stages=None):
    """Run the requested stages (default: all, skipping ``phantom`` if a volume is given).

    Returns the Pipeline (artifacts in ``.art``) and the manifest dict.
    """
    inputs = inputs or {}
    if stages is None:
        stages = [s for s in STAGES if not (s == "phantom" and inputs.get("volume"))]
    pipe = Pipeline(config, out_dir, inputs).run(stages)
    manifest = pipe.write_manifest(stages)
    return pipe, manifest
