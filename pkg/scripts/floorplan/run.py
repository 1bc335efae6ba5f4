#!/usr/bin/env python3
"""
Floorplan pipeline command line.

    python3 scripts/floorplan/run.py [--seed N] [--jobs N] [--verbose] COMMAND ...

    synth        synthetic plans + scans + heatmaps, one triple per seed
    project      point cloud -> single-channel density heatmap (+ domain sidecar)
    extract      heatmap stack -> candidate dump (debug)
    reconstruct  heatmap stack -> floorplan JSON (optional LP dump, SVG)
    evaluate     predicted vs ground-truth plan -> metrics JSON + table
    render       floorplan JSON -> SVG

Every written output gets a <output>.manifest.json next to it (synth: one
manifest.json per output directory). Exit codes: 0 ok, 1 pipeline failure,
2 usage / IO / format error.
"""
import argparse
import hashlib
import json
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

from config import __version__, config, log
import model
import heatmap
import extract
import evaluate
import pointcloud
import reconstruct
import solver
import synth
from domain import FloorplanDomain
from feature_grid import FrameFormatError, pool_image_features, read_frame_set

FORMAT_ERRORS = (model.FloorplanFormatError, heatmap.HeatmapFormatError, pointcloud.CloudParseError,
                 FrameFormatError, synth.SynthConfigError)


@dataclass
class RunManifest:
    command: str
    inputs: list
    config_hash: str
    seed: int
    version: str = __version__
    started: str = ""
    elapsed_s: float = 0.0
    outputs: list = field(default_factory=list)


def save_json(path: Path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding='utf-8')


def config_hash(synth_cfg: 'synth.SynthConfig | None' = None) -> str:
    settings = config.model_dump(exclude={'VERBOSE'})
    doc = {'settings': settings, 'synth': synth_cfg.model_dump(mode='json') if synth_cfg else None}
    raw = json.dumps(doc, sort_keys=True, ensure_ascii=False).encode('utf-8')
    return hashlib.sha1(raw).hexdigest()[:16]


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + '.manifest.json')


def _write_manifest(path: Path, manifest: RunManifest, t0: float):
    manifest.elapsed_s = round(time.monotonic() - t0, 3)
    save_json(path, asdict(manifest))


def _start(args, inputs: list, synth_cfg=None) -> tuple:
    started = datetime.now(timezone.utc).isoformat(timespec='seconds')
    m = RunManifest(args.command, [str(p) for p in inputs], config_hash(synth_cfg), args.seed,
                    started=started)
    return m, time.monotonic()


def _write_bytes(path: Path, raw: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(raw)


def _load_plan(path: Path) -> model.Floorplan:
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    try:
        plan = model.load(path.read_bytes())
    except model.FloorplanFormatError as e:
        raise model.FloorplanFormatError(str(path), str(e)) from e
    problems = model.validate(plan)
    if problems:
        raise model.FloorplanFormatError(str(path), f"invalid floorplan: {problems[0]}")
    return plan


def _banner(name: str):
    if not config.VERBOSE:
        return
    print(f"\n{'='*60}", file=sys.stderr)
    print(f"[STAGE] {name}", file=sys.stderr)
    print(f"{'='*60}", file=sys.stderr)


# ── COMMANDS ──

def _synth_one(cfg: 'synth.SynthConfig', seed: int, out_dir: Path, corrupt: bool, augment: bool) -> list:
    plan = synth.gen_floorplan(cfg, seed)
    scan = synth.sample_scan(plan, cfg.scan_density_per_m2, seed)
    if augment:
        scan, plan = pointcloud.augment(scan, plan, seed)
    stack = heatmap.render_ground_truth(plan)
    if corrupt:
        stack = synth.corrupt_heatmaps(stack, cfg.noise, seed)
    stem = f"{seed:04d}"
    files = [out_dir / f"{stem}.plan.json", out_dir / f"{stem}.ply", out_dir / f"{stem}.fhm"]
    _write_bytes(files[0], model.save(plan))
    pointcloud.write_ply(files[1], scan)
    heatmap.write_stack(files[2], stack)
    return files


def cmd_synth(args) -> int:
    cfg = synth.load_synth_config(args.config) if args.config else synth.SynthConfig()
    base = cfg.seed if args.seed is None else args.seed
    seeds = [base + i for i in range(args.seeds)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest, t0 = _start(args, [args.config] if args.config else [], cfg)
    manifest.seed = base

    work = lambda s: _synth_one(cfg, s, out_dir, args.corrupt, args.augment)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, seeds))
    else:
        results = [work(s) for s in seeds]
    manifest.outputs = [str(p) for files in results for p in files]
    _write_manifest(out_dir / 'manifest.json', manifest, t0)
    print(f"[floorplan][synth] wrote {len(seeds)} plan/scan/heatmap triples to {out_dir}")
    return 0


def cmd_project(args) -> int:
    src = Path(args.ply)
    out = Path(args.out)
    manifest, t0 = _start(args, [src] + ([args.frames] if args.frames else []))
    cloud = pointcloud.read_cloud(src)
    if len(cloud) == 0:
        raise pointcloud.CloudParseError(src, 0, "cloud has no points")
    if args.normalize:
        cloud = pointcloud.normalize(cloud)
    if args.subsample:
        cloud = pointcloud.subsample(cloud, args.subsample, args.seed or 0)
    domain = pointcloud.compute_domain(cloud)
    density = pointcloud.density_image(cloud, domain)
    planes, names = [density], ["density"]
    if args.frames:
        frames = read_frame_set(args.frames)
        grid = pool_image_features(frames, domain, stride=args.stride)
        for c in range(grid.channels):
            planes.append(grid.data[:, :, c])
            names.append(f"image:{c}")
    stack = heatmap.HeatmapStack(np.stack(planes), tuple(names))
    heatmap.write_stack(out, stack)
    side = out.with_name(out.name + '.domain.json')
    save_json(side, domain.to_dict())
    manifest.outputs = [str(out), str(side)]
    _write_manifest(_manifest_path(out), manifest, t0)
    print(f"[floorplan][project] points={len(cloud)} in-domain={int(density.sum())} -> {out}")
    return 0


def cmd_extract(args) -> int:
    src, out = Path(args.fhm), Path(args.out)
    manifest, t0 = _start(args, [src])
    cands = extract.extract_candidates(heatmap.read_stack(src))
    save_json(out, extract.to_dict(cands))
    manifest.outputs = [str(out)]
    _write_manifest(_manifest_path(out), manifest, t0)
    print(f"[floorplan][extract] corners={len(cands.corners)} walls={len(cands.walls)} "
          f"openings={len(cands.openings)} icons={len(cands.icons)}")
    return 0


def cmd_reconstruct(args) -> int:
    src, out = Path(args.fhm), Path(args.out)
    manifest, t0 = _start(args, [src])
    stack = heatmap.read_stack(src)
    result = reconstruct.reconstruct(stack)
    plan = result.plan
    if args.domain:
        plan = model.Floorplan(plan.corners, plan.walls, plan.openings, plan.icons, plan.rooms,
                               FloorplanDomain.from_dict(json.loads(Path(args.domain).read_text())),
                               plan.resolution)
    _write_bytes(out, model.save(plan))
    outputs = [out]
    if args.dump_ip:
        solver.write_lp(result.model, args.dump_ip)
        outputs.append(Path(args.dump_ip))
    if args.svg:
        _write_bytes(Path(args.svg), model.render_svg(plan).encode('utf-8'))
        outputs.append(Path(args.svg))
    manifest.outputs = [str(p) for p in outputs]
    _write_manifest(_manifest_path(out), manifest, t0)
    sol = result.solution
    print(f"[floorplan][reconstruct] rooms={len(plan.rooms)} walls={len(plan.walls)} "
          f"objective={sol.objective:.4f} nodes={sol.nodes} certified={sol.certified}")
    return 0


def cmd_evaluate(args) -> int:
    pred_path, gt_path = Path(args.pred), Path(args.gt)
    manifest, t0 = _start(args, [pred_path, gt_path])
    report = evaluate.evaluate(_load_plan(pred_path), _load_plan(gt_path))
    doc = report.to_dict()
    print(json.dumps(doc, ensure_ascii=False, indent=2))
    print(evaluate.format_table(report))
    if args.out:
        out = Path(args.out)
        save_json(out, doc)
        manifest.outputs = [str(out)]
        _write_manifest(_manifest_path(out), manifest, t0)
    return 0


def cmd_render(args) -> int:
    src, out = Path(args.plan), Path(args.out)
    manifest, t0 = _start(args, [src])
    _write_bytes(out, model.render_svg(_load_plan(src)).encode('utf-8'))
    manifest.outputs = [str(out)]
    _write_manifest(_manifest_path(out), manifest, t0)
    return 0


# ── ENTRY ──

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Vector floorplan reconstruction pipeline')
    parser.add_argument('--seed', type=int, default=None, help='Base random seed')
    parser.add_argument('--jobs', type=int, default=1, help='Parallel workers over independent inputs')
    parser.add_argument('--verbose', action='store_true', help='Stage logs on stderr')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='Generate synthetic plans, scans and heatmaps')
    p.add_argument('--config', help='YAML synth config (defaults if omitted)')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--seeds', type=int, default=1, help='Number of consecutive seeds')
    p.add_argument('--corrupt', action='store_true', help='Apply the config noise to the heatmaps')
    p.add_argument('--augment', action='store_true',
                   help='Random scale and quarter turn applied to scan and plan together')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('project', help='Point cloud -> density heatmap')
    p.add_argument('ply', help='PLY or XYZ point cloud')
    p.add_argument('--out', required=True, help='Output FHM1 file')
    p.add_argument('--subsample', type=int, default=0, help='Random subsample size before projection')
    p.add_argument('--normalize', action='store_true', help='Center the cloud on its centroid')
    p.add_argument('--frames', help='Directory of camera frames whose features are pooled in')
    p.add_argument('--stride', type=int, default=None, help='Use every N-th frame')
    p.set_defaults(func=cmd_project)

    p = sub.add_parser('extract', help='Heatmap -> candidate dump')
    p.add_argument('fhm')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser('reconstruct', help='Heatmap -> floorplan')
    p.add_argument('fhm')
    p.add_argument('--out', required=True)
    p.add_argument('--dump-ip', help='Write the integer program in LP format')
    p.add_argument('--svg', help='Also render the plan to SVG')
    p.add_argument('--domain', help='Domain sidecar JSON to attach to the plan')
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser('evaluate', help='Metrics of a predicted plan against ground truth')
    p.add_argument('pred')
    p.add_argument('gt')
    p.add_argument('--out', help='Also write the report JSON here')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('render', help='Floorplan -> SVG')
    p.add_argument('plan')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        config.VERBOSE = 1
    if args.jobs < 1:
        print("[floorplan] error: --jobs must be >= 1", file=sys.stderr)
        return 2
    _banner(args.command.upper())
    log("run", f"command={args.command} seed={args.seed} jobs={args.jobs}")
    try:
        return args.func(args)
    except FORMAT_ERRORS as e:
        print(f"[floorplan] error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"[floorplan] error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"[floorplan] CRITICAL ERROR: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == '__main__':
    sys.exit(main())
