"""Command-line pipeline: fit / extract / eval / analyze.

Defaults reproduce the published method: lambda = 7000/600/50/3, alpha=100,
sigma_min=0.8, k=50, batch 15000, lr 5e-5, 10K iterations, 256 grid,
F-Score threshold 0.005. A TOML config file supplies overrides; explicit
flags win over the config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import contour, fields, metrics, morse
from .geometry import (ParseError, load_mesh, load_point_cloud, normalize,
                       save_grid, save_mesh, save_polyline, PointCloud)
from .losses import LossConfig, EIKONAL_MODES, REGULARIZERS
from .network import init_network, load_model, save_model
from .trainer import TrainConfig, fit

try:
    import tomllib
except ModuleNotFoundError:        # Python 3.10
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# every recognized run-config key: name -> (default, help)
CONFIG_KEYS = {
    "iters": (10000, "training iterations"),
    "learning_rate": (5e-5, "Adam learning rate"),
    "batch_size": (15000, "far-sample batch size"),
    "k_neighbors": (50, "k for per-point Gaussian radii"),
    "seed": (0, "RNG seed"),
    "hidden_layers": (4, "MLP hidden layers"),
    "width": (256, "MLP width"),
    "activation": ("sine", "sine | softplus"),
    "omega0": (30.0, "sine frequency factor"),
    "beta": (100.0, "softplus sharpness"),
    "bias_init": ("uniform", "uniform | zero"),
    "lambda_manifold": (7000.0, "on-surface |f| weight"),
    "lambda_non_manifold": (600.0, "off-surface exp(-alpha|f|) weight"),
    "lambda_eikonal_relax": (50.0, "gradient-norm constraint weight"),
    "lambda_singular_hessian": (3.0, "Hessian-determinant weight"),
    "alpha": (100.0, "non-manifold exponent"),
    "sigma_min": (0.8, "relaxed gradient-norm floor"),
    "regularizer": ("singular_hessian", " | ".join(REGULARIZERS)),
    "eikonal_mode": ("relaxed_on_P", " | ".join(EIKONAL_MODES)),
    "neumann_weight": (0.0, "normal alignment weight (0 = off)"),
    "resolution": (256, "extraction grid nodes per axis"),
    "fscore_threshold": (0.005, "F-Score distance threshold"),
    "eval_samples": (100000, "surface samples per mesh for metrics"),
    "log_every": (100, "loss history stride"),
}

_LOSS_KEYS = {"lambda_manifold", "lambda_non_manifold", "lambda_eikonal_relax",
              "lambda_singular_hessian", "alpha", "sigma_min", "regularizer",
              "eikonal_mode", "neumann_weight"}


def load_run_config(path) -> dict:
    cfg = {name: default for name, (default, _) in CONFIG_KEYS.items()}
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg.update(data)
    return cfg


def _train_config(cfg: dict) -> TrainConfig:
    loss = LossConfig(**{k: cfg[k] for k in _LOSS_KEYS})
    return TrainConfig(iters=int(cfg["iters"]),
                       learning_rate=float(cfg["learning_rate"]),
                       batch_size=int(cfg["batch_size"]),
                       k_neighbors=int(cfg["k_neighbors"]),
                       seed=int(cfg["seed"]),
                       loss=loss,
                       log_every=int(cfg["log_every"]))


def _config_epilog():
    lines = ["recognized config keys (TOML) and their defaults:"]
    for name, (default, help_) in CONFIG_KEYS.items():
        lines.append(f"  {name} = {default!r}  ({help_})")
    return "\n".join(lines)


def _load_surface(path, n_samples, rng):
    """Mesh file -> sampled points+normals; point file -> points as given."""
    path = str(path)
    if path.lower().endswith(".obj"):
        mesh = load_mesh(path)
        if mesh.n_triangles > 0:
            return metrics.sample_surface(mesh, n=n_samples, rng=rng)
        return mesh.vertices, None   # polyline / point-only OBJ
    if path.lower().endswith(".ply"):
        mesh = load_mesh(path, format="ply")
        if mesh.n_triangles > 0:
            return metrics.sample_surface(mesh, n=n_samples, rng=rng)
        cloud = load_point_cloud(path, format="ply")
        return cloud.points, cloud.normals
    cloud = load_point_cloud(path, format="xyz")
    return cloud.points, cloud.normals


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args) -> int:
    cfg = load_run_config(args.config)
    for key in ("seed", "iters", "hidden_layers", "width", "activation",
                "omega0", "bias_init", "batch_size", "learning_rate"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if not os.path.exists(args.cloud):
        print(f"error: input cloud not found: {args.cloud}", file=sys.stderr)
        return 1
    cloud = load_point_cloud(args.cloud)
    if args.dim == 2:
        cloud = PointCloud(points=cloud.points[:, :2])
    tc = _train_config(cfg)
    tc.checkpoint_path = args.out
    net = init_network(args.dim, hidden_layers=int(cfg["hidden_layers"]),
                       width=int(cfg["width"]), activation=cfg["activation"],
                       omega0=float(cfg["omega0"]), beta=float(cfg["beta"]),
                       bias_init=cfg["bias_init"], seed=tc.seed)

    def progress(it, total, terms):
        if not args.quiet:
            parts = " ".join(f"{k}={v:.3e}" for k, v in terms.items())
            print(f"iter {it:6d} total={total:.4e} {parts}")

    net, history = fit(cloud, net, tc, callback=progress)
    final = {k: v[-1] for k, v in history.terms.items()}
    print("final losses: " + " ".join(f"{k}={v:.4e}" for k, v in final.items()))
    print(f"model written to {args.out}")
    return 0


def cmd_extract(args) -> int:
    net = load_model(args.model)
    pad = args.pad
    grids = contour.evaluate_grid(net, args.res, domain=(-1.0 - pad, 1.0 + pad))
    tf = net.transform if args.world_units else None
    if net.input_dim == 3:
        mesh = contour.marching_cubes(grids["value"], iso=args.iso, transform=tf)
        save_mesh(mesh, args.out)
        print(f"{mesh.n_vertices} vertices, {mesh.n_triangles} triangles -> {args.out}")
    else:
        poly = contour.marching_squares(grids["value"], iso=args.iso)
        verts = poly.vertices
        if tf is not None:
            verts = tf.invert(verts)
            poly = type(poly)(vertices=verts, segments=poly.segments)
        save_polyline(poly, args.out)
        print(f"{len(poly.vertices)} vertices, {len(poly.segments)} segments -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    rng = np.random.default_rng(args.seed)
    pred_pts, pred_nrm = _load_surface(args.pred, args.samples, rng)
    gt_pts, gt_nrm = _load_surface(args.gt, args.samples, rng)
    if (pred_nrm is None or gt_nrm is None):
        print("note: normals unavailable on at least one side; "
              "normal consistency skipped")
    report = metrics.evaluate_surfaces(gt_pts, pred_pts,
                                       gt_normals=gt_nrm, pred_normals=pred_nrm,
                                       fscore_threshold=args.fscore_thresh)
    print(report.summary())
    if args.out:
        report.to_json(args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    if args.shell <= 0:
        print("error: --shell must be positive", file=sys.stderr)
        return 2
    if args.builtin:
        field_obj = fields.builtin_field(args.builtin)
        cloud_pts = None
    else:
        if args.model is None:
            print("error: need a model path or --builtin", file=sys.stderr)
            return 2
        field_obj = load_model(args.model)
        cloud_pts = None
    d = field_obj.input_dim

    points, diag = morse.find_critical_points(field_obj, resolution=args.grid,
                                              delta=args.shell)
    report = morse.census(points, delta=args.shell, diagnostics=diag, dim=d)

    # shell statistics sampled around the zero set
    rng = np.random.default_rng(args.seed)
    if cloud_pts is None:
        # draw shell anchors from the grid where |f| is small
        grids = contour.evaluate_grid(field_obj, 64)
        vals = grids["value"].values
        coords = grids["value"].node_coordinates()
        anchors = coords[np.abs(vals) < np.quantile(np.abs(vals), 0.05)]
        cloud_pts = anchors if len(anchors) else coords
    try:
        report.stats = morse.shell_statistics(field_obj, cloud_pts,
                                              delta=args.shell, rng=rng)
    except RuntimeError as exc:
        print(f"note: shell statistics skipped ({exc})")

    print(f"critical points: {report.counts or '{}'} "
          f"chi_estimate={report.euler_characteristic_estimate} "
          f"degenerate={report.n_degenerate}")
    if report.stats:
        print(f"shell stats: mean|detH|={report.stats['mean_abs_det']:.3e} "
              f"mean|trH|={report.stats['mean_abs_trace']:.3e} "
              f"mean|grad|={report.stats['mean_grad_norm']:.3f}")
    if args.out:
        report.to_json(args.out)
        print(f"report written to {args.out}")
    if args.dump_fields:
        outdir = Path(args.dump_fields)
        outdir.mkdir(parents=True, exist_ok=True)
        grids = contour.evaluate_grid(field_obj, args.grid, what="all")
        for name in ("value", "gradnorm", "det", "trace"):
            save_grid(grids[name], outdir / f"{name}.grid")
        print(f"field grids dumped to {outdir}/")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdfrecon",
        description="Reconstruct a signed-distance field from an unoriented "
                    "point cloud and analyze its level set.")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (default: env NSH_THREADS or all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a field on a point cloud",
                       epilog=_config_epilog(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("cloud", help="input point cloud (.xyz or .ply)")
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--out", default="model.nsh", help="checkpoint output path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--dim", type=int, choices=(2, 3), default=3)
    p.add_argument("--hidden-layers", dest="hidden_layers", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--activation", choices=("sine", "softplus"), default=None)
    p.add_argument("--omega0", type=float, default=None)
    p.add_argument("--bias-init", dest="bias_init",
                   choices=("uniform", "zero"), default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("extract", help="contour the zero level set of a model")
    p.add_argument("model")
    p.add_argument("--res", type=int, default=256, help="grid nodes per axis")
    p.add_argument("--iso", type=float, default=0.0)
    p.add_argument("--pad", type=float, default=0.0,
                   help="extend the extraction box beyond [-1,1] by this margin")
    p.add_argument("--out", default="mesh.obj")
    p.add_argument("--world-units", action="store_true",
                   help="map vertices back through the stored transform")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="compare two surfaces (mesh or points)")
    p.add_argument("pred", help="predicted surface")
    p.add_argument("gt", help="ground-truth surface")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--fscore-thresh", type=float, default=0.005)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="critical-point census and shell statistics")
    p.add_argument("model", nargs="?", default=None)
    p.add_argument("--builtin", choices=("sphere", "circle", "torus"),
                   help="analytic test field instead of a model")
    p.add_argument("--shell", type=float, default=0.05, help="shell half-width")
    p.add_argument("--grid", type=int, default=128, help="seed/dump grid resolution")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-fields", help="directory for det/trace/gradnorm grid dumps")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("NSH_THREADS"):
        threads = int(os.environ["NSH_THREADS"])
    try:
        if threads is not None:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
