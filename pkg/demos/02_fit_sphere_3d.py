"""Fit a 3D signed-distance field to points on a sphere and mesh it.

A scaled-down version of the 3D pipeline (1000 points, 2x64 net, 1500
iterations) so it finishes in a few minutes on one core; bump ITERS /
WIDTH / N_POINTS for production-quality results (the full recipe is 2000+
points, 3x128, 5000 iterations).

Run from the repository root:  python3 demos/02_fit_sphere_3d.py
"""

import numpy as np

import sdfrecon as sr
from sdfrecon import contour, metrics
from sdfrecon.trainer import TrainConfig, fit

N_POINTS = 1000
ITERS = 1500
OUT_MODEL = "sphere3d.nsh"
OUT_MESH = "sphere3d.obj"

# --- 1. sample the unit sphere ----------------------------------------------
rng = np.random.default_rng(123)
v = rng.standard_normal((N_POINTS, 3))
v /= np.linalg.norm(v, axis=1, keepdims=True)
cloud = sr.PointCloud(points=v)
print(f"input: {len(cloud)} unoriented points on the unit sphere")

# --- 2. train ----------------------------------------------------------------
net = sr.init_network(3, hidden_layers=2, width=64, seed=11)
config = TrainConfig(iters=ITERS, seed=7, log_every=250,
                     checkpoint_path=OUT_MODEL)
net, history = fit(cloud, net, config,
                   callback=lambda it, total, terms:
                   print(f"  iter {it:5d}  total={total:9.3e}"))
print(f"model written to {OUT_MODEL}")

# --- 3. mesh the zero level set ----------------------------------------------
grids = contour.evaluate_grid(net, 96, domain=(-1.1, 1.1))
mesh = contour.marching_cubes(grids["value"])
sr.save_mesh(mesh, OUT_MESH)
print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
      f"Euler characteristic {mesh.euler_characteristic()} -> {OUT_MESH}")

# --- 4. score against the ground truth ----------------------------------------
smp_rng = np.random.default_rng(5)
pred_pts, pred_nrm = metrics.sample_surface(mesh, n=50_000, rng=smp_rng)
gt = smp_rng.standard_normal((50_000, 3))
gt /= np.linalg.norm(gt, axis=1, keepdims=True)
gt_pts = net.transform.apply(gt)       # compare in normalized coordinates
report = metrics.evaluate_surfaces(gt_pts, pred_pts, fscore_threshold=0.01)
print("metrics:", report.summary())
