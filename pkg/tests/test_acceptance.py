"""Acceptance criteria, one test per criterion.

Each test prints a single [PASS]/[FAIL] line (visible with `pytest -s`,
and mirrored by the test outcome itself). Criterion 6 trains a 3D model
for ~1 h and is marked slow: `pytest -m slow` runs it.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

import sdfrecon as sr
from sdfrecon import contour, metrics, morse
from sdfrecon.autodiff import det_batch, loss_and_grad
from sdfrecon.fields import CircleField, SphereField
from sdfrecon.geometry import PointCloud
from sdfrecon.losses import AnnealSchedule, LossConfig, tau
from sdfrecon.network import init_network
from sdfrecon.sampler import SampleBatch
from sdfrecon.trainer import TrainConfig, fit

from conftest import circle_points, sphere_points
from test_morse import SinProductField, brute_force_sin_product_census


def verdict(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. jet exactness


def test_criterion_01_jet_exactness():
    t0 = time.time()
    h = 1e-4
    worst_fd = 0.0
    worst_sym = 0.0
    coord_rng = np.random.default_rng(99)
    for seed in range(20):
        # omega0=10 keeps the finite-difference truncation error (which
        # grows like omega0^2 h^2) below the comparison tolerance
        net = init_network(3, hidden_layers=2, width=32, seed=seed, omega0=10.0)
        xs = coord_rng.uniform(-1, 1, (3, 3))
        f, g, H = net.forward(xs, order=2)
        worst_sym = max(worst_sym, np.abs(H - np.swapaxes(H, 1, 2)).max())
        for i, x in enumerate(xs):
            scale = max(1.0, np.abs(g[i]).max(), np.abs(H[i]).max())
            for a in range(3):
                e = np.zeros(3)
                e[a] = h
                fp, gp, _ = net.forward((x + e)[None], order=1)
                fm, gm, _ = net.forward((x - e)[None], order=1)
                gfd = (fp[0] - fm[0]) / (2 * h)
                worst_fd = max(worst_fd, abs(gfd - g[i, a]) / scale)
                Hfd = (gp[0] - gm[0]) / (2 * h)
                worst_fd = max(worst_fd, np.abs(Hfd - H[i, a]).max() / scale)
    elapsed = time.time() - t0
    ok = worst_fd < 1e-6 and worst_sym < 1e-10 and elapsed < 5.0
    verdict(1, ok, f"jet vs finite differences: rel err {worst_fd:.2e} "
                   f"(< 1e-6), Hessian asymmetry {worst_sym:.2e} (< 1e-10), "
                   f"{elapsed:.1f}s (< 5s), 20 nets")


# ---------------------------------------------------------------------------
# 2. parameter-gradient exactness


def _term_config(**kw):
    """A LossConfig isolating one term at unit weight, so the 1e-8 absolute
    floor of the comparison is honest about the term itself rather than
    about its published lambda."""
    base = dict(lambda_manifold=0.0, lambda_non_manifold=0.0,
                lambda_eikonal_relax=0.0, lambda_singular_hessian=0.0,
                regularizer="none")
    base.update(kw)
    return LossConfig(**base)


TERM_CONFIGS = [
    ("manifold", _term_config(lambda_manifold=1.0)),
    ("non-manifold", _term_config(lambda_non_manifold=1.0)),
    ("eikonal relaxed", _term_config(lambda_eikonal_relax=1.0)),
    ("eikonal exact", _term_config(lambda_eikonal_relax=1.0,
                                   eikonal_mode="exact_on_P")),
    ("eikonal exact all", _term_config(lambda_eikonal_relax=1.0,
                                       eikonal_mode="exact_on_all")),
    ("singular hessian", _term_config(lambda_singular_hessian=1.0,
                                      regularizer="singular_hessian")),
    ("dirichlet", _term_config(lambda_singular_hessian=1.0,
                               regularizer="dirichlet")),
    ("hessian l2", _term_config(lambda_singular_hessian=1.0,
                                regularizer="hessian_l2")),
    ("hessian l1", _term_config(lambda_singular_hessian=1.0,
                                regularizer="hessian_l1")),
    ("laplacian", _term_config(lambda_singular_hessian=1.0,
                               regularizer="laplacian")),
    ("neumann", _term_config(neumann_weight=1.0)),
]


def test_criterion_02_parameter_gradients():
    t0 = time.time()
    rng = np.random.default_rng(7)
    normals = rng.standard_normal((20, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    batch = SampleBatch(
        surface_indices=np.arange(20),
        surface_points=rng.uniform(-0.6, 0.6, (20, 3)),
        near_points=rng.uniform(-0.6, 0.6, (20, 3)),
        far_points=rng.uniform(-1, 1, (20, 3)),
        sigmas=np.full(20, 0.05),
        surface_normals=normals,
    )
    net = init_network(3, hidden_layers=2, width=16, seed=4, omega0=10.0)
    h = 1e-6
    worst = {}
    arrays = [a for pair in zip(net.weights, net.biases) for a in pair]
    for name, config in TERM_CONFIGS:
        _, grad, _ = loss_and_grad(net, batch, config, 0.37)
        flat = grad.flatten()
        k = 0
        w = 0.0
        for arr in arrays:
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                if k % 3 == 0:  # every third parameter, all layers covered
                    idx = it.multi_index
                    old = arr[idx]
                    arr[idx] = old + h
                    tp, _, _ = loss_and_grad(net, batch, config, 0.37)
                    arr[idx] = old - h
                    tm, _, _ = loss_and_grad(net, batch, config, 0.37)
                    arr[idx] = old
                    fd = (tp - tm) / (2 * h)
                    # 1e-5 relative with a 1e-8 absolute floor
                    w = max(w, abs(fd - flat[k]) / max(1e-3, abs(flat[k])))
                k += 1
        worst[name] = w
    elapsed = time.time() - t0
    bad = {n: f"{v:.1e}" for n, v in worst.items() if v >= 1e-5}
    ok = not bad and elapsed < 30.0
    verdict(2, ok, f"all {len(TERM_CONFIGS)} loss terms match finite "
                   f"differences to 1e-5 rel / 1e-8 abs "
                   f"(worst {max(worst.values()):.2e}), {elapsed:.1f}s (< 30s)"
                   + (f"; failures: {bad}" if bad else ""))


# ---------------------------------------------------------------------------
# 3. singular-Hessian identity on the analytic sphere / circle


def test_criterion_03_singular_hessian_identity():
    rng = np.random.default_rng(3)
    results = []
    for field, d in ((SphereField(radius=0.5), 3), (CircleField(radius=0.5), 2)):
        v = rng.standard_normal((10_000, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        radii = 0.5 + rng.uniform(-0.05, 0.05, 10_000)
        shell = v * radii[:, None]
        _, g, H = field.forward(shell, order=2)
        gn = np.linalg.norm(g, axis=1)
        results.append((np.abs(det_batch(H)).max(),
                        np.abs(gn - 1.0).max()))
    worst_det = max(r[0] for r in results)
    worst_gn = max(r[1] for r in results)
    ok = worst_det < 1e-12 and worst_gn < 1e-9
    verdict(3, ok, f"analytic sphere+circle shell (10^4 pts each): "
                   f"max |det H| {worst_det:.2e} (< 1e-12), "
                   f"grad-norm deviation {worst_gn:.2e} (< 1e-9)")


# ---------------------------------------------------------------------------
# 4. annealing schedule


def test_criterion_04_annealing_schedule():
    T = 10000
    sched = AnnealSchedule(total_iters=T)
    knots_ok = (tau(sched, 0) == 1.0
                and tau(sched, int(0.2 * T)) == 1.0
                and tau(sched, int(0.4 * T)) == 0.0003
                and tau(sched, T) == 0.00003)
    vals = [tau(sched, i) for i in range(T + 1)]
    monotone = all(a >= b for a, b in zip(vals, vals[1:]))
    max_step = max(abs(a - b) for a, b in zip(vals, vals[1:]))
    continuous = max_step <= (1.0 - 0.0003) / (0.2 * T) + 1e-12
    ok = knots_ok and monotone and continuous
    verdict(4, ok, f"tau knots (1, 1, 0.0003, 0.00003) exact={knots_ok}, "
                   f"monotone={monotone}, continuous={continuous} "
                   f"(max step {max_step:.2e})")


# ---------------------------------------------------------------------------
# 5. end-to-end 2D circle


# regression baseline frozen from the first passing run (seed 2024/0):
# 1 component, max radial error 4.4e-3
BASELINE_2D_MAX_RADIAL_ERROR = 4.4e-3


@pytest.fixture(scope="module")
def trained_circle():
    rng = np.random.default_rng(2024)
    theta = rng.uniform(0, 2 * np.pi, 100)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cloud = PointCloud(points=pts)
    net = init_network(2, hidden_layers=2, width=64, seed=0)
    config = TrainConfig(iters=3000, seed=0, log_every=500)
    net, history = fit(cloud, net, config)
    return net, history


def test_criterion_05_end_to_end_2d(trained_circle):
    net, _ = trained_circle
    # the normalized unit circle is tangent to [-1, 1]^2; pad the extraction
    # window so the contour closes instead of ending at the box boundary
    grids = contour.evaluate_grid(net, 256, domain=(-1.1, 1.1))
    poly = contour.marching_squares(grids["value"])
    components = poly.connected_components()
    world = net.transform.invert(poly.vertices)
    # radial error in normalized units: world-space deviation from the unit
    # circle, scaled back through the normalization transform
    radial = np.abs(np.linalg.norm(world, axis=1) - 1.0) * net.transform.scale
    max_err = radial.max()
    ok = (components == 1 and max_err < 0.02
          and max_err < 3.0 * BASELINE_2D_MAX_RADIAL_ERROR)
    verdict(5, ok, f"2D circle fit (100 pts, 2x64, 3000 iters): "
                   f"{components} component (= 1), max radial error "
                   f"{max_err:.2e} (< 0.02; frozen baseline "
                   f"{BASELINE_2D_MAX_RADIAL_ERROR:.1e})")


# ---------------------------------------------------------------------------
# 6. end-to-end 3D sphere (slow)


@pytest.mark.slow
def test_criterion_06_end_to_end_3d():
    rng = np.random.default_rng(123)
    cloud = PointCloud(points=sphere_points(2000, rng=rng))
    net = init_network(3, hidden_layers=3, width=128, seed=11)
    config = TrainConfig(iters=5000, seed=7, log_every=500)
    net, _ = fit(cloud, net, config)

    grids = contour.evaluate_grid(net, 128, domain=(-1.1, 1.1))
    mesh = contour.marching_cubes(grids["value"])
    chi = mesh.euler_characteristic()

    smp_rng = np.random.default_rng(5)
    pred_pts, _ = metrics.sample_surface(mesh, n=100_000, rng=smp_rng)
    gt_pts = net.transform.apply(sphere_points(100_000, rng=smp_rng))
    report = metrics.evaluate_surfaces(gt_pts, pred_pts, fscore_threshold=0.01)
    ok = chi == 2 and report.fscore >= 95.0
    verdict(6, ok, f"3D sphere fit (2000 pts, 3x128, 5000 iters): "
                   f"Euler characteristic {chi} (= 2), F-score@0.01 "
                   f"{report.fscore:.2f} (>= 95), chamfer(x1e3) "
                   f"{report.chamfer:.3f}")


# ---------------------------------------------------------------------------
# 7. metrics oracles


def test_criterion_07_metrics_oracles():
    rng = np.random.default_rng(17)
    p1 = rng.uniform(-1, 1, (500, 3))
    p2 = rng.uniform(-1, 1, (500, 3))
    d = np.linalg.norm(p1[:, None, :] - p2[None, :, :], axis=2)
    brute_ch = 0.5 * d.min(axis=1).mean() + 0.5 * d.min(axis=0).mean()
    t = 0.25
    brute_rec = (d.min(axis=1) < t).mean() * 100.0
    brute_pre = (d.min(axis=0) < t).mean() * 100.0
    brute_fs = (2 * brute_rec * brute_pre / (brute_rec + brute_pre)
                if brute_rec + brute_pre else 0.0)
    ch_err = abs(metrics.chamfer_l1(p1, p2) - brute_ch)
    fs, pre, rec = metrics.f_score(p1, p2, t=t)
    fs_err = max(abs(fs - brute_fs), abs(pre - brute_pre), abs(rec - brute_rec))
    ident_ch = metrics.chamfer_l1(p1, p1)
    ident_fs = metrics.f_score(p1, p1, t=0.005)[0]
    ok = (ch_err < 1e-12 and fs_err < 1e-12
          and ident_ch == 0.0 and ident_fs == 100.0)
    verdict(7, ok, f"chamfer/f-score vs brute force (500 vs 500): "
                   f"max deviation {max(ch_err, fs_err):.2e} (< 1e-12); "
                   f"identical sets: chamfer {ident_ch}, fscore {ident_fs}")


# ---------------------------------------------------------------------------
# 8. marching cubes


def test_criterion_08_marching_cubes():
    from test_contour import PlaneField, sphere_mesh_error
    mesh = contour.marching_cubes(contour.evaluate_grid(PlaneField(), 33)["value"])
    plane_dev = np.abs(mesh.vertices[:, 2]).max()
    e64 = sphere_mesh_error(64)
    e128 = sphere_mesh_error(128)
    ratio = e64 / e128
    ok = plane_dev < 1e-12 and 2.5 <= ratio <= 6.0
    verdict(8, ok, f"f=z plane: max |z| {plane_dev:.2e} (< 1e-12); sphere "
                   f"error ratio 64^3/128^3 = {ratio:.2f} (in [2.5, 6])")


# ---------------------------------------------------------------------------
# 9. Morse census oracle


def test_criterion_09_morse_census():
    domain = (-np.pi - 0.1, np.pi + 0.1)
    field = SinProductField()
    points, diag = morse.find_critical_points(field, domain=domain,
                                              resolution=48, delta=2.0)
    report = morse.census(points, delta=2.0, diagnostics=diag, dim=2)
    expect = brute_force_sin_product_census(domain)
    counts_ok = (report.counts.get("minimum", 0) == expect["minimum"]
                 and report.counts.get("saddle", 0) == expect["saddle"]
                 and report.counts.get("maximum", 0) == expect["maximum"])
    chi_expect = expect["minimum"] - expect["saddle"] + expect["maximum"]
    chi_ok = report.euler_characteristic_estimate == chi_expect
    ok = counts_ok and chi_ok
    verdict(9, ok, f"sin x sin y census {dict(report.counts)} matches "
                   f"brute-force scan {expect}; alternating sum "
                   f"{report.euler_characteristic_estimate} = {chi_expect}")


# ---------------------------------------------------------------------------
# 10. determinism across thread counts


def test_criterion_10_determinism(tmp_path):
    rng = np.random.default_rng(0)
    pts3 = np.zeros((100, 3))
    pts3[:, :2] = circle_points(100, rng=rng)
    cloud_path = tmp_path / "cloud.xyz"
    sr.save_point_cloud(PointCloud(points=pts3), cloud_path)
    blobs = []
    for threads in (1, 2):
        out = tmp_path / f"model_t{threads}.nsh"
        cmd = [sys.executable, "-m", "sdfrecon.cli", "--threads", str(threads),
               "fit", str(cloud_path), "--dim", "2", "--iters", "60",
               "--hidden-layers", "2", "--width", "32", "--batch-size", "500",
               "--seed", "9", "--out", str(out), "--quiet"]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        blobs.append(out.read_bytes())
    ok = blobs[0] == blobs[1] and len(blobs[0]) > 0
    verdict(10, ok, f"fixed-seed checkpoints byte-identical across thread "
                    f"caps 1 and 2 ({len(blobs[0])} bytes)")


# ---------------------------------------------------------------------------
# 11. regularizer-swap ablation harness (logged, not asserted on ordering)


def test_criterion_11_ablation_harness():
    rng = np.random.default_rng(2024)
    theta = rng.uniform(0, 2 * np.pi, 100)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cloud = PointCloud(points=pts)
    gt = circle_points(5000, rng=np.random.default_rng(1))

    results = {}
    for reg in ("singular_hessian", "dirichlet", "hessian_l2", "laplacian"):
        net = init_network(2, hidden_layers=2, width=64, seed=0)
        config = TrainConfig(iters=600, seed=0, log_every=100,
                             loss=LossConfig(regularizer=reg))
        net, history = fit(cloud, net, config)
        grids = contour.evaluate_grid(net, 128, domain=(-1.1, 1.1))
        poly = contour.marching_squares(grids["value"])
        if len(poly.vertices):
            world = net.transform.invert(poly.vertices)
            chamfer = metrics.chamfer_l1(world, gt) * 1e3
        else:
            chamfer = float("inf")
        results[reg] = {"chamfer": chamfer,
                        "final_terms": {k: v[-1] for k, v in history.terms.items()},
                        "n_history_rows": len(history.iterations)}

    # per-term histories must exist for every run; the chamfer ordering is
    # informational only (margins are statistical at paper scale)
    histories_ok = all(r["n_history_rows"] > 0 and r["final_terms"]
                       for r in results.values())
    ordering = sorted(results, key=lambda r: results[r]["chamfer"])
    chamfers = {r: f"{results[r]['chamfer']:.3f}" for r in ordering}
    best = ordering[0]
    verdict(11, histories_ok,
            f"ablation harness ran 4 regularizers; chamfer(x1e3) {chamfers}; "
            f"lowest: {best} "
            f"({'matches' if best == 'singular_hessian' else 'does not match'}"
            f" the expected winner; logged, not asserted)")
