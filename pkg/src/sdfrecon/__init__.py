"""Signed-distance-field reconstruction from unoriented point clouds.

Fits a sinusoidal MLP to a point cloud under a Hessian-determinant
regularizer with an annealed weight, then extracts, evaluates, and
analyzes the zero level set.
"""

from .geometry import (PointCloud, NormalizationTransform, TriangleMesh,
                       Polyline2D, ScalarGrid, load_point_cloud,
                       save_point_cloud, normalize, save_mesh, load_mesh,
                       save_polyline, save_grid, load_grid)
from .network import Jet, SineNetwork, init_network, save_model, load_model
from .losses import LossConfig, AnnealSchedule, tau
from .sampler import SampleBatch, compute_sigmas, draw_batch
from .trainer import TrainConfig, fit
from .contour import evaluate_grid, marching_squares, marching_cubes
from .metrics import MetricsReport, sample_surface, chamfer_l1, f_score, evaluate_surfaces
from .morse import find_critical_points, census, shell_statistics
from .fields import SphereField, CircleField, TorusField, builtin_field

__version__ = "0.1.0"
