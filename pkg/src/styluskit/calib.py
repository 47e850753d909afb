"""Two-step tip calibration for a tracked stylus.

Step one (position): with the tip pivoting on a fixed point, the tip
offset ``p`` and the contact point ``c`` jointly minimize
``sum_i ||R_i p + t_i - c||^2`` -- a linear least-squares problem over the
stacked fiducial poses.  The O(N^2) sum of pairwise tip-point distances,
which has the same noise-free minimizer, is kept as a verification oracle
in :func:`pairwise_objective`.

Step two (orientation): with the stylus rotating in holes of known world
inclination, the rotation of the tip frame is chosen so its z axis (the
approach vector) aligns with every hole's reference axis, by minimizing
``sum (1 - cos theta)`` over all measurements.  Roll about the tip axis is
unobservable here (the tip is axially symmetric) and is fixed separately
against the button direction by :func:`fix_roll_to_button`.

Both steps drop occlusion glitches with density clustering: points with
too few neighbors inside a radius are discarded, and only the largest
cluster is kept.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .errors import (
    AllOutliers,
    DegenerateAxesWarning,
    DegenerateDirection,
    DegenerateRotations,
    FormatError,
    NoConvergence,
)
from .geometry import (
    EulerAngles,
    Pose,
    angle_between,
    euler_to_rotation,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
    quats_to_matrices,
    rotation_between,
    rotation_to_euler,
    vec3,
)
from .jsonio import dumps_canonical

DEFAULT_MIN_ROTATION = math.radians(30.0)
_EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class FilterParams:
    """Density-clustering outlier filter: a point needs at least
    ``min_neighbors`` points (itself included) within ``neighborhood_radius``
    to seed a cluster; only the largest cluster survives."""

    neighborhood_radius: float = 0.005
    min_neighbors: int = 10

    def __post_init__(self):
        if self.neighborhood_radius <= 0.0:
            raise ValueError("neighborhood_radius must be positive")
        if self.min_neighbors < 1:
            raise ValueError("min_neighbors must be at least 1")


AXIS_FILTER_DEFAULT = FilterParams(neighborhood_radius=0.02, min_neighbors=3)


@dataclass
class PositionDataset:
    """Fiducial poses recorded while the tip pivots on one fixed point."""

    poses: list[Pose]

    def __post_init__(self):
        if not self.poses:
            raise ValueError("position dataset must not be empty")

    def __len__(self) -> int:
        return len(self.poses)

    def rotation_array(self) -> np.ndarray:
        return quats_to_matrices(np.array([p.rotation for p in self.poses]))

    def translation_array(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses])

    def quaternion_array(self) -> np.ndarray:
        return np.array([p.rotation for p in self.poses])


@dataclass
class HoleRecording:
    """Fiducial poses recorded while the stylus spins in one hole."""

    reference_axis: np.ndarray
    poses: list[Pose]

    def __post_init__(self):
        axis = vec3(self.reference_axis)
        n = np.linalg.norm(axis)
        if n < 1e-12:
            raise ValueError("hole reference axis must be nonzero")
        self.reference_axis = axis / n
        if not self.poses:
            raise ValueError("hole recording must not be empty")


@dataclass
class OrientationDataset:
    """Per-hole recordings against known world-frame reference axes."""

    holes: list[HoleRecording]

    def __post_init__(self):
        if not self.holes:
            raise ValueError("orientation dataset must not be empty")


@dataclass
class PositionCalibration:
    tip_offset: np.ndarray
    pivot: np.ndarray
    residual_rms: float
    removed_outliers: int


@dataclass
class OrientationCalibration:
    angles: EulerAngles
    residual_rms: float
    removed_outliers: int


@dataclass
class TipCalibration:
    """The fiducial-to-tip transform with calibration diagnostics."""

    transform: Pose
    position_residual_rms: float
    orientation_residual_rms: float
    filtered_outliers: int

    def __post_init__(self):
        if self.position_residual_rms < 0.0 or self.orientation_residual_rms < 0.0:
            raise ValueError("residuals must be non-negative")
        if self.filtered_outliers < 0:
            raise ValueError("filtered_outliers must be non-negative")


def candidate_tip_points(ds: PositionDataset, p) -> np.ndarray:
    """World tip positions ``R_i p + t_i`` implied by a candidate offset."""
    p = vec3(p)
    return ds.rotation_array() @ p + ds.translation_array()


def filter_outliers(points, params: FilterParams) -> tuple[np.ndarray, int]:
    """Keep the largest density cluster of ``points``.

    Returns ``(kept_indices, removed_count)``; kept indices stay in input
    order, so the result is deterministic.  Raises :class:`AllOutliers`
    when no cluster reaches ``min_neighbors`` points.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("filter_outliers expects a non-empty (N, d) array")
    n = pts.shape[0]
    tree = cKDTree(pts)
    neighbor_lists = tree.query_ball_point(pts, params.neighborhood_radius)
    core = np.array([len(nb) >= params.min_neighbors for nb in neighbor_lists])

    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for start in range(n):
        if labels[start] != -1 or not core[start]:
            continue
        labels[start] = cluster
        stack = [start]
        while stack:
            j = stack.pop()
            for k in neighbor_lists[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    if core[k]:
                        stack.append(k)
        cluster += 1

    if cluster == 0:
        raise AllOutliers("no point has enough neighbors to seed a cluster")
    sizes = np.bincount(labels[labels >= 0], minlength=cluster)
    best = int(np.argmax(sizes))
    if sizes[best] < params.min_neighbors:
        raise AllOutliers(
            f"largest cluster has {sizes[best]} points, fewer than min_neighbors"
        )
    kept = np.flatnonzero(labels == best)
    return kept, n - kept.size


def _rotation_diversity(ds: PositionDataset) -> float:
    """Largest pairwise rotation angle in the dataset."""
    q = ds.quaternion_array()
    dots = np.abs(q @ q.T)
    np.clip(dots, -1.0, 1.0, out=dots)
    return 2.0 * math.acos(float(dots.min()))


def _solve_pivot(rotations: np.ndarray, translations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = rotations.shape[0]
    a = np.zeros((3 * n, 6))
    a[:, :3] = rotations.reshape(-1, 3)
    a[:, 3:] = -np.tile(np.eye(3), (n, 1))
    b = -translations.reshape(-1)
    solution, _, _, singular = np.linalg.lstsq(a, b, rcond=None)
    if singular[-1] < 1e-10 * singular[0]:
        raise DegenerateRotations(
            "stacked pivot system is rank-deficient; tip offset is unobservable"
        )
    return solution[:3], solution[3:]


def calibrate_position(
    ds: PositionDataset,
    params: FilterParams | None = FilterParams(),
    min_rotation: float = DEFAULT_MIN_ROTATION,
) -> PositionCalibration:
    """Recover the tip offset from a pivot recording.

    A first least-squares pass estimates the offset, occlusion outliers
    are removed by density clustering on the induced tip points, and the
    solve is repeated on the kept set.  Pass ``params=None`` to skip
    filtering (useful to quantify how much the filter helps).
    """
    if len(ds) < 3:
        raise DegenerateRotations(f"need at least 3 poses, got {len(ds)}")
    if _rotation_diversity(ds) < min_rotation:
        raise DegenerateRotations(
            "largest pairwise rotation is below the required minimum "
            f"({math.degrees(min_rotation):.1f} deg)"
        )
    rotations = ds.rotation_array()
    translations = ds.translation_array()
    offset, pivot = _solve_pivot(rotations, translations)
    removed = 0
    if params is not None:
        tips = rotations @ offset + translations
        kept, removed = filter_outliers(tips, params)
        if removed:
            rotations = rotations[kept]
            translations = translations[kept]
            offset, pivot = _solve_pivot(rotations, translations)
    residuals = rotations @ offset + translations - pivot
    rms = float(np.sqrt(np.mean(np.sum(residuals * residuals, axis=1))))
    return PositionCalibration(
        tip_offset=offset, pivot=pivot, residual_rms=rms, removed_outliers=removed
    )


def pairwise_objective(ds: PositionDataset, p, cap: int = 2000) -> float:
    """Sum over all ordered pairs of ``||(R_i p + t_i) - (R_j p + t_j)||``.

    O(N^2); refuses datasets larger than ``cap``.  Kept as an independent
    oracle for :func:`calibrate_position`.
    """
    if len(ds) > cap:
        raise ValueError(f"pairwise objective is O(N^2); dataset exceeds cap {cap}")
    tips = candidate_tip_points(ds, p)
    if tips.shape[0] < 2:
        return 0.0
    return 2.0 * float(pdist(tips).sum())


def _tip_axis(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    return np.array([cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr])


def _tip_axis_jacobian(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    d_yaw = np.array([-sy * sp * cr + cy * sr, cy * sp * cr + sy * sr, 0.0])
    d_pitch = np.array([cy * cp * cr, sy * cp * cr, -sp * cr])
    d_roll = np.array([-cy * sp * sr + sy * cr, -sy * sp * sr - cy * cr, -cp * sr])
    return np.column_stack([d_yaw, d_pitch, d_roll])


def _euler_of_matrix(m: np.ndarray) -> EulerAngles:
    return rotation_to_euler(quat_from_matrix(m))


def _descend_alignment(
    s: np.ndarray, count: int, seed: np.ndarray, max_iterations: int
) -> np.ndarray:
    """Minimize ``count - s . (R e_z)`` over Euler angles of R.

    ``seed`` is the starting rotation matrix.  The Euler chart is
    re-anchored with a fixed 90-degree rotation when iterates approach the
    pitch singularity.
    """
    anchors = [
        np.eye(3),
        quat_to_matrix(quat_from_axis_angle([1.0, 0.0, 0.0], math.pi / 2.0)),
        quat_to_matrix(quat_from_axis_angle([0.0, 1.0, 0.0], math.pi / 2.0)),
    ]
    band = math.pi / 2.0 - 0.01
    gradient_tol = 1e-9 * max(1.0, float(count))
    last_error = None
    for anchor in anchors:
        left_seed = anchor.T @ seed
        angles0 = _euler_of_matrix(left_seed)
        if abs(angles0.pitch) > band:
            continue
        s_local = anchor.T @ s

        def objective(x, s_local=s_local):
            value = float(count) - float(s_local @ _tip_axis(*x))
            grad = -(_tip_axis_jacobian(*x).T @ s_local)
            return value, grad

        result = minimize(
            objective,
            x0=np.array([angles0.yaw, angles0.pitch, angles0.roll]),
            jac=True,
            method="BFGS",
            options={"maxiter": max_iterations, "gtol": gradient_tol},
        )
        gradient_norm = float(np.linalg.norm(result.jac))
        pitch_ok = abs(float(result.x[1])) <= band
        if (result.success or gradient_norm <= gradient_tol) and pitch_ok:
            left = quat_to_matrix(
                euler_to_rotation(EulerAngles(*[float(v) for v in result.x]))
            )
            return anchor @ left
        last_error = f"gradient norm {gradient_norm:.3e} after {result.nit} iterations"
    raise NoConvergence(
        f"axis alignment did not converge within {max_iterations} iterations"
        + (f" ({last_error})" if last_error else "")
    )


def calibrate_orientation(
    ds: OrientationDataset,
    tip_offset,
    axis_filter: FilterParams | None = AXIS_FILTER_DEFAULT,
    initial_roll: float = 0.0,
    max_iterations: int = 200,
) -> OrientationCalibration:
    """Recover the tip-frame rotation that aligns the approach axis.

    Each pose in hole ``i`` measures the tip axis in the fiducial body
    frame as ``R_j^T z_ref_i``; those measurements are outlier-filtered
    per hole, a closed-form alignment of hole 1's mean measurement seeds
    the solve, and local descent refines the Euler angles minimizing
    ``sum (1 - cos theta)``.  ``tip_offset`` is accepted for interface
    symmetry with the assembled calibration; the axis solve does not
    depend on it.  ``initial_roll`` spins the seed about its own z axis
    (the recovered approach axis must not depend on it).
    """
    vec3(tip_offset)
    refs = np.array([h.reference_axis for h in ds.holes])
    if len(ds.holes) == 1 or _max_pairwise_angle(refs) < math.radians(1.0):
        warnings.warn(
            "reference axes are parallel within 1 degree; rotation about their "
            "common direction is unobservable",
            DegenerateAxesWarning,
            stacklevel=2,
        )

    measured: list[np.ndarray] = []
    removed = 0
    for hole in ds.holes:
        rotations = quats_to_matrices(np.array([p.rotation for p in hole.poses]))
        axes = np.einsum("nji,j->ni", rotations, hole.reference_axis)
        if axis_filter is not None and axes.shape[0] >= axis_filter.min_neighbors:
            kept, dropped = filter_outliers(axes, axis_filter)
            axes = axes[kept]
            removed += dropped
        measured.append(axes)

    total = sum(a.shape[0] for a in measured)
    s = np.sum(np.concatenate(measured, axis=0), axis=0)
    if np.linalg.norm(s) < 1e-9:
        raise NoConvergence("measured axes cancel out; alignment target vanishes")

    mean_first = measured[0].mean(axis=0)
    seed_quat = quat_multiply(
        rotation_between(_EZ, mean_first),
        quat_from_axis_angle(_EZ, initial_roll),
    )
    solution = _descend_alignment(s, total, quat_to_matrix(seed_quat), max_iterations)

    tip_axis = solution @ _EZ
    residuals = [
        angle_between(a, tip_axis) for axes in measured for a in axes
    ]
    rms = float(np.sqrt(np.mean(np.square(residuals)))) if residuals else 0.0
    return OrientationCalibration(
        angles=_euler_of_matrix(solution), residual_rms=rms, removed_outliers=removed
    )


def _max_pairwise_angle(axes: np.ndarray) -> float:
    if axes.shape[0] < 2:
        return 0.0
    dots = np.clip(axes @ axes.T, -1.0, 1.0)
    return float(np.arccos(dots.min()))


def orientation_objective(ds: OrientationDataset, angles: EulerAngles) -> float:
    """The alignment cost ``sum (1 - cos theta)`` at candidate angles."""
    tip_axis = quat_rotate(euler_to_rotation(angles), _EZ)
    total = 0.0
    for hole in ds.holes:
        rotations = quats_to_matrices(np.array([p.rotation for p in hole.poses]))
        world_axes = rotations @ tip_axis
        total += float(np.sum(1.0 - world_axes @ hole.reference_axis))
    return total


def fix_roll_to_button(calib: Pose, button_sample: Pose, world_button_direction) -> Pose:
    """Spin the calibration about its own z axis so the tip-frame y axis
    points toward the button in the given sample pose.

    ``world_button_direction`` is projected onto the plane normal to the
    tip axis; a (near-)zero projection raises :class:`DegenerateDirection`.
    """
    direction = vec3(world_button_direction)
    n = np.linalg.norm(direction)
    if n < 1e-12:
        raise DegenerateDirection("button direction has (near-)zero norm")
    direction = direction / n

    tip_rotation = quat_multiply(button_sample.rotation, calib.rotation)
    z_world = quat_rotate(tip_rotation, _EZ)
    y_world = quat_rotate(tip_rotation, np.array([0.0, 1.0, 0.0]))
    projected = direction - float(direction @ z_world) * z_world
    if np.linalg.norm(projected) < 1e-6:
        raise DegenerateDirection(
            "button direction is (near-)parallel to the tip axis"
        )
    target = projected / np.linalg.norm(projected)
    angle = math.atan2(float(np.cross(y_world, target) @ z_world), float(y_world @ target))
    spin = quat_from_axis_angle(_EZ, angle)
    return Pose(quat_multiply(calib.rotation, spin), calib.translation)


def assemble_calibration(
    tip_offset,
    angles: EulerAngles,
    position_residual_rms: float,
    orientation_residual_rms: float,
    filtered_outliers: int,
) -> TipCalibration:
    """Package the two calibration steps into one tip transform."""
    return TipCalibration(
        transform=Pose(euler_to_rotation(angles), vec3(tip_offset)),
        position_residual_rms=float(position_residual_rms),
        orientation_residual_rms=float(orientation_residual_rms),
        filtered_outliers=int(filtered_outliers),
    )


def calibration_to_doc(calib: TipCalibration) -> dict:
    return {
        "translation": calib.transform.translation.tolist(),
        "rotation_quat": calib.transform.rotation.tolist(),
        "position_residual_rms": calib.position_residual_rms,
        "orientation_residual_rms": calib.orientation_residual_rms,
        "filtered_outliers": calib.filtered_outliers,
    }


def calibration_from_doc(doc: dict) -> TipCalibration:
    try:
        return TipCalibration(
            transform=Pose(
                np.asarray(doc["rotation_quat"], dtype=float),
                np.asarray(doc["translation"], dtype=float),
            ),
            position_residual_rms=float(doc["position_residual_rms"]),
            orientation_residual_rms=float(doc["orientation_residual_rms"]),
            filtered_outliers=int(doc["filtered_outliers"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad calibration document: {exc}") from None


def save_calibration(calib: TipCalibration, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_canonical(calibration_to_doc(calib)) + "\n")


def load_calibration(path) -> TipCalibration:
    with open(path, "r", encoding="utf-8") as f:
        return calibration_from_doc(json.load(f))
