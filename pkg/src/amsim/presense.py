"""Pre-grasp payload estimation from point clouds and a shape/density catalog.

A target cloud is reduced to an oriented bounding box by PCA; a per-label
prior (volume fill factor, per-axis inertia shape factors, bulk density)
turns box dimensions into mass and moment-of-inertia estimates before the
object is ever touched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np


class DegenerateCloud(Exception):
    """Point cloud covariance has rank < 3 (e.g. coplanar points)."""


class UnknownLabel(KeyError):
    """No catalog entry matches the requested label."""


class CatalogError(ValueError):
    """Malformed or inconsistent prior catalog file."""


@dataclass(frozen=True)
class OrientedBox:
    """Tight oriented box: ``rotation`` columns are box axes in world, dims l >= w >= h."""

    center: np.ndarray
    rotation: np.ndarray
    dims: tuple

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3).copy()
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3).copy()
        dims = tuple(float(d) for d in self.dims)
        if any(d <= 0.0 for d in dims):
            raise ValueError("box dims must be positive")
        if not (dims[0] >= dims[1] >= dims[2]):
            raise ValueError("box dims must be ordered l >= w >= h")
        if np.max(np.abs(rot @ rot.T - np.eye(3))) > 1e-6 or np.linalg.det(rot) < 0.0:
            raise ValueError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "dims", dims)

    def vertical_extent(self) -> float:
        """Box dimension along the axis most aligned with world z."""
        k = int(np.argmax(np.abs(self.rotation[2, :])))
        return self.dims[k]


@dataclass(frozen=True)
class ObjectPrior:
    label: str
    beta: float          # volume fill factor of the box, (0, 1]
    alpha: np.ndarray    # per-axis MoI shape factors, entries (0, 3]
    rho: float           # bulk density kg/m^3

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(3).copy()
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        if np.any(alpha <= 0.0) or np.any(alpha > 3.0):
            raise ValueError("alpha entries must be in (0, 3]")
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class ObjectEstimate:
    """Pre-grasp estimate: mass, MoI about the box center in box axes, grasp offset."""

    mass_tilde: float
    moi_tilde: np.ndarray
    volume_hat: float
    grasp_offset: np.ndarray  # end-effector frame, suction grasp from above

    def __post_init__(self):
        if self.mass_tilde <= 0.0:
            raise ValueError("mass estimate must be positive")
        moi = np.asarray(self.moi_tilde, dtype=float).reshape(3, 3).copy()
        if np.any(np.linalg.eigvalsh(0.5 * (moi + moi.T)) <= 0.0):
            raise ValueError("MoI estimate must be positive definite")
        object.__setattr__(self, "moi_tilde", moi)
        object.__setattr__(self, "grasp_offset",
                           np.asarray(self.grasp_offset, dtype=float).reshape(3).copy())


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = axis
    return np.array([
        [c + x * x * (1 - c), x * y * (1 - c) - z * s, x * z * (1 - c) + y * s],
        [y * x * (1 - c) + z * s, c + y * y * (1 - c), y * z * (1 - c) - x * s],
        [z * x * (1 - c) - y * s, z * y * (1 - c) + x * s, c + z * z * (1 - c)],
    ])


def _box_volume(centered: np.ndarray, axes: np.ndarray) -> float:
    proj = centered @ axes
    return float(np.prod(proj.max(axis=0) - proj.min(axis=0)))


def fit_obb(points) -> OrientedBox:
    """Fit a tight oriented box: PCA axes refined by volume minimization.

    PCA of the centered cloud seeds the orientation; a deterministic
    coordinate-descent over small rotations then shrinks the box volume,
    which removes the extent inflation a slightly tilted axis causes. Axes
    are sorted so the extents satisfy l >= w >= h and the rotation
    determinant is forced to +1. Raises DegenerateCloud when the covariance
    rank is below 3.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] < 10:
        raise DegenerateCloud("need at least 10 points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("cloud has non-finite points")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] < 1e-9 * max(evals[2], 1e-30):
        raise DegenerateCloud("covariance rank below 3")

    axes = evecs
    best = _box_volume(centered, axes)
    step = math.radians(6.0)
    while step > math.radians(0.02):
        improved = False
        for k in range(3):
            for sgn in (1.0, -1.0):
                rot = _axis_rotation(axes[:, k], sgn * step)
                cand = rot @ axes
                vol = _box_volume(centered, cand)
                if vol < best * (1.0 - 1e-12):
                    axes, best, improved = cand, vol, True
        if not improved:
            step *= 0.5

    proj = centered @ axes
    lo = proj.min(axis=0)
    hi = proj.max(axis=0)
    extents = hi - lo
    order = np.argsort(extents)[::-1]
    sorted_axes = axes[:, order]
    if np.linalg.det(sorted_axes) < 0.0:
        sorted_axes = sorted_axes.copy()
        sorted_axes[:, 2] = -sorted_axes[:, 2]
    center = mean + axes @ (0.5 * (lo + hi))
    dims = tuple(float(extents[k]) for k in order)
    return OrientedBox(center=center, rotation=sorted_axes, dims=dims)


def estimate_inertia(box: OrientedBox, prior: ObjectPrior,
                     pad_height: float = 0.01) -> ObjectEstimate:
    """Mass and MoI estimate from box dimensions and a shape/density prior.

    volume_hat = beta * l*w*h; mass = rho * volume_hat;
    MoI = (alpha/12) * mass * diag(w^2+h^2, l^2+h^2, l^2+w^2) about the box
    center in box axes. The grasp offset assumes a top suction grasp, so the
    object CoM hangs half the vertical extent plus the pad height below the
    end-effector plane.
    """
    l, w, h = box.dims
    v_box = l * w * h
    v_hat = prior.beta * v_box
    mass = prior.rho * v_hat
    moi = (prior.alpha / 12.0) * mass * np.array([w * w + h * h,
                                                  l * l + h * h,
                                                  l * l + w * w])
    hv = box.vertical_extent()
    offset = np.array([0.0, 0.0, -(0.5 * hv + pad_height)])
    return ObjectEstimate(mass_tilde=mass, moi_tilde=np.diag(moi),
                          volume_hat=v_hat, grasp_offset=offset)


def load_catalog(source=None) -> dict:
    """Load the prior catalog from a file path or text; None loads the shipped one.

    Format: one record per line, pipe separated:
    ``label | beta | alpha_x alpha_y alpha_z | rho``; '#' starts a comment.
    Duplicate labels (case-insensitive) are a load-time error.
    """
    if source is None:
        text = resources.files("amsim").joinpath("data/priors.txt").read_text()
    elif "\n" in str(source) or "|" in str(source):
        text = str(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    catalog: dict[str, ObjectPrior] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise CatalogError(f"line {lineno}: expected 4 pipe-separated fields")
        label = parts[0]
        try:
            beta = float(parts[1])
            alpha = np.array([float(v) for v in parts[2].split()])
            rho = float(parts[3])
        except ValueError as exc:
            raise CatalogError(f"line {lineno}: {exc}") from exc
        if alpha.shape != (3,):
            raise CatalogError(f"line {lineno}: alpha needs exactly 3 entries")
        if label.casefold() in {k.casefold() for k in catalog}:
            raise CatalogError(f"line {lineno}: duplicate label {label!r}")
        catalog[label] = ObjectPrior(label=label, beta=beta, alpha=alpha, rho=rho)
    return catalog


def prior_for(label: str, catalog: dict) -> ObjectPrior:
    """Catalog lookup: exact match first, then case-insensitive."""
    if label in catalog:
        return catalog[label]
    folded = label.casefold()
    for key, prior in catalog.items():
        if key.casefold() == folded:
            return prior
    raise UnknownLabel(label)


def sample_box_cloud(dims, n: int, rng: np.random.Generator,
                     rotation=None, center=None) -> np.ndarray:
    """Uniform samples inside a solid box, optionally posed."""
    d = np.asarray(dims, dtype=float).reshape(3)
    pts = (rng.random((n, 3)) - 0.5) * d
    if rotation is not None:
        pts = pts @ np.asarray(rotation, dtype=float).T
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def sample_cylinder_cloud(diameter: float, height: float, n: int,
                          rng: np.random.Generator, center=None) -> np.ndarray:
    """Uniform samples inside a solid cylinder, axis along z."""
    r = 0.5 * diameter
    rad = r * np.sqrt(rng.random(n))
    ang = rng.random(n) * (2.0 * math.pi)
    z = (rng.random(n) - 0.5) * height
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang), z])
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts
