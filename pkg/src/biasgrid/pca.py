"""Rank-2 principal-component basis for image collections.

Images are flattened to row vectors and stacked into an N x P matrix, the
per-pixel mean is subtracted, and the centered matrix is decomposed by SVD.
The top two right singular vectors form the projection basis; coordinates
of any image (from the fitted set or not) are its mean-centered flattening
times that basis.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import DataError, NumericalError

# Second singular value at or below this (absolute, or relative to the first)
# means the centered data lies on a line and a 2-D layout is meaningless.
DEGENERATE_TOL = 1e-12

ORTHONORMALITY_TOL = 1e-8


@dataclass
class PcaBasis:
    """Mean image plus rank-2 projection basis.

    components has orthonormal columns; the sign of each column is fixed so
    its largest-magnitude entry is positive (ties: earliest index wins),
    making fitted bases and golden files deterministic.
    """

    mean: np.ndarray  # (P,)
    components: np.ndarray  # (P, 2)
    singular_values: tuple[float, float]  # descending
    trained_on: str  # fingerprint of the fitted matrix


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.matrix()
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("expected a Dataset or a 2-D matrix")
    return arr


def dataset_fingerprint(data) -> str:
    """Stable hex fingerprint of the flattened image matrix."""
    mat = np.ascontiguousarray(_as_matrix(data))
    digest = hashlib.sha256()
    digest.update(str(mat.shape).encode("ascii"))
    digest.update(mat.tobytes())
    return digest.hexdigest()[:16]


def mean_center(data) -> tuple[np.ndarray, np.ndarray]:
    """Subtract the per-column (per-pixel) mean; returns (centered, mean)."""
    mat = _as_matrix(data)
    if mat.shape[0] < 2:
        raise DataError(f"mean_center needs at least 2 rows, got {mat.shape[0]}")
    mean = mat.mean(axis=0)
    return mat - mean, mean


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def fit(data) -> PcaBasis:
    """Fit the rank-2 basis on a dataset or raw N x P matrix.

    Raises NumericalError when the centered spectrum is degenerate (the
    second singular value vanishes, e.g. all images identical or collinear).
    """
    mat = _as_matrix(data)
    n, p = mat.shape
    if n < 3:
        raise DataError(f"fit needs at least 3 rows, got {n}")
    if p < 2:
        raise DataError(f"fit needs at least 2 columns, got {p}")
    centered, mean = mean_center(mat)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= DEGENERATE_TOL * max(1.0, s[0]):
        raise NumericalError(
            f"degenerate spectrum: second singular value {s[1]:.3e} "
            f"(first {s[0]:.3e}); a 2-D layout is meaningless"
        )
    components = _fix_signs(vt[:2].T)
    return PcaBasis(
        mean=mean,
        components=components,
        singular_values=(float(s[0]), float(s[1])),
        trained_on=dataset_fingerprint(mat),
    )


def project(basis: PcaBasis, data) -> np.ndarray:
    """Project images into the basis: (X - mean) @ components, one 2-D point per row.

    Works for any dataset with matching pixel count, including ones the
    basis was not fitted on (e.g. an augmentation pool).
    """
    mat = _as_matrix(data)
    p = basis.mean.shape[0]
    if mat.shape[1] != p:
        raise DataError(f"dimension mismatch: data has {mat.shape[1]} pixels, basis expects {p}")
    return (mat - basis.mean) @ basis.components


def save_basis(basis: PcaBasis, path) -> None:
    """Serialize to JSON; floats survive the round trip exactly."""
    obj = {
        "format": "pca-basis",
        "version": 1,
        "mean": basis.mean.tolist(),
        "components": basis.components.tolist(),
        "singular_values": list(basis.singular_values),
        "trained_on": basis.trained_on,
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_basis(path) -> PcaBasis:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read basis {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid basis file: {exc.msg}") from exc
    if obj.get("format") != "pca-basis" or obj.get("version") != 1:
        raise DataError(f"{path}: not a version-1 pca-basis file")
    basis = PcaBasis(
        mean=np.asarray(obj["mean"], dtype=np.float64),
        components=np.asarray(obj["components"], dtype=np.float64),
        singular_values=(float(obj["singular_values"][0]), float(obj["singular_values"][1])),
        trained_on=str(obj["trained_on"]),
    )
    if basis.components.ndim != 2 or basis.components.shape[1] != 2:
        raise DataError(f"{path}: components must be P x 2")
    gram = basis.components.T @ basis.components
    if np.max(np.abs(gram - np.eye(2))) > ORTHONORMALITY_TOL:
        raise DataError(f"{path}: basis columns are not orthonormal")
    return basis
