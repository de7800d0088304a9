"""scikit-learn style wrappers around the heat estimators.

``fit`` takes the initial section ``u0`` (a FieldSection or a registry
descriptor); ``predict`` evaluates the evolved section at rows of ``X``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bundle import BoundaryOperator, BundleSpec, boundary_from_descriptor, bundle_from_descriptor
from .exceptions import DomainError, InvalidInputError
from .geometry import GeometryModel, PointClass, geometry_from_descriptor
from .oracle import spectral_evolve, spectral_model_for
from .sections import FieldSection, section_from_descriptor
from .semigroup import Partition, estimate_slice


def check_geometry(geometry) -> GeometryModel:
    if isinstance(geometry, GeometryModel):
        return geometry
    if isinstance(geometry, dict):
        return geometry_from_descriptor(geometry)
    raise InvalidInputError("geometry must be a GeometryModel or a descriptor table")


def check_positions(X, g: GeometryModel) -> np.ndarray:
    """2-D float array of chart positions inside the closed manifold."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and g.chart_dim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != g.chart_dim:
        raise InvalidInputError(f"expected positions of shape (m, {g.chart_dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("positions must be finite")
    for row in X:
        if g.classify_point(row) is PointClass.OUTSIDE:
            raise DomainError(f"position {row.tolist()} is outside the manifold")
    return X


def check_time(t) -> float:
    t = float(t)
    if not t > 0 or not np.isfinite(t):
        raise InvalidInputError("t must be a positive finite number")
    return t


def check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= int(seed) < 2**64:
        raise InvalidInputError("seed must be an unsigned 64-bit integer")
    return int(seed)


def _section(u0, g) -> FieldSection:
    if isinstance(u0, FieldSection):
        return u0
    if isinstance(u0, dict):
        return section_from_descriptor(u0, g)
    raise InvalidInputError("u0 must be a FieldSection or a section descriptor")


def _squeeze(values: np.ndarray) -> np.ndarray:
    return values[:, 0] if values.shape[1] == 1 else values


class TimeSlicedHeatEstimator(BaseEstimator):
    """Monte Carlo ``P_tau u0`` on a uniform partition of ``[0, t]``."""

    def __init__(
        self,
        geometry=None,
        bundle=None,
        boundary="neumann",
        t=0.25,
        n_slices=1,
        n_samples=10_000,
        seed=0,
        antithetic=False,
        workers=1,
    ):
        self.geometry = geometry
        self.bundle = bundle
        self.boundary = boundary
        self.t = t
        self.n_slices = n_slices
        self.n_samples = n_samples
        self.seed = seed
        self.antithetic = antithetic
        self.workers = workers

    def fit(self, u0, y=None):
        g = check_geometry(self.geometry if self.geometry is not None else {"kind": "interval"})
        if isinstance(self.bundle, BundleSpec):
            b = self.bundle
        else:
            b = bundle_from_descriptor(self.bundle or {}, g)
        if isinstance(self.boundary, BoundaryOperator):
            B = self.boundary
        elif isinstance(self.boundary, str):
            B = boundary_from_descriptor({"preset": self.boundary}, b.rank)
        else:
            B = boundary_from_descriptor(self.boundary, b.rank)
        self.geometry_ = g
        self.bundle_ = b
        self.boundary_ = B
        self.section_ = _section(u0, g)
        self.partition_ = Partition.uniform(check_time(self.t), int(self.n_slices))
        self.seed_ = check_seed(self.seed)
        return self

    def _estimates(self, X):
        check_is_fitted(self, "section_")
        X = check_positions(X, self.geometry_)
        return [
            estimate_slice(
                self.geometry_,
                self.bundle_,
                self.boundary_,
                self.section_,
                x,
                self.partition_,
                int(self.n_samples),
                self.seed_,
                antithetic=self.antithetic,
                workers=int(self.workers),
            )
            for x in X
        ]

    def predict(self, X, return_std=False):
        est = self._estimates(X)
        values = _squeeze(np.array([e.value for e in est]))
        if return_std:
            return values, _squeeze(np.array([e.stderr for e in est]))
        return values

    def transform(self, X):
        return self.predict(X)


class SpectralHeatOracle(BaseEstimator):
    """Exact ``e^{-tL} u0`` from an eigenfunction expansion."""

    def __init__(self, geometry=None, boundary="neumann", holonomy=0.0, potential_shift=0.0, t=0.25):
        self.geometry = geometry
        self.boundary = boundary
        self.holonomy = holonomy
        self.potential_shift = potential_shift
        self.t = t

    def fit(self, u0, y=None):
        g = check_geometry(self.geometry if self.geometry is not None else {"kind": "interval"})
        self.geometry_ = g
        self.model_ = spectral_model_for(g, self.boundary, self.holonomy, self.potential_shift)
        self.evolved_ = spectral_evolve(self.model_, _section(u0, g), check_time(self.t))
        return self

    def predict(self, X):
        check_is_fitted(self, "evolved_")
        return _squeeze(self.evolved_(check_positions(X, self.geometry_)))

    def transform(self, X):
        return self.predict(X)
