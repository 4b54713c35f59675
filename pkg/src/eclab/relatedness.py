"""Activity proximity, country relatedness density and the network backbone."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary, split_frame
from .exceptions import DisconnectedGraphWarning, ValidationError, ZeroDenominator, ZeroUbiquity
from .specialization import SpecializationMatrix


@dataclass(frozen=True)
class ProximityMatrix:
    activities: tuple
    values: np.ndarray

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.activities), columns=list(self.activities))

    def to_long(self):
        """Upper-triangle edge list ``l1, l2, phi`` (diagonal excluded)."""
        i, j = np.triu_indices(len(self.activities), k=1)
        return pd.DataFrame(
            {
                "l1": [self.activities[a] for a in i],
                "l2": [self.activities[b] for b in j],
                "phi": self.values[i, j],
            }
        )


@dataclass(frozen=True)
class DensityMatrix:
    countries: tuple
    activities: tuple
    values: np.ndarray
    include_self: bool = True

    def to_frame(self):
        return pd.DataFrame(self.values, index=list(self.countries), columns=list(self.activities))


@dataclass(frozen=True)
class NetworkBackbone:
    """Edges ``(l1, l2, phi, in_spanning_tree)``; ``connected`` is False for a forest."""

    edges: pd.DataFrame
    n_nodes: int
    connected: bool
    n_components: int

    def tree_edges(self):
        return self.edges[self.edges["in_spanning_tree"]]

    def to_dot(self, name="backbone"):
        lines = [f"graph {name} {{"]
        for row in self.edges.itertuples(index=False):
            style = "solid" if row.in_spanning_tree else "dashed"
            lines.append(
                f'  "{row.l1}" -- "{row.l2}" [weight={row.phi:.6g}, style={style}];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def proximity_array(M):
    """Co-specialization counts divided by the larger of the two ubiquities."""
    M = check_binary(M).astype(np.float64)
    k = M.sum(axis=0)
    if (k == 0).any():
        raise ZeroUbiquity(np.flatnonzero(k == 0).tolist())
    co = M.T @ M
    return co / np.maximum.outer(k, k)


def proximity(m: SpecializationMatrix) -> ProximityMatrix:
    k = m.ubiquity
    if (k == 0).any():
        raise ZeroUbiquity([a for a, x in zip(m.activities, k) if x == 0])
    phi = proximity_array(m.values)
    phi.setflags(write=False)
    return ProximityMatrix(m.activities, phi)


def density_array(M, phi, include_self=True):
    M = check_binary(M).astype(np.float64)
    phi = np.array(phi, dtype=np.float64)
    if not include_self:
        np.fill_diagonal(phi, 0.0)
    denom = phi.sum(axis=0)
    if (denom <= 0).any():
        raise ZeroDenominator(
            f"activities with zero total proximity: {np.flatnonzero(denom <= 0).tolist()}"
        )
    return (M @ phi) / denom


def relatedness_density(
    m: SpecializationMatrix, phi: ProximityMatrix, include_self=True
) -> DensityMatrix:
    """``omega_cl = sum_l' M_cl' phi_ll' / sum_l' phi_ll'``.

    By default the self term (``phi_ll = 1``) stays in both sums; pass
    ``include_self=False`` to drop it.
    """
    if tuple(m.activities) != tuple(phi.activities):
        raise ValidationError("specialization and proximity matrices have different activities")
    values = density_array(m.values, phi.values, include_self)
    return DensityMatrix(m.countries, m.activities, values, include_self)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[max(ri, rj)] = min(ri, rj)
        return True


def maximum_spanning_forest(labels, weights):
    """Kruskal on positive off-diagonal weights.

    Edges are considered by descending weight, ties by the (sorted) label
    pair. Returns the chosen ``(i, j)`` index pairs with ``i < j`` and the
    number of components.
    """
    n = len(labels)
    candidates = []
    for i in range(n):
        for j in range(i + 1, n):
            if weights[i, j] > 0:
                a, b = sorted((labels[i], labels[j]))
                candidates.append((-weights[i, j], a, b, i, j))
    candidates.sort()
    uf = _UnionFind(n)
    chosen = []
    for _, _, _, i, j in candidates:
        if uf.union(i, j):
            chosen.append((i, j))
    return chosen, n - len(chosen)


def backbone(phi: ProximityMatrix, threshold=0.5) -> NetworkBackbone:
    """Maximum spanning tree over proximity plus every edge with ``phi >= threshold``.

    Only positive-proximity pairs are edges; each edge lists its two labels
    in sorted order, so the table does not depend on the matrix label order.
    When the graph is disconnected a spanning forest is returned,
    ``connected`` is False and a :class:`DisconnectedGraphWarning` is issued.
    """
    if not 0 <= threshold <= 1:
        raise ValidationError("threshold must lie in [0, 1]", field="threshold")
    labels = phi.activities
    W = phi.values
    tree, n_comp = maximum_spanning_forest(labels, W)
    in_tree = set(tree)
    n = len(labels)
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            w = W[i, j]
            if (i, j) in in_tree or (w > 0 and w >= threshold):
                rows.append((*sorted((labels[i], labels[j])), float(w), (i, j) in in_tree))
    edges = pd.DataFrame(rows, columns=["l1", "l2", "phi", "in_spanning_tree"])
    edges = edges.sort_values(["phi", "l1", "l2"], ascending=[False, True, True], kind="mergesort")
    if n_comp > 1:
        warnings.warn(
            f"proximity graph has {n_comp} components; backbone is a spanning forest",
            DisconnectedGraphWarning,
            stacklevel=2,
        )
    return NetworkBackbone(edges.reset_index(drop=True), n, n_comp <= 1, n_comp)


class Relatedness(TransformerMixin, BaseEstimator):
    """Learn activity proximity from one specialization matrix, score density on another.

    Parameters
    ----------
    include_self : bool, default=True
        Keep the diagonal ``phi_ll = 1`` term in the density sums.

    Attributes
    ----------
    proximity_ : ndarray of shape (n_activities, n_activities)
    """

    def __init__(self, include_self=True):
        self.include_self = include_self

    def fit(self, X, y=None):
        values, _, cols = split_frame(X)
        self.proximity_ = proximity_array(values)
        self.n_features_in_ = self.proximity_.shape[0]
        if cols is not None:
            self.feature_names_in_ = np.asarray(cols, dtype=object)
        return self

    def transform(self, X):
        check_is_fitted(self, "proximity_")
        values, _, _ = split_frame(X)
        values = check_binary(values)
        if values.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {values.shape[1]} activities, fitted with {self.n_features_in_}"
            )
        out = density_array(values, self.proximity_, self.include_self)
        if isinstance(X, pd.DataFrame):
            return pd.DataFrame(out, index=X.index, columns=X.columns)
        return out
