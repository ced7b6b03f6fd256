"""Graph geodesics along mesh edges weighted by Euclidean edge length."""

from __future__ import annotations

import logging
import threading

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from fmapforge.exceptions import DisconnectedMesh, InvalidArgument
from fmapforge.schema import TriangleMesh

logger = logging.getLogger(__name__)


def edge_graph(mesh: TriangleMesh) -> sparse.csr_matrix:
    """Return the symmetric edge-length adjacency matrix of a mesh."""
    edges = mesh.edges()
    lengths = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    graph = sparse.coo_matrix((lengths, (edges[:, 0], edges[:, 1])), shape=(mesh.n, mesh.n))
    return (graph + graph.T).tocsr()


def geodesic_distances(
    mesh: TriangleMesh,
    source: int,
    *,
    allow_unreachable: bool = False,
    graph: sparse.csr_matrix | None = None,
) -> np.ndarray:
    """Single-source shortest-path distances over the mesh edge graph.

    Args:
        mesh: Triangle mesh.
        source: 0-based source vertex.
        allow_unreachable: Return ``inf`` for unreachable vertices instead of
            raising.
        graph: Precomputed :func:`edge_graph`, reused across calls.

    Returns:
        Length-n distance vector with ``d[source] == 0``.

    Raises:
        InvalidArgument: If ``source`` is not a vertex index.
        DisconnectedMesh: If some vertex is unreachable and
            ``allow_unreachable`` is False.
    """
    if not 0 <= source < mesh.n:
        raise InvalidArgument(f"Source vertex {source} outside [0, {mesh.n})")
    if graph is None:
        graph = edge_graph(mesh)
    distances = np.asarray(dijkstra(graph, directed=False, indices=source), dtype=np.float64)
    if not allow_unreachable and not np.all(np.isfinite(distances)):
        missing = int(np.count_nonzero(~np.isfinite(distances)))
        raise DisconnectedMesh(
            f"{missing} vertex/vertices unreachable from vertex {source}", distances=distances
        )
    return distances


class GeodesicOracle:
    """Caches per-source distance fields of one mesh.

    Fields are computed on demand; concurrent readers share one cache.
    """

    def __init__(self, mesh: TriangleMesh) -> None:
        """Build the edge graph for ``mesh``."""
        self.mesh = mesh
        self.graph = edge_graph(mesh)
        self._fields: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def field(self, source: int) -> np.ndarray:
        """Return the distance field from ``source`` (``inf`` when unreachable)."""
        with self._lock:
            cached = self._fields.get(source)
        if cached is not None:
            return cached
        distances = geodesic_distances(
            self.mesh, source, allow_unreachable=True, graph=self.graph
        )
        distances.setflags(write=False)
        with self._lock:
            self._fields[source] = distances
        return distances

    def distances(self, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Return d(sources[i], targets[i]) for every i."""
        sources = np.asarray(sources, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.int64)
        out = np.empty(sources.shape[0], dtype=np.float64)
        for source in np.unique(sources):
            rows = np.flatnonzero(sources == source)
            out[rows] = self.field(int(source))[targets[rows]]
        logger.debug("Geodesic cache holds %d source field(s)", len(self._fields))
        return out
