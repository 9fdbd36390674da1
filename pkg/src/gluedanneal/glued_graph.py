"""Random glued-trees instances, the adjacency oracle and a classical baseline."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .column_model import check_alpha, check_s, column_sizes, vertex_count

MAX_FULL_GRAPH_N = 14
STOQUASTIC_TOL = 1e-12


def _rng(seed: int) -> np.random.Generator:
    # numpy seeds must be non-negative; fold signed 64-bit seeds onto [0, 2^64)
    return np.random.default_rng(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)


def format_name(value: int, n: int) -> str:
    """Render a 2n-bit name as zero-padded lowercase hex."""
    return format(value, f"0{(2 * n + 3) // 4}x")


@dataclass
class GluedTreesInstance:
    n: int
    seed: int
    names: list[str]
    adjacency: dict[str, list[str]]
    entrance: str
    exit: str
    column_of: dict[str, int]
    index: dict[str, int] = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.names)

    def degree(self, name: str) -> int:
        return len(self.adjacency.get(name, ()))

    def columns(self) -> list[list[str]]:
        cols: list[list[str]] = [[] for _ in range(2 * self.n + 2)]
        for name in self.names:
            cols[self.column_of[name]].append(name)
        return cols


def _tree_columns(n: int, offset: int) -> list[np.ndarray]:
    # heap order: column j holds indices 2^j - 1 .. 2^(j+1) - 2
    return [offset + np.arange(2**j - 1, 2 ** (j + 1) - 1) for j in range(n + 1)]


def generate_instance(n: int, seed: int, max_n: int = MAX_FULL_GRAPH_N) -> GluedTreesInstance:
    """Sample a glued-trees graph of depth ``n`` with random 2n-bit vertex names.

    The two middle columns are joined by a uniformly random alternating cycle
    built from two independent random orderings of the left and right leaves.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2 so that 2n-bit names can be distinct, got {n}")
    if n > max_n:
        raise ValueError(f"full-graph mode is limited to n <= {max_n}, got n={n}")
    rng = _rng(seed)
    half = 2 ** (n + 1) - 1
    N = vertex_count(n)
    left = _tree_columns(n, 0)
    right = _tree_columns(n, half)

    edges: list[tuple[int, int]] = []
    for base in (0, half):
        for i in range(2**n - 1):
            edges.append((base + i, base + 2 * i + 1))
            edges.append((base + i, base + 2 * i + 2))

    leaves_l = rng.permutation(left[n])
    leaves_r = rng.permutation(right[n])
    m = len(leaves_l)
    for i in range(m):
        edges.append((int(leaves_l[i]), int(leaves_r[i])))
        edges.append((int(leaves_r[i]), int(leaves_l[(i + 1) % m])))

    raw = rng.choice(2 ** (2 * n), size=N, replace=False)
    names = [format_name(int(v), n) for v in raw]

    column_of: dict[str, int] = {}
    for j, idx in enumerate(left):
        for i in idx:
            column_of[names[i]] = j
    for jp, idx in enumerate(right):
        for i in idx:
            column_of[names[i]] = 2 * n + 1 - jp

    nbrs: dict[str, list[str]] = {name: [] for name in names}
    for a, b in edges:
        nbrs[names[a]].append(names[b])
        nbrs[names[b]].append(names[a])
    adjacency = {k: sorted(v) for k, v in nbrs.items()}

    # vertex order used for matrices: by column, then by name
    ordered = sorted(names, key=lambda x: (column_of[x], x))
    return GluedTreesInstance(
        n=n,
        seed=int(seed),
        names=ordered,
        adjacency=adjacency,
        entrance=names[0],
        exit=names[half],
        column_of=column_of,
        index={name: i for i, name in enumerate(ordered)},
    )


def dumps_instance(instance: GluedTreesInstance) -> str:
    """Line-oriented text form: ``n=<n> seed=<seed>`` then ``name: nbrs``."""
    lines = [f"n={instance.n} seed={instance.seed}"]
    for name in sorted(instance.adjacency):
        lines.append(f"{name}: {','.join(instance.adjacency[name])}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> tuple[int, int, dict[str, list[str]]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty instance text")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    adjacency = {}
    for ln in lines[1:]:
        name, _, rest = ln.partition(":")
        adjacency[name.strip()] = [x for x in rest.strip().split(",") if x]
    return int(header["n"]), int(header["seed"]), adjacency


class OracleSession:
    """Neighbor oracle over one instance, counting every lookup."""

    def __init__(self, instance: GluedTreesInstance):
        self.instance = instance
        self.query_count = 0

    def neighbors(self, name: str) -> list[str]:
        self.query_count += 1
        return list(self.instance.adjacency.get(name, ()))


def oracle_neighbors(session: OracleSession, name: str) -> list[str]:
    return session.neighbors(name)


@dataclass(frozen=True)
class WalkResult:
    hit: bool
    queries_used: int
    steps: int
    trajectory_length_cap: int


def classical_random_walk(instance: GluedTreesInstance, seed: int, max_queries: int) -> WalkResult:
    """Unbiased random walk from ENTRANCE that stops on the other degree-2 vertex.

    Each visited vertex costs one oracle query; the walk only learns names
    through the oracle.
    """
    if max_queries < 1:
        raise ValueError("max_queries must be >= 1")
    rng = _rng(seed)
    session = OracleSession(instance)
    current = instance.entrance
    nbrs = session.neighbors(current)
    steps = 0
    while session.query_count < max_queries:
        current = nbrs[int(rng.integers(len(nbrs)))]
        steps += 1
        nbrs = session.neighbors(current)
        if len(nbrs) == 2 and current != instance.entrance:
            return WalkResult(True, session.query_count, steps, max_queries)
    return WalkResult(False, session.query_count, steps, max_queries)


def adjacency_matrix(instance: GluedTreesInstance) -> sp.csr_matrix:
    rows, cols = [], []
    for name, nbrs in instance.adjacency.items():
        i = instance.index[name]
        for nb in nbrs:
            rows.append(i)
            cols.append(instance.index[nb])
    N = instance.N
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(N, N))


def build_full_hamiltonian(instance: GluedTreesInstance, alpha: float, s: float) -> sp.csr_matrix:
    """H(s) in the vertex-name basis.

    The 0/1 adjacency enters divided by sqrt(2) so that its column-basis
    elements are 1 away from the middle and sqrt(2) across the gluing.
    """
    alpha = check_alpha(alpha)
    s = check_s(s)
    N = instance.N
    diag = np.zeros(N)
    diag[instance.index[instance.entrance]] -= (1.0 - s) * alpha
    diag[instance.index[instance.exit]] -= s * alpha
    A = adjacency_matrix(instance) / np.sqrt(2.0)
    return (sp.diags(diag) - s * (1.0 - s) * A).tocsr()


def _column_index_arrays(instance: GluedTreesInstance) -> np.ndarray:
    return np.array([instance.column_of[name] for name in instance.names])


def project_to_columns(instance: GluedTreesInstance, vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector)
    if vector.shape != (instance.N,):
        raise ValueError(f"expected a vector of length {instance.N}, got shape {vector.shape}")
    cols = _column_index_arrays(instance)
    sums = np.zeros(2 * instance.n + 2, dtype=np.result_type(vector, float))
    np.add.at(sums, cols, vector)
    return sums / np.sqrt(column_sizes(instance.n))


def lift_columns(instance: GluedTreesInstance, column_vector: np.ndarray) -> np.ndarray:
    """Embed a column-basis vector into the vertex basis."""
    column_vector = np.asarray(column_vector)
    if column_vector.shape != (2 * instance.n + 2,):
        raise ValueError("column vector must have length 2n+2")
    cols = _column_index_arrays(instance)
    return column_vector[cols] / np.sqrt(column_sizes(instance.n))[cols]


def check_stoquastic(matrix, tol: float = STOQUASTIC_TOL) -> tuple[bool, list[tuple[int, int, float]]]:
    """Return whether every off-diagonal entry is <= ``tol``, plus the violators."""
    if hasattr(matrix, "to_dense"):
        matrix = matrix.to_dense()
    if sp.issparse(matrix):
        coo = sp.coo_matrix(matrix)
        mask = (coo.row != coo.col) & (coo.data > tol)
        bad = [(int(i), int(j), float(v)) for i, j, v in zip(coo.row[mask], coo.col[mask], coo.data[mask])]
    else:
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square matrix")
        off = M.copy()
        np.fill_diagonal(off, -np.inf)
        ii, jj = np.nonzero(off > tol)
        bad = [(int(i), int(j), float(M[i, j])) for i, j in zip(ii, jj)]
    return (not bad), sorted(bad)
