"""Log-determinant backends for symmetric positive definite matrices.

Two paths: dense Cholesky, and a hierarchical (HODLR) factorization
whose off-diagonal blocks are compressed by adaptive cross
approximation.  The hierarchical path turns the log-determinant into a
sequence of small determinants of size equal to the off-diagonal rank,
which for the scattering matrices here stays modest even at dimensions
of several thousand.
"""

import math
import time

import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve


class NotPositiveDefiniteError(ValueError):
    """Cholesky factorization failed; the matrix is not positive definite."""


def logdet_cholesky(matrix):
    """log det of a symmetric positive definite matrix via Cholesky."""
    matrix = np.asarray(matrix, dtype=float)
    try:
        chol, _ = cho_factor(matrix, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return 2.0 * float(np.log(np.diag(chol)).sum())


def compress_lowrank(block, tol=1e-13, max_rank=None):
    """Low-rank factors U, V with block ~= U @ V.T by adaptive cross
    approximation with partial pivoting.

    The stopping rule compares the norm of the latest rank-1 update to a
    running estimate of the Frobenius norm of the approximant.  Pivot
    ties resolve to the lowest index so results are reproducible.
    """
    block = np.asarray(block, dtype=float)
    nrows, ncols = block.shape
    if max_rank is None:
        max_rank = min(nrows, ncols)
    us, vs = [], []
    # entries can span hundreds of decades; seed the first pivot at the
    # globally largest entry so no division by a relatively tiny pivot
    # overflows the cross factors
    row_pivot = int(np.argmax(np.abs(block)) // ncols) if block.size else 0
    used_rows = set()
    norm2 = 0.0
    for _ in range(max_rank):
        i = row_pivot
        row = block[i, :].copy()
        for u, v in zip(us, vs):
            row -= u[i] * v
        j = int(np.argmax(np.abs(row)))
        pivot = row[j]
        if pivot == 0.0:
            break
        col = block[:, j].copy()
        for u, v in zip(us, vs):
            col -= v[j] * u
        u = col / pivot
        v = row
        nu = float(np.linalg.norm(u))
        nv = float(np.linalg.norm(v))
        # running Frobenius norm of the sum of rank-1 terms
        cross = sum(float(u @ uu) * float(v @ vv) for uu, vv in zip(us, vs))
        norm2 += (nu * nv) ** 2 + 2.0 * cross
        us.append(u)
        vs.append(v)
        used_rows.add(i)
        if nu * nv <= tol * math.sqrt(max(norm2, 0.0)):
            break
        # next row pivot: largest entry of the new column among unused rows
        masked = np.abs(u).copy()
        for r in used_rows:
            masked[r] = -1.0
        row_pivot = int(np.argmax(masked))
        if masked[row_pivot] < 0.0:
            break
    if not us:
        return np.zeros((nrows, 0)), np.zeros((ncols, 0))
    return np.array(us).T.copy(), np.array(vs).T.copy()


class _HodlrNode:
    """One node of the hierarchical tree.

    For interior nodes, U V^T approximates the upper-right off-diagonal
    block; Ut = A11^-1 U and Vt = A22^-1 V are the copies
    preconditioned by the already-factorized diagonal children.
    """

    __slots__ = ("dim", "leaf", "lu", "child_top", "child_bottom", "U", "V", "Ut", "Vt", "rank")

    def __init__(self, dim):
        self.dim = dim
        self.leaf = None
        self.lu = None
        self.child_top = None
        self.child_bottom = None
        self.U = None
        self.V = None
        self.Ut = None
        self.Vt = None
        self.rank = 0


def _node_solve(node, rhs):
    if node.leaf is not None:
        return cho_solve(node.lu, rhs, check_finite=False)
    n1 = node.child_top.dim
    top = _node_solve(node.child_top, rhs[:n1])
    bottom = _node_solve(node.child_bottom, rhs[n1:])
    if node.rank == 0:
        return np.vstack([top, bottom])
    p = node.rank
    # A_node = blkdiag(A11, A22) (I + W Z^T) with W = blkdiag(Ut, Vt)
    # and Z^T = [[0, V^T], [U^T, 0]]; invert the update by Woodbury
    zt = np.vstack([node.V.T @ bottom, node.U.T @ top])
    K = np.eye(2 * p)
    K[:p, p:] = node.V.T @ node.Vt
    K[p:, :p] = node.U.T @ node.Ut
    corr = np.linalg.solve(K, zt)
    top = top - node.Ut @ corr[:p]
    bottom = bottom - node.Vt @ corr[p:]
    return np.vstack([top, bottom])


def _node_logdet(node):
    if node.leaf is not None:
        chol, _ = node.lu
        return 2.0 * float(np.log(np.diag(chol)).sum())
    total = _node_logdet(node.child_top) + _node_logdet(node.child_bottom)
    if node.rank == 0:
        return total
    # det(I + W Z^T) = det(I_2p + Z^T W)
    #                = det(I_p - (U^T A11^-1 U)(V^T A22^-1 V))
    small = np.eye(node.rank) - (node.U.T @ node.Ut) @ (node.V.T @ node.Vt)
    sign, ld = np.linalg.slogdet(small)
    if sign <= 0:
        raise NotPositiveDefiniteError(
            "hierarchical update factor has non-positive determinant"
        )
    return total + float(ld)


def _factorize(matrix, leaf_size, tol):
    n = matrix.shape[0]
    node = _HodlrNode(n)
    if n <= leaf_size:
        node.leaf = matrix.copy()
        try:
            node.lu = cho_factor(node.leaf, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        return node
    half = n // 2
    # symmetric input: compress the upper-right block once, the
    # lower-left is its transpose V U^T
    U, V = compress_lowrank(matrix[:half, half:], tol=tol)
    node.child_top = _factorize(matrix[:half, :half], leaf_size, tol)
    node.child_bottom = _factorize(matrix[half:, half:], leaf_size, tol)
    node.rank = U.shape[1]
    node.U = U
    node.V = V
    if node.rank:
        node.Ut = _node_solve(node.child_top, U)
        node.Vt = _node_solve(node.child_bottom, V)
    return node


class HodlrFactorization:
    """Hierarchical factorization A = blkdiag(A_top, A_bottom)(I + W Z^T).

    Built recursively: the two diagonal blocks are factorized first and
    the off-diagonal coupling is folded into a low-rank update of the
    identity, whose determinant reduces to a rank x rank matrix.
    """

    def __init__(self, root, dim, leaf_size, tol):
        self.root = root
        self.dim = dim
        self.leaf_size = leaf_size
        self.tol = tol

    @property
    def max_rank(self):
        def walk(node):
            if node.leaf is not None:
                return 0
            return max(node.rank, walk(node.child_top), walk(node.child_bottom))

        return walk(self.root)

    def solve(self, rhs):
        """A^{-1} rhs without forming A^{-1}."""
        rhs = np.asarray(rhs, dtype=float)
        squeeze = rhs.ndim == 1
        if squeeze:
            rhs = rhs[:, None]
        out = _node_solve(self.root, rhs)
        return out[:, 0] if squeeze else out

    def logdet(self):
        return _node_logdet(self.root)

    def to_factors(self):
        """Per-level block-diagonal factors whose product reconstructs A.

        Returns [D, B_deepest, ..., B_0] with A = D @ B_deepest ... B_0;
        D is the block diagonal of leaf blocks and each B is the
        identity plus the preconditioned couplings of one level.  Meant
        for validating small matrices, the factors are dense.
        """
        leaves = []

        def collect_leaves(node):
            if node.leaf is not None:
                leaves.append(node.leaf)
                return
            collect_leaves(node.child_top)
            collect_leaves(node.child_bottom)

        collect_leaves(self.root)
        D = block_diag(*leaves)

        levels = []

        def collect(node, depth, offset):
            if node.leaf is not None:
                return
            while len(levels) <= depth:
                levels.append([])
            levels[depth].append((node, offset))
            collect(node.child_top, depth + 1, offset)
            collect(node.child_bottom, depth + 1, offset + node.child_top.dim)

        collect(self.root, 0, 0)

        factors = []
        for level in levels:
            B = np.eye(self.dim)
            for node, offset in level:
                if node.rank == 0:
                    continue
                n1 = node.child_top.dim
                top = slice(offset, offset + n1)
                bottom = slice(offset + n1, offset + node.dim)
                B[top, bottom] = node.Ut @ node.V.T
                B[bottom, top] = node.Vt @ node.U.T
            factors.append(B)
        return [D] + factors[::-1]


def hodlr_factorize(matrix, leaf_size=64, tol=1e-13):
    """Hierarchical factorization of a symmetric positive definite matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if leaf_size < 1:
        raise ValueError("leaf_size must be >= 1")
    root = _factorize(matrix, leaf_size, tol)
    return HodlrFactorization(root, matrix.shape[0], leaf_size, tol)


def logdet_hodlr(matrix_or_factorization, leaf_size=64, tol=1e-13):
    """log det via the hierarchical factorization.

    Accepts either an existing HodlrFactorization or a dense symmetric
    positive definite matrix, which is factorized first.
    """
    if isinstance(matrix_or_factorization, HodlrFactorization):
        return matrix_or_factorization.logdet()
    return hodlr_factorize(matrix_or_factorization, leaf_size=leaf_size, tol=tol).logdet()


def benchmark_backends(dims, generator, repeats=1, leaf_size=64, tol=1e-13):
    """Time both backends on matrices produced by generator(dim).

    Returns a list of dicts with dimension, median-of-repeats wall
    times, and the two log-determinants.
    """
    rows = []
    for dim in dims:
        matrix = generator(dim)
        t_chol = []
        t_hodlr = []
        ld_chol = ld_hodlr = None
        for _ in range(repeats):
            start = time.perf_counter()
            ld_chol = logdet_cholesky(matrix)
            t_chol.append(time.perf_counter() - start)
            start = time.perf_counter()
            ld_hodlr = logdet_hodlr(matrix, leaf_size=leaf_size, tol=tol)
            t_hodlr.append(time.perf_counter() - start)
        rows.append(
            {
                "N": dim,
                "t_cholesky_s": float(np.median(t_chol)),
                "t_hodlr_s": float(np.median(t_hodlr)),
                "logdet_cholesky": ld_chol,
                "logdet_hodlr": ld_hodlr,
            }
        )
    return rows


def fit_time_exponent(rows, key):
    """Least-squares slope of log(time) versus log(N) over benchmark rows."""
    logn = np.log([row["N"] for row in rows])
    logt = np.log([row[key] for row in rows])
    slope, _ = np.polyfit(logn, logt, 1)
    return float(slope)


def write_benchmark_csv(rows, stream):
    stream.write("N,t_cholesky_s,t_hodlr_s,logdet_cholesky,logdet_hodlr\n")
    for row in rows:
        stream.write(
            f"{row['N']},{row['t_cholesky_s']!r},{row['t_hodlr_s']!r},"
            f"{row['logdet_cholesky']!r},{row['logdet_hodlr']!r}\n"
        )
