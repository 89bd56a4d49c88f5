"""MatrixMarket reader/writer for symmetric real matrices.

Disk format uses 1-based indices; everything in memory is 0-based.
Coordinate files come back as CSR, array files as dense ndarrays.
"""

import numpy as np
import scipy.sparse

from .errors import RecipeError


def read_matrix(path):
    """Read a real symmetric/general MatrixMarket file (coordinate or array)."""
    with open(path, "r") as fh:
        header = fh.readline().strip().split()
        if len(header) != 5 or header[0] != "%%MatrixMarket" or header[1] != "matrix":
            raise RecipeError(f"{path}: not a MatrixMarket matrix file")
        fmt, field, symmetry = header[2].lower(), header[3].lower(), header[4].lower()
        if field != "real":
            raise RecipeError(f"{path}: only real matrices are supported, got {field}")
        if symmetry not in ("symmetric", "general"):
            raise RecipeError(f"{path}: unsupported symmetry {symmetry}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        sizes = line.split()
        if fmt == "coordinate":
            nrow, ncol, nnz = int(sizes[0]), int(sizes[1]), int(sizes[2])
            rows = np.empty(nnz, dtype=np.int64)
            cols = np.empty(nnz, dtype=np.int64)
            vals = np.empty(nnz)
            for k in range(nnz):
                i, j, v = fh.readline().split()
                rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
            if symmetry == "symmetric":
                off = rows != cols
                rows, cols, vals = (
                    np.concatenate([rows, cols[off]]),
                    np.concatenate([cols, rows[off]]),
                    np.concatenate([vals, vals[off]]),
                )
            m = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(nrow, ncol))
            m.sum_duplicates()
            m.sort_indices()
            return m
        if fmt == "array":
            nrow, ncol = int(sizes[0]), int(sizes[1])
            a = np.zeros((nrow, ncol))
            if symmetry == "symmetric":
                # lower triangle, column-major
                for j in range(ncol):
                    for i in range(j, nrow):
                        a[i, j] = float(fh.readline())
                        a[j, i] = a[i, j]
            else:
                for j in range(ncol):
                    for i in range(nrow):
                        a[i, j] = float(fh.readline())
            return a
        raise RecipeError(f"{path}: unsupported format {fmt}")


def write_sparse(path, m, comment=None):
    """Write a structurally symmetric sparse matrix in coordinate format.

    Only the lower triangle is stored, per the symmetric convention.
    """
    coo = scipy.sparse.coo_matrix(m)
    keep = coo.row >= coo.col
    rows, cols, vals = coo.row[keep], coo.col[keep], coo.data[keep]
    order = np.lexsort((rows, cols))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {len(vals)}\n")
        for k in order:
            fh.write(f"{rows[k] + 1} {cols[k] + 1} {vals[k]:.17g}\n")


def write_dense(path, a, comment=None):
    """Write a dense symmetric matrix in array format (lower triangle)."""
    a = np.asarray(a, dtype=np.float64)
    n, m = a.shape
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real symmetric\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{n} {m}\n")
        for j in range(m):
            for i in range(j, n):
                fh.write(f"{a[i, j]:.17g}\n")
