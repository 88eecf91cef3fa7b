"""Proper orthogonal decomposition in problem-adapted inner products.

Snapshot sets are compressed by diagonalising whichever Gram operator
is smaller: the snapshot-side Gram (method of snapshots) when there
are fewer snapshots than degrees of freedom, or the dof-side operator
(P S S^T P) u = sigma^2 P u when a long snapshot campaign exceeds the
space dimension.  Both yield the same spectrum and modes; truncation
keeps the smallest K whose first discarded singular value falls below
the tolerance relative to the largest one.

The concentration space gets special treatment: the constant function
is injected as the leading mode, snapshots are deflated against it,
and the remaining modes come from the deflated set.  This guarantees
the reduced space can represent a spatially uniform concentration
exactly, which the conservative reduced update relies on.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from swellrom.errors import EmptySnapshotSet, ShapeMismatch

# relative eigenvalue floor below which modes are numerical noise
RANK_FLOOR = 1e-13

# largest space dimension for which the dense dof-side eigensolve is cheap
DOF_SIDE_LIMIT = 2048


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal basis with enough spectrum kept to re-truncate later.

    Attributes
    ----------
    kind : str
        Snapshot family name, e.g. ``"concentration"``.
    modes : ndarray, shape (n, K)
        Orthonormal columns in the ``product`` inner product.  When
        ``constant_included`` the first column is the normalised
        constant and the singular values describe the deflated set.
    singular_values : ndarray
        Snapshot singular values available for re-truncation; empty
        for bases built by completion rather than compression.
    reference_value : float
        Denominator of the truncation ratio (largest raw singular
        value).
    tolerance : float
        Tolerance the basis was built with.
    constant_included : bool
    """

    kind: str
    modes: np.ndarray
    singular_values: np.ndarray
    reference_value: float
    tolerance: float
    constant_included: bool = False

    @property
    def n_modes(self):
        return self.modes.shape[1]

    def n_modes_at(self, tolerance):
        """Mode count this basis would keep at another tolerance."""
        if self.singular_values.size == 0:
            return self.n_modes  # completion basis, not truncatable
        k = _truncation_count(self.singular_values, self.reference_value,
                              tolerance)
        if self.constant_included:
            k += 1
        return min(k, self.n_modes)

    def sliced(self, tolerance):
        k = self.n_modes_at(tolerance)
        return replace(self, modes=self.modes[:, :k], tolerance=tolerance)


def _truncation_count(sigmas, reference, tolerance):
    """Smallest K with sigma_{K+1} / reference below tolerance."""
    for k in range(len(sigmas)):
        if sigmas[k] / reference < tolerance:
            return k
    return len(sigmas)


def _gram_eigs(gram):
    gram = 0.5 * (gram + gram.T)
    w, v = np.linalg.eigh(gram)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    return np.sqrt(w), v[:, order]


def _dof_side_eigs(applied, product):
    """Singular values and P-orthonormal modes from the dof-side operator.

    ``applied`` is P @ snapshots; the operator (P S S^T P) paired with
    mass matrix P in a generalized symmetric eigensolve yields the same
    sigma^2 spectrum as the snapshot Gram, with eigenvectors that are
    already the modes.
    """
    op = applied @ applied.T
    op = 0.5 * (op + op.T)
    dense_product = product.matrix.toarray()
    w, v = scipy.linalg.eigh(op, dense_product)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    return np.sqrt(w), v[:, order]


def _orthonormalize(modes, product):
    """Two Gram-Schmidt passes to push the Gram matrix back to identity.

    Recombining snapshots through near-degenerate eigenvectors leaves
    the deep modes a few digits short of orthonormal; this polish
    restores them without reordering.
    """
    for _ in range(2):
        applied = product.apply(modes)
        for k in range(modes.shape[1]):
            coeffs = applied[:, :k].T @ modes[:, k]
            modes[:, k] -= modes[:, :k] @ coeffs
            applied[:, k] = product.apply(modes[:, k])
            nrm = np.sqrt(modes[:, k] @ applied[:, k])
            modes[:, k] /= nrm
            applied[:, k] /= nrm
    return modes


def pod(snapshots, product, tolerance, kind="", include_constant=False,
        max_modes=None):
    """Compress a snapshot matrix into an orthonormal basis.

    Parameters
    ----------
    snapshots : ndarray, shape (n, S)
        One snapshot per column.
    product : InnerProduct
    tolerance : float
        Relative singular value cutoff.
    include_constant : bool
        Lead with the normalised constant mode and compress only the
        deflated remainder.  The truncation ratio still uses the raw
        set's largest singular value, so tolerance 1 keeps exactly the
        constant.
    max_modes : int, optional
        Hard cap on the total mode count.
    """
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2:
        raise ShapeMismatch("snapshots must be a 2-d array")
    n, n_snap = snapshots.shape
    if n_snap == 0:
        raise EmptySnapshotSet(f"no snapshots for basis {kind!r}")
    if n != product.dim:
        raise ShapeMismatch(
            f"snapshot length {n} does not match product dimension {product.dim}"
        )

    applied = product.apply(snapshots)
    dof_side = n < n_snap and n <= DOF_SIDE_LIMIT

    if include_constant:
        one = np.ones(n)
        norm_one = np.sqrt(float(one @ product.apply(one)))
        phi1 = one / norm_one
        applied_phi1 = product.apply(phi1)
        coef = applied_phi1 @ snapshots  # (S,)
        if dof_side:
            sig_raw, _ = _dof_side_eigs(applied, product)
        else:
            gram_raw = snapshots.T @ applied
            sig_raw, _ = _gram_eigs(gram_raw)
        reference = float(sig_raw[0]) if sig_raw.size else 1.0
        if reference == 0.0:
            reference = 1.0
        if dof_side:
            sigmas, defl_modes = _dof_side_eigs(
                applied - np.outer(applied_phi1, coef), product)
        else:
            sigmas, vecs = _gram_eigs(gram_raw - np.outer(coef, coef))
        usable = int(np.sum(sigmas > reference * RANK_FLOOR))
        k = min(_truncation_count(sigmas, reference, tolerance), usable)
        if max_modes is not None:
            k = min(k, max(max_modes - 1, 0))
        if dof_side:
            extra = defl_modes[:, :k]
        else:
            deflated = snapshots - np.outer(phi1, coef)
            extra = deflated @ (vecs[:, :k] / np.where(sigmas[:k] > 0,
                                                       sigmas[:k], 1.0))
        modes = np.column_stack([phi1, extra]) if k else phi1[:, None]
        modes = _orthonormalize(modes, product)
        return ReducedBasis(kind, modes, sigmas, reference, tolerance, True)

    if dof_side:
        sigmas, dof_modes = _dof_side_eigs(applied, product)
    else:
        sigmas, vecs = _gram_eigs(snapshots.T @ applied)
    reference = float(sigmas[0]) if sigmas.size else 1.0
    if reference == 0.0:
        raise EmptySnapshotSet(f"all snapshots for basis {kind!r} are zero")
    usable = int(np.sum(sigmas > reference * RANK_FLOOR))
    k = min(_truncation_count(sigmas, reference, tolerance), usable)
    if max_modes is not None:
        k = min(k, max_modes)
    k = max(k, 1)
    if dof_side:
        modes = np.ascontiguousarray(dof_modes[:, :k])
    else:
        modes = snapshots @ (vecs[:, :k] / sigmas[:k])
    modes = _orthonormalize(modes, product)
    return ReducedBasis(kind, modes, sigmas, reference, tolerance, False)


def full_basis(product, kind="", include_constant=False):
    """Orthonormal basis of the entire discrete space, by completion.

    Used to validate the reduced pipeline against the full solver: with
    nothing truncated the reduced solution must match the full one up
    to interpolation error.  With ``include_constant`` the constant is
    kept as the exact leading mode, mirroring :func:`pod`.
    """
    n = product.dim
    dense = product.matrix.toarray()
    if include_constant:
        basis0 = np.zeros((n, n))
        basis0[:, 0] = 1.0
        basis0[np.arange(n - 1), np.arange(1, n)] = 1.0
    else:
        basis0 = np.eye(n)
    gram = basis0.T @ dense @ basis0
    chol = np.linalg.cholesky(gram)
    modes = scipy.linalg.solve_triangular(chol, basis0.T, lower=True).T
    return ReducedBasis(kind, modes, np.empty(0), 1.0, 0.0, include_constant)
