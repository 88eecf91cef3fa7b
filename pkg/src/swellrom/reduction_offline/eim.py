"""Empirical interpolation of the geometry coefficient fields.

Each coefficient field sampled at the quadrature points is a vector
with one slot per point and component (flat index = point * d + comp).
The greedy pass repeatedly takes the training vector with the worst
relative max-norm error, normalises its residual by its largest entry
and adds that as the next interpolation basis vector; the position of
that entry becomes the next interpolation pair.

Because each residual downdate zeroes the selected slot of every
training vector exactly, the collocation matrix of the basis at the
selected pairs is exactly unit lower triangular, and the downdate
coefficients accumulated for a training vector are exactly its
interpolation weights.

Each basis vector is also stored as an explicit combination of the
training vectors (its recombination weights).  Assembling the training
operators once and recombining them with these weights yields the same
reduced operators as assembling each basis vector directly, which is
what makes the offline projection consistent with the greedy.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_triangular

from swellrom.errors import DimensionMismatch, ShapeMismatch, ZeroTrainingSet


@dataclass(frozen=True)
class EimData:
    """Greedy interpolation result for one coefficient field.

    Attributes
    ----------
    coefficient_id : int
    domain : str
        ``"volume"`` or ``"boundary"``.
    n_components : int
    basis : ndarray, shape (P * d, M)
    pairs : ndarray, shape (M, 2), int64
        Sample point and component index of each interpolation
        condition, in selection order.
    collocation : ndarray, shape (M, M)
        Basis evaluated at the pairs; unit lower triangular.
    recombination : ndarray, shape (M, T)
        Each basis vector as weights over the training vectors.
    selected : ndarray, shape (M,), int64
        Training vector chosen at each greedy step.
    error_history : ndarray, shape (M + 1,)
        Max relative training error before any modes and after each
        added mode.
    tolerance : float
    n_training : int
    """

    coefficient_id: int
    domain: str
    n_components: int
    basis: np.ndarray
    pairs: np.ndarray
    collocation: np.ndarray
    recombination: np.ndarray
    selected: np.ndarray
    error_history: np.ndarray
    tolerance: float
    n_training: int

    @property
    def n_modes(self):
        return self.basis.shape[1]

    @property
    def pair_flat(self):
        return self.pairs[:, 0] * self.n_components + self.pairs[:, 1]

    def n_modes_at(self, tolerance):
        """Modes needed to push the recorded training error below tolerance."""
        below = np.nonzero(self.error_history < tolerance)[0]
        if below.size:
            return min(int(below[0]), self.n_modes)
        return self.n_modes

    def sliced(self, tolerance=None, n_modes=None):
        if n_modes is None:
            n_modes = self.n_modes_at(tolerance)
        m = int(n_modes)
        if not 0 <= m <= self.n_modes:
            raise DimensionMismatch(
                f"cannot slice {self.n_modes} modes down to {m}"
            )
        return replace(
            self,
            basis=self.basis[:, :m],
            pairs=self.pairs[:m],
            collocation=self.collocation[:m, :m],
            recombination=self.recombination[:m],
            selected=self.selected[:m],
            error_history=self.error_history[: m + 1],
        )


def interpolation_weights(eim, values_at_pairs):
    """Forward substitution for the interpolation weights.

    ``values_at_pairs`` holds the target field sampled at ``eim.pairs``
    in order.  Works on (M,) vectors or (M, batch) stacks.
    """
    if eim.n_modes == 0:
        return np.zeros_like(values_at_pairs)
    return solve_triangular(
        eim.collocation, values_at_pairs, lower=True, unit_diagonal=True
    )


def _row_maxabs(mat):
    block = max(1, int(4_000_000 // max(mat.shape[1], 1)))
    out = np.empty(mat.shape[0])
    for lo in range(0, mat.shape[0], block):
        hi = min(lo + block, mat.shape[0])
        out[lo:hi] = np.max(np.abs(mat[lo:hi]), axis=1)
    return out


def _downdate_and_errors(resid, w, col, active, norms):
    """Subtract the rank-one update and refresh row errors in one pass.

    Blocked over rows so temporaries stay small even when the training
    matrix itself is hundreds of megabytes.
    """
    n_train = resid.shape[0]
    block = max(1, int(4_000_000 // max(resid.shape[1], 1)))
    rel = np.zeros(n_train)
    for lo in range(0, n_train, block):
        hi = min(lo + block, n_train)
        seg = resid[lo:hi]
        seg -= w[lo:hi, None] * col[None, :]
        mx = np.max(np.abs(seg), axis=1)
        live = active[lo:hi]
        rel[lo:hi] = np.where(live, mx / np.where(live, norms[lo:hi], 1.0), 0.0)
    return rel


def eim_greedy(training, n_components, tolerance, coefficient_id=0,
               domain="volume", max_modes=None, consume=False):
    """Greedy empirical interpolation over a flat training matrix.

    Parameters
    ----------
    training : ndarray, shape (T, P * d)
        One flattened coefficient field per row.
    n_components : int
        Components per sample point (d above).
    tolerance : float
        Stop once the worst relative max-norm training error is below
        this.
    max_modes : int, optional
        Hard cap on the number of modes.
    consume : bool
        Allow overwriting ``training`` with residuals instead of
        copying it (the matrices can be large).

    Notes
    -----
    Ties are deterministic: the earliest worst training vector and the
    lowest flat index of its largest residual entry win.
    """
    Z = np.asarray(training, dtype=np.float64)
    if Z.ndim != 2:
        raise ShapeMismatch("training matrix must be 2-d")
    n_train, n_flat = Z.shape
    if n_train == 0 or n_flat == 0:
        raise ZeroTrainingSet("empty training matrix")
    if n_flat % n_components:
        raise ShapeMismatch(
            f"flat length {n_flat} is not a multiple of d={n_components}"
        )

    norms = _row_maxabs(Z)
    if not norms.any():
        raise ZeroTrainingSet(
            f"all training vectors for coefficient {coefficient_id} are zero"
        )
    active = norms > 0.0

    resid = Z if consume else Z.copy()
    cap = min(n_train, n_flat)
    if max_modes is not None:
        cap = min(cap, int(max_modes))

    basis_cols = []
    pair_flats = []
    selected = []
    gammas = []
    # downdate coefficients; column m holds the interpolation weight of
    # every training vector on basis vector m
    weights = np.zeros((n_train, cap))

    rel = np.where(active, 1.0, 0.0)
    history = [float(rel.max())]

    while history[-1] >= tolerance and len(basis_cols) < cap:
        m = len(basis_cols)
        t_star = int(np.argmax(rel))  # first max wins ties
        row = resid[t_star]
        j_star = int(np.argmax(np.abs(row)))  # lowest flat index wins ties
        pivot = row[j_star]
        if pivot == 0.0:
            break

        gamma_new = np.zeros(n_train)
        gamma_new[t_star] = 1.0
        for i in range(m):
            gamma_new -= weights[t_star, i] * gammas[i]
        gamma_new /= pivot
        gammas.append(gamma_new)

        new_col = row / pivot
        basis_cols.append(new_col.copy())
        pair_flats.append(j_star)
        selected.append(t_star)

        # downdate zeroes column j_star of every residual exactly
        weights[:, m] = resid[:, j_star]
        rel = _downdate_and_errors(resid, weights[:, m], new_col, active, norms)
        history.append(float(rel.max()))

    m = len(basis_cols)
    if m:
        basis = np.column_stack(basis_cols)
        pair_flats = np.asarray(pair_flats, dtype=np.int64)
        pairs = np.stack(
            [pair_flats // n_components, pair_flats % n_components], axis=1
        )
        colloc = basis[pair_flats, :]
        recomb = np.asarray(gammas)
    else:
        basis = np.zeros((n_flat, 0))
        pairs = np.zeros((0, 2), dtype=np.int64)
        colloc = np.zeros((0, 0))
        recomb = np.zeros((0, n_train))
    return EimData(
        coefficient_id=coefficient_id,
        domain=domain,
        n_components=n_components,
        basis=basis,
        pairs=pairs,
        collocation=colloc,
        recombination=recomb,
        selected=np.asarray(selected, dtype=np.int64),
        error_history=np.asarray(history),
        tolerance=tolerance,
        n_training=n_train,
    )
