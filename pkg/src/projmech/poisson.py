"""Poisson tensors, Dirac reduction and pseudo-Poisson structures.

All objects are evaluated pointwise through matrices: a Poisson tensor
is an (n, n) skew field, a bracket is grad(f)^T Pi grad(g), and the
Dirac construction removes the directions spanned by a second-class
constraint set

    {f, g}_M = {f, g} - {f, x^a} lam_ab {x^b, g},

with lam the inverse of the constraint bracket matrix
lam^{ab} = {x^a, x^b}. The induced splitting

    Pi_S = -W lam W^T,   W = Pi grad(x^a)  (columns),
    Pi_M = Pi - Pi_S,

makes every constraint central for Pi_M, and Pi_S carries the
transverse symplectic block.

A projector field P(z) on configuration space induces the
pseudo-Poisson block tensor on phase space

    [[0, P], [-P^T, D]],
    D_ij = (P^k_j dP^l_i/dz^k - P^k_i dP^l_j/dz^k) p_l,

whose bracket reproduces the canonical brackets of the projected
momenta; it satisfies skewness and Leibniz but not, in general, the
Jacobi identity (hence "pseudo").

Gradients are central finite differences unless a field carries an
exact gradient closure; nested brackets inside the Jacobi defect use a
dedicated step (default 1e-5) on the bracket-value field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import FirstClassConstraint, NotSymplecticOnLeaf
from .fields import ScalarField, as_point, jacobian

__all__ = [
    "PoissonField",
    "SecondClassConstraintSet",
    "coordinate_field",
    "canonical_poisson",
    "bracket",
    "leaf_projectors",
    "LeafProjectors",
    "dirac_bracket",
    "transverse_decomposition",
    "DiracDecomposition",
    "pseudo_poisson",
    "pseudo_poisson_field",
    "jacobiator",
    "NESTED_FD_STEP",
    "LAMBDA_COND_LIMIT",
]

# condition ceiling on the constraint bracket matrix (second-class test)
LAMBDA_COND_LIMIT = 1e10
# finite-difference step for gradients of nested bracket-value fields
NESTED_FD_STEP = 1e-5

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class PoissonField:
    """Skew bivector field with a declared (constant, even) rank."""

    dim: int
    rank: int
    eval: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.rank % 2 != 0:
            raise ValueError("Poisson rank must be even")
        if not 0 <= self.rank <= self.dim:
            raise ValueError("Poisson rank must lie in [0, dim]")

    def __call__(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        pi = np.asarray(self.eval(z), dtype=float)
        if pi.shape != (self.dim, self.dim):
            raise ValueError(f"Poisson tensor must have shape {(self.dim, self.dim)}, got {pi.shape}")
        if not np.all(np.isfinite(pi)):
            raise ValueError("Poisson tensor evaluated to non-finite entries")
        scale = max(1.0, float(np.abs(pi).max()))
        if np.abs(pi + pi.T).max() > 1e-12 * scale:
            raise ValueError("Poisson tensor is not skew-symmetric to 1e-12")
        return pi

    def validate_at(self, z) -> None:
        """Check the numerical rank at a point against the declared rank."""
        pi = self(z)
        sv = np.linalg.svd(pi, compute_uv=False)
        r = 0 if sv.size == 0 or sv[0] == 0.0 else int(np.sum(sv > _RANK_RTOL * sv[0]))
        if r != self.rank:
            raise ValueError(f"numerical rank {r} differs from declared rank {self.rank}")


def canonical_poisson(pairs: int) -> PoissonField:
    """Canonical tensor on R^(2*pairs), coordinates ordered (q1, p1, q2, p2, ...)."""
    dim = 2 * pairs
    block = np.zeros((dim, dim))
    for i in range(pairs):
        block[2 * i, 2 * i + 1] = 1.0
        block[2 * i + 1, 2 * i] = -1.0
    return PoissonField(dim=dim, rank=dim, eval=lambda z, _b=block: _b)


def coordinate_field(dim: int, index: int) -> ScalarField:
    """The coordinate function z^index with its exact gradient."""
    if not 0 <= index < dim:
        raise ValueError("coordinate index out of range")
    basis = np.zeros(dim)
    basis[index] = 1.0
    return ScalarField(
        dim=dim,
        eval=lambda z, _i=index: float(z[_i]),
        grad=lambda z, _e=basis: _e.copy(),
    )


def _gradient(f, z: np.ndarray) -> np.ndarray:
    """Gradient of a scalar field given as ScalarField, callable or wrapper."""
    if isinstance(f, ScalarField):
        return f.gradient_at(z)
    step = getattr(f, "fd_step", None)
    fn = getattr(f, "eval", f)
    if step is not None:
        return jacobian(lambda p: float(fn(p)), z, h=step)
    return jacobian(lambda p: float(fn(p)), z)


def bracket(pi: PoissonField, f, g, z) -> float:
    """Poisson bracket {f, g}(z) = grad(f)^T Pi(z) grad(g).

    ``f`` and ``g`` may be plain callables (finite-difference
    gradients) or ScalarField objects carrying exact gradients.
    """
    z = as_point(z, pi.dim)
    mat = pi(z)
    return float(_gradient(f, z) @ mat @ _gradient(g, z))


@dataclass(frozen=True)
class LeafProjectors:
    """Projector pair induced by an invertible leaf block of a tensor.

    ``onto_leaf`` is the canonical projector with image the leading
    leaf-coordinate directions; ``onto_transverse`` its complement.
    ``weighted_variant`` is the lam-weighted contraction of the same
    data; it is not idempotent in general and is kept for diagnostics
    (its image coincides with the canonical one).
    """

    onto_leaf: np.ndarray
    onto_transverse: np.ndarray
    weighted_variant: np.ndarray
    leaf_dim: int
    lam: np.ndarray


def leaf_projectors(pi: PoissonField, z, leaf_dim: int | None = None) -> LeafProjectors:
    """Leaf/transverse projector pair of a block-supported tensor.

    Requires Pi(z) supported on the leading ``leaf_dim`` coordinate
    directions (its only nonzero block is the top-left one). With
    lam the inverse of that block, the canonical projector contracts
    the dual pairing back to the identity on the leaf directions.

    Raises
    ------
    NotSymplecticOnLeaf
        If the leaf block is singular (condition number above 1e12).
    ValueError
        If the tensor has support outside the leaf block.
    """
    if leaf_dim is None:
        leaf_dim = pi.rank
    z = as_point(z, pi.dim)
    mat = pi(z)
    n = pi.dim
    block = mat[:leaf_dim, :leaf_dim]
    off = max(
        float(np.abs(mat[leaf_dim:, :]).max(initial=0.0)),
        float(np.abs(mat[:, leaf_dim:]).max(initial=0.0)),
    )
    scale = max(1.0, float(np.abs(block).max(initial=0.0)))
    if off > 1e-10 * scale:
        raise ValueError(
            f"tensor has support outside the leading {leaf_dim} directions "
            f"(max off-block entry {off:.3e}); supply it in an adapted chart"
        )
    cond = np.linalg.cond(block) if leaf_dim else 1.0
    if not np.isfinite(cond) or cond > 1e12:
        raise NotSymplecticOnLeaf(
            f"leaf block is singular (condition estimate {cond:.3e})"
        )
    lam = np.linalg.inv(block) if leaf_dim else block
    onto = np.zeros((n, n))
    onto[:leaf_dim, :leaf_dim] = (lam @ block).T
    variant = np.zeros((n, n))
    variant[:leaf_dim, :leaf_dim] = lam
    return LeafProjectors(
        onto_leaf=onto,
        onto_transverse=np.eye(n) - onto,
        weighted_variant=variant,
        leaf_dim=leaf_dim,
        lam=lam,
    )


@dataclass(frozen=True)
class SecondClassConstraintSet:
    """Even-sized family of constraint scalars with gradients."""

    dim: int
    functions: tuple

    def __post_init__(self):
        fns = tuple(self.functions)
        object.__setattr__(self, "functions", fns)
        if len(fns) % 2 != 0:
            raise ValueError("a second-class set needs an even number of constraints")

    @property
    def count(self) -> int:
        return len(self.functions)

    def values_at(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        return np.array([float(getattr(f, "eval", f)(z)) for f in self.functions])

    def gradients_at(self, z) -> np.ndarray:
        """(k, n) matrix whose rows are the constraint gradients."""
        z = as_point(z, self.dim)
        if self.count == 0:
            return np.zeros((0, self.dim))
        return np.vstack([_gradient(f, z) for f in self.functions])

    @classmethod
    def from_coordinates(cls, dim: int, indices: Sequence[int]) -> "SecondClassConstraintSet":
        return cls(dim=dim, functions=tuple(coordinate_field(dim, i) for i in indices))


def _bracket_matrix(mat: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """lam^{ab} = {x^a, x^b} from the tensor and constraint gradients."""
    return grads @ mat @ grads.T


def _invert_bracket_matrix(lam_upper: np.ndarray) -> np.ndarray:
    if lam_upper.shape[0] == 0:
        return lam_upper
    cond = np.linalg.cond(lam_upper)
    if not np.isfinite(cond) or cond >= LAMBDA_COND_LIMIT:
        raise FirstClassConstraint(
            f"constraint bracket matrix is not invertible "
            f"(condition estimate {cond:.3e}); the set is not second class"
        )
    return np.linalg.inv(lam_upper)


def dirac_bracket(pi: PoissonField, constraints: SecondClassConstraintSet, f, g, z) -> float:
    """Dirac bracket {f, g}_M at z.

    Every constraint scalar is central: {x^a, g}_M vanishes for all g
    (to rounding), independently of how functions are extended off the
    constraint locus.

    Raises
    ------
    FirstClassConstraint
        If the constraint bracket matrix cannot be inverted reliably.
    """
    z = as_point(z, pi.dim)
    mat = pi(z)
    grads = constraints.gradients_at(z)
    if grads.shape[0] == 0:
        return float(_gradient(f, z) @ mat @ _gradient(g, z))
    lam_upper = _bracket_matrix(mat, grads)
    lam = _invert_bracket_matrix(lam_upper)
    gf = _gradient(f, z)
    gg = _gradient(g, z)
    plain = float(gf @ mat @ gg)
    f_x = grads @ mat.T @ gf  # entries {f, x^a}
    x_g = grads @ mat @ gg  # entries {x^b, g}
    return plain - float(f_x @ lam @ x_g)


@dataclass(frozen=True)
class DiracDecomposition:
    """Pointwise splitting Pi = Pi_S + Pi_M induced by a constraint set."""

    pi_w: np.ndarray
    pi_s: np.ndarray
    pi_m: np.ndarray
    bracket_matrix: np.ndarray
    multiplier: np.ndarray


def transverse_decomposition(
    pi: PoissonField, constraints: SecondClassConstraintSet, z
) -> DiracDecomposition:
    """Split a tensor into its transverse block and the Dirac remainder.

    Pi_S = -W lam W^T with W = Pi grad(x^a) as columns; Pi_M = Pi - Pi_S
    annihilates every constraint gradient and its bracket is the Dirac
    bracket.
    """
    z = as_point(z, pi.dim)
    mat = pi(z)
    grads = constraints.gradients_at(z)
    if grads.shape[0] == 0:
        zero = np.zeros_like(mat)
        return DiracDecomposition(
            pi_w=mat, pi_s=zero, pi_m=mat.copy(),
            bracket_matrix=np.zeros((0, 0)), multiplier=np.zeros((0, 0)),
        )
    lam_upper = _bracket_matrix(mat, grads)
    lam = _invert_bracket_matrix(lam_upper)
    w = mat @ grads.T  # columns W_a = Pi grad(x^a)
    pi_s = -(w @ lam @ w.T)
    pi_m = mat - pi_s
    return DiracDecomposition(
        pi_w=mat, pi_s=pi_s, pi_m=pi_m, bracket_matrix=lam_upper, multiplier=lam
    )


def pseudo_poisson(p_field, z, p, dp=None) -> np.ndarray:
    """Pseudo-Poisson block tensor of a projector field at (z, p).

    Parameters
    ----------
    p_field : callable
        Projector field z -> (n, n).
    z, p : array_like
        Base point and momentum covector.
    dp : callable, optional
        Exact derivative closure z -> (n, n, n) (last axis the
        direction); finite differences otherwise.

    Returns
    -------
    ndarray
        (2n, 2n) block matrix [[0, P], [-P^T, D]] with
        D_ij = (P^k_j dP^l_i/dz^k - P^k_i dP^l_j/dz^k) p_l. D is skew
        by construction, and vanishes for constant projector fields.
    """
    z = as_point(z)
    n = z.shape[0]
    p = as_point(p, n)
    pmat = np.asarray(p_field(z), dtype=float)
    if pmat.shape != (n, n):
        raise ValueError(f"projector field must return shape {(n, n)}, got {pmat.shape}")
    dpmat = np.asarray(dp(z), dtype=float) if dp is not None else jacobian(p_field, z)
    half = np.einsum("lik,l,kj->ij", dpmat, p, pmat)
    d = half - half.T
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = pmat
    out[n:, :n] = -pmat.T
    out[n:, n:] = d
    return out


def pseudo_poisson_field(p_field, n: int, rank: int, dp=None) -> PoissonField:
    """Wrap a projector field as a (2n)-dimensional phase-space tensor."""

    def eval_pseudo(zp):
        return pseudo_poisson(p_field, zp[:n], zp[n:], dp=dp)

    return PoissonField(dim=2 * n, rank=rank, eval=eval_pseudo)


class _BracketValueField:
    """Scalar field z -> {g, h}(z), differentiated with a fixed step."""

    __slots__ = ("_bracket_fn", "_g", "_h", "fd_step")

    def __init__(self, bracket_fn, g, h, fd_step):
        self._bracket_fn = bracket_fn
        self._g = g
        self._h = h
        self.fd_step = fd_step

    def eval(self, z):
        return self._bracket_fn(self._g, self._h, z)

    __call__ = eval


def jacobiator(bracket_fn, f, g, h, z, step: float = NESTED_FD_STEP) -> float:
    """Jacobi defect {f,{g,h}} + {g,{h,f}} + {h,{f,g}} at z.

    ``bracket_fn(a, b, z) -> float`` is any bracket evaluator (plain,
    Dirac, pseudo). Nested bracket values are differentiated by central
    differences with the dedicated ``step`` (default 1e-5), so results
    are finite-difference limited; tolerances around 2e-5 are
    appropriate for order-one fields.
    """
    z = as_point(z)
    gh = _BracketValueField(bracket_fn, g, h, step)
    hf = _BracketValueField(bracket_fn, h, f, step)
    fg = _BracketValueField(bracket_fn, f, g, step)
    return (
        bracket_fn(f, gh, z)
        + bracket_fn(g, hf, z)
        + bracket_fn(h, fg, z)
    )
