"""
Dense exterior algebra over R^n (n <= 8).

This module provides:
- AltForm, SkewMatrix and Vector value types (optionally batched over leading axes)
- Wedge product, Hodge star, interior product and full contraction of forms
- The so(n) action on forms and the orthogonal group action on forms
- Euclidean inner products on forms and on the underlying tensors
- Transposes of the contraction and Hodge kernels for discrete gradients

Storage is lexicographic over strictly increasing multi-indices, 0-based.
Every kernel works on arrays whose trailing axis holds the C(n, k)
coefficients; any leading axes are treated as a batch (for example grid points).
"""

from functools import lru_cache
from itertools import combinations, permutations
from math import comb, factorial
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from infrastructure.errors import DegreeOverflow, DimensionMismatch


MAX_DIM = 8

_SLOT_LETTERS = "abcdefgh"


# ==================== Combinatorics ====================

def permutation_sign(seq: Sequence[int]) -> int:
    """
    Sign of the permutation sorting `seq`.

    Args:
        seq: Sequence of indices

    Returns:
        +1 or -1, or 0 if an index repeats
    """
    items = list(seq)
    if len(set(items)) != len(items):
        return 0
    inversions = 0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            if items[i] > items[j]:
                inversions += 1
    return -1 if inversions % 2 else 1


def _check_degree(dim: int, degree: int) -> None:
    if dim < 0 or dim > MAX_DIM:
        raise DimensionMismatch(f"base dimension {dim} outside 0..{MAX_DIM}")
    if degree < 0 or degree > dim:
        raise DegreeOverflow(f"degree {degree} invalid on R^{dim}")


@lru_cache(maxsize=None)
def basis(dim: int, degree: int) -> Tuple[Tuple[int, ...], ...]:
    """Strictly increasing multi-indices of length `degree` in lexicographic order."""
    _check_degree(dim, degree)
    return tuple(combinations(range(dim), degree))


@lru_cache(maxsize=None)
def basis_index(dim: int, degree: int) -> Dict[Tuple[int, ...], int]:
    """Position of each increasing multi-index in the coefficient array."""
    return {idx: pos for pos, idx in enumerate(basis(dim, degree))}


@lru_cache(maxsize=None)
def _wedge_table(dim: int, k: int, l: int) -> np.ndarray:
    if k + l > dim:
        raise DegreeOverflow(f"wedge of degrees {k} and {l} exceeds dimension {dim}")
    target = basis_index(dim, k + l)
    table = np.zeros((comb(dim, k), comb(dim, l), comb(dim, k + l)))
    for a, left in enumerate(basis(dim, k)):
        for b, right in enumerate(basis(dim, l)):
            sign = permutation_sign(left + right)
            if sign:
                table[a, b, target[tuple(sorted(left + right))]] = sign
    return table


@lru_cache(maxsize=None)
def _hodge_table(dim: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    target = basis_index(dim, dim - k)
    dst = np.zeros(comb(dim, k), dtype=int)
    signs = np.zeros(comb(dim, k))
    for c, idx in enumerate(basis(dim, k)):
        rest = tuple(i for i in range(dim) if i not in idx)
        dst[c] = target[rest]
        signs[c] = permutation_sign(rest + idx)
    return dst, signs


@lru_cache(maxsize=None)
def _interior_table(dim: int, k: int) -> np.ndarray:
    target = basis_index(dim, k - 1)
    table = np.zeros((dim, comb(dim, k), comb(dim, k - 1)))
    for c, idx in enumerate(basis(dim, k)):
        for r, i in enumerate(idx):
            rest = idx[:r] + idx[r + 1:]
            table[i, c, target[rest]] = -1.0 if r % 2 else 1.0
    return table


@lru_cache(maxsize=None)
def _contraction_table(dim: int, p: int, q: int) -> np.ndarray:
    if p > q:
        raise DegreeOverflow(f"cannot contract a {p}-form into a {q}-form")
    source = basis_index(dim, q)
    weight = float(factorial(p))
    table = np.zeros((comb(dim, p), comb(dim, q), comb(dim, q - p)))
    for a, left in enumerate(basis(dim, p)):
        for c, rest in enumerate(basis(dim, q - p)):
            sign = permutation_sign(left + rest)
            if sign:
                table[a, source[tuple(sorted(left + rest))], c] = weight * sign
    return table


@lru_cache(maxsize=None)
def _action_table(dim: int, k: int) -> np.ndarray:
    # (M.a)_I = -sum_r sum_m M[m, i_r] a(e_i1, .., e_m, .., e_ik)
    index = basis_index(dim, k)
    table = np.zeros((dim, dim, comb(dim, k), comb(dim, k)))
    for d, idx in enumerate(basis(dim, k)):
        for r, j in enumerate(idx):
            for m in range(dim):
                swapped = idx[:r] + (m,) + idx[r + 1:]
                sign = permutation_sign(swapped)
                if sign:
                    table[m, j, index[tuple(sorted(swapped))], d] -= sign
    return table.reshape(dim * dim, comb(dim, k), comb(dim, k))


@lru_cache(maxsize=None)
def _dense_layout(dim: int, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    shape = (dim,) * k
    flat, source, signs = [], [], []
    sorted_flat = []
    for c, idx in enumerate(basis(dim, k)):
        sorted_flat.append(np.ravel_multi_index(idx, shape))
        for perm in permutations(range(k)):
            flat.append(np.ravel_multi_index(tuple(idx[p] for p in perm), shape))
            source.append(c)
            signs.append(permutation_sign(perm))
    return (np.array(flat, dtype=int), np.array(source, dtype=int),
            np.array(signs, dtype=float), np.array(sorted_flat, dtype=int))


# ==================== Array kernels ====================

def _bilinear(a: np.ndarray, b: np.ndarray, table: np.ndarray) -> np.ndarray:
    """out_k = sum_ij a_i b_j table_ijk with broadcasting over leading axes."""
    ni, nj, _ = table.shape
    if nj <= ni:
        tmp = np.tensordot(a, table, axes=([-1], [0]))
        return np.einsum("...jk,...j->...k", tmp, b)
    tmp = np.tensordot(b, table, axes=([-1], [1]))
    return np.einsum("...ik,...i->...k", tmp, a)


def wedge_array(a: np.ndarray, b: np.ndarray, dim: int, k: int, l: int) -> np.ndarray:
    """Wedge product of coefficient arrays of degrees k and l."""
    return _bilinear(a, b, _wedge_table(dim, k, l))


def hodge_array(a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Hodge star of a coefficient array of degree k."""
    dst, signs = _hodge_table(dim, k)
    out = np.zeros(a.shape[:-1] + (comb(dim, dim - k),))
    out[..., dst] = a * signs
    return out


def interior_array(x: np.ndarray, a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Interior product of vectors x[..., n] with k-form coefficients."""
    if k < 1:
        raise DegreeOverflow("interior product needs a form of degree >= 1")
    return _bilinear(x, a, _interior_table(dim, k))


def interior_basis_array(a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """e_i ⌟ a for every basis vector, stacked as [..., i, C(n, k-1)]."""
    return np.einsum("...s,isd->...id", a, _interior_table(dim, k))


def contract_array(a: np.ndarray, b: np.ndarray, dim: int, p: int, q: int) -> np.ndarray:
    """
    Full contraction of a p-form into a q-form over all ordered index tuples.

    (a ⌟ b)_K = sum over i_1..i_p of a_{i_1..i_p} b_{i_1..i_p K}, which is
    p! times the sum over increasing multi-indices.
    """
    return _bilinear(a, b, _contraction_table(dim, p, q))


def contract_left_adjoint_array(c: np.ndarray, b: np.ndarray, dim: int, p: int, q: int) -> np.ndarray:
    """The p-form u with u . a = c . contract_array(a, b) for every p-form a."""
    tmp = np.tensordot(b, _contraction_table(dim, p, q), axes=([-1], [1]))
    return np.einsum("...ik,...k->...i", tmp, c)


def contract_right_adjoint_array(a: np.ndarray, c: np.ndarray, dim: int, p: int, q: int) -> np.ndarray:
    """The q-form w with w . b = c . contract_array(a, b) for every q-form b."""
    tmp = np.tensordot(a, _contraction_table(dim, p, q), axes=([-1], [0]))
    return np.einsum("...jk,...k->...j", tmp, c)


def hodge_adjoint_array(g: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Transpose of hodge_array on degree-k coefficients, applied to (n - k)-form coefficients."""
    dst, signs = _hodge_table(dim, k)
    return g[..., dst] * signs


def so_action_array(m: np.ndarray, a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Derivative at the identity of the pullback action of exp(sM) on k-forms."""
    if k == 0:
        return np.zeros(np.broadcast_shapes(m.shape[:-2], a.shape[:-1]) + (1,))
    table = _action_table(dim, k)
    tmp = np.tensordot(a, table, axes=([-1], [1]))
    flat = m.reshape(m.shape[:-2] + (dim * dim,))
    return np.einsum("...md,...m->...d", tmp, flat)


def to_dense_array(a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Expand coefficients to a fully antisymmetric tensor of shape (..., n, .., n)."""
    if k == 0:
        return a[..., 0].copy()
    flat_idx, source, signs, _ = _dense_layout(dim, k)
    dense = np.zeros(a.shape[:-1] + (dim ** k,))
    dense[..., flat_idx] = a[..., source] * signs
    return dense.reshape(a.shape[:-1] + (dim,) * k)


def from_dense_array(t: np.ndarray, dim: int, k: int) -> np.ndarray:
    """Read the increasing-index coefficients off an antisymmetric tensor."""
    if k == 0:
        return np.asarray(t, dtype=float)[..., None]
    _, _, _, sorted_flat = _dense_layout(dim, k)
    flat = t.reshape(t.shape[: t.ndim - k] + (dim ** k,))
    return flat[..., sorted_flat]


def act_array(q: np.ndarray, a: np.ndarray, dim: int, k: int) -> np.ndarray:
    """(Q.a)_{i1..ik} = sum Q_{i1 p1} .. Q_{ik pk} a_{p1..pk}, Q broadcast over the batch."""
    if k == 0:
        return np.broadcast_to(a, np.broadcast_shapes(q.shape[:-2], a.shape[:-1]) + (1,)).copy()
    dense = to_dense_array(a, dim, k)
    slots = _SLOT_LETTERS[:k]
    for s in range(k):
        src = slots[:s] + "y" + slots[s + 1:]
        dst = slots[:s] + "x" + slots[s + 1:]
        dense = np.einsum(f"...xy,...{src}->...{dst}", q, dense)
    return from_dense_array(dense, dim, k)


# ==================== Value types ====================

class AltForm(BaseModel):
    """
    Antisymmetric k-form on R^n stored on increasing multi-indices.

    Leading axes of `coeffs` (if any) are a batch, so one AltForm can also
    hold a form per grid point.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    degree: int = Field(ge=0, le=MAX_DIM, description="Form degree k")
    dim: int = Field(ge=0, le=MAX_DIM, description="Base dimension n")
    coeffs: np.ndarray = Field(description="Coefficients, trailing axis of length C(n, k)")

    @field_validator("coeffs", mode="before")
    @classmethod
    def as_float_array(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_shape(self) -> "AltForm":
        _check_degree(self.dim, self.degree)
        expected = comb(self.dim, self.degree)
        if self.coeffs.ndim == 0 or self.coeffs.shape[-1] != expected:
            raise DimensionMismatch(
                f"{self.degree}-form on R^{self.dim} needs {expected} coefficients, "
                f"got shape {self.coeffs.shape}"
            )
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("form coefficients must be finite")
        return self

    # ---------- constructors ----------

    @classmethod
    def zeros(cls, dim: int, degree: int, batch: Tuple[int, ...] = ()) -> "AltForm":
        return cls(degree=degree, dim=dim, coeffs=np.zeros(batch + (comb(dim, degree),)))

    @classmethod
    def scalar(cls, value: float, dim: int) -> "AltForm":
        return cls(degree=0, dim=dim, coeffs=np.array([value]))

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: Mapping[Tuple[int, ...], float]) -> "AltForm":
        """
        Build a form from {index tuple: coefficient}; unsorted tuples pick up their sign.

        Args:
            dim: Base dimension
            degree: Form degree
            terms: Mapping of 0-based index tuples to coefficients

        Returns:
            AltForm with the summed terms
        """
        index = basis_index(dim, degree)
        coeffs = np.zeros(comb(dim, degree))
        for idx, value in terms.items():
            if len(idx) != degree:
                raise DegreeOverflow(f"index {idx} does not have length {degree}")
            sign = permutation_sign(idx)
            if sign:
                coeffs[index[tuple(sorted(idx))]] += sign * value
        return cls(degree=degree, dim=dim, coeffs=coeffs)

    @classmethod
    def from_tensor(cls, tensor: np.ndarray, degree: int) -> "AltForm":
        dim = tensor.shape[-1] if degree else 0
        return cls(degree=degree, dim=dim, coeffs=from_dense_array(np.asarray(tensor, float), dim, degree))

    # ---------- access ----------

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.coeffs.shape[:-1]

    def component(self, *idx: int) -> np.ndarray:
        """Coefficient at an arbitrary index tuple: sign(perm) x stored value, 0 on repeats."""
        if len(idx) != self.degree:
            raise DegreeOverflow(f"expected {self.degree} indices, got {len(idx)}")
        sign = permutation_sign(idx)
        if sign == 0:
            return np.zeros(self.batch_shape) if self.batch_shape else 0.0
        value = sign * self.coeffs[..., basis_index(self.dim, self.degree)[tuple(sorted(idx))]]
        return value

    def to_tensor(self) -> np.ndarray:
        return to_dense_array(self.coeffs, self.dim, self.degree)

    def nonzero_terms(self, tol: float = 0.0) -> Dict[Tuple[int, ...], float]:
        """Unbatched form as {increasing index: coefficient} for |coefficient| > tol."""
        return {idx: float(c) for idx, c in zip(basis(self.dim, self.degree), self.coeffs)
                if abs(c) > tol}

    # ---------- linear structure ----------

    def _like(self, coeffs: np.ndarray) -> "AltForm":
        return AltForm(degree=self.degree, dim=self.dim, coeffs=coeffs)

    def _check_same(self, other: "AltForm") -> None:
        if not isinstance(other, AltForm) or (other.degree, other.dim) != (self.degree, self.dim):
            raise DimensionMismatch("forms must share degree and dimension")

    def __add__(self, other: "AltForm") -> "AltForm":
        self._check_same(other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: "AltForm") -> "AltForm":
        self._check_same(other)
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self) -> "AltForm":
        return self._like(-self.coeffs)

    def __mul__(self, scale) -> "AltForm":
        scale = np.asarray(scale, dtype=float)
        if scale.ndim:
            scale = scale[..., None]
        return self._like(self.coeffs * scale)

    __rmul__ = __mul__

    def __truediv__(self, scale: float) -> "AltForm":
        return self._like(self.coeffs / float(scale))

    def allclose(self, other: "AltForm", atol: float = 1e-12) -> bool:
        self._check_same(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


class Vector(BaseModel):
    """Vector of R^n (optionally batched)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(ge=1, le=MAX_DIM)
    components: np.ndarray

    @field_validator("components", mode="before")
    @classmethod
    def as_float_array(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_shape(self) -> "Vector":
        if self.components.ndim == 0 or self.components.shape[-1] != self.dim:
            raise DimensionMismatch(f"vector of R^{self.dim} has shape {self.components.shape}")
        if not np.all(np.isfinite(self.components)):
            raise ValueError("vector components must be finite")
        return self

    @classmethod
    def of(cls, components: Iterable[float]) -> "Vector":
        arr = np.asarray(list(components), dtype=float)
        return cls(dim=arr.shape[-1], components=arr)

    @classmethod
    def unit(cls, dim: int, i: int) -> "Vector":
        e = np.zeros(dim)
        e[i] = 1.0
        return cls(dim=dim, components=e)

    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.components, axis=-1)

    def allclose(self, other: "Vector", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.components, other.components, rtol=0.0, atol=atol))


class SkewMatrix(BaseModel):
    """Skew-symmetric n x n matrix (optionally batched); A + A^T = 0 is enforced on construction."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(ge=1, le=MAX_DIM)
    entries: np.ndarray

    @field_validator("entries", mode="before")
    @classmethod
    def as_float_array(cls, v) -> np.ndarray:
        return np.asarray(v, dtype=float)

    @model_validator(mode="after")
    def check_skew(self) -> "SkewMatrix":
        if self.entries.ndim < 2 or self.entries.shape[-2:] != (self.dim, self.dim):
            raise DimensionMismatch(f"expected (..., {self.dim}, {self.dim}), got {self.entries.shape}")
        scale = max(1.0, float(np.max(np.abs(self.entries))) if self.entries.size else 1.0)
        asym = self.entries + np.swapaxes(self.entries, -1, -2)
        if asym.size and float(np.max(np.abs(asym))) > 1e-12 * scale:
            raise ValueError("matrix is not skew-symmetric")
        return self

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "SkewMatrix":
        """Skew part of an arbitrary square matrix."""
        m = np.asarray(m, dtype=float)
        return cls(dim=m.shape[-1], entries=0.5 * (m - np.swapaxes(m, -1, -2)))

    @classmethod
    def from_two_form(cls, beta: AltForm) -> "SkewMatrix":
        """Matrix of X -> X ⌟ beta, i.e. M[j, i] = beta_ij."""
        if beta.degree != 2:
            raise DegreeOverflow("expected a 2-form")
        return cls(dim=beta.dim, entries=np.swapaxes(beta.to_tensor(), -1, -2))

    def to_two_form(self) -> AltForm:
        return AltForm.from_tensor(np.swapaxes(self.entries, -1, -2), 2)

    def inner(self, other: "SkewMatrix") -> np.ndarray:
        """Frobenius inner product."""
        return np.sum(self.entries * other.entries, axis=(-2, -1))

    def allclose(self, other: "SkewMatrix", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))


# ==================== Form operations ====================

def _same_dim(*dims: int) -> int:
    if len(set(dims)) != 1:
        raise DimensionMismatch(f"dimension mismatch: {dims}")
    return dims[0]


def wedge(a: AltForm, b: AltForm) -> AltForm:
    """
    Alternating product a ∧ b.

    Args:
        a: k-form
        b: l-form on the same R^n

    Returns:
        (k + l)-form

    Raises:
        DimensionMismatch: if the base dimensions differ
        DegreeOverflow: if k + l > n
    """
    dim = _same_dim(a.dim, b.dim)
    if a.degree + b.degree > dim:
        raise DegreeOverflow(f"degree {a.degree + b.degree} exceeds dimension {dim}")
    return AltForm(degree=a.degree + b.degree, dim=dim,
                   coeffs=wedge_array(a.coeffs, b.coeffs, dim, a.degree, b.degree))


def hodge(a: AltForm) -> AltForm:
    """Euclidean Hodge star with ⟨b, ∗a⟩ vol = b ∧ a."""
    return AltForm(degree=a.dim - a.degree, dim=a.dim, coeffs=hodge_array(a.coeffs, a.dim, a.degree))


def interior(x: Vector, a: AltForm) -> AltForm:
    """(X ⌟ a)(Y1, ..) = a(X, Y1, ..)."""
    dim = _same_dim(x.dim, a.dim)
    if a.degree < 1:
        raise DegreeOverflow("interior product of a 0-form is undefined")
    return AltForm(degree=a.degree - 1, dim=dim,
                   coeffs=interior_array(x.components, a.coeffs, dim, a.degree))


def contract_forms(a: AltForm, b: AltForm) -> AltForm:
    """Full contraction a ⌟ b of a p-form into a q-form (p <= q)."""
    dim = _same_dim(a.dim, b.dim)
    return AltForm(degree=b.degree - a.degree, dim=dim,
                   coeffs=contract_array(a.coeffs, b.coeffs, dim, a.degree, b.degree))


def so_action(beta: SkewMatrix, a: AltForm) -> AltForm:
    """(β.a)(X1, .., Xk) = -Σ_i a(X1, .., βXi, .., Xk)."""
    dim = _same_dim(beta.dim, a.dim)
    return AltForm(degree=a.degree, dim=dim,
                   coeffs=so_action_array(beta.entries, a.coeffs, dim, a.degree))


def push_forward(rotation: np.ndarray, a: AltForm) -> AltForm:
    """
    Action of an orthogonal matrix R on forms, (R.a)(X, ..) = a(R^T X, ..).

    Its derivative along exp(sM) at s = 0 is so_action(M, .).
    """
    rotation = np.asarray(rotation, dtype=float)
    _same_dim(rotation.shape[-1], a.dim)
    return AltForm(degree=a.degree, dim=a.dim, coeffs=act_array(rotation, a.coeffs, a.dim, a.degree))


def pull_back(linear: np.ndarray, a: AltForm) -> AltForm:
    """(A^* a)(X, ..) = a(AX, ..) for an arbitrary linear map A."""
    linear = np.asarray(linear, dtype=float)
    _same_dim(linear.shape[-1], a.dim)
    return AltForm(degree=a.degree, dim=a.dim,
                   coeffs=act_array(np.swapaxes(linear, -1, -2), a.coeffs, a.dim, a.degree))


def form_inner(a: AltForm, b: AltForm):
    """Sum over increasing multi-indices of coefficient products."""
    if (a.degree, a.dim) != (b.degree, b.dim):
        raise DimensionMismatch("inner product needs equal degree and dimension")
    value = np.sum(a.coeffs * b.coeffs, axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def tensor_inner(a: AltForm, b: AltForm):
    """Inner product of the underlying antisymmetric tensors (k! x form_inner)."""
    return factorial(a.degree) * form_inner(a, b)


def volume_form(dim: int) -> AltForm:
    return AltForm(degree=dim, dim=dim, coeffs=np.ones(1))


def basis_form(dim: int, idx: Tuple[int, ...]) -> AltForm:
    return AltForm.from_terms(dim, len(idx), {tuple(idx): 1.0})


def random_form(rng: np.random.Generator, dim: int, degree: int,
                batch: Tuple[int, ...] = (), scale: Optional[float] = None) -> AltForm:
    """Gaussian random form, used by the identity suite and tests."""
    coeffs = rng.standard_normal(batch + (comb(dim, degree),))
    if scale is not None:
        coeffs *= scale
    return AltForm(degree=degree, dim=dim, coeffs=coeffs)
