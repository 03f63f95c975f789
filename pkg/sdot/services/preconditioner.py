"""
Running inverses of the SGN and SN pre-conditioning matrices.

SGN keeps S_n^{-1} for

    S_n = I + sum_{k<=n} [ phi_k phi_k^T + gamma (1 + floor(k/J))^(-beta) nu_l e_l e_l^T ],
    l = l_k = 1 + (k - 1) mod J,

updated by two Sherman-Morrison steps (regularizer first, then gradient). SN keeps
the Moore-Penrose inverse of H_n = P_J + sum_k (diag(pi_k) - pi_k pi_k^T) / eps.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve

from sdot.core.exceptions import NonFiniteError, SingularMatrixError, UnderflowError
from sdot.services.linalg import centering_matrix, project_matrix, symmetrize
from sdot.services.objective import hess_h

logger = logging.getLogger(__name__)


SYMMETRIZE_EVERY = 1000
PI_UNDERFLOW = 1e-300


@dataclass
class SgnInverseState:
    s_inv: np.ndarray
    s: np.ndarray
    gamma: float
    beta: float
    n: int = 0
    ell: int = 1

    @classmethod
    def identity(cls, size: int, gamma: float, beta: float) -> "SgnInverseState":
        return cls(s_inv=np.eye(size), s=np.eye(size), gamma=gamma, beta=beta)

    @property
    def size(self) -> int:
        return self.s.shape[0]

    def s_bar(self) -> np.ndarray:
        """S_n / n."""
        return self.s / max(self.n, 1)


@dataclass
class SnPinvState:
    h_pinv: np.ndarray
    h: np.ndarray
    n: int = 0

    @classmethod
    def identity(cls, size: int) -> "SnPinvState":
        projector = centering_matrix(size)
        return cls(h_pinv=projector.copy(), h=projector)

    @property
    def size(self) -> int:
        return self.h.shape[0]

    def s_inv(self) -> np.ndarray:
        """S_n^{-1} = H_n^- + v_J v_J^T."""
        return self.h_pinv + 1.0 / self.size


PreconditionerState = Union[SgnInverseState, SnPinvState]


@dataclass(frozen=True)
class RankOneTerm:
    """weight * vector vector^T."""

    vector: np.ndarray
    weight: float = 1.0


def regularizer_weight(k: int, size: int, gamma: float, beta: float) -> float:
    return gamma * (1.0 + k // size) ** (-beta)


def regularizer_index(k: int, size: int) -> int:
    """0-based index of l_k = 1 + (k - 1) mod J."""
    return (k - 1) % size


def sgn_terms(k: int, phi: np.ndarray, nu: np.ndarray, gamma: float, beta: float) -> List[RankOneTerm]:
    """The two rank-one terms step k adds to S, regularizer first."""
    size = nu.size
    ell = regularizer_index(k, size)
    unit = np.zeros(size)
    unit[ell] = 1.0
    weight = regularizer_weight(k, size, gamma, beta) * nu[ell]
    return [RankOneTerm(unit, weight), RankOneTerm(np.array(phi, dtype=float), 1.0)]


def sgn_update(state: SgnInverseState, phi: np.ndarray, nu: np.ndarray) -> SgnInverseState:
    """
    Fold step n+1 into the SGN inverse, in place, at O(J^2) cost.

    Args:
        state (SgnInverseState): State after n steps; mutated and returned.
        phi (np.ndarray): Gradient pi - nu at the current sample.
        nu (np.ndarray): Target weights.

    Returns:
        SgnInverseState: The same object, now describing S_{n+1}.
    """
    if not np.all(np.isfinite(phi)):
        raise NonFiniteError("non-finite gradient passed to sgn_update", {"n": state.n})

    k = state.n + 1
    size = state.size
    ell = regularizer_index(k, size)
    weight = regularizer_weight(k, size, state.gamma, state.beta) * nu[ell]
    s_inv = state.s_inv

    if weight > 0:
        column = s_inv[:, ell].copy()
        s_inv -= np.outer(column, column) / (1.0 / weight + column[ell])
        state.s[ell, ell] += weight

    u = s_inv @ phi
    s_inv -= np.outer(u, u) / (1.0 + phi @ u)
    state.s += np.outer(phi, phi)

    state.n = k
    state.ell = 1 + k % size
    if k % SYMMETRIZE_EVERY == 0:
        state.s_inv = symmetrize(s_inv)
    return state


def sn_update(state: SnPinvState, pi: np.ndarray, eps: float) -> SnPinvState:
    """
    Fold one Hessian term (diag(pi) - pi pi^T) / eps into the SN pseudo-inverse, in place.

    Works on S = H + 11^T/J, which is positive definite with S^{-1} = H^- + 11^T/J.
    The new term is B B^T / eps with B = diag(sqrt(pi)) (I - sqrt(pi) sqrt(pi)^T), so
    Woodbury gives S_new^{-1} = S^{-1} - S^{-1} B (eps I + B^T S^{-1} B)^{-1} B^T S^{-1}.
    The inner system stays well conditioned for any pi since B has entries in [-1, 1].
    If its factorization still fails, H + 11^T/J is inverted directly.
    """
    if float(np.min(pi)) < PI_UNDERFLOW:
        raise UnderflowError("soft assignment underflows in sn_update", {"n": state.n, "min_pi": float(np.min(pi))})

    size = state.size
    s_inv = state.h_pinv + 1.0 / size
    root = np.sqrt(pi)
    factor = root[:, None] * (np.eye(size) - np.outer(root, root))
    spread = s_inv @ factor
    inner = eps * np.eye(size) + factor.T @ spread
    state.h = state.h + hess_h(pi, eps)
    try:
        s_inv = s_inv - spread @ solve(inner, spread.T, assume_a="pos")
    except LinAlgError:
        logger.warning("sn_update fell back to a dense inverse at n=%d", state.n)
        try:
            s_inv = np.linalg.inv(state.h + 1.0 / size)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("sn_update system is singular", {"n": state.n}) from exc

    state.h_pinv = project_matrix(symmetrize(s_inv - 1.0 / size))
    state.n += 1
    return state


def apply_inverse(state: PreconditionerState, g: np.ndarray) -> np.ndarray:
    if isinstance(state, SgnInverseState):
        return state.s_inv @ g
    return state.h_pinv @ g + g.mean()


def assemble_sgn_matrix(history: Iterable[RankOneTerm], size: int) -> np.ndarray:
    matrix = np.eye(size)
    for term in history:
        matrix += term.weight * np.outer(term.vector, term.vector)
    return matrix


def dense_inverse_oracle(history: Sequence[RankOneTerm], size: int) -> np.ndarray:
    """Rebuild S_n from its rank-one terms and invert it by Cholesky factorization."""
    matrix = assemble_sgn_matrix(history, size)
    try:
        factor = cho_factor(matrix)
    except LinAlgError as exc:
        raise SingularMatrixError("assembled S_n is not positive definite", {"terms": len(history)}) from exc
    return cho_solve(factor, np.eye(size))


def regularizer_diagonal(n: int, nu: np.ndarray, gamma: float, beta: float) -> np.ndarray:
    """Diagonal of R_n = sum_{k<=n} gamma (1 + floor(k/J))^(-beta) nu_l e_l e_l^T."""
    size = nu.size
    diagonal = np.zeros(size)
    if n <= 0:
        return diagonal
    steps = np.arange(1, n + 1)
    weights = gamma * (1.0 + steps // size) ** (-beta) * nu[(steps - 1) % size]
    np.add.at(diagonal, (steps - 1) % size, weights)
    return diagonal


def sgn_eigenvalue_floor(n: int, nu: np.ndarray, gamma: float, beta: float) -> float:
    """1 + min_l (R_n)_ll, a lower bound on lambda_min(S_n) since S_n - I - R_n is PSD."""
    return 1.0 + float(regularizer_diagonal(n, nu, gamma, beta).min())


def sgn_grouped_floor(n: int, nu: np.ndarray, gamma: float, beta: float) -> float:
    """1 + gamma min(nu) sum_{m=1}^{floor(n/J)} m^(-beta), the grouped form of the floor."""
    blocks = n // nu.size
    return 1.0 + gamma * float(nu.min()) * float(np.sum(np.arange(1, blocks + 1, dtype=float) ** (-beta)))


def sgn_eigenvalue_ceiling(n: int, nu: np.ndarray, gamma: float) -> float:
    return 1.0 + (4.0 + gamma * float(nu.max())) * n


def write_sbar_snapshot(path: Union[str, Path], s_bar: np.ndarray, n: int) -> Path:
    """Header: J and n as little-endian uint64; body: row-major little-endian float64."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([s_bar.shape[0], n], dtype="<u8")
    with path.open("wb") as handle:
        handle.write(header.tobytes())
        handle.write(np.ascontiguousarray(s_bar, dtype="<f8").tobytes())
    return path


def read_sbar_snapshot(path: Union[str, Path]) -> Tuple[np.ndarray, int]:
    raw = Path(path).read_bytes()
    size, n = (int(value) for value in np.frombuffer(raw[:16], dtype="<u8"))
    body = np.frombuffer(raw[16:], dtype="<f8")
    return body.reshape(size, size).astype(float), n


def replay_sgn(
    phis: Iterable[np.ndarray], nu: np.ndarray, gamma: float, beta: float, history: Optional[List[RankOneTerm]] = None
) -> SgnInverseState:
    """Run sgn_update over a gradient sequence, optionally collecting the rank-one history."""
    state = SgnInverseState.identity(nu.size, gamma, beta)
    for phi in phis:
        if history is not None:
            history.extend(sgn_terms(state.n + 1, phi, nu, gamma, beta))
        sgn_update(state, phi, nu)
    return state
