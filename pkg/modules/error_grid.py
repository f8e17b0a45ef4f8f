"""
Módulo Error Grid - Espaço de erro discreto
Responsável pela grade regular 6D (tx, ty, tz, rx, ry, rz) com limites e
fatores de discretização por eixo, pela indexação plana das células e pela
quantização de erros contínuos para a célula mais próxima.

Ordem das células: row-major, tx varia mais devagar e rz mais rápido.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from modules.se3_core import ErrorVector, wrap_angle

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

AXES = ("tx", "ty", "tz", "rx", "ry", "rz")
ROTATION_AXES = (3, 4, 5)
DEFAULT_MAX_CELLS = 16_000_000
DIVISIBILITY_TOLERANCE = 1e-9
DEGENERATE_TOLERANCE = 1e-9
BOUNDARY_TOLERANCE = 1e-12


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class GridError(Exception):
    """Exceção base para erros da grade de erro."""
    pass


class GridDivisibilityError(GridError):
    """Limite não é múltiplo inteiro do passo."""
    pass


class GridTooLargeError(GridError):
    """Número de células acima do limite configurado."""
    pass


class CellIndexError(GridError):
    """Índice de célula fora de [0, N)."""
    pass


# ============================================================================
# TIPOS
# ============================================================================

@dataclass(frozen=True)
class QuantizedCell:
    """Resultado de quantize: índice plano + flag de erro fora da grade (clamp)."""
    index: int
    out_of_range: bool = False


@dataclass(frozen=True)
class ErrorGrid:
    """
    Grade regular sobre o espaço de erro.

    Attributes:
        limits: Limite simétrico por eixo (m para t, rad para r)
        steps: Passo por eixo (pode ser 0 em eixos degenerados)
        counts: Número de células por eixo (sempre ímpar)
    """
    limits: Tuple[float, ...]
    steps: Tuple[float, ...]
    counts: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.counts, dtype=np.int64))

    @property
    def half_counts(self) -> np.ndarray:
        return (np.asarray(self.counts) - 1) // 2

    @property
    def effective_steps(self) -> np.ndarray:
        """Passo efetivo (limit / metade) nos eixos ativos; passo dado nos degenerados."""
        half = self.half_counts
        limits = np.asarray(self.limits)
        steps = np.asarray(self.steps)
        return np.where(half > 0, limits / np.maximum(half, 1), steps)

    @property
    def active_axes(self) -> Tuple[int, ...]:
        """Eixos não degenerados (limite > 0)."""
        return tuple(int(k) for k in np.flatnonzero(self.half_counts > 0))

    @property
    def aliased_axes(self) -> Tuple[int, ...]:
        """Eixos angulares cujo limite alcança pi (célula -pi é alias de +pi)."""
        return tuple(
            k for k in ROTATION_AXES
            if self.counts[k] > 1 and abs(self.limits[k] - np.pi) <= DIVISIBILITY_TOLERANCE
        )

    @property
    def central_index(self) -> int:
        return int(np.ravel_multi_index(tuple(int(h) for h in self.half_counts), self.counts))

    def describe(self) -> dict:
        """Resumo legível da grade (graus nos eixos angulares)."""
        out = {"cells": self.size}
        for k, name in enumerate(AXES):
            scale = np.degrees(1.0) if k in ROTATION_AXES else 1.0
            out[name] = {
                "limit": round(self.limits[k] * scale, 9),
                "step": round(float(self.effective_steps[k]) * scale, 9),
                "count": self.counts[k],
            }
        return out


# ============================================================================
# CONSTRUÇÃO
# ============================================================================

def build(
    limits: Sequence[float],
    steps: Sequence[float],
    max_cells: int = DEFAULT_MAX_CELLS
) -> ErrorGrid:
    """
    Constrói a grade de erro.

    Args:
        limits: 6 limites >= 0 (metros para t, radianos para r)
        steps: 6 passos (> 0 nos eixos com limite > 0)
        max_cells: Número máximo de células permitido

    Returns:
        ErrorGrid com N células

    Raises:
        GridError: Limites/passos inválidos
        GridDivisibilityError: Limite não múltiplo do passo
        GridTooLargeError: N acima de max_cells
    """
    limits = [float(v) for v in limits]
    steps = [float(v) for v in steps]
    if len(limits) != 6 or len(steps) != 6:
        raise GridError(f"Grade exige 6 limites e 6 passos, recebido: {len(limits)}/{len(steps)}")

    counts: List[int] = []
    for k, (limit, step) in enumerate(zip(limits, steps)):
        axis = AXES[k]
        if not np.isfinite(limit) or limit < 0:
            raise GridError(f"Limite do eixo {axis} deve ser >= 0, recebido: {limit}")
        if not np.isfinite(step) or step < 0:
            raise GridError(f"Passo do eixo {axis} deve ser >= 0, recebido: {step}")
        if k in ROTATION_AXES and limit > np.pi + DIVISIBILITY_TOLERANCE:
            raise GridError(f"Limite angular do eixo {axis} excede 180 graus: {np.degrees(limit):.3f}")
        if limit == 0.0:
            counts.append(1)
            continue
        if step == 0.0:
            raise GridError(f"Passo do eixo {axis} deve ser > 0 quando o limite é {limit}")
        ratio = limit / step
        half = int(round(ratio))
        if half < 1 or abs(limit - half * step) > DIVISIBILITY_TOLERANCE:
            raise GridDivisibilityError(
                f"Limite {limit} do eixo {axis} não é múltiplo inteiro do passo {step}"
            )
        counts.append(2 * half + 1)

    total = int(np.prod(counts, dtype=np.int64))
    if total > max_cells:
        raise GridTooLargeError(
            f"Grade com {total} células excede o limite de {max_cells}. "
            f"Aumente os passos ou reduza os limites."
        )

    grid = ErrorGrid(tuple(limits), tuple(steps), tuple(counts))
    logger.debug(f"Grade de erro construída: {total} células, contagens {counts}")
    return grid


# ============================================================================
# QUANTIZAÇÃO E INDEXAÇÃO
# ============================================================================

def quantize_many(grid: ErrorGrid, errors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quantiza um lote de erros para os índices das células mais próximas.

    Arredondamento por eixo após normalização dos ângulos. Qualquer componente
    com |e| > limite vai para a célula da borda e o erro é marcado como fora
    da grade. Exceção: em eixo degenerado (limite 0) a tolerância é passo/2,
    ou DEGENERATE_TOLERANCE quando não há passo declarado.

    Args:
        grid: Grade de erro
        errors: Array (M, 6)

    Returns:
        Tuple[índices (M,) int64, fora_da_grade (M,) bool]
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    if errors.shape[1] != 6:
        raise GridError(f"Erros devem ter 6 colunas, recebido: {errors.shape}")

    half = grid.half_counts
    steps = grid.effective_steps
    aliased = grid.aliased_axes
    out_of_range = np.zeros(len(errors), dtype=bool)
    coords = np.empty((len(errors), 6), dtype=np.int64)

    for k in range(6):
        x = errors[:, k]
        if k in ROTATION_AXES:
            x = np.asarray(wrap_angle(x), dtype=float).reshape(-1)
        if half[k] == 0:
            tol = steps[k] / 2.0 if steps[k] > 0 else DEGENERATE_TOLERANCE
            out_of_range |= np.abs(x) > tol
            coords[:, k] = 0
            continue
        out_of_range |= np.abs(x) > grid.limits[k] + BOUNDARY_TOLERANCE
        m = np.floor(x / steps[k] + 0.5)
        m = np.clip(m, -half[k], half[k]).astype(np.int64)
        if k in aliased:
            m = np.where(m == -half[k], half[k], m)
        coords[:, k] = m + half[k]

    indices = np.ravel_multi_index(tuple(coords.T), grid.counts).astype(np.int64)
    return indices, out_of_range


def quantize(grid: ErrorGrid, e: ErrorVector) -> QuantizedCell:
    """
    Quantiza um erro contínuo para a célula mais próxima.

    Args:
        grid: Grade de erro
        e: Erro contínuo

    Returns:
        QuantizedCell com índice e flag de fora da grade
    """
    indices, oor = quantize_many(grid, e.as_array()[None, :])
    return QuantizedCell(int(indices[0]), bool(oor[0]))


def _check_index(grid: ErrorGrid, i: int) -> int:
    i = int(i)
    if i < 0 or i >= grid.size:
        raise CellIndexError(f"Índice de célula {i} fora de [0, {grid.size})")
    return i


def cell_centers(grid: ErrorGrid, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """
    Centros das células [start, stop) em lote.

    Returns:
        Array (stop - start, 6), ângulos em (-pi, pi]
    """
    stop = grid.size if stop is None else int(stop)
    if start < 0 or stop > grid.size or start > stop:
        raise CellIndexError(f"Intervalo inválido [{start}, {stop}) para grade com {grid.size} células")
    flat = np.arange(start, stop, dtype=np.int64)
    coords = np.column_stack(np.unravel_index(flat, grid.counts)) if len(flat) else np.empty((0, 6), dtype=np.int64)
    half = grid.half_counts
    limits = np.asarray(grid.limits)
    centers = np.zeros((len(flat), 6))
    for k in range(6):
        if half[k] > 0:
            centers[:, k] = limits[k] * ((coords[:, k] - half[k]) / half[k])
    centers[:, 3:] = np.asarray(wrap_angle(centers[:, 3:]), dtype=float).reshape(-1, 3)
    return centers


def cell_center(grid: ErrorGrid, i: int) -> ErrorVector:
    """
    Erro representado pela célula i.

    Raises:
        CellIndexError: Índice fora de [0, N)
    """
    i = _check_index(grid, i)
    return ErrorVector.from_array(cell_centers(grid, i, i + 1)[0])


def iter_cells(
    grid: ErrorGrid,
    start: int = 0,
    stop: Optional[int] = None,
    chunk_size: int = 65536
) -> Iterator[Tuple[int, ErrorVector]]:
    """Percorre as células [start, stop) em ordem de índice plano."""
    stop = grid.size if stop is None else int(stop)
    for chunk_start in range(start, stop, chunk_size):
        chunk_stop = min(chunk_start + chunk_size, stop)
        centers = cell_centers(grid, chunk_start, chunk_stop)
        for offset, row in enumerate(centers):
            yield chunk_start + offset, ErrorVector.from_array(row)


def partition(grid: ErrorGrid, parts: int) -> List[Tuple[int, int]]:
    """
    Divide [0, N) em até `parts` intervalos contíguos e disjuntos.

    Returns:
        Lista de (start, stop), na ordem dos índices
    """
    if parts < 1:
        raise ValueError(f"parts deve ser >= 1, recebido: {parts}")
    bounds = np.linspace(0, grid.size, min(parts, grid.size) + 1).round().astype(np.int64)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
