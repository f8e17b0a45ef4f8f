"""
Módulo Acceptable Space - Espaço de erro aceitável
Responsável pelo pré-cálculo offline do conjunto de células de erro que ainda
permitem o sucesso da tarefa, armazenado como bitset sobre a grade, e pela
persistência no formato binário .pgam (ver docs/pgam_format.md).
"""
import logging
import os
import struct
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from modules.error_grid import ErrorGrid, GridError, build, cell_centers, partition, _check_index
from modules.task_evaluators import OUTCOME_CODES, Outcome, TaskEvaluator, ScenarioValidationError

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

MAGIC = b"PGAM"
FORMAT_VERSION = 1
HEADER_CORE = struct.Struct("<4sHH12dQ32s32s")
HEADER_TAIL = struct.Struct("<dI")
HEADER_SIZE = HEADER_CORE.size + HEADER_TAIL.size
DEFAULT_CHUNK_SIZE = 262_144


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class AcceptableSpaceError(Exception):
    """Exceção base para erros do espaço aceitável."""
    pass


class NominalFailureError(AcceptableSpaceError):
    """O avaliador falha com erro zero: o cenário não é utilizável."""
    pass


class GridMismatchError(AcceptableSpaceError):
    """Distribuição e mapa construídos sobre grades diferentes."""
    pass


class MapFormatError(AcceptableSpaceError):
    """Arquivo de mapa com formato inválido."""
    pass


class MapVersionError(MapFormatError):
    """Versão de formato não suportada."""
    pass


class MapTruncatedError(MapFormatError):
    """Arquivo de mapa menor que o esperado."""
    pass


class MapChecksumError(MapFormatError):
    """CRC32 do arquivo não confere."""
    pass


# ============================================================================
# TIPOS
# ============================================================================

@dataclass(frozen=True)
class Provenance:
    """Origem do mapa: avaliador, hash do cenário e instante de criação (epoch s)."""
    evaluator: str
    scenario_hash: bytes
    created_at: float

    def __post_init__(self):
        if len(self.scenario_hash) != 32:
            raise AcceptableSpaceError("scenario_hash deve ter 32 bytes (SHA-256)")
        if len(self.evaluator.encode("utf-8")) > 32:
            raise AcceptableSpaceError("Nome do avaliador excede 32 bytes")


@dataclass(frozen=True, eq=False)
class AcceptableErrorMap:
    """
    Conjunto de células aceitáveis sobre uma grade.

    Attributes:
        grid: Grade de erro
        accept: Array (N,) bool, indicador de aceitabilidade
        unstable: Array (N,) bool, sucesso instável (subconjunto de accept)
        provenance: Origem do mapa
    """
    grid: ErrorGrid
    accept: np.ndarray
    unstable: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        accept = np.asarray(self.accept, dtype=bool).reshape(-1)
        unstable = np.asarray(self.unstable, dtype=bool).reshape(-1)
        if len(accept) != self.grid.size or len(unstable) != self.grid.size:
            raise AcceptableSpaceError(
                f"Bitsets com tamanho {len(accept)}/{len(unstable)}, esperado {self.grid.size}"
            )
        if np.any(unstable & ~accept):
            raise AcceptableSpaceError("unstable deve ser subconjunto de accept")
        accept.setflags(write=False)
        unstable.setflags(write=False)
        object.__setattr__(self, "accept", accept)
        object.__setattr__(self, "unstable", unstable)

    @property
    def accept_bits(self) -> bytes:
        return np.packbits(self.accept, bitorder="little").tobytes()

    @property
    def unstable_bits(self) -> bytes:
        return np.packbits(self.unstable, bitorder="little").tobytes()

    @property
    def acceptable_fraction(self) -> float:
        return float(self.accept.mean())

    def equals(self, other: "AcceptableErrorMap") -> bool:
        """Igualdade bit a bit (grade, bitsets e proveniência)."""
        return (
            self.grid == other.grid
            and np.array_equal(self.accept, other.accept)
            and np.array_equal(self.unstable, other.unstable)
            and self.provenance == other.provenance
        )


# ============================================================================
# PRÉ-CÁLCULO
# ============================================================================

def _evaluate_range(evaluator: TaskEvaluator, grid: ErrorGrid, start: int, stop: int, chunk_size: int) -> np.ndarray:
    """Avalia as células [start, stop) em blocos; executado em processo separado."""
    codes = np.empty(stop - start, dtype=np.int8)
    for a in range(start, stop, chunk_size):
        b = min(a + chunk_size, stop)
        codes[a - start:b - start] = evaluator.evaluate_batch(cell_centers(grid, a, b))
    return codes


def precompute(
    grid: ErrorGrid,
    evaluator: TaskEvaluator,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE
) -> AcceptableErrorMap:
    """
    Avalia a tarefa em todas as células da grade.

    Args:
        grid: Grade de erro
        evaluator: Avaliador determinístico da tarefa
        workers: Número de processos
        chunk_size: Células por lote vetorizado

    Returns:
        AcceptableErrorMap (independente do número de processos)

    Raises:
        NominalFailureError: Se o erro zero não é aceitável
    """
    if workers < 1:
        raise ValueError(f"workers deve ser >= 1, recebido: {workers}")
    try:
        evaluator.check_nominal()
    except ScenarioValidationError as e:
        raise NominalFailureError(str(e)) from e

    started = time.perf_counter()
    ranges = partition(grid, workers)
    if workers == 1 or len(ranges) == 1:
        parts = [_evaluate_range(evaluator, grid, a, b, chunk_size) for a, b in ranges]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_evaluate_range, evaluator, grid, a, b, chunk_size) for a, b in ranges]
            parts = [f.result() for f in futures]
    codes = np.concatenate(parts) if parts else np.empty(0, dtype=np.int8)

    accept = codes != OUTCOME_CODES[Outcome.FAILURE]
    unstable = codes == OUTCOME_CODES[Outcome.SUCCESS_UNSTABLE]
    provenance = Provenance(evaluator.name, evaluator.scenario_hash(), time.time())
    result = AcceptableErrorMap(grid, accept, unstable, provenance)

    logger.info(
        "precompute_completed",
        extra={
            "evaluator": evaluator.name,
            "cells": grid.size,
            "acceptable_fraction": result.acceptable_fraction,
            "workers": workers,
            "duration_ms": (time.perf_counter() - started) * 1000,
        }
    )
    return result


def is_acceptable(acc_map: AcceptableErrorMap, i: int) -> bool:
    """
    Indicador de aceitabilidade da célula i.

    Raises:
        CellIndexError: Índice fora de [0, N)
    """
    return bool(acc_map.accept[_check_index(acc_map.grid, i)])


# ============================================================================
# PERSISTÊNCIA (.pgam)
# ============================================================================

def _header_core(acc_map: AcceptableErrorMap) -> bytes:
    grid_params = []
    for limit, step in zip(acc_map.grid.limits, acc_map.grid.steps):
        grid_params.extend([limit, step])
    return HEADER_CORE.pack(
        MAGIC,
        FORMAT_VERSION,
        0,
        *grid_params,
        acc_map.grid.size,
        acc_map.provenance.scenario_hash,
        acc_map.provenance.evaluator.encode("utf-8").ljust(32, b"\0"),
    )


def save(acc_map: AcceptableErrorMap, path: Union[str, os.PathLike]) -> None:
    """
    Grava o mapa em formato .pgam.

    O CRC32 cobre o cabeçalho (exceto timestamp e o próprio CRC) e o payload,
    então duas gravações do mesmo mapa diferem apenas no timestamp.
    """
    core = _header_core(acc_map)
    payload = acc_map.accept_bits + acc_map.unstable_bits
    crc = zlib.crc32(payload, zlib.crc32(core)) & 0xFFFFFFFF
    with open(path, "wb") as f:
        f.write(core)
        f.write(HEADER_TAIL.pack(acc_map.provenance.created_at, crc))
        f.write(payload)
    logger.info(f"Mapa gravado em {path} ({HEADER_SIZE + len(payload)} bytes)")


def load(
    path: Union[str, os.PathLike],
    expected_scenario_hash: Optional[bytes] = None
) -> AcceptableErrorMap:
    """
    Lê um mapa .pgam.

    Args:
        path: Caminho do arquivo
        expected_scenario_hash: Hash do cenário atual; divergência gera aviso

    Raises:
        MapFormatError: Magic/layout inválido
        MapVersionError: Versão não suportada
        MapTruncatedError: Arquivo incompleto
        MapChecksumError: CRC32 não confere
    """
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < 4 or data[:4] != MAGIC:
        raise MapFormatError(f"{path}: não é um arquivo PGAM")
    if len(data) < HEADER_CORE.size:
        raise MapTruncatedError(f"{path}: cabeçalho incompleto")
    fields = HEADER_CORE.unpack_from(data, 0)
    version = fields[1]
    if version != FORMAT_VERSION:
        raise MapVersionError(f"{path}: versão {version} não suportada (esperado {FORMAT_VERSION})")
    if len(data) < HEADER_SIZE:
        raise MapTruncatedError(f"{path}: cabeçalho incompleto")

    grid_params = fields[3:15]
    n_cells, scenario_hash, evaluator_raw = fields[15], fields[16], fields[17]
    created_at, crc = HEADER_TAIL.unpack_from(data, HEADER_CORE.size)

    try:
        grid = build(grid_params[0::2], grid_params[1::2], max_cells=max(n_cells, 1))
    except GridError as e:
        raise MapFormatError(f"{path}: parâmetros de grade inválidos: {e}") from e
    if grid.size != n_cells:
        raise MapFormatError(f"{path}: N={n_cells} não confere com a grade ({grid.size})")

    nbytes = (n_cells + 7) // 8
    payload = data[HEADER_SIZE:]
    if len(payload) < 2 * nbytes:
        raise MapTruncatedError(f"{path}: payload com {len(payload)} bytes, esperado {2 * nbytes}")
    if len(payload) > 2 * nbytes:
        raise MapFormatError(f"{path}: bytes extras após o payload")

    actual_crc = zlib.crc32(payload, zlib.crc32(data[:HEADER_CORE.size])) & 0xFFFFFFFF
    if actual_crc != crc:
        raise MapChecksumError(f"{path}: CRC32 {actual_crc:08x} != {crc:08x}")

    raw = np.frombuffer(payload, dtype=np.uint8)
    accept = np.unpackbits(raw[:nbytes], count=n_cells, bitorder="little").astype(bool)
    unstable = np.unpackbits(raw[nbytes:], count=n_cells, bitorder="little").astype(bool)
    provenance = Provenance(evaluator_raw.rstrip(b"\0").decode("utf-8"), scenario_hash, created_at)
    try:
        acc_map = AcceptableErrorMap(grid, accept, unstable, provenance)
    except AcceptableSpaceError as e:
        raise MapFormatError(f"{path}: {e}") from e

    if expected_scenario_hash is not None and expected_scenario_hash != scenario_hash:
        logger.warning(
            "map_provenance_mismatch",
            extra={
                "path": str(path),
                "map_hash": scenario_hash.hex(),
                "scenario_hash": expected_scenario_hash.hex(),
            }
        )
    return acc_map
