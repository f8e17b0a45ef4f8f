"""
Módulo Pose Distribution - Distribuição de pose por partículas
Responsável por:
    - ParticleSet: amostras ponderadas da pose do objeto + estimativa Ô
    - bin: discretização das partículas na grade de erro (massa por célula)
    - threshold: descarte das células com massa pequena
    - geradores sintéticos (uni e multimodal) no lugar dos estimadores reais
    - leitura/escrita do formato texto .particles
"""
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from modules.error_grid import ErrorGrid, quantize_many
from modules.se3_core import EULER_SEQUENCE, ErrorVector, Pose, Se3Error, apply_error, apply_errors, error_vectors

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

WEIGHT_TOLERANCE = 1e-9
PARTICLE_COLUMNS = ["tx", "ty", "tz", "qx", "qy", "qz", "qw", "w"]


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class DistributionError(Exception):
    """Exceção base para erros da distribuição de pose."""
    pass


class ParticleFileError(DistributionError):
    """Arquivo .particles malformado."""
    pass


# ============================================================================
# TIPOS
# ============================================================================

@dataclass(frozen=True, eq=False)
class ParticleSet:
    """
    Conjunto de partículas da pose do objeto.

    Attributes:
        estimate: Estimativa pontual Ô
        positions: Array (M, 3) em metros
        quaternions: Array (M, 4) (x, y, z, w) unitários
        weights: Array (M,) normalizado (soma 1)
        visual_confidence: Confiança reportada pelo estimador, em [0, 1]
    """
    estimate: Pose
    positions: np.ndarray
    quaternions: np.ndarray
    weights: np.ndarray
    visual_confidence: float = 1.0

    def __post_init__(self):
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        quats = np.atleast_2d(np.asarray(self.quaternions, dtype=float))
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        m = len(positions)
        if m < 1:
            raise DistributionError("ParticleSet exige pelo menos uma partícula")
        if positions.shape != (m, 3) or quats.shape != (m, 4) or weights.shape != (m,):
            raise DistributionError(
                f"Formas inconsistentes: posições {positions.shape}, quatérnios {quats.shape}, pesos {weights.shape}"
            )
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(quats)) and np.all(np.isfinite(weights))):
            raise DistributionError("Partículas com valores não finitos")
        if np.any(weights < 0):
            raise DistributionError("Pesos devem ser não negativos")
        total = weights.sum()
        if total <= 0:
            raise DistributionError("Soma dos pesos deve ser positiva")
        norms = np.linalg.norm(quats, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise DistributionError("Quatérnio nulo em partícula")
        if not 0.0 <= self.visual_confidence <= 1.0:
            raise DistributionError(f"visual_confidence deve estar em [0, 1], recebido: {self.visual_confidence}")

        weights = weights / total
        quats = quats / norms
        for arr in (positions, quats, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "quaternions", quats)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "visual_confidence", float(self.visual_confidence))

    @classmethod
    def from_poses(
        cls,
        estimate: Pose,
        poses: Sequence[Pose],
        weights: Optional[Sequence[float]] = None,
        visual_confidence: float = 1.0
    ) -> "ParticleSet":
        poses = list(poses)
        if not poses:
            raise DistributionError("ParticleSet exige pelo menos uma partícula")
        if weights is None:
            weights = np.ones(len(poses))
        return cls(
            estimate,
            np.array([p.translation for p in poses]),
            np.array([p.rotation for p in poses]),
            np.asarray(weights, dtype=float),
            visual_confidence,
        )

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def rotations(self) -> Rotation:
        return Rotation.from_quat(self.quaternions)

    @property
    def particles(self) -> List[Tuple[Pose, float]]:
        return [
            (Pose(q, t), float(w))
            for q, t, w in zip(self.quaternions, self.positions, self.weights)
        ]

    def errors(self) -> np.ndarray:
        """Erros (M, 6) de cada partícula relativos à estimativa Ô."""
        return error_vectors(self.estimate, self.rotations, self.positions)


@dataclass(frozen=True, eq=False)
class ErrorDistribution:
    """
    Massa de probabilidade esparsa sobre as células da grade.

    Attributes:
        grid: Grade de erro
        cells: Índices (K,) ordenados, com massa > 0
        masses: Massas (K,)
        discarded_mass: Massa fora da grade + células abaixo do limiar
    """
    grid: ErrorGrid
    cells: np.ndarray
    masses: np.ndarray
    discarded_mass: float = 0.0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1)
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if cells.shape != masses.shape:
            raise DistributionError("cells e masses devem ter o mesmo tamanho")
        cells.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "discarded_mass", float(self.discarded_mass))

    @property
    def mass(self) -> Dict[int, float]:
        return {int(c): float(m) for c, m in zip(self.cells, self.masses)}

    @property
    def support_size(self) -> int:
        return len(self.cells)

    @property
    def total(self) -> float:
        """Massa retida + descartada (1 a menos de arredondamento)."""
        return float(self.masses.sum()) + self.discarded_mass


# ============================================================================
# BINNING E LIMIAR
# ============================================================================

def bin(ps: ParticleSet, grid: ErrorGrid) -> ErrorDistribution:
    """
    Acumula o peso de cada partícula na célula do seu erro relativo a Ô.

    Partículas fora da grade vão para discarded_mass.
    """
    indices, out_of_range = quantize_many(grid, ps.errors())
    inside = ~out_of_range
    discarded = float(ps.weights[out_of_range].sum())
    cells, inverse = np.unique(indices[inside], return_inverse=True)
    masses = np.bincount(inverse.reshape(-1), weights=ps.weights[inside], minlength=len(cells))
    keep = masses > 0
    if discarded > 0.5:
        logger.warning(
            "particles_out_of_range",
            extra={"particles": int(out_of_range.sum()), "discarded_mass": discarded}
        )
    return ErrorDistribution(grid, cells[keep], masses[keep], discarded)


def threshold(d: ErrorDistribution, p_thres: float, renormalize: bool = False) -> ErrorDistribution:
    """
    Descarta as células com massa <= p_thres.

    Args:
        d: Distribuição binada
        p_thres: Limiar de massa (>= 0)
        renormalize: Reescala a massa retida para soma 1 (zera discarded_mass)

    Returns:
        Nova ErrorDistribution
    """
    if not np.isfinite(p_thres) or p_thres < 0:
        raise DistributionError(f"p_thres deve ser >= 0, recebido: {p_thres}")
    keep = d.masses > p_thres
    cells = d.cells[keep]
    masses = d.masses[keep]
    discarded = d.discarded_mass + float(d.masses[~keep].sum())
    if renormalize and len(masses):
        return ErrorDistribution(d.grid, cells, masses / masses.sum(), 0.0)
    return ErrorDistribution(d.grid, cells, masses, discarded)


# ============================================================================
# GERADORES SINTÉTICOS
# ============================================================================

def _noise_array(noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float).reshape(-1)
    if noise.shape != (6,) or np.any(noise < 0) or not np.all(np.isfinite(noise)):
        raise DistributionError(f"noise deve ter 6 desvios padrão >= 0, recebido: {noise}")
    return noise


def synth_unimodal(
    truth: Pose,
    noise: Sequence[float],
    n: int,
    seed: Union[int, Sequence[int], np.random.SeedSequence, None],
    visual_confidence: float = 1.0
) -> ParticleSet:
    """
    Nuvem gaussiana no mapa de erro em torno da pose verdadeira.

    Ô recebe um sorteio próprio do mesmo ruído; as partículas são
    truth∘erro com erros gaussianos independentes por eixo.
    """
    if n < 1:
        raise DistributionError(f"n deve ser >= 1, recebido: {n}")
    noise = _noise_array(noise)
    rng = np.random.default_rng(seed)
    estimate = apply_error(truth, ErrorVector.from_array(rng.normal(0.0, noise)))
    draws = rng.normal(0.0, noise, size=(n, 6))
    rotations, translations = apply_errors(truth, draws)
    return ParticleSet(estimate, translations, rotations.as_quat(), np.ones(n), visual_confidence)


def synth_multimodal(
    truth: Pose,
    modes: Union[Sequence[ErrorVector], np.ndarray],
    mode_weights: Sequence[float],
    noise: Sequence[float],
    n: int,
    seed: Union[int, Sequence[int], np.random.SeedSequence, None],
    visual_confidence: float = 1.0
) -> ParticleSet:
    """
    Mistura de nuvens gaussianas, uma por modo de simetria.

    Cada partícula é truth∘modo∘ruído; Ô vem do modo de maior peso.
    A ordem dos sorteios (Ô, ruídos, modos) reproduz synth_unimodal
    quando há um único modo em zero.
    """
    if n < 1:
        raise DistributionError(f"n deve ser >= 1, recebido: {n}")
    noise = _noise_array(noise)
    mode_arr = np.array(
        [m.as_array() if isinstance(m, ErrorVector) else np.asarray(m, dtype=float) for m in modes]
    ).reshape(-1, 6)
    weights = np.asarray(mode_weights, dtype=float).reshape(-1)
    if len(mode_arr) == 0 or len(weights) != len(mode_arr):
        raise DistributionError("modes e mode_weights devem ter o mesmo tamanho (>= 1)")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise DistributionError(f"mode_weights devem ser >= 0 e somar 1, recebido: {weights}")

    rng = np.random.default_rng(seed)
    estimate_noise = rng.normal(0.0, noise)
    draws = rng.normal(0.0, noise, size=(n, 6))
    choice = rng.choice(len(mode_arr), size=n, p=weights)

    mode_rot = Rotation.from_euler(EULER_SEQUENCE, mode_arr[:, 3:])
    chosen_rot = mode_rot[choice]
    noise_rot = Rotation.from_euler(EULER_SEQUENCE, draws[:, 3:])
    rotations = truth.rot * chosen_rot * noise_rot
    translations = truth.rot.apply(chosen_rot.apply(draws[:, :3]) + mode_arr[choice, :3]) + truth.translation

    top = int(np.argmax(weights))
    mode_pose = ErrorVector.from_array(mode_arr[top]).to_pose()
    anchor = Pose(
        (truth.rot * mode_pose.rot).as_quat(),
        truth.rot.apply(mode_pose.translation) + truth.translation,
    )
    estimate = apply_error(anchor, ErrorVector.from_array(estimate_noise))
    return ParticleSet(estimate, translations, rotations.as_quat(), np.ones(n), visual_confidence)


# ============================================================================
# ARQUIVO .particles
# ============================================================================

def load_particles(path: Union[str, os.PathLike]) -> ParticleSet:
    """
    Lê um arquivo .particles.

    Formato: linhas '#' são comentários; a primeira linha de dados é a
    estimativa 'tx ty tz qx qy qz qw confiança'; cada linha seguinte é uma
    partícula 'tx ty tz qx qy qz qw peso'.

    Raises:
        OSError: Arquivo inexistente/ilegível
        ParticleFileError: Conteúdo malformado
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Arquivo de partículas não encontrado: {path}")
    try:
        df = pd.read_csv(path, sep=r"\s+", comment="#", header=None, dtype=float, engine="python")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParticleFileError(f"{path}: não foi possível interpretar o arquivo: {e}") from e

    if df.shape[1] != len(PARTICLE_COLUMNS):
        raise ParticleFileError(f"{path}: esperado {len(PARTICLE_COLUMNS)} colunas, encontrado {df.shape[1]}")
    if len(df) < 2:
        raise ParticleFileError(f"{path}: exige cabeçalho da estimativa e pelo menos uma partícula")
    values = df.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise ParticleFileError(f"{path}: valores ausentes ou não finitos")

    header, rows = values[0], values[1:]
    try:
        estimate = Pose(header[3:7], header[:3])
        return ParticleSet(estimate, rows[:, :3], rows[:, 3:7], rows[:, 7], float(header[7]))
    except (Se3Error, DistributionError) as e:
        raise ParticleFileError(f"{path}: {e}") from e


def save_particles(ps: ParticleSet, path: Union[str, os.PathLike]) -> None:
    """Grava o ParticleSet no formato .particles (precisão completa)."""
    header = np.concatenate([ps.estimate.translation, ps.estimate.rotation, [ps.visual_confidence]])
    rows = np.column_stack([ps.positions, ps.quaternions, ps.weights])
    df = pd.DataFrame(np.vstack([header, rows]), columns=PARTICLE_COLUMNS)
    with open(path, "w") as f:
        f.write("# estimate: tx ty tz qx qy qz qw confidence\n")
        f.write("# particles: tx ty tz qx qy qz qw weight\n")
        df.to_csv(f, sep=" ", header=False, index=False, float_format="%.17g")
    logger.info(f"{len(ps)} partículas gravadas em {path}")
