"""
Módulo Task Evaluators - Predicados de sucesso da tarefa
Responsável pelos avaliadores determinísticos P(task | Ô, e) usados no
pré-cálculo do espaço de erro aceitável:

    - IkEvaluator: disponibilidade de IK na pose de base selecionada
      (modelo analítico de alcance + orientação + colisão com a mesa).
    - GraspEvaluator: sucesso de grasp com garra paralela
      (modelo quase-estático 2.5D: colisão dos dedos, contatos antipodais,
      estabilidade pelo deslocamento do centro de massa).

Os avaliadores trabalham em lote (arrays (M, 6) de erros) e são puros:
podem ser chamados por vários processos ao mesmo tempo.
"""
import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple, Union

import numpy as np

from modules.se3_core import ErrorVector, Pose, inverse_error_transforms, wrap_angle

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

NORMAL_PROBE = 1e-7


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class EvaluatorError(Exception):
    """Exceção base para erros dos avaliadores."""
    pass


class ScenarioValidationError(EvaluatorError):
    """Parâmetros de cenário inválidos ou pose nominal que falha."""
    pass


# ============================================================================
# ENUMS E CONSTANTES
# ============================================================================

class Outcome(str, Enum):
    """Resultado da tarefa para um erro."""
    FAILURE = "failure"
    SUCCESS = "success"
    SUCCESS_UNSTABLE = "success_unstable"


OUTCOME_CODES = {
    Outcome.FAILURE: 0,
    Outcome.SUCCESS: 1,
    Outcome.SUCCESS_UNSTABLE: 2,
}
CODE_TO_OUTCOME = {code: outcome for outcome, code in OUTCOME_CODES.items()}


def is_success(outcome: Outcome) -> bool:
    """Indicador binário: as duas variantes de sucesso contam como 1."""
    return outcome in (Outcome.SUCCESS, Outcome.SUCCESS_UNSTABLE)


def scenario_hash(params: Dict) -> bytes:
    """SHA-256 do JSON canônico (chaves ordenadas) dos parâmetros do cenário."""
    payload = json.dumps(params, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(payload.encode("utf-8")).digest()


# ============================================================================
# GEOMETRIA PLANAR (vetorizada)
# ============================================================================

@dataclass(frozen=True)
class Rect:
    """Retângulo alinhado aos eixos (metros)."""
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ScenarioValidationError(f"Retângulo degenerado: {self}")

    @property
    def center(self) -> np.ndarray:
        return np.array([(self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0])

    @property
    def half(self) -> np.ndarray:
        return np.array([(self.xmax - self.xmin) / 2.0, (self.ymax - self.ymin) / 2.0])

    def as_list(self) -> list:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


def _perp(u: np.ndarray) -> np.ndarray:
    return np.column_stack([-u[:, 1], u[:, 0]])


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def obb_aabb_overlap(center, u, half_u, half_v, box_center, box_half) -> np.ndarray:
    """
    Teste de eixo separador entre retângulos orientados e um retângulo alinhado.

    Args:
        center: Centros (M, 2) dos retângulos orientados
        u: Direção unitária (M, 2) do primeiro eixo
        half_u, half_v: Meias dimensões (escalar ou (M,))
        box_center, box_half: Centro e meias dimensões do retângulo alinhado

    Returns:
        Array (M,) bool, True quando há interpenetração (contato tangente não conta)
    """
    v = _perp(u)
    d = np.asarray(box_center) - center
    bx, by = box_half
    sep_x = np.abs(d[:, 0]) >= half_u * np.abs(u[:, 0]) + half_v * np.abs(v[:, 0]) + bx
    sep_y = np.abs(d[:, 1]) >= half_u * np.abs(u[:, 1]) + half_v * np.abs(v[:, 1]) + by
    sep_u = np.abs(_dot(d, u)) >= half_u + bx * np.abs(u[:, 0]) + by * np.abs(u[:, 1])
    sep_v = np.abs(_dot(d, v)) >= half_v + bx * np.abs(v[:, 0]) + by * np.abs(v[:, 1])
    return ~(sep_x | sep_y | sep_u | sep_v)


def _obb_local(center, u, point):
    d = np.asarray(point) - center
    return _dot(d, u), _dot(d, _perp(u))


def _obb_disk_closest(center, u, half_u, half_v, disk_center):
    lx, ly = _obb_local(center, u, disk_center)
    cx = np.clip(lx, -half_u, half_u)
    cy = np.clip(ly, -half_v, half_v)
    return np.hypot(lx - cx, ly - cy), np.hypot(half_u + np.abs(lx), half_v + np.abs(ly))


def _slab_interval(q, u, center, half):
    """Intervalo do parâmetro s em que q + s·u está dentro do retângulo alinhado."""
    p = q - center
    lo = np.full(len(q), -np.inf)
    hi = np.full(len(q), np.inf)
    for k in range(2):
        uk = u[:, k]
        pk = p[:, k]
        parallel = np.abs(uk) < 1e-15
        inside = np.abs(pk) <= half[k]
        safe = np.where(parallel, 1.0, uk)
        t1 = (-half[k] - pk) / safe
        t2 = (half[k] - pk) / safe
        tmin = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(t1, t2))
        tmax = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(t1, t2))
        lo = np.maximum(lo, tmin)
        hi = np.minimum(hi, tmax)
    empty = ~(lo < hi)
    lo[empty] = np.inf
    hi[empty] = -np.inf
    return lo, hi


def _disk_interval(q, u, center, radius):
    p = q - center
    b = _dot(u, p)
    disc = b * b - (_dot(p, p) - radius * radius)
    ok = disc > 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    return np.where(ok, -b - root, np.inf), np.where(ok, -b + root, -np.inf)


def _box_sdf(p, center, half):
    d = np.abs(p - center) - half
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
    inside = np.minimum(np.maximum(d[:, 0], d[:, 1]), 0.0)
    return outside + inside


# ============================================================================
# SEÇÕES DE OBJETO
# ============================================================================

class Section(ABC):
    """Seção transversal horizontal de um objeto apoiado em z = 0."""

    kind: str = ""

    @property
    @abstractmethod
    def height(self) -> float:
        ...

    @property
    def centroid(self) -> np.ndarray:
        return np.zeros(2)

    @abstractmethod
    def params(self) -> Dict:
        ...

    @abstractmethod
    def line_intervals(self, q: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Intervalos (M, K) do parâmetro s ao longo de q + s·u dentro da seção."""
        ...

    @abstractmethod
    def sdf(self, p: np.ndarray) -> np.ndarray:
        """Distância com sinal (negativa dentro) para pontos (M, 2)."""
        ...

    @abstractmethod
    def obb_overlap(self, center, u, half_u, half_v) -> np.ndarray:
        """Interpenetração entre retângulos orientados (dedos) e a seção."""
        ...

    def normals(self, p: np.ndarray) -> np.ndarray:
        """Normais externas (M, 2) pelo gradiente numérico da distância com sinal."""
        h = NORMAL_PROBE
        gx = self.sdf(p + [h, 0.0]) - self.sdf(p - [h, 0.0])
        gy = self.sdf(p + [0.0, h]) - self.sdf(p - [0.0, h])
        g = np.column_stack([gx, gy])
        norm = np.linalg.norm(g, axis=1, keepdims=True)
        return g / np.where(norm > 0, norm, 1.0)


@dataclass(frozen=True)
class BoxSection(Section):
    w: float
    d: float
    h: float
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        if min(self.w, self.d, self.h) <= 0:
            raise ScenarioValidationError(f"Caixa com dimensões inválidas: {self}")

    @property
    def height(self) -> float:
        return self.h

    @property
    def _half(self) -> np.ndarray:
        return np.array([self.w / 2.0, self.d / 2.0])

    def params(self) -> Dict:
        return {"kind": self.kind, "w": self.w, "d": self.d, "h": self.h}

    def line_intervals(self, q, u):
        lo, hi = _slab_interval(q, u, np.zeros(2), self._half)
        return lo[:, None], hi[:, None]

    def sdf(self, p):
        return _box_sdf(p, np.zeros(2), self._half)

    def obb_overlap(self, center, u, half_u, half_v):
        return obb_aabb_overlap(center, u, half_u, half_v, np.zeros(2), self._half)


@dataclass(frozen=True)
class CylinderSection(Section):
    radius: float
    h: float
    kind: str = field(default="cylinder", init=False)

    def __post_init__(self):
        if self.radius <= 0 or self.h <= 0:
            raise ScenarioValidationError(f"Cilindro com dimensões inválidas: {self}")

    @property
    def height(self) -> float:
        return self.h

    def params(self) -> Dict:
        return {"kind": self.kind, "radius": self.radius, "h": self.h}

    def line_intervals(self, q, u):
        lo, hi = _disk_interval(q, u, np.zeros(2), self.radius)
        return lo[:, None], hi[:, None]

    def sdf(self, p):
        return np.linalg.norm(p, axis=1) - self.radius

    def obb_overlap(self, center, u, half_u, half_v):
        closest, _ = _obb_disk_closest(center, u, half_u, half_v, np.zeros(2))
        return closest < self.radius


@dataclass(frozen=True)
class AnnulusSection(Section):
    """Anel (parede de tigela): disco externo menos disco interno."""
    r_in: float
    r_out: float
    h: float
    kind: str = field(default="annulus", init=False)

    def __post_init__(self):
        if not (0 < self.r_in < self.r_out) or self.h <= 0:
            raise ScenarioValidationError(f"Anel exige 0 < r_in < r_out: {self}")

    @property
    def height(self) -> float:
        return self.h

    def params(self) -> Dict:
        return {"kind": self.kind, "r_in": self.r_in, "r_out": self.r_out, "h": self.h}

    def line_intervals(self, q, u):
        o_lo, o_hi = _disk_interval(q, u, np.zeros(2), self.r_out)
        i_lo, i_hi = _disk_interval(q, u, np.zeros(2), self.r_in)
        hollow = np.isfinite(i_lo)
        first_hi = np.where(hollow, i_lo, o_hi)
        second_lo = np.where(hollow, i_hi, np.inf)
        second_hi = np.where(hollow, o_hi, -np.inf)
        return (np.column_stack([o_lo, second_lo]), np.column_stack([first_hi, second_hi]))

    def sdf(self, p):
        r = np.linalg.norm(p, axis=1)
        return np.maximum(r - self.r_out, self.r_in - r)

    def obb_overlap(self, center, u, half_u, half_v):
        closest, farthest = _obb_disk_closest(center, u, half_u, half_v, np.zeros(2))
        return (closest < self.r_out) & (farthest > self.r_in)


@dataclass(frozen=True)
class MugSection(Section):
    """Cilindro com alça retangular saindo no eixo +x do objeto."""
    radius: float
    h: float
    handle_width: float
    handle_extent: float
    kind: str = field(default="mug", init=False)

    def __post_init__(self):
        if min(self.radius, self.h, self.handle_width, self.handle_extent) <= 0:
            raise ScenarioValidationError(f"Caneca com dimensões inválidas: {self}")
        if self.handle_width >= 2 * self.radius:
            raise ScenarioValidationError("Alça mais larga que o corpo da caneca")

    @property
    def height(self) -> float:
        return self.h

    @property
    def _handle(self) -> Rect:
        x0 = float(np.sqrt(self.radius ** 2 - (self.handle_width / 2.0) ** 2))
        return Rect(x0, -self.handle_width / 2.0, self.radius + self.handle_extent, self.handle_width / 2.0)

    @property
    def centroid(self) -> np.ndarray:
        handle = self._handle
        area_body = np.pi * self.radius ** 2
        area_handle = (handle.xmax - handle.xmin) * (handle.ymax - handle.ymin)
        x = area_handle * handle.center[0] / (area_body + area_handle)
        return np.array([x, 0.0])

    def params(self) -> Dict:
        return {
            "kind": self.kind, "radius": self.radius, "h": self.h,
            "handle_width": self.handle_width, "handle_extent": self.handle_extent,
        }

    def line_intervals(self, q, u):
        d_lo, d_hi = _disk_interval(q, u, np.zeros(2), self.radius)
        handle = self._handle
        h_lo, h_hi = _slab_interval(q, u, handle.center, handle.half)
        return np.column_stack([d_lo, h_lo]), np.column_stack([d_hi, h_hi])

    def sdf(self, p):
        handle = self._handle
        return np.minimum(np.linalg.norm(p, axis=1) - self.radius, _box_sdf(p, handle.center, handle.half))

    def obb_overlap(self, center, u, half_u, half_v):
        closest, _ = _obb_disk_closest(center, u, half_u, half_v, np.zeros(2))
        handle = self._handle
        return (closest < self.radius) | obb_aabb_overlap(center, u, half_u, half_v, handle.center, handle.half)


SECTION_TYPES = {
    "box": BoxSection,
    "cylinder": CylinderSection,
    "annulus": AnnulusSection,
    "mug": MugSection,
}


def make_section(kind: str, **dims) -> Section:
    """Fábrica de seções a partir do tipo ('box', 'cylinder', 'annulus', 'mug')."""
    if kind not in SECTION_TYPES:
        raise ScenarioValidationError(f"Seção desconhecida: {kind}. Disponíveis: {list(SECTION_TYPES)}")
    try:
        return SECTION_TYPES[kind](**dims)
    except TypeError as e:
        raise ScenarioValidationError(f"Dimensões inválidas para seção {kind}: {e}") from e


# ============================================================================
# INTERFACE DO AVALIADOR
# ============================================================================

class TaskEvaluator(ABC):
    """
    Predicado determinístico de sucesso da tarefa para erros no referencial do objeto.
    """

    name: str = "task"

    @abstractmethod
    def params(self) -> Dict:
        """Parâmetros canônicos do cenário (base do hash de proveniência)."""
        ...

    @abstractmethod
    def evaluate_batch(self, errors: np.ndarray) -> np.ndarray:
        """
        Avalia um lote de erros.

        Args:
            errors: Array (M, 6)

        Returns:
            Array (M,) int8 com códigos de OUTCOME_CODES
        """
        ...

    def evaluate(self, e: ErrorVector) -> Outcome:
        code = int(self.evaluate_batch(e.as_array()[None, :])[0])
        return CODE_TO_OUTCOME[code]

    def executable_batch(self, errors: np.ndarray) -> np.ndarray:
        """Se a ação pode ser executada (ex.: base sem colidir). Padrão: sempre."""
        return np.ones(len(np.atleast_2d(errors)), dtype=bool)

    def is_executable(self, e: ErrorVector) -> bool:
        return bool(self.executable_batch(e.as_array()[None, :])[0])

    def scenario_hash(self) -> bytes:
        return scenario_hash({"evaluator": self.name, **self.params()})

    def check_nominal(self) -> Outcome:
        """
        Valida que o erro zero é aceitável.

        Raises:
            ScenarioValidationError: Se a pose nominal falha
        """
        outcome = self.evaluate(ErrorVector.zero())
        if not is_success(outcome):
            raise ScenarioValidationError(
                f"Pose nominal do avaliador '{self.name}' falha com erro zero"
            )
        return outcome


def _perturbed(errors: np.ndarray, nominal: Pose):
    """Pose da ferramenta no referencial perturbado: invert(e)∘T_nominal, em lote."""
    r_inv, t_inv = inverse_error_transforms(errors)
    rotations = r_inv * nominal.rot
    translations = r_inv.apply(nominal.translation) + t_inv
    return rotations, translations


# ============================================================================
# AVALIADOR DE IK (pose de base)
# ============================================================================

@dataclass(frozen=True)
class IkScenario:
    """
    Cenário de disponibilidade de IK.

    Attributes:
        base_pose: Pose da base no referencial do objeto (T_OB)
        reach_min, reach_max: Anel de distâncias alcançáveis (m)
        heading_half_angle: Meio ângulo do cone de orientação (rad)
        obstacles: Retângulos no plano do objeto (m)
        base_footprint: Retângulo da base no referencial da base (m)
    """
    base_pose: Pose
    reach_min: float
    reach_max: float
    heading_half_angle: float
    obstacles: Tuple[Rect, ...] = ()
    base_footprint: Rect = Rect(-0.25, -0.25, 0.25, 0.25)

    def __post_init__(self):
        if not (0 <= self.reach_min < self.reach_max):
            raise ScenarioValidationError(
                f"Alcance inválido: reach_min={self.reach_min}, reach_max={self.reach_max}"
            )
        if not (0 < self.heading_half_angle <= np.pi):
            raise ScenarioValidationError(
                f"heading_half_angle deve estar em (0, pi], recebido: {self.heading_half_angle}"
            )

    def params(self) -> Dict:
        return {
            "base_translation": [float(v) for v in self.base_pose.translation],
            "base_rotation": [float(v) for v in self.base_pose.rotation],
            "reach_min": self.reach_min,
            "reach_max": self.reach_max,
            "heading_half_angle": self.heading_half_angle,
            "obstacles": [o.as_list() for o in self.obstacles],
            "base_footprint": self.base_footprint.as_list(),
        }


class IkEvaluator(TaskEvaluator):
    """Disponibilidade de IK na pose de base perturbada (modelo planar)."""

    name = "ik"

    def __init__(self, scenario: IkScenario):
        self.scenario = scenario

    def params(self) -> Dict:
        return self.scenario.params()

    def _planar_base(self, errors):
        rotations, translations = _perturbed(errors, self.scenario.base_pose)
        heading = rotations.apply([1.0, 0.0, 0.0])
        yaw = np.arctan2(heading[:, 1], heading[:, 0])
        return translations[:, :2], yaw

    def _collides(self, position, yaw) -> np.ndarray:
        s = self.scenario
        u = np.column_stack([np.cos(yaw), np.sin(yaw)])
        offset = s.base_footprint.center
        center = position + u * offset[0] + _perp(u) * offset[1]
        half = s.base_footprint.half
        hit = np.zeros(len(position), dtype=bool)
        for obstacle in s.obstacles:
            hit |= obb_aabb_overlap(center, u, half[0], half[1], obstacle.center, obstacle.half)
        return hit

    def executable_batch(self, errors: np.ndarray) -> np.ndarray:
        errors = np.atleast_2d(np.asarray(errors, dtype=float))
        position, yaw = self._planar_base(errors)
        return ~self._collides(position, yaw)

    def evaluate_batch(self, errors: np.ndarray) -> np.ndarray:
        errors = np.atleast_2d(np.asarray(errors, dtype=float))
        s = self.scenario
        position, yaw = self._planar_base(errors)
        collision = self._collides(position, yaw)
        reach = np.hypot(position[:, 0], position[:, 1])
        in_reach = (reach >= s.reach_min) & (reach <= s.reach_max)
        bearing = np.asarray(wrap_angle(np.arctan2(-position[:, 1], -position[:, 0]) - yaw)).reshape(-1)
        facing = np.abs(bearing) <= s.heading_half_angle
        ok = ~collision & in_reach & facing
        return np.where(ok, OUTCOME_CODES[Outcome.SUCCESS], OUTCOME_CODES[Outcome.FAILURE]).astype(np.int8)


# ============================================================================
# AVALIADOR DE GRASP (garra paralela)
# ============================================================================

@dataclass(frozen=True)
class GraspScenario:
    """
    Cenário de grasp top-down com garra paralela.

    O referencial da garra tem origem no ponto central entre as pontas dos
    dedos, eixo y = eixo de fechamento e eixo z = direção de aproximação.

    Attributes:
        grasp_pose: Pose da garra no referencial do objeto (T_OG)
        opening_width: Abertura fixa dos dedos (m)
        finger_length: Comprimento útil do dedo até a palma (m)
        finger_thickness: Espessura do dedo no eixo de fechamento (m)
        palm_depth: Largura de dedos/palma perpendicular ao fechamento (m)
        section: Seção transversal do objeto
        friction_half_angle: Meio ângulo do cone de atrito (rad)
        stability_offset_max: Distância máxima contato-centro de massa para grasp estável (m)
    """
    grasp_pose: Pose
    section: Section
    opening_width: float = 0.085
    finger_length: float = 0.04
    finger_thickness: float = 0.01
    palm_depth: float = 0.02
    friction_half_angle: float = float(np.radians(20.0))
    stability_offset_max: float = 0.015

    def __post_init__(self):
        if self.opening_width <= 0:
            raise ScenarioValidationError(f"opening_width deve ser > 0, recebido: {self.opening_width}")
        if min(self.finger_length, self.finger_thickness, self.palm_depth) <= 0:
            raise ScenarioValidationError("Dimensões dos dedos devem ser positivas")
        if not (0 < self.friction_half_angle < np.pi / 2):
            raise ScenarioValidationError(
                f"friction_half_angle deve estar em (0, pi/2), recebido: {self.friction_half_angle}"
            )
        if self.stability_offset_max < 0:
            raise ScenarioValidationError("stability_offset_max deve ser >= 0")

    def params(self) -> Dict:
        return {
            "grasp_translation": [float(v) for v in self.grasp_pose.translation],
            "grasp_rotation": [float(v) for v in self.grasp_pose.rotation],
            "opening_width": self.opening_width,
            "finger_length": self.finger_length,
            "finger_thickness": self.finger_thickness,
            "palm_depth": self.palm_depth,
            "friction_half_angle": self.friction_half_angle,
            "stability_offset_max": self.stability_offset_max,
            "section": self.section.params(),
        }


class GraspEvaluator(TaskEvaluator):
    """Sucesso de grasp quase-estático na pose de garra perturbada."""

    name = "grasp"

    def __init__(self, scenario: GraspScenario):
        self.scenario = scenario

    def params(self) -> Dict:
        return self.scenario.params()

    def evaluate_batch(self, errors: np.ndarray) -> np.ndarray:
        errors = np.atleast_2d(np.asarray(errors, dtype=float))
        s = self.scenario
        section = s.section
        rotations, tcp = _perturbed(errors, s.grasp_pose)
        axes = rotations.as_matrix()
        closing = axes[:, :, 1]
        approach = axes[:, :, 2]

        # Inclinação e projeção no plano horizontal
        cos_tilt = -approach[:, 2]
        planar = np.hypot(closing[:, 0], closing[:, 1])
        usable = (cos_tilt > 1e-9) & (planar > 1e-9)
        safe_planar = np.where(usable, planar, 1.0)
        u = closing[:, :2] / safe_planar[:, None]
        half_open = 0.5 * s.opening_width * safe_planar
        thickness = s.finger_thickness * safe_planar
        q = tcp[:, :2]
        zc = tcp[:, 2]

        # Altura: pontas acima da mesa e abaixo do topo, palma acima do topo
        lowest_tip = zc - 0.5 * s.opening_width * np.abs(closing[:, 2])
        height_ok = (
            usable
            & (lowest_tip > 0.0)
            & (zc < section.height)
            & (section.height < zc + s.finger_length * np.maximum(cos_tilt, 0.0))
        )

        # Colisão dos dedos na pose pré-fechamento
        finger_offset = (half_open + 0.5 * thickness)[:, None] * u
        collision = (
            section.obb_overlap(q + finger_offset, u, 0.5 * thickness, 0.5 * s.palm_depth)
            | section.obb_overlap(q - finger_offset, u, 0.5 * thickness, 0.5 * s.palm_depth)
        )

        # Contatos ao longo da linha de fechamento
        lo, hi = section.line_intervals(q, u)
        a = half_open[:, None]
        valid = (lo < a) & (hi > -a)
        enclosed = valid.any(axis=1)
        s_plus = np.where(valid, np.minimum(hi, a), -np.inf).max(axis=1)
        s_minus = np.where(valid, np.maximum(lo, -a), np.inf).min(axis=1)
        s_plus = np.where(enclosed, s_plus, 0.0)
        s_minus = np.where(enclosed, s_minus, 0.0)
        span_ok = (s_plus > s_minus) & ((s_plus - s_minus) / safe_planar <= s.opening_width + 1e-12)

        # Antipodalidade: normais dentro do cone de atrito do eixo de fechamento
        p_plus = q + s_plus[:, None] * u
        p_minus = q + s_minus[:, None] * u
        n_plus = section.normals(p_plus)
        n_minus = section.normals(p_minus)
        cos_friction = np.cos(s.friction_half_angle)
        antipodal = (
            (planar * _dot(n_plus, u) >= cos_friction)
            & (-planar * _dot(n_minus, u) >= cos_friction)
        )

        success = height_ok & ~collision & enclosed & span_ok & antipodal

        # Estabilidade: ponto médio dos contatos vs centro de massa da seção
        midpoint = q + (0.5 * (s_plus + s_minus))[:, None] * u
        offset = np.linalg.norm(midpoint - section.centroid, axis=1)
        unstable = offset > s.stability_offset_max

        codes = np.where(
            success,
            np.where(unstable, OUTCOME_CODES[Outcome.SUCCESS_UNSTABLE], OUTCOME_CODES[Outcome.SUCCESS]),
            OUTCOME_CODES[Outcome.FAILURE],
        )
        return codes.astype(np.int8)


Evaluator = Union[IkEvaluator, GraspEvaluator]


# ============================================================================
# ATALHOS ESCALARES
# ============================================================================

def ik_evaluate(scenario: IkScenario, e: ErrorVector) -> Outcome:
    """Desfecho da tarefa de IK para um único erro."""
    return IkEvaluator(scenario).evaluate(e)


def grasp_evaluate(scenario: GraspScenario, e: ErrorVector) -> Outcome:
    """Desfecho do grasp para um único erro (SUCCESS_UNSTABLE quando longe do centro de massa)."""
    return GraspEvaluator(scenario).evaluate(e)
