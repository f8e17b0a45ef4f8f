"""
Módulo SE(3) Core - Álgebra de transformações rígidas
Responsável por poses (quaternião + translação), pelo mapa de erro em ângulos
de Euler (eixos fixos X, Y, Z) e pelas métricas de distância usadas na
quantização do espaço de erro.

Convenções:
    - Quaternião no formato (x, y, z, w), sempre normalizado e com w >= 0.
    - Ângulos de Euler em eixos fixos X-Y-Z, ou seja R = Rz · Ry · Rx.
    - Unidades internas: metros e radianos.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.spatial.transform import Rotation

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

EULER_SEQUENCE = "xyz"
DEFAULT_LAMBDA = 0.01  # metros por radiano
GIMBAL_LOCK_TOLERANCE = 1e-6


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class Se3Error(Exception):
    """Exceção base para erros de álgebra SE(3)."""
    pass


# ============================================================================
# UTILITÁRIOS
# ============================================================================

def wrap_angle(angle):
    """
    Normaliza ângulo(s) para o intervalo (-pi, pi].

    Valores já dentro do intervalo são devolvidos sem alteração (bit a bit).

    Args:
        angle: Escalar ou array de ângulos em radianos

    Returns:
        Ângulo(s) no intervalo (-pi, pi]
    """
    a = np.asarray(angle, dtype=float)
    wrapped = np.pi - np.mod(np.pi - a, 2.0 * np.pi)
    inside = (a > -np.pi) & (a <= np.pi)
    result = np.where(inside, a, wrapped)
    if result.ndim == 0:
        return float(result)
    return result


def _canonical_quat(q: np.ndarray) -> np.ndarray:
    """Normaliza quaterniões (..., 4) e força w >= 0."""
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm < 1e-12):
        raise Se3Error("Quaternião com norma nula")
    q = q / norm
    sign = np.where(q[..., 3:4] < 0.0, -1.0, 1.0)
    return q * sign


def _quiet_euler(rot: Rotation) -> np.ndarray:
    """Converte para Euler 'xyz' sem o aviso de gimbal lock do scipy (tratado por nós)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return rot.as_euler(EULER_SEQUENCE)


# ============================================================================
# TIPOS DE DOMÍNIO
# ============================================================================

@dataclass(frozen=True, eq=False)
class Pose:
    """
    Transformação rígida em SE(3).

    Attributes:
        rotation: Quaternião unitário (x, y, z, w)
        translation: Vetor de translação em metros
    """
    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(-1)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if q.shape != (4,) or t.shape != (3,):
            raise Se3Error(f"Pose inválida: quaternião {q.shape}, translação {t.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise Se3Error("Pose com valores não finitos")
        q = _canonical_quat(q)
        q.setflags(write=False)
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float, z: float) -> "Pose":
        return cls(translation=np.array([x, y, z], dtype=float))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        """Constrói a pose a partir de uma matriz homogênea 4x4."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise Se3Error(f"Matriz homogênea deve ser 4x4, recebido: {m.shape}")
        return cls(Rotation.from_matrix(m[:3, :3]).as_quat(), m[:3, 3])

    @classmethod
    def from_euler(cls, translation, euler_xyz) -> "Pose":
        """Constrói a pose a partir de translação (m) e Euler X-Y-Z fixos (rad)."""
        return cls(Rotation.from_euler(EULER_SEQUENCE, euler_xyz).as_quat(), translation)

    @property
    def rot(self) -> Rotation:
        return Rotation.from_quat(self.rotation)

    def as_matrix(self) -> np.ndarray:
        """Retorna a matriz homogênea 4x4."""
        m = np.eye(4)
        m[:3, :3] = self.rot.as_matrix()
        m[:3, 3] = self.translation
        return m

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        """Compara poses (translação em metros, rotação em ângulo geodésico)."""
        dt = float(np.linalg.norm(self.translation - other.translation))
        dr = float((self.rot.inv() * other.rot).magnitude())
        return dt <= atol and dr <= atol

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.6f}" for v in self.translation)
        q = ", ".join(f"{v:.6f}" for v in self.rotation)
        return f"Pose(t=[{t}], q=[{q}])"


@dataclass(frozen=True, eq=False)
class ErrorVector:
    """
    Perturbação 6D no referencial do objeto.

    Attributes:
        t: Translação (tx, ty, tz) em metros
        r: Ângulos de Euler (rx, ry, rz) em radianos, eixos fixos X-Y-Z,
           cada um em (-pi, pi]
    """
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1).copy()
        r = np.asarray(wrap_angle(np.asarray(self.r, dtype=float).reshape(-1)), dtype=float)
        if t.shape != (3,) or r.shape != (3,):
            raise Se3Error(f"ErrorVector inválido: t {t.shape}, r {r.shape}")
        t.setflags(write=False)
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", r)

    @classmethod
    def zero(cls) -> "ErrorVector":
        return cls()

    @classmethod
    def from_array(cls, values) -> "ErrorVector":
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.shape != (6,):
            raise Se3Error(f"ErrorVector espera 6 componentes, recebido: {v.shape}")
        return cls(v[:3], v[3:])

    @classmethod
    def from_pose(cls, pose: Pose) -> "ErrorVector":
        """Mapa inverso: pose -> coordenadas (t, Euler)."""
        return cls(pose.translation, _quiet_euler(pose.rot))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.t, self.r])

    def to_pose(self) -> Pose:
        return Pose.from_euler(self.t, self.r)

    def rotation_matrix(self) -> np.ndarray:
        return Rotation.from_euler(EULER_SEQUENCE, self.r).as_matrix()

    @property
    def near_gimbal_lock(self) -> bool:
        """True quando |pitch| está a menos de 1e-6 de pi/2."""
        return abs(abs(float(self.r[1])) - np.pi / 2.0) < GIMBAL_LOCK_TOLERANCE

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.6f}" for v in self.t)
        r = ", ".join(f"{np.degrees(v):.3f}" for v in self.r)
        return f"ErrorVector(t=[{t}] m, r=[{r}] deg)"


# ============================================================================
# OPERAÇÕES
# ============================================================================

def compose(a: Pose, b: Pose) -> Pose:
    """
    Composição a∘b (aplica b no referencial de a).

    Args:
        a: Pose externa
        b: Pose interna

    Returns:
        Pose composta, com rotação renormalizada
    """
    ra = a.rot
    return Pose((ra * b.rot).as_quat(), ra.apply(b.translation) + a.translation)


def invert(p: Pose) -> Pose:
    """Inversa da pose: compose(p, invert(p)) = identidade."""
    r_inv = p.rot.inv()
    return Pose(r_inv.as_quat(), -r_inv.apply(p.translation))


def error_of(estimate: Pose, candidate: Pose) -> ErrorVector:
    """
    Erro do candidato expresso no referencial da estimativa: invert(estimate)∘candidate.

    Perto de gimbal lock o resultado continua válido; apenas sinalizado
    via ErrorVector.near_gimbal_lock e log de debug.

    Args:
        estimate: Pose estimada (Ô)
        candidate: Pose candidata a verdadeira

    Returns:
        ErrorVector correspondente
    """
    e = ErrorVector.from_pose(compose(invert(estimate), candidate))
    if e.near_gimbal_lock:
        logger.debug(f"Erro próximo do gimbal lock (pitch={float(e.r[1]):.6f} rad)")
    return e


def apply_error(estimate: Pose, e: ErrorVector) -> Pose:
    """Inversa de error_of no segundo argumento: estimate∘pose(e)."""
    return compose(estimate, e.to_pose())


def distance(a: ErrorVector, b: ErrorVector, lam: float = DEFAULT_LAMBDA) -> float:
    """
    Distância em SE(3) entre dois erros.

    ||a.t - b.t|| + lam * ângulo geodésico entre as rotações de a e b.

    Args:
        a: Primeiro erro
        b: Segundo erro
        lam: Peso em metros por radiano (> 0)

    Returns:
        Distância escalar

    Raises:
        ValueError: Se lam <= 0
    """
    if not lam > 0:
        raise ValueError(f"lambda deve ser positivo, recebido: {lam}")
    dt = float(np.linalg.norm(a.t - b.t))
    ra = Rotation.from_euler(EULER_SEQUENCE, a.r)
    rb = Rotation.from_euler(EULER_SEQUENCE, b.r)
    return dt + lam * float((ra.inv() * rb).magnitude())


def chart_distance(a: ErrorVector, b: ErrorVector, lam: float = DEFAULT_LAMBDA) -> float:
    """
    Métrica separável por eixo no mapa de Euler.

    ||a.t - b.t|| + lam * ||wrap(a.r - b.r)||. É a métrica sob a qual o
    arredondamento por eixo da grade é exatamente o vizinho mais próximo.
    """
    if not lam > 0:
        raise ValueError(f"lambda deve ser positivo, recebido: {lam}")
    dr = np.asarray(wrap_angle(a.r - b.r))
    return float(np.linalg.norm(a.t - b.t)) + lam * float(np.linalg.norm(dr))


# ============================================================================
# VERSÕES VETORIZADAS (lotes de partículas / células)
# ============================================================================

def error_vectors(estimate: Pose, rotations: Rotation, translations: np.ndarray) -> np.ndarray:
    """
    Versão em lote de error_of.

    Args:
        estimate: Pose estimada (Ô)
        rotations: Rotation do scipy com M rotações
        translations: Array (M, 3)

    Returns:
        Array (M, 6) com (tx, ty, tz, rx, ry, rz), ângulos em (-pi, pi]
    """
    r_inv = estimate.rot.inv()
    t_rel = r_inv.apply(np.asarray(translations, dtype=float) - estimate.translation)
    euler = _quiet_euler(r_inv * rotations)
    out = np.empty((len(t_rel), 6))
    out[:, :3] = t_rel
    out[:, 3:] = wrap_angle(euler)
    return out


def apply_errors(base: Pose, errors: np.ndarray) -> Tuple[Rotation, np.ndarray]:
    """
    Versão em lote de apply_error.

    Args:
        base: Pose base
        errors: Array (M, 6)

    Returns:
        Tuple[Rotation com M rotações, translações (M, 3)]
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    r_base = base.rot
    rotations = r_base * Rotation.from_euler(EULER_SEQUENCE, errors[:, 3:])
    translations = r_base.apply(errors[:, :3]) + base.translation
    return rotations, translations


def inverse_error_transforms(errors: np.ndarray) -> Tuple[Rotation, np.ndarray]:
    """
    Inversas das poses de erro em lote: invert(e.to_pose()) para cada linha.

    Returns:
        Tuple[Rotation inversas, translações (M, 3)]
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    r_inv = Rotation.from_euler(EULER_SEQUENCE, errors[:, 3:]).inv()
    return r_inv, -r_inv.apply(errors[:, :3])
