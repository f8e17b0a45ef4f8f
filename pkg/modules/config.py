"""
Módulo Config - Configuração de cenários e experimentos
Responsável por ler os arquivos TOML (metros e graus), aplicar overrides
'chave.caminho=valor' e validar tudo com pydantic antes de construir grades,
avaliadores e políticas (conversão para radianos acontece aqui, uma vez).
"""
import logging
import os
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from modules.decision import (
    DEFAULT_GU_ALPHA,
    DEFAULT_OURS_THRESHOLD,
    DEFAULT_P_THRES,
    DEFAULT_VC_THRESHOLD,
    PolicyConfig,
    PolicyKind,
)
from modules.error_grid import DEFAULT_MAX_CELLS, ErrorGrid, build
from modules.se3_core import Pose
from modules.task_evaluators import (
    GraspEvaluator,
    GraspScenario,
    IkEvaluator,
    IkScenario,
    Rect,
    TaskEvaluator,
    make_section,
)

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

Vec3 = Tuple[float, float, float]
Vec4 = Tuple[float, float, float, float]
Vec6 = Tuple[float, float, float, float, float, float]


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class ConfigError(Exception):
    """Arquivo de configuração inválido (TOML ou validação)."""
    pass


# ============================================================================
# MODELOS
# ============================================================================

class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Model):
    """Limites e passos da grade (metros e graus)."""
    translation_limit: Vec3 = (0.05, 0.05, 0.05)
    translation_step: Vec3 = (0.01, 0.01, 0.01)
    rotation_limit_deg: Vec3 = (60.0, 60.0, 60.0)
    rotation_step_deg: Vec3 = (15.0, 15.0, 15.0)
    max_cells: int = Field(default=DEFAULT_MAX_CELLS, gt=0)

    def to_grid(self) -> ErrorGrid:
        limits = list(self.translation_limit) + [float(np.radians(v)) for v in self.rotation_limit_deg]
        steps = list(self.translation_step) + [float(np.radians(v)) for v in self.rotation_step_deg]
        return build(limits, steps, self.max_cells)


class IkScenarioConfig(_Model):
    base_translation: Vec3 = (-0.75, 0.0, 0.0)
    base_yaw_deg: float = 0.0
    reach_min: float = 0.55
    reach_max: float = 0.95
    heading_half_angle_deg: float = 25.0
    obstacles: List[Vec4] = [(-0.4, -0.3, 0.4, 0.3)]
    base_footprint: Vec4 = (-0.25, -0.25, 0.25, 0.25)

    def to_scenario(self) -> IkScenario:
        return IkScenario(
            base_pose=Pose.from_euler(self.base_translation, [0.0, 0.0, np.radians(self.base_yaw_deg)]),
            reach_min=self.reach_min,
            reach_max=self.reach_max,
            heading_half_angle=float(np.radians(self.heading_half_angle_deg)),
            obstacles=tuple(Rect(*o) for o in self.obstacles),
            base_footprint=Rect(*self.base_footprint),
        )


class SectionConfig(_Model):
    kind: Literal["box", "cylinder", "annulus", "mug"]
    w: Optional[float] = None
    d: Optional[float] = None
    h: Optional[float] = None
    radius: Optional[float] = None
    r_in: Optional[float] = None
    r_out: Optional[float] = None
    handle_width: Optional[float] = None
    handle_extent: Optional[float] = None

    def to_section(self):
        return make_section(self.kind, **self.model_dump(exclude_none=True, exclude={"kind"}))


class GraspScenarioConfig(_Model):
    section: SectionConfig
    grasp_translation: Vec3
    grasp_rotation_deg: Vec3 = (180.0, 0.0, 90.0)
    opening_width: float = 0.085
    finger_length: float = 0.04
    finger_thickness: float = 0.01
    palm_depth: float = 0.02
    friction_half_angle_deg: float = 20.0
    stability_offset_max: float = 0.015

    def to_scenario(self) -> GraspScenario:
        return GraspScenario(
            grasp_pose=Pose.from_euler(self.grasp_translation, np.radians(self.grasp_rotation_deg)),
            section=self.section.to_section(),
            opening_width=self.opening_width,
            finger_length=self.finger_length,
            finger_thickness=self.finger_thickness,
            palm_depth=self.palm_depth,
            friction_half_angle=float(np.radians(self.friction_half_angle_deg)),
            stability_offset_max=self.stability_offset_max,
        )


class ObservationConfig(_Model):
    """
    Modelo sintético de observação (metros e graus).

    noise é o desvio padrão por eixo sem oclusão; cresce com
    (1 + occlusion_noise_gain * oclusão). A massa dos modos de simetria e a
    chance de o modo errado dominar também crescem com a oclusão; vistas com
    textura visível colapsam os modos quando o objeto é texturizado.
    """
    noise: Vec6 = (0.004, 0.004, 0.002, 2.0, 2.0, 3.0)
    occlusion_noise_gain: float = Field(default=2.0, ge=0)
    symmetry_yaw_order: int = Field(default=1, ge=1)
    symmetry_modes: List[Vec6] = []
    symmetry_mass: float = Field(default=0.0, ge=0, le=1)
    symmetry_occlusion_gain: float = Field(default=0.0, ge=0)
    max_symmetry_mass: float = Field(default=0.95, ge=0, le=1)
    flip_probability: float = Field(default=0.0, ge=0, le=1)
    flip_occlusion_gain: float = Field(default=0.0, ge=0)
    textured: bool = True
    confidence_noise: float = Field(default=0.1, ge=0)
    particles: int = Field(default=400, ge=1)

    @field_validator("noise")
    @classmethod
    def _non_negative(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("noise deve ser >= 0 em todos os eixos")
        return v

    def noise_si(self) -> np.ndarray:
        n = np.asarray(self.noise, dtype=float)
        n[3:] = np.radians(n[3:])
        return n

    def modes_si(self) -> np.ndarray:
        """Modos alternativos (K, 6) em metros/radianos, sem o modo identidade."""
        modes = []
        for k in range(1, self.symmetry_yaw_order):
            modes.append([0.0, 0.0, 0.0, 0.0, 0.0, 2.0 * np.pi * k / self.symmetry_yaw_order])
        for m in self.symmetry_modes:
            m = np.asarray(m, dtype=float)
            m[3:] = np.radians(m[3:])
            modes.append(list(m))
        return np.asarray(modes, dtype=float).reshape(-1, 6)


class ScenarioConfig(_Model):
    name: str
    task: Literal["ik", "grasp"]
    ik: Optional[IkScenarioConfig] = None
    grasp: Optional[GraspScenarioConfig] = None
    observation: ObservationConfig = ObservationConfig()
    truth_translation: Vec3 = (0.0, 0.0, 0.0)
    truth_rotation_deg: Vec3 = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def _task_section(self):
        if self.task == "grasp" and self.grasp is None:
            raise ValueError(f"Cenário '{self.name}' de grasp exige a tabela [grasp]")
        if self.task == "ik" and self.grasp is not None:
            raise ValueError(f"Cenário '{self.name}' de IK não aceita a tabela [grasp]")
        if self.task == "grasp" and self.ik is not None:
            raise ValueError(f"Cenário '{self.name}' de grasp não aceita a tabela [ik]")
        return self

    @property
    def truth(self) -> Pose:
        return Pose.from_euler(self.truth_translation, np.radians(self.truth_rotation_deg))

    def build_evaluator(self, check_nominal: bool = True) -> TaskEvaluator:
        """
        Constrói o avaliador e, por padrão, valida a pose nominal.

        Raises:
            ScenarioValidationError: Parâmetros inválidos ou nominal que falha
        """
        if self.task == "ik":
            evaluator = IkEvaluator((self.ik or IkScenarioConfig()).to_scenario())
        else:
            evaluator = GraspEvaluator(self.grasp.to_scenario())
        if check_nominal:
            evaluator.check_nominal()
        return evaluator


class ViewpointConfig(_Model):
    noise_scale: float = Field(default=1.0, ge=0)
    occlusion_scale: float = Field(default=1.0, ge=0)
    texture_visible: bool = False


class ApproachConfig(_Model):
    """Sequência de aproximação (tarefa de IK): ruído e oclusão caem linearmente."""
    steps: int = Field(default=60, ge=1)
    start_noise_scale: float = Field(default=3.0, ge=0)
    end_noise_scale: float = Field(default=0.5, ge=0)
    start_occlusion_scale: float = Field(default=1.0, ge=0)
    end_occlusion_scale: float = Field(default=0.2, ge=0)
    texture_visible_from: int = Field(default=40, ge=0)


class ScheduleConfig(_Model):
    viewpoints: List[ViewpointConfig] = []
    approach: Optional[ApproachConfig] = None
    max_views: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_source(self):
        if bool(self.viewpoints) == (self.approach is not None):
            raise ValueError("Informe exatamente um entre 'viewpoints' e 'approach'")
        return self


class OcclusionLevelConfig(_Model):
    occlusion: float = Field(ge=0, le=1)
    trials: int = Field(ge=1)


class PolicySettings(_Model):
    policies: List[PolicyKind] = list(PolicyKind)
    ours_threshold: float = Field(default=DEFAULT_OURS_THRESHOLD, ge=0, le=1)
    vc_threshold: float = Field(default=DEFAULT_VC_THRESHOLD, ge=0, le=1)
    gu_alpha: float = Field(default=DEFAULT_GU_ALPHA, gt=0, lt=1)

    def to_policy_configs(self, only: Optional[Sequence[Union[str, PolicyKind]]] = None) -> List[PolicyConfig]:
        kinds = [PolicyKind(k) for k in only] if only else list(self.policies)
        return [
            PolicyConfig(k, self.vc_threshold, self.gu_alpha, self.ours_threshold)
            for k in kinds
        ]


DEFAULT_LEVELS = [
    OcclusionLevelConfig(occlusion=0.0, trials=4),
    OcclusionLevelConfig(occlusion=0.3, trials=8),
    OcclusionLevelConfig(occlusion=0.5, trials=8),
]


class ExperimentConfig(_Model):
    name: str
    task: Literal["ik", "grasp"]
    seed: int = 0
    p_thres: float = Field(default=DEFAULT_P_THRES, ge=0)
    renormalize: bool = False
    maps_dir: str = "maps"
    grid: GridConfig = GridConfig()
    schedule: ScheduleConfig
    levels: List[OcclusionLevelConfig] = DEFAULT_LEVELS
    policy: PolicySettings = PolicySettings()
    scenarios: List[ScenarioConfig] = Field(min_length=1)

    @model_validator(mode="after")
    def _consistent(self):
        names = [s.name for s in self.scenarios]
        if len(set(names)) != len(names):
            raise ValueError(f"Nomes de cenário repetidos: {names}")
        wrong = [s.name for s in self.scenarios if s.task != self.task]
        if wrong:
            raise ValueError(f"Cenários com tarefa diferente de '{self.task}': {wrong}")
        if not self.levels:
            raise ValueError("Pelo menos um nível de oclusão é necessário")
        return self

    def scenario(self, name: str) -> ScenarioConfig:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise ConfigError(f"Cenário '{name}' não encontrado. Disponíveis: {[s.name for s in self.scenarios]}")

    def map_path(self, scenario_name: str, maps_dir: Optional[str] = None) -> str:
        return os.path.join(maps_dir or self.maps_dir, f"{self.name}_{scenario_name}.pgam")


class ScenarioFile(_Model):
    """Arquivo de cenário único: tabela [scenario] + [grid] opcional."""
    scenario: ScenarioConfig
    grid: GridConfig = GridConfig()


# ============================================================================
# LEITURA E OVERRIDES
# ============================================================================

def _parse_value(text: str) -> Any:
    try:
        return toml.loads(f"value = {text}")["value"]
    except toml.TomlDecodeError:
        return text


def apply_overrides(raw: Dict, overrides: Optional[Sequence[str]]) -> Dict:
    """
    Aplica overrides 'a.b.c=valor' ao dicionário TOML.

    Segmentos numéricos indexam listas (ex.: 'scenarios.0.name=x').
    Valores são interpretados como literais TOML, senão como texto.
    """
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"Override inválido (esperado chave=valor): {item}")
        key, text = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"Override sem chave: {item}")
        node: Any = raw
        try:
            for part in parts[:-1]:
                if isinstance(node, list):
                    node = node[int(part)]
                else:
                    node = node.setdefault(part, {})
            last = parts[-1]
            if isinstance(node, list):
                node[int(last)] = _parse_value(text.strip())
            else:
                node[last] = _parse_value(text.strip())
        except (ValueError, IndexError, TypeError, AttributeError) as e:
            raise ConfigError(f"Override '{item}' não se aplica à configuração: {e}") from e
    return raw


def load_raw(path: Union[str, os.PathLike], overrides: Optional[Sequence[str]] = None) -> Dict:
    """
    Lê o TOML e aplica os overrides.

    Raises:
        OSError: Arquivo inexistente
        ConfigError: TOML inválido ou override inaplicável
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"{path}: TOML inválido: {e}") from e
    return apply_overrides(raw, overrides)


def _validate(model, raw: Dict, path):
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: configuração inválida:\n{e}") from e


def load_config(path: Union[str, os.PathLike], overrides: Optional[Sequence[str]] = None) -> ExperimentConfig:
    """Lê e valida uma configuração de experimento."""
    raw = load_raw(path, overrides)
    config = _validate(ExperimentConfig, raw, path)
    logger.info(
        "config_loaded",
        extra={"path": str(path), "experiment": config.name, "scenarios": len(config.scenarios)}
    )
    return config


def load_scenario(
    path: Union[str, os.PathLike],
    name: Optional[str] = None,
    overrides: Optional[Sequence[str]] = None
) -> Tuple[ScenarioConfig, GridConfig]:
    """
    Lê um cenário e a grade associada.

    Aceita um arquivo com [scenario] ou um arquivo de experimento com
    [[scenarios]] (nesse caso 'name' escolhe o cenário quando há mais de um).
    """
    raw = load_raw(path, overrides)
    if "scenario" in raw:
        parsed = _validate(ScenarioFile, raw, path)
        if name is not None and parsed.scenario.name != name:
            raise ConfigError(f"{path}: cenário '{name}' não encontrado (arquivo define '{parsed.scenario.name}')")
        return parsed.scenario, parsed.grid
    config = _validate(ExperimentConfig, raw, path)
    if name is None:
        if len(config.scenarios) > 1:
            raise ConfigError(
                f"{path}: informe o cenário (--scenario). Disponíveis: {[s.name for s in config.scenarios]}"
            )
        return config.scenarios[0], config.grid
    return config.scenario(name), config.grid
