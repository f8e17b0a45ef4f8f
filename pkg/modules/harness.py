"""
Módulo Harness - Experimentos Monte-Carlo de decisão sob incerteza
Responsável por reproduzir o protocolo de vistas sequenciais: a cada vista
um estimador sintético gera partículas (ruído e ambiguidade dependentes da
oclusão), a política decide executar ou adiar, e a execução é avaliada
contra a pose verdadeira. Os registros viram a tabela de métricas
(tentativas, sucessos, falhas, média de vistas) por política e objeto.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from modules.acceptable_space import AcceptableErrorMap, GridMismatchError
from modules.config import ExperimentConfig, ObservationConfig, ScenarioConfig, ScheduleConfig
from modules.decision import DEFAULT_P_THRES, Decision, PolicyConfig, PolicyKind, decide
from modules.pose_distribution import ErrorDistribution, ParticleSet, bin, synth_multimodal, threshold
from modules.se3_core import Pose, error_of
from modules.task_evaluators import CODE_TO_OUTCOME, Outcome, TaskEvaluator

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

NOT_ATTEMPTED = "not_attempted"
ALL_SCENARIOS = "All"
REPORT_COLUMNS = ["task", "policy", "scenario", "trials", "attempts", "successes", "unstable", "failures", "avg_views"]
RECORD_COLUMNS = ["task", "policy", "scenario", "occlusion", "trial", "views_used", "attempted", "outcome"]

Seed = Union[int, Sequence[int]]


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class HarnessError(Exception):
    """Exceção base para erros do harness."""
    pass


class MissingMapError(HarnessError):
    """Cenário sem mapa de espaço aceitável."""
    pass


# ============================================================================
# VISTAS E MODELO DE OBSERVAÇÃO
# ============================================================================

@dataclass(frozen=True)
class ViewpointSpec:
    """
    Uma vista da sequência.

    Attributes:
        noise_scale: Multiplicador do ruído base do estimador
        occlusion_scale: Multiplicador do nível de oclusão do ensaio
        texture_visible: Características únicas do objeto visíveis
    """
    noise_scale: float = 1.0
    occlusion_scale: float = 1.0
    texture_visible: bool = False


@dataclass(frozen=True)
class ViewpointSchedule:
    viewpoints: Tuple[ViewpointSpec, ...]
    max_views: int

    def __post_init__(self):
        if not self.viewpoints:
            raise HarnessError("A sequência precisa de pelo menos uma vista")
        if not 1 <= self.max_views <= len(self.viewpoints):
            raise HarnessError(f"max_views deve estar em [1, {len(self.viewpoints)}], recebido: {self.max_views}")

    @classmethod
    def from_viewpoints(cls, viewpoints: Sequence[ViewpointSpec], max_views: Optional[int] = None) -> "ViewpointSchedule":
        viewpoints = tuple(viewpoints)
        return cls(viewpoints, max_views or len(viewpoints))

    @classmethod
    def approach(
        cls,
        steps: int,
        start_noise_scale: float,
        end_noise_scale: float,
        start_occlusion_scale: float = 1.0,
        end_occlusion_scale: float = 1.0,
        texture_visible_from: Optional[int] = None
    ) -> "ViewpointSchedule":
        """Aproximação em 'steps' passos com ruído proporcional à distância."""
        noise = np.linspace(start_noise_scale, end_noise_scale, steps)
        occlusion = np.linspace(start_occlusion_scale, end_occlusion_scale, steps)
        first_textured = steps if texture_visible_from is None else texture_visible_from
        views = tuple(
            ViewpointSpec(float(noise[i]), float(occlusion[i]), i >= first_textured)
            for i in range(steps)
        )
        return cls(views, steps)

    @classmethod
    def from_config(cls, cfg: ScheduleConfig) -> "ViewpointSchedule":
        if cfg.approach is not None:
            a = cfg.approach
            schedule = cls.approach(
                a.steps, a.start_noise_scale, a.end_noise_scale,
                a.start_occlusion_scale, a.end_occlusion_scale, a.texture_visible_from,
            )
            return cls(schedule.viewpoints, cfg.max_views or len(schedule.viewpoints))
        views = [ViewpointSpec(v.noise_scale, v.occlusion_scale, v.texture_visible) for v in cfg.viewpoints]
        return cls.from_viewpoints(views, cfg.max_views)


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """
    Estimador sintético de pose.

    O ruído cresce com a oclusão; modos de simetria ganham massa com a
    oclusão e podem dominar (modo errado) com probabilidade crescente.
    Vistas com textura visível colapsam os modos em objetos texturizados.
    """
    noise: np.ndarray
    modes: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    occlusion_noise_gain: float = 2.0
    symmetry_mass: float = 0.0
    symmetry_occlusion_gain: float = 0.0
    max_symmetry_mass: float = 0.95
    flip_probability: float = 0.0
    flip_occlusion_gain: float = 0.0
    textured: bool = True
    confidence_noise: float = 0.1
    particles: int = 400

    @classmethod
    def from_config(cls, cfg: ObservationConfig) -> "ObservationModel":
        return cls(
            noise=cfg.noise_si(),
            modes=cfg.modes_si(),
            occlusion_noise_gain=cfg.occlusion_noise_gain,
            symmetry_mass=cfg.symmetry_mass,
            symmetry_occlusion_gain=cfg.symmetry_occlusion_gain,
            max_symmetry_mass=cfg.max_symmetry_mass,
            flip_probability=cfg.flip_probability,
            flip_occlusion_gain=cfg.flip_occlusion_gain,
            textured=cfg.textured,
            confidence_noise=cfg.confidence_noise,
            particles=cfg.particles,
        )

    def observe(self, truth: Pose, view: ViewpointSpec, occlusion_level: float, seed: Seed) -> ParticleSet:
        """Gera o conjunto de partículas de uma vista (reprodutível pela semente)."""
        rng = np.random.default_rng(seed)
        occlusion = float(np.clip(occlusion_level * view.occlusion_scale, 0.0, 1.0))
        noise = np.asarray(self.noise) * view.noise_scale * (1.0 + self.occlusion_noise_gain * occlusion)

        k = len(self.modes)
        collapsed = k == 0 or (self.textured and view.texture_visible)
        alt_mass = 0.0 if collapsed else min(self.max_symmetry_mass, self.symmetry_mass + self.symmetry_occlusion_gain * occlusion)
        weights = np.concatenate([[1.0 - alt_mass], np.full(k, alt_mass / max(k, 1))])
        flip_p = 0.0 if collapsed else min(1.0, self.flip_probability + self.flip_occlusion_gain * occlusion)
        if rng.random() < flip_p:
            j = 1 + int(rng.integers(k))
            weights[0], weights[j] = weights[j], weights[0]

        confidence = float(np.clip(1.0 - occlusion + rng.normal(0.0, self.confidence_noise), 0.0, 1.0))
        modes = np.vstack([np.zeros((1, 6)), np.asarray(self.modes).reshape(-1, 6)])
        return synth_multimodal(
            truth, modes, weights, noise, self.particles,
            seed=int(rng.integers(2 ** 63 - 1)), visual_confidence=confidence,
        )


@dataclass(frozen=True, eq=False)
class ScenarioRuntime:
    """Cenário pronto para simulação: avaliador + modelo de observação + pose verdadeira."""
    name: str
    task: str
    evaluator: TaskEvaluator
    observation: ObservationModel
    truth: Pose = field(default_factory=Pose.identity)

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "ScenarioRuntime":
        return cls(cfg.name, cfg.task, cfg.build_evaluator(), ObservationModel.from_config(cfg.observation), cfg.truth)


# ============================================================================
# REGISTROS
# ============================================================================

@dataclass(frozen=True)
class TrialRecord:
    task: str
    policy: str
    scenario: str
    occlusion: float
    trial: int
    views_used: int
    attempted: bool
    outcome: str

    def __post_init__(self):
        if (self.outcome == NOT_ATTEMPTED) == self.attempted:
            raise HarnessError("outcome = not_attempted se e somente se attempted = False")


@dataclass(frozen=True)
class _Observation:
    particles: ParticleSet
    distribution: ErrorDistribution
    true_error: np.ndarray
    executable: bool


def _view_seed(seed: Seed, view: int) -> np.random.SeedSequence:
    base = [int(s) for s in np.atleast_1d(seed)]
    return np.random.SeedSequence(base + [view])


def run_trial(
    schedule: ViewpointSchedule,
    scenario: ScenarioRuntime,
    acc_map: AcceptableErrorMap,
    policy: PolicyConfig,
    truth: Optional[Pose] = None,
    seed: Seed = 0,
    occlusion: float = 0.0,
    p_thres: float = DEFAULT_P_THRES,
    renormalize: bool = False,
    trial: int = 0,
    cache: Optional[Dict[int, _Observation]] = None
) -> TrialRecord:
    """
    Executa um ensaio: percorre as vistas até a política decidir executar.

    A observação de cada vista depende só de (seed, índice da vista), então
    políticas diferentes com a mesma semente veem as mesmas partículas.
    'cache' permite compartilhar essas observações entre políticas.
    """
    truth = scenario.truth if truth is None else truth
    cache = {} if cache is None else cache
    evaluator = scenario.evaluator

    for v in range(schedule.max_views):
        obs = cache.get(v)
        if obs is None:
            ps = scenario.observation.observe(truth, schedule.viewpoints[v], occlusion, _view_seed(seed, v))
            d = threshold(bin(ps, acc_map.grid), p_thres, renormalize)
            true_error = error_of(ps.estimate, truth)
            obs = _Observation(ps, d, true_error.as_array(), evaluator.is_executable(true_error))
            cache[v] = obs

        if decide(policy, obs.particles, obs.distribution, acc_map, obs.executable) == Decision.EXECUTE:
            outcome = evaluator.evaluate_batch(obs.true_error[None, :])
            return TrialRecord(
                scenario.task, policy.kind.value, scenario.name, occlusion, trial,
                v + 1, True, CODE_TO_OUTCOME[int(outcome[0])].value,
            )

    return TrialRecord(
        scenario.task, policy.kind.value, scenario.name, occlusion, trial,
        schedule.max_views, False, NOT_ATTEMPTED,
    )


# ============================================================================
# RELATÓRIO
# ============================================================================

@dataclass(frozen=True, eq=False)
class ExperimentReport:
    """
    Tabela de métricas por (política, cenário) + linhas 'All' por política.

    Attributes:
        rows: DataFrame com REPORT_COLUMNS
        records: DataFrame com RECORD_COLUMNS (um registro por ensaio)
    """
    rows: pd.DataFrame
    records: pd.DataFrame

    @classmethod
    def empty(cls) -> "ExperimentReport":
        return cls(pd.DataFrame(columns=REPORT_COLUMNS), pd.DataFrame(columns=RECORD_COLUMNS))

    def row(self, policy: str, scenario: str = ALL_SCENARIOS) -> pd.Series:
        match = self.rows[(self.rows["policy"] == policy) & (self.rows["scenario"] == scenario)]
        if match.empty:
            raise KeyError(f"Linha ({policy}, {scenario}) não encontrada")
        return match.iloc[0]


def _aggregate(df: pd.DataFrame) -> pd.DataFrame:
    flags = df.assign(
        attempted=df["attempted"].astype(int),
        successes=df["outcome"].isin([Outcome.SUCCESS.value, Outcome.SUCCESS_UNSTABLE.value]).astype(int),
        unstable=(df["outcome"] == Outcome.SUCCESS_UNSTABLE.value).astype(int),
        failures=(df["outcome"] == Outcome.FAILURE.value).astype(int),
    )
    grouped = flags.groupby(["task", "policy", "scenario"], sort=False)
    return grouped.agg(
        trials=("trial", "size"),
        attempts=("attempted", "sum"),
        successes=("successes", "sum"),
        unstable=("unstable", "sum"),
        failures=("failures", "sum"),
        avg_views=("views_used", "mean"),
    ).reset_index()


def summarize(
    records: Sequence[TrialRecord],
    policy_order: Optional[Sequence[str]] = None,
    scenario_order: Optional[Sequence[str]] = None
) -> ExperimentReport:
    """Agrega os registros na tabela de métricas (ordem fixa por configuração)."""
    if not records:
        return ExperimentReport.empty()
    df = pd.DataFrame([asdict(r) for r in records], columns=RECORD_COLUMNS)
    policy_order = list(policy_order or dict.fromkeys(df["policy"]))
    scenario_order = list(scenario_order or dict.fromkeys(df["scenario"]))

    per_scenario = _aggregate(df)
    overall = _aggregate(df.assign(scenario=ALL_SCENARIOS))
    rows = pd.concat([per_scenario, overall], ignore_index=True)
    rows["policy"] = pd.Categorical(rows["policy"], categories=policy_order, ordered=True)
    rows["scenario"] = pd.Categorical(rows["scenario"], categories=scenario_order + [ALL_SCENARIOS], ordered=True)
    rows = rows.sort_values(["policy", "scenario"]).reset_index(drop=True)
    rows["policy"] = rows["policy"].astype(str)
    rows["scenario"] = rows["scenario"].astype(str)
    for col in ["trials", "attempts", "successes", "unstable", "failures"]:
        rows[col] = rows[col].astype(int)
    rows["avg_views"] = rows["avg_views"].astype(float)
    return ExperimentReport(rows[REPORT_COLUMNS], df)


# ============================================================================
# EXPERIMENTO
# ============================================================================

def _run_cell(
    schedule: ViewpointSchedule,
    scenario: ScenarioRuntime,
    acc_map: AcceptableErrorMap,
    policies: Sequence[PolicyConfig],
    seed_prefix: Tuple[int, ...],
    occlusion: float,
    trials: int,
    p_thres: float,
    renormalize: bool
) -> List[TrialRecord]:
    """Todos os ensaios de um (cenário, nível de oclusão), para todas as políticas."""
    records = []
    for t in range(trials):
        cache: Dict[int, _Observation] = {}
        for policy in policies:
            records.append(run_trial(
                schedule, scenario, acc_map, policy,
                seed=seed_prefix + (t,), occlusion=occlusion,
                p_thres=p_thres, renormalize=renormalize, trial=t, cache=cache,
            ))
    return records


def run_experiment(
    config: ExperimentConfig,
    trials_per_cell: Optional[int] = None,
    seed: Optional[int] = None,
    maps: Optional[Dict[str, AcceptableErrorMap]] = None,
    policies: Optional[Sequence[Union[str, PolicyKind]]] = None,
    workers: int = 1,
    runtimes: Optional[Dict[str, ScenarioRuntime]] = None
) -> ExperimentReport:
    """
    Executa a matriz política × cenário × nível de oclusão.

    Args:
        config: Configuração do experimento
        trials_per_cell: Sobrescreve o número de ensaios de cada nível
        seed: Sobrescreve a semente do experimento
        maps: Mapa de espaço aceitável por nome de cenário
        policies: Subconjunto de políticas
        workers: Processos para executar as células em paralelo
        runtimes: Cenários já construídos (evita reconstruir avaliadores)

    Returns:
        ExperimentReport determinístico para a mesma semente

    Raises:
        MissingMapError: Cenário sem mapa
        GridMismatchError: Mapa com grade diferente da configurada
    """
    if trials_per_cell is not None and trials_per_cell < 1:
        raise HarnessError(f"trials_per_cell deve ser >= 1, recebido: {trials_per_cell}")
    maps = maps or {}
    seed = config.seed if seed is None else int(seed)
    schedule = ViewpointSchedule.from_config(config.schedule)
    policy_configs = config.policy.to_policy_configs(policies)
    grid = config.grid.to_grid()

    jobs = []
    for si, scenario_cfg in enumerate(config.scenarios):
        if scenario_cfg.name not in maps:
            raise MissingMapError(f"Mapa ausente para o cenário '{scenario_cfg.name}'")
        acc_map = maps[scenario_cfg.name]
        if acc_map.grid != grid:
            raise GridMismatchError(f"Mapa do cenário '{scenario_cfg.name}' foi construído com outra grade")
        runtime = (runtimes or {}).get(scenario_cfg.name) or ScenarioRuntime.from_config(scenario_cfg)
        for li, level in enumerate(config.levels):
            trials = trials_per_cell or level.trials
            jobs.append((
                schedule, runtime, acc_map, policy_configs, (seed, si, li),
                level.occlusion, trials, config.p_thres, config.renormalize,
            ))

    started = time.perf_counter()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, *job) for job in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_run_cell(*job) for job in jobs]
    records = [r for cell in results for r in cell]

    report = summarize(
        records,
        policy_order=[p.kind.value for p in policy_configs],
        scenario_order=[s.name for s in config.scenarios],
    )
    logger.info(
        "experiment_completed",
        extra={
            "experiment": config.name,
            "trials": len(records),
            "seed": seed,
            "duration_ms": (time.perf_counter() - started) * 1000,
        }
    )
    return report
