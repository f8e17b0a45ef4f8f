"""
Módulo Decision - Probabilidade de sucesso e políticas de execução
Responsável por:
    - success_probability: integra o espaço aceitável sobre a distribuição de erro
    - hz_normality: teste de normalidade multivariada de Henze-Zirkler
    - decide: políticas BE, VC, GU e OURS (executar ou adiar)
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import pdist
from scipy.stats import lognorm

from modules.acceptable_space import AcceptableErrorMap, GridMismatchError
from modules.pose_distribution import ErrorDistribution, ParticleSet

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

DEFAULT_OURS_THRESHOLD = 0.6
DEFAULT_VC_THRESHOLD = 0.5
DEFAULT_GU_ALPHA = 0.05
DEFAULT_P_THRES = 1e-4
REGULARIZATION = 1e-12
CONDITION_LIMIT = 1e12
DEFAULT_NULL_REPS = 1000
# Folga da comparação estrita P > limiar (soma de massas em ponto flutuante)
PROBABILITY_TOLERANCE = 1e-12


# ============================================================================
# EXCEÇÕES CUSTOMIZADAS
# ============================================================================

class DecisionError(Exception):
    """Exceção base para erros de decisão."""
    pass


class InsufficientSamplesError(DecisionError):
    """Amostras insuficientes para o teste de normalidade (n <= d + 1)."""
    pass


# ============================================================================
# ENUMS E TIPOS
# ============================================================================

class PolicyKind(str, Enum):
    """Políticas de decisão."""
    BE = "be"       # Blind Execution
    VC = "vc"       # Visual Confidence
    GU = "gu"       # Gaussian Uncertainty
    OURS = "ours"   # Probabilidade de sucesso integrada


class Decision(str, Enum):
    EXECUTE = "execute"
    DEFER = "defer"


@dataclass(frozen=True)
class PolicyConfig:
    """
    Configuração de uma política.

    Attributes:
        kind: Tipo de política
        vc_threshold: Limiar de confiança visual (VC)
        gu_alpha: Nível de significância do teste de normalidade (GU)
        ours_threshold: Limiar da probabilidade de sucesso (OURS)
    """
    kind: PolicyKind
    vc_threshold: float = DEFAULT_VC_THRESHOLD
    gu_alpha: float = DEFAULT_GU_ALPHA
    ours_threshold: float = DEFAULT_OURS_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if not 0.0 <= self.vc_threshold <= 1.0:
            raise DecisionError(f"vc_threshold deve estar em [0, 1], recebido: {self.vc_threshold}")
        if not 0.0 < self.gu_alpha < 1.0:
            raise DecisionError(f"gu_alpha deve estar em (0, 1), recebido: {self.gu_alpha}")
        if not 0.0 <= self.ours_threshold <= 1.0:
            raise DecisionError(f"ours_threshold deve estar em [0, 1], recebido: {self.ours_threshold}")


@dataclass(frozen=True)
class SuccessEstimate:
    """
    Probabilidade de sucesso da tarefa dada a estimativa.

    probability + unacceptable_mass + discarded_mass = 1 (a menos de arredondamento).
    """
    probability: float
    support_size: int
    discarded_mass: float
    unacceptable_mass: float = 0.0
    unstable_probability: float = 0.0

    def to_dict(self) -> dict:
        return {
            "probability": self.probability,
            "support_size": self.support_size,
            "discarded_mass": self.discarded_mass,
            "unacceptable_mass": self.unacceptable_mass,
            "unstable_probability": self.unstable_probability,
        }


@dataclass(frozen=True)
class HzResult:
    """Resultado do teste de Henze-Zirkler."""
    statistic: float
    p_value: float
    rejected: bool
    degenerate: bool = False


# ============================================================================
# PROBABILIDADE DE SUCESSO
# ============================================================================

def success_probability(d: ErrorDistribution, acc_map: AcceptableErrorMap) -> SuccessEstimate:
    """
    Soma a massa das células do suporte que pertencem ao espaço aceitável.

    Raises:
        GridMismatchError: Distribuição e mapa com grades diferentes
    """
    if d.grid != acc_map.grid:
        raise GridMismatchError(
            f"Grade da distribuição ({d.grid.counts}) difere da grade do mapa ({acc_map.grid.counts})"
        )
    accepted = acc_map.accept[d.cells]
    unstable = acc_map.unstable[d.cells]
    probability = float(d.masses[accepted].sum())
    return SuccessEstimate(
        probability=min(max(probability, 0.0), 1.0),
        support_size=d.support_size,
        discarded_mass=d.discarded_mass,
        unacceptable_mass=float(d.masses[~accepted].sum()),
        unstable_probability=float(d.masses[unstable].sum()),
    )


# ============================================================================
# TESTE DE HENZE-ZIRKLER
# ============================================================================

def _hz_beta(n: int, d: int) -> float:
    return (1.0 / np.sqrt(2.0)) * ((n * (2.0 * d + 1.0)) / 4.0) ** (1.0 / (d + 4.0))


def _hz_statistic(x: np.ndarray) -> Optional[float]:
    """Estatística HZ; None se a covariância é degenerada mesmo após regularização."""
    n, d = x.shape
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / n
    trace = float(np.trace(cov))
    if not np.isfinite(trace) or trace <= 0.0:
        return None
    if np.linalg.cond(cov) > CONDITION_LIMIT:
        cov = cov + REGULARIZATION * trace * np.eye(d)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None
    white = solve_triangular(chol, centered.T, lower=True).T

    beta2 = _hz_beta(n, d) ** 2
    d_j = np.einsum("ij,ij->i", white, white)
    d_jk = pdist(white, "sqeuclidean")
    pair_sum = 2.0 * np.exp(-0.5 * beta2 * d_jk).sum() + n
    return float(
        pair_sum / n
        - 2.0 * (1.0 + beta2) ** (-d / 2.0) * np.exp(-beta2 / (2.0 * (1.0 + beta2)) * d_j).sum()
        + n * (1.0 + 2.0 * beta2) ** (-d / 2.0)
    )


def _hz_lognormal_pvalue(hz: float, n: int, d: int) -> float:
    b2 = _hz_beta(n, d) ** 2
    b4, b8 = b2 ** 2, b2 ** 4
    a = 1.0 + 2.0 * b2
    wb = (1.0 + b2) * (1.0 + 3.0 * b2)
    mu = 1.0 - a ** (-d / 2.0) * (1.0 + d * b2 / a + d * (d + 2.0) * b4 / (2.0 * a ** 2))
    si2 = (
        2.0 * (1.0 + 4.0 * b2) ** (-d / 2.0)
        + 2.0 * a ** (-d) * (1.0 + 2.0 * d * b4 / a ** 2 + 3.0 * d * (d + 2.0) * b8 / (4.0 * a ** 4))
        - 4.0 * wb ** (-d / 2.0) * (1.0 + 3.0 * d * b4 / (2.0 * wb) + d * (d + 2.0) * b8 / (2.0 * wb ** 2))
    )
    pmu = np.log(np.sqrt(mu ** 4 / (si2 + mu ** 2)))
    psi = np.sqrt(np.log1p(si2 / mu ** 2))
    return float(lognorm.sf(hz, psi, scale=np.exp(pmu)))


def simulate_hz_null(
    n: int,
    d: int,
    reps: int = DEFAULT_NULL_REPS,
    seed: Union[int, Sequence[int], None] = 0
) -> np.ndarray:
    """
    Distribuição nula exata (Monte-Carlo) da estatística HZ para amostras gaussianas.

    Returns:
        Array (reps,) ordenado
    """
    if n <= d + 1:
        raise InsufficientSamplesError(f"n={n} amostras insuficientes para d={d}")
    rng = np.random.default_rng(seed)
    stats = [_hz_statistic(rng.standard_normal((n, d))) for _ in range(reps)]
    return np.sort(np.array([s for s in stats if s is not None]))


def hz_normality(
    samples: np.ndarray,
    alpha: float = DEFAULT_GU_ALPHA,
    null: str = "lognormal",
    null_reps: int = DEFAULT_NULL_REPS,
    seed: Union[int, Sequence[int], None] = 0
) -> HzResult:
    """
    Teste de Henze-Zirkler de normalidade multivariada.

    Args:
        samples: Array (n, d)
        alpha: Nível de significância
        null: 'lognormal' (aproximação padrão) ou 'simulated' (Monte-Carlo exato)
        null_reps, seed: Parâmetros da nula simulada

    Returns:
        HzResult; covariância degenerada resulta em rejeição com degenerate=True

    Raises:
        InsufficientSamplesError: n <= d + 1
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise DecisionError(f"samples deve ser (n, d), recebido: {x.shape}")
    n, d = x.shape
    if n <= d + 1:
        raise InsufficientSamplesError(f"Teste HZ exige n > d + 1 (n={n}, d={d})")
    if not 0.0 < alpha < 1.0:
        raise DecisionError(f"alpha deve estar em (0, 1), recebido: {alpha}")

    hz = _hz_statistic(x)
    if hz is None:
        logger.debug("hz_covariance_degenerate", extra={"samples": n, "dims": d})
        return HzResult(float("inf"), 0.0, True, degenerate=True)

    if null == "lognormal":
        p_value = _hz_lognormal_pvalue(hz, n, d)
    elif null == "simulated":
        reference = simulate_hz_null(n, d, null_reps, seed)
        p_value = float((1 + np.count_nonzero(reference >= hz)) / (len(reference) + 1))
    else:
        raise DecisionError(f"Nula desconhecida: {null}. Use 'lognormal' ou 'simulated'")
    return HzResult(hz, p_value, p_value < alpha)


def systematic_resample(weights: np.ndarray) -> np.ndarray:
    """Índices de reamostragem sistemática (determinística, sem RNG)."""
    weights = np.asarray(weights, dtype=float)
    n = len(weights)
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    positions = (np.arange(n) + 0.5) / n
    return np.minimum(np.searchsorted(cumulative, positions), n - 1)


def gu_samples(ps: ParticleSet, axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Erros das partículas relativos a Ô, reamostrados pelos pesos, nos eixos dados."""
    errors = ps.errors()[systematic_resample(ps.weights)]
    if axes is not None:
        errors = errors[:, list(axes)]
    return errors


# ============================================================================
# POLÍTICAS
# ============================================================================

def decide(
    policy: PolicyConfig,
    ps: ParticleSet,
    d: ErrorDistribution,
    acc_map: AcceptableErrorMap,
    executable: bool = True
) -> Decision:
    """
    Decide entre executar a tarefa agora ou adiar para a próxima observação.

    Todas as políticas adiam quando a ação não é executável. Limiares
    usam desigualdade estrita (executa somente se exceder).
    """
    if not executable:
        return Decision.DEFER

    if policy.kind == PolicyKind.BE:
        go = True
    elif policy.kind == PolicyKind.VC:
        go = ps.visual_confidence > policy.vc_threshold
    elif policy.kind == PolicyKind.GU:
        samples = gu_samples(ps, acc_map.grid.active_axes)
        if samples.shape[1] == 0:
            go = True
        else:
            try:
                go = not hz_normality(samples, policy.gu_alpha).rejected
            except InsufficientSamplesError:
                go = False
    elif policy.kind == PolicyKind.OURS:
        go = success_probability(d, acc_map).probability > policy.ours_threshold + PROBABILITY_TOLERANCE
    else:
        raise DecisionError(f"Política desconhecida: {policy.kind}")

    return Decision.EXECUTE if go else Decision.DEFER
