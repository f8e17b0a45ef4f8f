"""
Módulo CLI - Linha de comando
Subcomandos:
    precompute  Pré-calcula o espaço aceitável de um cenário (.pgam)
    evaluate    Probabilidade de sucesso e decisões para um arquivo .particles
    simulate    Executa o experimento Monte-Carlo e grava o relatório
    report      Re-renderiza um relatório CSV (markdown, csv, plot-data, pdf, png)

Uso:
    python -m modules.cli precompute --config configs/grasp_experiment.toml --scenario bowl
"""
import argparse
import json
import logging
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

from modules import acceptable_space
from modules.acceptable_space import GridMismatchError, MapFormatError, NominalFailureError
from modules.config import ConfigError, load_config, load_scenario
from modules.decision import (
    DEFAULT_GU_ALPHA, DEFAULT_OURS_THRESHOLD, DEFAULT_P_THRES, DEFAULT_VC_THRESHOLD,
    DecisionError, PolicyConfig, PolicyKind, decide, success_probability,
)
from modules.error_grid import GridError
from modules.harness import HarnessError, MissingMapError, ScenarioRuntime, run_experiment
from modules.pose_distribution import ParticleFileError, bin, load_particles, threshold
from modules.report_generator import (
    TEXT_FORMATS, ReportFormatError, generate_pdf_report, parse_report_csv, plot_report, render_report,
)
from modules.task_evaluators import ScenarioValidationError

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOMINAL = 3
EXIT_IO = 4
EXIT_GRID_MISMATCH = 5


def _policies(text: Optional[str]) -> Optional[List[PolicyKind]]:
    if not text:
        return None
    try:
        return [PolicyKind(p.strip().lower()) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise DecisionError(f"Política inválida em '{text}'. Use {[k.value for k in PolicyKind]}") from e


def _write(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Saída gravada em {output}")
    else:
        sys.stdout.write(text)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _require_nominal(evaluator, name: str) -> None:
    """Converte falha da pose nominal em NominalFailureError."""
    try:
        evaluator.check_nominal()
    except ScenarioValidationError as e:
        raise NominalFailureError(f"Cenário '{name}': {e}") from e


# ============================================================================
# SUBCOMANDOS
# ============================================================================

def cmd_precompute(args) -> int:
    scenario, grid_cfg = load_scenario(args.config, args.scenario, args.set)
    grid = grid_cfg.to_grid()
    evaluator = scenario.build_evaluator(check_nominal=False)
    output = args.output or f"{scenario.name}.pgam"

    started = time.perf_counter()
    acc_map = acceptable_space.precompute(grid, evaluator, workers=args.workers)
    elapsed = time.perf_counter() - started
    _ensure_parent(output)
    acceptable_space.save(acc_map, output)

    print(f"cells: {grid.size}")
    print(f"acceptable_fraction: {acc_map.acceptable_fraction:.6f}")
    print(f"wall_time_s: {elapsed:.3f}")
    print(f"output: {output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    expected_hash = None
    grid = None
    if args.config:
        scenario, grid_cfg = load_scenario(args.config, args.scenario, args.set)
        grid = grid_cfg.to_grid()
        expected_hash = scenario.build_evaluator(check_nominal=False).scenario_hash()

    acc_map = acceptable_space.load(args.map, expected_scenario_hash=expected_hash)
    if grid is not None and grid != acc_map.grid:
        raise GridMismatchError(f"Grade do mapa {acc_map.grid.counts} difere da configurada {grid.counts}")

    ps = load_particles(args.particles)
    d = threshold(bin(ps, acc_map.grid), args.p_thres, args.renormalize)
    estimate = success_probability(d, acc_map)

    kinds = _policies(args.policies) or [PolicyKind.OURS]
    decisions = {}
    for kind in kinds:
        policy = PolicyConfig(kind, args.vc_threshold, args.gu_alpha, args.ours_threshold)
        decisions[kind.value] = decide(policy, ps, d, acc_map, executable=not args.not_executable).value

    if args.json:
        print(json.dumps({**estimate.to_dict(), "decisions": decisions}, indent=2))
    else:
        print(f"probability: {estimate.probability:.6f}")
        print(f"support_size: {estimate.support_size}")
        print(f"discarded_mass: {estimate.discarded_mass:.6f}")
        print(f"unstable_probability: {estimate.unstable_probability:.6f}")
        for name, decision in decisions.items():
            print(f"{name}: {decision}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config, args.set)
    maps_dir = args.maps_dir or config.maps_dir
    grid = config.grid.to_grid()

    maps: Dict = {}
    runtimes: Dict[str, ScenarioRuntime] = {}
    for scenario in config.scenarios:
        evaluator = scenario.build_evaluator(check_nominal=False)
        _require_nominal(evaluator, scenario.name)
        path = config.map_path(scenario.name, maps_dir)
        if os.path.exists(path):
            maps[scenario.name] = acceptable_space.load(path, expected_scenario_hash=evaluator.scenario_hash())
        elif args.build_missing:
            logger.info(f"Construindo mapa ausente: {path}")
            acc_map = acceptable_space.precompute(grid, evaluator, workers=args.workers)
            _ensure_parent(path)
            acceptable_space.save(acc_map, path)
            maps[scenario.name] = acc_map
        else:
            raise MissingMapError(f"Mapa ausente: {path} (use --build-missing)")
        runtimes[scenario.name] = ScenarioRuntime.from_config(scenario)

    report = run_experiment(
        config,
        trials_per_cell=args.trials,
        seed=args.seed,
        maps=maps,
        policies=_policies(args.policies),
        workers=args.workers,
        runtimes=runtimes,
    )
    _write(render_report(report, args.format), args.output)
    if args.records:
        report.records.to_csv(args.records, index=False, lineterminator="\n")
        logger.info(f"Registros dos ensaios gravados em {args.records}")
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.input, "r", encoding="utf-8") as f:
        report = parse_report_csv(f.read())

    if args.format in TEXT_FORMATS:
        _write(render_report(report, args.format), args.output)
    elif args.format == "png":
        plot_report(report, args.output)
    elif args.format == "pdf":
        with open(args.output, "wb") as f:
            f.write(generate_pdf_report(report))
        logger.info(f"PDF gravado em {args.output}")
    return EXIT_OK


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posetask",
        description="Probabilidade de sucesso de tarefas dependentes de pose sob incerteza.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Logs em nível DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("precompute", help="Pré-calcula o espaço de erro aceitável")
    p.add_argument("--config", required=True, help="Arquivo TOML de cenário ou experimento")
    p.add_argument("--scenario", help="Nome do cenário (arquivos com vários cenários)")
    p.add_argument("--set", action="append", default=[], metavar="CHAVE=VALOR", help="Override da configuração")
    p.add_argument("--output", help="Arquivo .pgam de saída")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_precompute)

    p = sub.add_parser("evaluate", help="Avalia um arquivo de partículas contra um mapa")
    p.add_argument("--map", required=True, help="Arquivo .pgam")
    p.add_argument("--particles", required=True, help="Arquivo .particles")
    p.add_argument("--p-thres", type=float, default=DEFAULT_P_THRES)
    p.add_argument("--renormalize", action="store_true", help="Renormaliza a massa após o limiar")
    p.add_argument("--policies", default="ours", help="Lista separada por vírgula (be,vc,gu,ours)")
    p.add_argument("--ours-threshold", type=float, default=DEFAULT_OURS_THRESHOLD)
    p.add_argument("--vc-threshold", type=float, default=DEFAULT_VC_THRESHOLD)
    p.add_argument("--gu-alpha", type=float, default=DEFAULT_GU_ALPHA)
    p.add_argument("--not-executable", action="store_true", help="Ação não executável (todas as políticas adiam)")
    p.add_argument("--json", action="store_true", help="Saída em JSON")
    p.add_argument("--config", help="Cenário para conferir grade e proveniência do mapa")
    p.add_argument("--scenario")
    p.add_argument("--set", action="append", default=[], metavar="CHAVE=VALOR")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("simulate", help="Executa o experimento Monte-Carlo")
    p.add_argument("--config", required=True, help="Arquivo TOML do experimento")
    p.add_argument("--set", action="append", default=[], metavar="CHAVE=VALOR")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="Ensaios por nível de oclusão")
    p.add_argument("--policies", help="Lista separada por vírgula (be,vc,gu,ours)")
    p.add_argument("--format", choices=TEXT_FORMATS, default="markdown")
    p.add_argument("--output", help="Arquivo do relatório (padrão: stdout)")
    p.add_argument("--records", help="CSV com um registro por ensaio")
    p.add_argument("--build-missing", action="store_true", help="Pré-calcula mapas ausentes")
    p.add_argument("--maps-dir", help="Diretório dos mapas .pgam")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("report", help="Re-renderiza um relatório CSV")
    p.add_argument("--input", required=True, help="CSV gerado por 'simulate --format csv'")
    p.add_argument("--format", choices=TEXT_FORMATS + ("pdf", "png"), default="markdown")
    p.add_argument("--output", help="Arquivo de saída (obrigatório para pdf/png)")
    p.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "report" and args.format in ("pdf", "png") and not args.output:
        print("Erro: --output é obrigatório para pdf/png", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "workers", 1) < 1:
        print("Erro: --workers deve ser >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return args.handler(args)
    except NominalFailureError as e:
        logger.error("nominal_failure", extra={"error": str(e), "error_type": type(e).__name__})
        print(f"Erro: {e}", file=sys.stderr)
        return EXIT_NOMINAL
    except GridMismatchError as e:
        logger.error("grid_mismatch", extra={"error": str(e), "error_type": type(e).__name__})
        print(f"Erro: {e}", file=sys.stderr)
        return EXIT_GRID_MISMATCH
    except (OSError, MapFormatError, ParticleFileError, MissingMapError) as e:
        logger.error("io_error", extra={"error": str(e), "error_type": type(e).__name__})
        print(f"Erro: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, GridError, ScenarioValidationError, DecisionError, HarnessError, ReportFormatError) as e:
        logger.error("config_error", extra={"error": str(e), "error_type": type(e).__name__})
        print(f"Erro: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
