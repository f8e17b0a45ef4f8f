"""
Robô de benchmark noturno.
Constrói os mapas ausentes, executa os experimentos versionados em configs/
e grava os relatórios (markdown, CSV, PNG e PDF) em reports/.

Execução a partir da raiz do projeto:
    python scripts/nightly_benchmark.py
Variáveis de ambiente: BENCHMARK_WORKERS, BENCHMARK_TRIALS, BENCHMARK_OUTPUT.
"""
import os
import sys
from datetime import datetime

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from modules import acceptable_space
from modules.config import ExperimentConfig, load_config
from modules.harness import ExperimentReport, ScenarioRuntime, run_experiment
from modules.report_generator import generate_pdf_report, plot_report, render_report

# --- CONFIGURAÇÕES ---
EXPERIMENTS = ["configs/grasp_experiment.toml", "configs/ik_experiment.toml"]
WORKERS = int(os.environ.get("BENCHMARK_WORKERS", os.cpu_count() or 1))
TRIALS = int(os.environ["BENCHMARK_TRIALS"]) if "BENCHMARK_TRIALS" in os.environ else None
OUTPUT_DIR = os.environ.get("BENCHMARK_OUTPUT", "reports")


def build_maps(config: ExperimentConfig) -> dict:
    """Carrega os mapas existentes e pré-calcula os ausentes."""
    grid = config.grid.to_grid()
    maps = {}
    for scenario in config.scenarios:
        path = config.map_path(scenario.name)
        evaluator = scenario.build_evaluator()
        if os.path.exists(path):
            maps[scenario.name] = acceptable_space.load(path, expected_scenario_hash=evaluator.scenario_hash())
            print(f"   📂 {scenario.name}: mapa carregado ({path})")
            continue
        print(f"   🧮 {scenario.name}: pré-calculando {grid.size} células...")
        acc_map = acceptable_space.precompute(grid, evaluator, workers=WORKERS)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        acceptable_space.save(acc_map, path)
        maps[scenario.name] = acc_map
        print(f"   ✅ {scenario.name}: fração aceitável {acc_map.acceptable_fraction:.4f}")
    return maps


def write_reports(config: ExperimentConfig, report: ExperimentReport, stamp: str) -> None:
    """Grava o relatório em todos os formatos."""
    os.makedirs(OUTPUT_DIR, exist_ok=True)
    base = os.path.join(OUTPUT_DIR, f"{config.name}_{stamp}")
    for fmt, ext in [("markdown", "md"), ("csv", "csv"), ("plot-data", "json")]:
        with open(f"{base}.{ext}", "w", encoding="utf-8") as f:
            f.write(render_report(report, fmt))
    report.records.to_csv(f"{base}_records.csv", index=False, lineterminator="\n")
    plot_report(report, f"{base}.png")
    with open(f"{base}.pdf", "wb") as f:
        f.write(generate_pdf_report(report, title=f"Experimento {config.name}"))
    print(f"💾 Relatórios gravados em {base}.*")


def check_ordering(report: ExperimentReport) -> None:
    """Confere a ordem esperada de falhas entre políticas (linhas 'All')."""
    failures = {}
    for policy in ["ours", "gu", "vc", "be"]:
        try:
            failures[policy] = int(report.row(policy)["failures"])
        except KeyError:
            continue
    print(f"   Falhas por política: {failures}")
    if "ours" in failures and "be" in failures and failures["ours"] >= failures["be"]:
        print("⚠️ Aviso: OURS não teve menos falhas que BE nesta execução.")


if __name__ == "__main__":
    print("========================================")
    print("🤖 BENCHMARK NOTURNO - INICIANDO")
    print("========================================")
    stamp = datetime.now().strftime("%Y%m%d")

    try:
        for path in EXPERIMENTS:
            # 1. Configuração
            config = load_config(path)
            print(f"📋 Experimento '{config.name}' ({len(config.scenarios)} cenários)")

            # 2. Mapas
            maps = build_maps(config)

            # 3. Experimento
            runtimes = {s.name: ScenarioRuntime.from_config(s) for s in config.scenarios}
            report = run_experiment(config, trials_per_cell=TRIALS, maps=maps, workers=WORKERS, runtimes=runtimes)
            print(render_report(report, "markdown"))

            # 4. Relatórios e checagem
            write_reports(config, report, stamp)
            check_ordering(report)

        print("========================================")
        print("🏆 SUCESSO: EXPERIMENTOS PROCESSADOS")
        print("========================================")

    except Exception as e:
        print(f"\n❌ ERRO CRÍTICO: {e}")
        exit(1)
