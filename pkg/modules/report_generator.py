"""
Módulo Report Generator - Exportação dos relatórios de experimento
Formatos: tabela markdown, CSV, plot-data (JSON), gráfico PNG e PDF.
"""
import io
import json
import logging
import os
import tempfile
from datetime import datetime
from typing import Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from fpdf import FPDF

from modules.harness import ALL_SCENARIOS, REPORT_COLUMNS, RECORD_COLUMNS, ExperimentReport

# Configuração de logging
logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

TEXT_FORMATS = ("markdown", "csv", "plot-data")
MARKDOWN_HEADER = ["Task", "Policy", "Object", "Trials", "Attempts", "Successes", "Failures", "Avg. views"]
POLICY_LABELS = {"be": "BE", "vc": "VC", "gu": "GU", "ours": "Ours"}

# Paleta do relatório
BACKGROUND = "#0A0E1A"
GOLD = "#FFD700"
LABEL = "#B8C5D6"
BAR_COLORS = {"attempts": "#9E9E9E", "successes": "#00E676", "failures": "#FF5252"}


class ReportFormatError(Exception):
    """Formato de relatório desconhecido ou CSV malformado."""
    pass


def sanitize_text_for_latin1(text) -> str:
    """Remove caracteres que o latin1 (fontes core do FPDF) não codifica."""
    if not isinstance(text, str):
        text = str(text)
    return text.encode("latin1", errors="ignore").decode("latin1")


# ============================================================================
# FORMATOS DE TEXTO
# ============================================================================

def _successes_cell(row: pd.Series) -> str:
    if row["task"] == "grasp":
        return f"{int(row['successes'])} ({int(row['unstable'])})"
    return str(int(row["successes"]))


def _markdown(report: ExperimentReport) -> str:
    lines = [
        "| " + " | ".join(MARKDOWN_HEADER) + " |",
        "|" + "|".join(["---"] * len(MARKDOWN_HEADER)) + "|",
    ]
    for _, row in report.rows.iterrows():
        cells = [
            row["task"],
            POLICY_LABELS.get(row["policy"], row["policy"]),
            row["scenario"],
            str(int(row["trials"])),
            str(int(row["attempts"])),
            _successes_cell(row),
            str(int(row["failures"])),
            f"{row['avg_views']:.1f}",
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    report.rows[REPORT_COLUMNS].to_csv(buffer, index=False, float_format="%.4f", lineterminator="\n")
    return buffer.getvalue()


def _plot_data(report: ExperimentReport) -> str:
    records = []
    for _, row in report.rows.iterrows():
        records.append({
            "task": row["task"],
            "policy": row["policy"],
            "scenario": row["scenario"],
            "trials": int(row["trials"]),
            "attempts": int(row["attempts"]),
            "successes": int(row["successes"]),
            "unstable": int(row["unstable"]),
            "failures": int(row["failures"]),
            "avg_views": round(float(row["avg_views"]), 4),
        })
    return json.dumps(records, indent=2) + "\n"


def render_report(report: ExperimentReport, fmt: str = "markdown") -> str:
    """
    Formata o relatório como texto.

    Args:
        report: Relatório do experimento
        fmt: 'markdown', 'csv' ou 'plot-data'

    Returns:
        Texto do relatório (relatório vazio gera apenas o cabeçalho)

    Raises:
        ReportFormatError: Formato desconhecido
    """
    if fmt == "markdown":
        return _markdown(report)
    if fmt == "csv":
        return _csv(report)
    if fmt == "plot-data":
        return _plot_data(report)
    raise ReportFormatError(f"Formato desconhecido: {fmt}. Use um de {TEXT_FORMATS}")


def parse_report_csv(text: str) -> ExperimentReport:
    """
    Reconstrói um ExperimentReport a partir do CSV de render_report.

    Os registros por ensaio não fazem parte do CSV; o relatório volta sem eles.
    """
    try:
        rows = pd.read_csv(io.StringIO(text), dtype={"task": str, "policy": str, "scenario": str})
    except (ValueError, pd.errors.ParserError) as e:
        raise ReportFormatError(f"CSV de relatório inválido: {e}") from e
    except pd.errors.EmptyDataError:
        return ExperimentReport.empty()
    if list(rows.columns) != REPORT_COLUMNS:
        raise ReportFormatError(f"Colunas esperadas {REPORT_COLUMNS}, encontradas {list(rows.columns)}")
    for col in ["trials", "attempts", "successes", "unstable", "failures"]:
        rows[col] = rows[col].astype(int)
    rows["avg_views"] = rows["avg_views"].astype(float)
    return ExperimentReport(rows, pd.DataFrame(columns=RECORD_COLUMNS))


# ============================================================================
# GRÁFICO
# ============================================================================

def _figure(report: ExperimentReport):
    overall = report.rows[report.rows["scenario"] == ALL_SCENARIOS]
    fig, ax = plt.subplots(figsize=(10, 5))
    fig.patch.set_facecolor(BACKGROUND)
    ax.set_facecolor(BACKGROUND)

    labels = [f"{row['task']}/{POLICY_LABELS.get(row['policy'], row['policy'])}" for _, row in overall.iterrows()]
    x = np.arange(len(labels))
    width = 0.27
    for offset, column in zip((-width, 0.0, width), ("attempts", "successes", "failures")):
        ax.bar(x + offset, overall[column].to_numpy(), width, label=column.capitalize(), color=BAR_COLORS[column])

    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_title("Decisão sob incerteza - resultados por política", fontsize=14, color=GOLD, fontweight="bold", pad=15)
    ax.set_ylabel("Ensaios", color=LABEL, fontsize=10)
    ax.grid(True, axis="y", alpha=0.2, color="#333333")
    ax.legend(loc="best", facecolor="#1A2332", edgecolor=GOLD, labelcolor=LABEL)
    ax.tick_params(colors=LABEL)
    for spine in ax.spines.values():
        spine.set_color(GOLD)
    return fig


def plot_report(report: ExperimentReport, path: Union[str, os.PathLike]) -> None:
    """Grava o gráfico de barras (tentativas/sucessos/falhas por política) em PNG."""
    fig = _figure(report)
    try:
        fig.savefig(path, dpi=100, bbox_inches="tight", facecolor=BACKGROUND)
    finally:
        plt.close(fig)
    logger.info(f"Gráfico do relatório gravado em {path}")


# ============================================================================
# PDF
# ============================================================================

class PDFReport(FPDF):
    def __init__(self, title: str = "Relatorio de Experimento"):
        super().__init__()
        self.report_title = sanitize_text_for_latin1(title)
        self.set_auto_page_break(auto=True, margin=15)
        self.set_margins(15, 20, 15)

    def header(self):
        # Faixa dourada com título
        self.set_fill_color(255, 215, 0)
        self.rect(0, 0, 210, 30, "F")
        self.set_xy(0, 8)
        self.set_font("Arial", "B", 18)
        self.set_text_color(0, 0, 0)
        self.cell(0, 10, self.report_title, 0, 1, "C")
        self.set_font("Arial", "I", 11)
        self.cell(0, 8, "Probabilidade de sucesso de tarefas sob incerteza de pose", 0, 1, "C")
        self.set_fill_color(200, 200, 200)
        self.rect(10, 32, 190, 0.5, "F")
        self.ln(15)

    def footer(self):
        self.set_y(-15)
        self.set_font("Arial", "I", 8)
        self.set_text_color(100, 100, 100)
        self.cell(0, 10, sanitize_text_for_latin1(f"Pagina {self.page_no()}"), 0, 0, "C")


def generate_pdf_report(report: ExperimentReport, title: str = "Relatorio de Experimento") -> bytes:
    """Gera o PDF (resumo, gráfico e tabela) e retorna os bytes."""
    pdf = PDFReport(title)
    pdf.add_page()

    pdf.set_font("Arial", "I", 9)
    pdf.set_text_color(100, 100, 100)
    pdf.cell(0, 5, f"Relatorio gerado em: {datetime.now().strftime('%d/%m/%Y %H:%M')}", 0, 1, "R")
    pdf.set_text_color(0, 0, 0)
    pdf.ln(5)

    if not report.rows.empty:
        fig = _figure(report)
        with tempfile.NamedTemporaryFile(delete=False, suffix=".png") as tmpfile:
            temp_img_path = tmpfile.name
        try:
            fig.savefig(temp_img_path, dpi=100, bbox_inches="tight", facecolor=BACKGROUND)
            pdf.image(temp_img_path, x=10, w=190)
        finally:
            plt.close(fig)
            try:
                os.remove(temp_img_path)
            except OSError:
                pass
        pdf.ln(5)

    # Tabela
    widths = [18, 18, 40, 18, 22, 26, 20, 22]
    pdf.set_fill_color(255, 215, 0)
    pdf.set_font("Arial", "B", 9)
    for w, label in zip(widths, MARKDOWN_HEADER):
        pdf.cell(w, 9, label, 1, 0, "C", True)
    pdf.ln()

    pdf.set_font("Arial", "", 9)
    for i, (_, row) in enumerate(report.rows.iterrows()):
        # Alterna cor de fundo
        if i % 2 == 0:
            pdf.set_fill_color(245, 245, 245)
        else:
            pdf.set_fill_color(255, 255, 255)
        cells = [
            row["task"],
            POLICY_LABELS.get(row["policy"], row["policy"]),
            row["scenario"],
            str(int(row["trials"])),
            str(int(row["attempts"])),
            _successes_cell(row),
            str(int(row["failures"])),
            f"{row['avg_views']:.1f}",
        ]
        for w, text in zip(widths, cells):
            pdf.cell(w, 7, sanitize_text_for_latin1(text), 1, 0, "C", True)
        pdf.ln()

    output = pdf.output(dest="S")
    # pyfpdf devolve str, fpdf2 devolve bytearray
    if isinstance(output, str):
        return output.encode("latin1")
    return bytes(output)
