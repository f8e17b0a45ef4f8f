"""
Testes unitários para o módulo report_generator.py
"""
import json
import os
import shutil
import sys
import tempfile
import unittest

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from modules.harness import NOT_ATTEMPTED, ExperimentReport, TrialRecord, summarize
from modules.report_generator import (
    ReportFormatError,
    generate_pdf_report,
    parse_report_csv,
    plot_report,
    render_report,
    sanitize_text_for_latin1,
)


def grasp_report():
    records = [
        TrialRecord("grasp", "be", "bowl", 0.0, 0, 1, True, "success"),
        TrialRecord("grasp", "be", "bowl", 0.3, 1, 1, True, "failure"),
        TrialRecord("grasp", "be", "mug", 0.0, 0, 1, True, "success_unstable"),
        TrialRecord("grasp", "ours", "bowl", 0.0, 0, 2, True, "success"),
        TrialRecord("grasp", "ours", "bowl", 0.3, 1, 8, False, NOT_ATTEMPTED),
        TrialRecord("grasp", "ours", "mug", 0.0, 0, 3, True, "success_unstable"),
    ]
    return summarize(records, ["be", "ours"], ["bowl", "mug"])


class TestTextFormats(unittest.TestCase):
    """Testes para markdown, CSV e plot-data."""

    def setUp(self):
        self.report = grasp_report()

    def test_markdown_table(self):
        """Markdown tem cabeçalho, uma linha por registro e sucessos instáveis entre parênteses."""
        text = render_report(self.report, "markdown")
        lines = text.strip().split("\n")
        self.assertEqual(lines[0], "| Task | Policy | Object | Trials | Attempts | Successes | Failures | Avg. views |")
        self.assertEqual(len(lines), 2 + len(self.report.rows))
        self.assertIn("| grasp | Ours | bowl | 2 | 1 | 1 (0) | 0 | 5.0 |", lines)
        self.assertIn("| grasp | BE | All | 3 | 3 | 2 (1) | 1 | 1.0 |", lines)

    def test_markdown_ik_without_unstable(self):
        """Linhas de IK não mostram contagem de instáveis."""
        report = summarize([TrialRecord("ik", "be", "box", 0.0, 0, 1, True, "success")])
        self.assertIn("| ik | BE | box | 1 | 1 | 1 | 0 | 1.0 |", render_report(report, "markdown"))

    def test_csv_round_trip(self):
        """CSV renderizado volta ao mesmo relatório."""
        text = render_report(self.report, "csv")
        self.assertTrue(text.startswith("task,policy,scenario,trials,attempts,successes,unstable,failures,avg_views\n"))
        parsed = parse_report_csv(text)
        self.assertEqual(render_report(parsed, "csv"), text)
        self.assertEqual(int(parsed.row("ours", "bowl")["trials"]), 2)

    def test_plot_data(self):
        """plot-data é JSON com uma entrada por linha."""
        records = json.loads(render_report(self.report, "plot-data"))
        self.assertEqual(len(records), len(self.report.rows))
        first = records[0]
        self.assertEqual(first["policy"], "be")
        self.assertIsInstance(first["trials"], int)
        self.assertIn("avg_views", first)

    def test_empty_report(self):
        """Relatório vazio gera só o cabeçalho."""
        text = render_report(ExperimentReport.empty(), "markdown")
        self.assertEqual(len(text.strip().split("\n")), 2)
        csv_text = render_report(ExperimentReport.empty(), "csv")
        self.assertTrue(parse_report_csv(csv_text).rows.empty)

    def test_unknown_format(self):
        """Formato desconhecido gera ReportFormatError."""
        with self.assertRaises(ReportFormatError):
            render_report(self.report, "xlsx")

    def test_bad_csv_columns(self):
        """CSV sem as colunas esperadas é rejeitado."""
        with self.assertRaises(ReportFormatError):
            parse_report_csv("a,b\n1,2\n")


class TestBinaryFormats(unittest.TestCase):
    """Testes para PNG e PDF."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.report = grasp_report()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def test_plot_png(self):
        """Gráfico é gravado como PNG."""
        path = os.path.join(self.tmp, "report.png")
        plot_report(self.report, path)
        with open(path, "rb") as f:
            self.assertEqual(f.read(8), b"\x89PNG\r\n\x1a\n")

    def test_pdf_bytes(self):
        """PDF é gerado em bytes com assinatura válida."""
        data = generate_pdf_report(self.report, "Experimento de grasp")
        self.assertIsInstance(data, bytes)
        self.assertTrue(data.startswith(b"%PDF"))

    def test_pdf_empty_report(self):
        """PDF de relatório vazio ainda é gerado."""
        self.assertTrue(generate_pdf_report(ExperimentReport.empty()).startswith(b"%PDF"))

    def test_sanitize_latin1(self):
        """Caracteres fora do latin1 são removidos."""
        self.assertEqual(sanitize_text_for_latin1("ok ✓ ção"), "ok  ção")
        self.assertEqual(sanitize_text_for_latin1(3), "3")


if __name__ == '__main__':
    unittest.main()
