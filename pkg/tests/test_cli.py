"""
Testes de integração para a linha de comando (modules/cli.py)
"""
import contextlib
import io
import json
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from modules.acceptable_space import AcceptableErrorMap, Provenance, load, save
from modules.cli import EXIT_CONFIG, EXIT_GRID_MISMATCH, EXIT_IO, EXIT_NOMINAL, EXIT_OK, main
from modules.decision import DEFAULT_P_THRES, success_probability
from modules.error_grid import build
from modules.pose_distribution import ParticleSet, bin, load_particles, save_particles, synth_unimodal, threshold
from modules.se3_core import Pose

SCENARIO_TOML = """
[grid]
translation_limit = [0.02, 0.02, 0.0]
translation_step = [0.01, 0.01, 0.01]
rotation_limit_deg = [0.0, 0.0, 30.0]
rotation_step_deg = [5.0, 5.0, 15.0]

[scenario]
name = "soup_can"
task = "grasp"

[scenario.grasp]
grasp_translation = [0.0, 0.0, 0.08]

[scenario.grasp.section]
kind = "cylinder"
radius = 0.034
h = 0.1
"""

EXPERIMENT_TOML = """
name = "mini"
task = "ik"
seed = 1

[grid]
translation_limit = [0.2, 0.2, 0.0]
translation_step = [0.05, 0.05, 0.02]
rotation_limit_deg = [0.0, 0.0, 40.0]
rotation_step_deg = [2.0, 2.0, 10.0]

[[levels]]
occlusion = 0.2
trials = 2

[[schedule.viewpoints]]
noise_scale = 1.5

[[schedule.viewpoints]]
noise_scale = 0.5

[[scenarios]]
name = "box"
task = "ik"

[scenarios.observation]
particles = 60
"""


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue()


class TestCli(unittest.TestCase):
    """Testes dos subcomandos e códigos de saída."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.scenario = self._write("soup.toml", SCENARIO_TOML)
        self.experiment = self._write("mini.toml", EXPERIMENT_TOML)
        self.map_path = os.path.join(self.tmp, "soup.pgam")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def _write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def _particles(self):
        path = os.path.join(self.tmp, "obs.particles")
        truth = Pose.from_euler([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
        ps = synth_unimodal(truth, [0.004, 0.004, 0.0, 0.0, 0.0, np.radians(5.0)], 200, seed=3, visual_confidence=0.7)
        save_particles(ps, path)
        return path

    def test_precompute(self):
        """precompute grava o mapa e informa células e fração."""
        code, out = run(["precompute", "--config", self.scenario, "--output", self.map_path])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(self.map_path))
        self.assertIn("cells: 125", out)
        self.assertIn("acceptable_fraction:", out)

    def test_precompute_nominal_failure(self):
        """Cenário que falha no nominal sai com código 3."""
        code, _ = run([
            "precompute", "--config", self.scenario, "--output", self.map_path,
            "--set", "scenario.grasp.section.radius=0.05",
        ])
        self.assertEqual(code, EXIT_NOMINAL)

    def test_evaluate_json(self):
        """evaluate produz probabilidade e decisões em JSON."""
        run(["precompute", "--config", self.scenario, "--output", self.map_path])
        code, out = run([
            "evaluate", "--map", self.map_path, "--particles", self._particles(),
            "--policies", "be,vc,ours", "--json",
        ])
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertGreaterEqual(result["probability"], 0.0)
        self.assertLessEqual(result["probability"], 1.0)
        self.assertEqual(result["decisions"]["be"], "execute")
        self.assertEqual(result["decisions"]["vc"], "execute")
        self.assertIn(result["decisions"]["ours"], ("execute", "defer"))

    def test_evaluate_not_executable(self):
        """Ação não executável adia."""
        run(["precompute", "--config", self.scenario, "--output", self.map_path])
        code, out = run([
            "evaluate", "--map", self.map_path, "--particles", self._particles(),
            "--policies", "be", "--not-executable",
        ])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("be: defer", out)

    def test_evaluate_grid_mismatch(self):
        """Mapa com grade diferente da configurada sai com código 5."""
        run(["precompute", "--config", self.scenario, "--output", self.map_path])
        code, _ = run([
            "evaluate", "--map", self.map_path, "--particles", self._particles(),
            "--config", self.scenario, "--set", "grid.rotation_limit_deg=[0.0, 0.0, 45.0]",
        ])
        self.assertEqual(code, EXIT_GRID_MISMATCH)

    def test_evaluate_missing_map(self):
        """Mapa inexistente sai com código 4."""
        code, _ = run(["evaluate", "--map", self.map_path, "--particles", self._particles()])
        self.assertEqual(code, EXIT_IO)

    def _line_map(self):
        """Mapa 5x5 em (tx, ty): na linha tx = 0 só ty <= 0 é aceitável."""
        grid = build([0.02, 0.02, 0, 0, 0, 0], [0.01, 0.01, 0, 0, 0, 0])
        accept = np.zeros(grid.size, dtype=bool)
        accept[[10, 11, 12]] = True
        acc_map = AcceptableErrorMap(grid, accept, np.zeros(grid.size, dtype=bool), Provenance("test", b"\0" * 32, 0.0))
        save(acc_map, self.map_path)
        return acc_map

    def _particles_at(self, ys):
        path = os.path.join(self.tmp, "line.particles")
        poses = [Pose.from_euler([0.0, y, 0.0], [0.0, 0.0, 0.0]) for y in ys]
        save_particles(ParticleSet.from_poses(Pose.identity(), poses), path)
        return path

    def test_evaluate_three_of_five_defers(self):
        """Cinco células de massa igual, três aceitáveis: P = 0.6 e OURS adia no limiar 0.6."""
        self._line_map()
        particles = self._particles_at([-0.02, -0.01, 0.0, 0.01, 0.02])
        code, out = run(["evaluate", "--map", self.map_path, "--particles", particles, "--json"])
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertAlmostEqual(result["probability"], 0.6)
        self.assertEqual(result["support_size"], 5)
        self.assertEqual(result["decisions"]["ours"], "defer")

    def test_evaluate_point_mass_executes(self):
        """Massa concentrada numa célula aceitável: P = 1 e OURS executa."""
        self._line_map()
        particles = self._particles_at([0.0])
        code, out = run(["evaluate", "--map", self.map_path, "--particles", particles, "--json"])
        self.assertEqual(code, EXIT_OK)
        result = json.loads(out)
        self.assertEqual(result["probability"], 1.0)
        self.assertEqual(result["decisions"]["ours"], "execute")

    def test_evaluate_matches_library(self):
        """Probabilidade impressa é a mesma de success_probability sobre os mesmos arquivos."""
        run(["precompute", "--config", self.scenario, "--output", self.map_path])
        particles = self._particles()
        code, out = run(["evaluate", "--map", self.map_path, "--particles", particles, "--json"])
        self.assertEqual(code, EXIT_OK)
        acc_map = load(self.map_path)
        d = threshold(bin(load_particles(particles), acc_map.grid), DEFAULT_P_THRES)
        self.assertEqual(json.loads(out)["probability"], success_probability(d, acc_map).probability)

    def test_simulate_nominal_failure(self):
        """Cenário que falha no nominal também sai com código 3 no simulate."""
        code, _ = run([
            "simulate", "--config", self.experiment, "--maps-dir", os.path.join(self.tmp, "maps"),
            "--build-missing", "--set", "scenarios.0.ik={reach_max = 0.6}",
        ])
        self.assertEqual(code, EXIT_NOMINAL)

    def test_invalid_policy(self):
        """Política desconhecida sai com código 2."""
        run(["precompute", "--config", self.scenario, "--output", self.map_path])
        code, _ = run(["evaluate", "--map", self.map_path, "--particles", self._particles(), "--policies", "xyz"])
        self.assertEqual(code, EXIT_CONFIG)

    def test_invalid_config(self):
        """Configuração inválida sai com código 2."""
        code, _ = run(["precompute", "--config", self.scenario, "--set", "scenario.unknown=1"])
        self.assertEqual(code, EXIT_CONFIG)

    def test_simulate_missing_maps(self):
        """simulate sem mapas e sem --build-missing sai com código 4."""
        code, _ = run(["simulate", "--config", self.experiment, "--maps-dir", os.path.join(self.tmp, "maps")])
        self.assertEqual(code, EXIT_IO)

    def test_simulate_and_report(self):
        """simulate constrói os mapas, grava CSV e report re-renderiza."""
        csv_path = os.path.join(self.tmp, "report.csv")
        records_path = os.path.join(self.tmp, "records.csv")
        code, _ = run([
            "simulate", "--config", self.experiment, "--maps-dir", os.path.join(self.tmp, "maps"),
            "--build-missing", "--format", "csv", "--output", csv_path, "--records", records_path,
            "--policies", "be,ours",
        ])
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(self.tmp, "maps", "mini_box.pgam")))
        with open(records_path) as f:
            self.assertEqual(len(f.read().strip().split("\n")), 1 + 2 * 2)

        code, out = run(["report", "--input", csv_path, "--format", "markdown"])
        self.assertEqual(code, EXIT_OK)
        self.assertIn("| ik | BE | All | 2 | 2 |", out)

        code, _ = run(["report", "--input", csv_path, "--format", "pdf"])
        self.assertEqual(code, EXIT_CONFIG)

        pdf_path = os.path.join(self.tmp, "report.pdf")
        code, _ = run(["report", "--input", csv_path, "--format", "pdf", "--output", pdf_path])
        self.assertEqual(code, EXIT_OK)
        with open(pdf_path, "rb") as f:
            self.assertTrue(f.read(4) == b"%PDF")

    def test_simulate_deterministic(self):
        """Duas execuções com a mesma semente geram o mesmo relatório."""
        maps_dir = os.path.join(self.tmp, "maps")
        argv = ["simulate", "--config", self.experiment, "--maps-dir", maps_dir, "--build-missing", "--format", "csv"]
        code_a, first = run(argv)
        code_b, second = run(argv)
        self.assertEqual((code_a, code_b), (EXIT_OK, EXIT_OK))
        self.assertEqual(first, second)

    def test_argument_errors(self):
        """Argumentos inválidos saem com código 2."""
        self.assertEqual(run([])[0], EXIT_CONFIG)
        self.assertEqual(run(["precompute", "--config", self.scenario, "--workers", "0"])[0], EXIT_CONFIG)


if __name__ == '__main__':
    unittest.main()
