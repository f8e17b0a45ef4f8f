"""
Testes unitários para o módulo config.py
"""
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from modules.config import (
    ConfigError,
    ObservationConfig,
    apply_overrides,
    load_config,
    load_scenario,
)
from modules.decision import PolicyKind
from modules.error_grid import GridDivisibilityError
from modules.task_evaluators import GraspEvaluator, IkEvaluator, ScenarioValidationError

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
GRASP_CONFIG = os.path.join(ROOT, "configs", "grasp_experiment.toml")
IK_CONFIG = os.path.join(ROOT, "configs", "ik_experiment.toml")

SCENARIO_FILE = """
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


class TestShippedConfigs(unittest.TestCase):
    """Testes para as configurações distribuídas com o projeto."""

    def test_grasp_experiment(self):
        """Experimento de grasp carrega e todos os cenários passam no nominal."""
        config = load_config(GRASP_CONFIG)
        self.assertEqual([s.name for s in config.scenarios], ["cracker_box", "mustard_bottle", "bleach_cleanser", "bowl", "mug"])
        self.assertEqual([lvl.trials for lvl in config.levels], [4, 8, 8])
        self.assertEqual(config.grid.to_grid().counts, (9, 9, 9, 7, 7, 25))
        for scenario in config.scenarios:
            self.assertIsInstance(scenario.build_evaluator(), GraspEvaluator)

    def test_ik_experiment(self):
        """Experimento de IK carrega com sequência de aproximação."""
        config = load_config(IK_CONFIG)
        self.assertEqual(config.schedule.approach.steps, 60)
        self.assertEqual(config.grid.to_grid().active_axes, (0, 1, 5))
        for scenario in config.scenarios:
            self.assertIsInstance(scenario.build_evaluator(), IkEvaluator)

    def test_policies(self):
        """Políticas na ordem declarada e com os limiares do arquivo."""
        config = load_config(GRASP_CONFIG)
        policies = config.policy.to_policy_configs()
        self.assertEqual([p.kind for p in policies], [PolicyKind.BE, PolicyKind.VC, PolicyKind.GU, PolicyKind.OURS])
        self.assertEqual(policies[3].ours_threshold, 0.6)
        self.assertEqual([p.kind for p in config.policy.to_policy_configs(["ours"])], [PolicyKind.OURS])

    def test_map_path(self):
        """Caminho do mapa combina experimento e cenário."""
        config = load_config(GRASP_CONFIG)
        self.assertEqual(config.map_path("bowl"), os.path.join("maps", "grasp_bowl.pgam"))
        self.assertEqual(config.map_path("bowl", "/tmp/m"), os.path.join("/tmp/m", "grasp_bowl.pgam"))

    def test_unknown_scenario(self):
        """Cenário inexistente gera ConfigError."""
        with self.assertRaises(ConfigError):
            load_config(GRASP_CONFIG).scenario("banana")


class TestOverrides(unittest.TestCase):
    """Testes para os overrides chave=valor."""

    def test_nested_and_list_index(self):
        """Overrides aninhados, com índice de lista e literal TOML."""
        raw = {"grid": {"translation_limit": [0.04, 0.04, 0.04]}, "scenarios": [{"name": "a"}]}
        apply_overrides(raw, ["grid.translation_limit=[0.02, 0.02, 0.0]", "scenarios.0.name=b", "seed=11", "policy.gu_alpha=0.1"])
        self.assertEqual(raw["grid"]["translation_limit"], [0.02, 0.02, 0.0])
        self.assertEqual(raw["scenarios"][0]["name"], "b")
        self.assertEqual(raw["seed"], 11)
        self.assertEqual(raw["policy"]["gu_alpha"], 0.1)

    def test_invalid(self):
        """Override sem '=' ou com índice inválido gera ConfigError."""
        with self.assertRaises(ConfigError):
            apply_overrides({}, ["seed"])
        with self.assertRaises(ConfigError):
            apply_overrides({"scenarios": []}, ["scenarios.3.name=x"])

    def test_override_reaches_model(self):
        """Override altera a configuração validada."""
        config = load_config(GRASP_CONFIG, ["seed=99", "policy.ours_threshold=0.8"])
        self.assertEqual(config.seed, 99)
        self.assertEqual(config.policy.ours_threshold, 0.8)


class TestValidation(unittest.TestCase):
    """Testes para a validação dos arquivos."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def _write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_invalid_toml(self):
        """TOML malformado gera ConfigError."""
        with self.assertRaises(ConfigError):
            load_config(self._write("bad.toml", "name = [\n"))

    def test_missing_file(self):
        """Arquivo inexistente gera OSError."""
        with self.assertRaises(OSError):
            load_config(os.path.join(self.tmp, "nao_existe.toml"))

    def test_unknown_key(self):
        """Chaves desconhecidas são rejeitadas."""
        with self.assertRaises(ConfigError):
            load_config(GRASP_CONFIG, ["grid.translation_limt=[0.1, 0.1, 0.1]"])

    def test_schedule_needs_one_source(self):
        """Sequência com vistas e aproximação ao mesmo tempo é rejeitada."""
        with self.assertRaises(ConfigError):
            load_config(GRASP_CONFIG, ["schedule.approach={steps = 5}"])

    def test_task_mismatch(self):
        """Cenário com tarefa diferente do experimento é rejeitado."""
        with self.assertRaises(ConfigError):
            load_config(IK_CONFIG, ["scenarios.0.task=\"grasp\""])

    def test_occlusion_range(self):
        """Oclusão fora de [0, 1] é rejeitada."""
        with self.assertRaises(ConfigError):
            load_config(GRASP_CONFIG, ["levels.0.occlusion=1.5"])

    def test_indivisible_grid(self):
        """Limite não múltiplo do passo é rejeitado ao construir a grade."""
        config = load_config(GRASP_CONFIG, ["grid.translation_step=[0.03, 0.01, 0.01]"])
        with self.assertRaises(GridDivisibilityError):
            config.grid.to_grid()

    def test_nominal_failure_flagged(self):
        """Caixa larga demais falha no nominal; a verificação pode ser adiada."""
        config = load_config(GRASP_CONFIG, ["scenarios.0.grasp.section.w=0.1"])
        with self.assertRaises(ScenarioValidationError):
            config.scenarios[0].build_evaluator()
        self.assertIsInstance(config.scenarios[0].build_evaluator(check_nominal=False), GraspEvaluator)

    def test_scenario_file(self):
        """Arquivo de cenário único traz cenário e grade."""
        path = self._write("soup.toml", SCENARIO_FILE)
        scenario, grid_cfg = load_scenario(path)
        self.assertEqual(scenario.name, "soup_can")
        self.assertEqual(grid_cfg.to_grid().counts, (5, 5, 1, 1, 1, 5))
        with self.assertRaises(ConfigError):
            load_scenario(path, "outro")

    def test_scenario_from_experiment(self):
        """Arquivo de experimento exige o nome quando há vários cenários."""
        with self.assertRaises(ConfigError):
            load_scenario(GRASP_CONFIG)
        scenario, grid_cfg = load_scenario(GRASP_CONFIG, "mug")
        self.assertEqual(scenario.grasp.section.kind, "mug")


class TestObservationConfig(unittest.TestCase):
    """Testes para a conversão do modelo de observação."""

    def test_units(self):
        """Ruído angular é convertido para radianos."""
        cfg = ObservationConfig(noise=(0.01, 0.01, 0.01, 90.0, 0.0, 180.0))
        np.testing.assert_allclose(cfg.noise_si(), [0.01, 0.01, 0.01, np.pi / 2, 0.0, np.pi])

    def test_yaw_symmetry_modes(self):
        """Ordem de simetria n gera n - 1 modos de yaw igualmente espaçados."""
        cfg = ObservationConfig(symmetry_yaw_order=4, symmetry_modes=[(0.0, 0.0, 0.0, 180.0, 0.0, 0.0)])
        modes = cfg.modes_si()
        self.assertEqual(modes.shape, (4, 6))
        np.testing.assert_allclose(modes[:3, 5], [np.pi / 2, np.pi, 3 * np.pi / 2])
        self.assertAlmostEqual(modes[3, 3], np.pi)

    def test_no_modes(self):
        """Sem simetria não há modos alternativos."""
        self.assertEqual(ObservationConfig().modes_si().shape, (0, 6))

    def test_negative_noise(self):
        """Ruído negativo é rejeitado."""
        with self.assertRaises(ValueError):
            ObservationConfig(noise=(-0.01, 0.0, 0.0, 0.0, 0.0, 0.0))


if __name__ == '__main__':
    unittest.main()
