"""
Testes unitários para o módulo pose_distribution.py
"""
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Adiciona o diretório raiz ao path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from modules.error_grid import build, quantize
from modules.pose_distribution import (
    DistributionError,
    ErrorDistribution,
    ParticleFileError,
    ParticleSet,
    bin,
    load_particles,
    save_particles,
    synth_multimodal,
    synth_unimodal,
    threshold,
)
from modules.se3_core import ErrorVector, Pose, apply_error

DEG = np.pi / 180.0


def grid():
    return build([0.03, 0.03, 0.03, 30 * DEG, 30 * DEG, 180 * DEG], [0.01, 0.01, 0.01, 10 * DEG, 10 * DEG, 15 * DEG])


def particles_at(estimate, errors, weights):
    poses = [apply_error(estimate, ErrorVector.from_array(e)) for e in errors]
    return ParticleSet.from_poses(estimate, poses, weights)


class TestParticleSet(unittest.TestCase):
    """Testes para a validação do ParticleSet."""

    def test_weights_normalized(self):
        """Pesos são normalizados para soma 1."""
        ps = ParticleSet(Pose.identity(), np.zeros((3, 3)), np.tile([0, 0, 0, 1.0], (3, 1)), [1.0, 1.0, 2.0])
        np.testing.assert_allclose(ps.weights, [0.25, 0.25, 0.5])
        self.assertEqual(len(ps), 3)

    def test_quaternions_normalized(self):
        """Quatérnios são normalizados."""
        ps = ParticleSet(Pose.identity(), np.zeros((1, 3)), [[0, 0, 0, 2.0]], [1.0])
        np.testing.assert_allclose(ps.quaternions, [[0, 0, 0, 1.0]])

    def test_invalid(self):
        """Entradas inválidas são rejeitadas."""
        quats = np.tile([0, 0, 0, 1.0], (2, 1))
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), np.zeros((2, 3)), quats, [1.0, -1.0])
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), np.zeros((2, 3)), quats, [0.0, 0.0])
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), np.zeros((2, 3)), quats, [1.0])
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), np.zeros((2, 3)), [[0, 0, 0, 0], [0, 0, 0, 1.0]], [1.0, 1.0])
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), np.zeros((2, 3)), quats, [1.0, 1.0], visual_confidence=1.5)
        with self.assertRaises(DistributionError):
            ParticleSet(Pose.identity(), [[np.nan, 0, 0], [0, 0, 0]], quats, [1.0, 1.0])

    def test_errors_relative_to_estimate(self):
        """Erros das partículas recuperam os erros usados para gerá-las."""
        estimate = Pose.from_euler([0.4, -0.1, 0.02], np.radians([5.0, -3.0, 120.0]))
        errors = np.array([[0.01, -0.02, 0.0, 0.1, -0.05, 0.3], [0.0, 0.0, 0.0, 0.0, 0.0, -2.0]])
        ps = particles_at(estimate, errors, [1.0, 1.0])
        np.testing.assert_allclose(ps.errors(), errors, atol=1e-9)


class TestBin(unittest.TestCase):
    """Testes para a discretização na grade."""

    def setUp(self):
        self.grid = grid()
        self.estimate = Pose.from_euler([0.5, 0.2, 0.0], np.radians([0.0, 0.0, 30.0]))

    def test_mass_per_cell(self):
        """Pesos vão para as células dos erros; partícula fora da grade é descartada."""
        errors = np.array([
            [0.01, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, -0.02, 0.0, 0.0, 0.0, 30 * DEG],
            [0.0, -0.02, 0.0, 0.0, 0.0, 30 * DEG],
            [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        d = bin(particles_at(self.estimate, errors, [1.0, 1.0, 1.0, 1.0]), self.grid)

        a = quantize(self.grid, ErrorVector.from_array(errors[0])).index
        b = quantize(self.grid, ErrorVector.from_array(errors[1])).index
        self.assertEqual(d.support_size, 2)
        self.assertAlmostEqual(d.mass[a], 0.25)
        self.assertAlmostEqual(d.mass[b], 0.5)
        self.assertAlmostEqual(d.discarded_mass, 0.25)
        self.assertAlmostEqual(d.total, 1.0)

    def test_cells_sorted_and_unique(self):
        """Células são únicas, ordenadas e com massa positiva."""
        ps = synth_unimodal(self.estimate, [0.01, 0.01, 0.005, 0.05, 0.05, 0.2], 2000, seed=4)
        d = bin(ps, self.grid)
        self.assertTrue(np.all(np.diff(d.cells) > 0))
        self.assertTrue(np.all(d.masses > 0))
        self.assertAlmostEqual(d.total, 1.0, places=9)

    def test_single_particle_at_estimate(self):
        """Partícula igual a Ô cai na célula central."""
        ps = ParticleSet.from_poses(self.estimate, [self.estimate])
        d = bin(ps, self.grid)
        self.assertEqual(d.mass, {self.grid.central_index: 1.0})
        self.assertEqual(d.discarded_mass, 0.0)

    def test_all_out_of_range_warns(self):
        """Massa majoritariamente fora da grade gera aviso."""
        far = apply_error(self.estimate, ErrorVector.from_array([1.0, 0, 0, 0, 0, 0]))
        ps = ParticleSet.from_poses(self.estimate, [far, far])
        with self.assertLogs("modules.pose_distribution", level="WARNING"):
            d = bin(ps, self.grid)
        self.assertEqual(d.support_size, 0)
        self.assertAlmostEqual(d.discarded_mass, 1.0)

    def test_linear_in_particle_blend(self):
        """Misturar dois conjuntos com pesos a e b mistura as massas binadas."""
        noise = [0.01, 0.01, 0.01, 0.1, 0.1, 0.5]
        first = synth_unimodal(self.estimate, noise, 300, seed=11)
        other = synth_unimodal(self.estimate, noise, 200, seed=12)
        second = ParticleSet(first.estimate, other.positions, other.quaternions, other.weights)
        a, b = 0.3, 0.7
        blend = ParticleSet(
            first.estimate,
            np.vstack([first.positions, second.positions]),
            np.vstack([first.quaternions, second.quaternions]),
            np.concatenate([a * first.weights, b * second.weights]),
        )
        d1, d2, mixed = bin(first, self.grid), bin(second, self.grid), bin(blend, self.grid)
        for cell, mass in mixed.mass.items():
            expected = a * d1.mass.get(cell, 0.0) + b * d2.mass.get(cell, 0.0)
            self.assertAlmostEqual(mass, expected, delta=1e-12)
        self.assertEqual(set(mixed.mass), set(d1.mass) | set(d2.mass))
        self.assertAlmostEqual(mixed.discarded_mass, a * d1.discarded_mass + b * d2.discarded_mass, delta=1e-12)


class TestThreshold(unittest.TestCase):
    """Testes para o limiar de massa."""

    def setUp(self):
        self.d = ErrorDistribution(grid(), [1, 5, 9], [0.6, 0.3, 0.05], 0.05)

    def test_drops_small_cells(self):
        """Células com massa <= limiar são descartadas sem renormalizar."""
        t = threshold(self.d, 0.05)
        self.assertEqual(list(t.cells), [1, 5])
        np.testing.assert_allclose(t.masses, [0.6, 0.3])
        self.assertAlmostEqual(t.discarded_mass, 0.1)
        self.assertAlmostEqual(t.total, 1.0)

    def test_renormalize(self):
        """Com renormalização a massa retida soma 1."""
        t = threshold(self.d, 0.05, renormalize=True)
        self.assertAlmostEqual(float(t.masses.sum()), 1.0)
        self.assertEqual(t.discarded_mass, 0.0)

    def test_zero_threshold_keeps_all(self):
        """Limiar zero mantém todas as células."""
        t = threshold(self.d, 0.0)
        self.assertEqual(t.support_size, 3)

    def test_invalid(self):
        """Limiar negativo é rejeitado."""
        with self.assertRaises(DistributionError):
            threshold(self.d, -0.1)

    def test_mismatched_shapes(self):
        """cells e masses com tamanhos diferentes são rejeitados."""
        with self.assertRaises(DistributionError):
            ErrorDistribution(grid(), [1, 2], [0.5])

    def test_mass_conserved_random_sets(self):
        """Massa retida + descartada soma 1 após bin e limiar."""
        rng = np.random.default_rng(21)
        estimate = Pose.from_euler([0.1, 0.0, 0.2], np.radians([0.0, 0.0, 60.0]))
        for case in range(50):
            noise = rng.uniform(0.002, 0.03, 6)
            ps = synth_unimodal(estimate, noise, int(rng.integers(1, 400)), seed=case)
            ps = ParticleSet(ps.estimate, ps.positions, ps.quaternions, rng.uniform(0.0, 1.0, len(ps)) + 1e-3)
            for p_thres in (0.0, 0.01, 0.1):
                t = threshold(bin(ps, grid()), p_thres)
                self.assertAlmostEqual(t.total, 1.0, delta=1e-9)
                self.assertTrue(np.all(t.masses > p_thres))


class TestSynthetic(unittest.TestCase):
    """Testes para os geradores sintéticos."""

    def setUp(self):
        self.truth = Pose.from_euler([0.3, 0.1, 0.0], np.radians([0.0, 0.0, 45.0]))
        self.noise = [0.01, 0.01, 0.005, 0.02, 0.02, 0.1]

    def test_deterministic(self):
        """Mesma semente gera as mesmas partículas."""
        a = synth_unimodal(self.truth, self.noise, 100, seed=7)
        b = synth_unimodal(self.truth, self.noise, 100, seed=7)
        c = synth_unimodal(self.truth, self.noise, 100, seed=8)
        np.testing.assert_array_equal(a.positions, b.positions)
        self.assertTrue(a.estimate.allclose(b.estimate))
        self.assertFalse(np.allclose(a.positions, c.positions))

    def test_zero_noise(self):
        """Ruído zero gera partículas e Ô iguais à pose verdadeira."""
        ps = synth_unimodal(self.truth, np.zeros(6), 10, seed=0)
        self.assertTrue(ps.estimate.allclose(self.truth))
        np.testing.assert_allclose(ps.positions, np.tile(self.truth.translation, (10, 1)), atol=1e-12)

    def test_single_mode_matches_unimodal(self):
        """Um único modo em zero reproduz o gerador unimodal."""
        a = synth_unimodal(self.truth, self.noise, 200, seed=3)
        b = synth_multimodal(self.truth, [ErrorVector.zero()], [1.0], self.noise, 200, seed=3)
        np.testing.assert_allclose(a.positions, b.positions, atol=1e-12)
        np.testing.assert_allclose(np.abs(np.sum(a.quaternions * b.quaternions, axis=1)), 1.0, atol=1e-9)
        self.assertTrue(a.estimate.allclose(b.estimate))

    def test_two_modes_split_mass(self):
        """Dois modos de simetria dividem a massa pelos pesos."""
        modes = [ErrorVector.zero(), ErrorVector(np.zeros(3), np.array([0.0, 0.0, np.pi]))]
        ps = synth_multimodal(self.truth, modes, [0.7, 0.3], [0.001] * 3 + [0.01] * 3, 4000, seed=11)
        yaw = np.abs(ps.errors()[:, 5])
        near_top = float(ps.weights[yaw < np.pi / 2].sum())
        self.assertGreater(near_top, 0.65)
        self.assertLess(near_top, 0.75)

    def test_invalid_mode_weights(self):
        """Pesos dos modos precisam somar 1."""
        with self.assertRaises(DistributionError):
            synth_multimodal(self.truth, [ErrorVector.zero()], [0.5], self.noise, 10, seed=0)
        with self.assertRaises(DistributionError):
            synth_multimodal(self.truth, [ErrorVector.zero()], [0.5, 0.5], self.noise, 10, seed=0)

    def test_invalid_noise(self):
        """Ruído com forma errada ou negativo é rejeitado."""
        with self.assertRaises(DistributionError):
            synth_unimodal(self.truth, [0.01] * 5, 10, seed=0)
        with self.assertRaises(DistributionError):
            synth_unimodal(self.truth, [-0.01] * 6, 10, seed=0)
        with self.assertRaises(DistributionError):
            synth_unimodal(self.truth, self.noise, 0, seed=0)


class TestParticleFile(unittest.TestCase):
    """Testes para o arquivo .particles."""

    def setUp(self):
        self.tmp = tempfile.mkdtemp()
        self.path = os.path.join(self.tmp, "obs.particles")

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def _write(self, text):
        with open(self.path, "w") as f:
            f.write(text)

    def test_round_trip(self):
        """Gravar e ler preserva partículas, pesos e confiança."""
        truth = Pose.from_euler([0.3, 0.1, 0.0], np.radians([0.0, 0.0, 45.0]))
        ps = synth_unimodal(truth, [0.01, 0.01, 0.005, 0.02, 0.02, 0.1], 50, seed=1, visual_confidence=0.4)
        save_particles(ps, self.path)
        loaded = load_particles(self.path)
        np.testing.assert_allclose(loaded.positions, ps.positions)
        np.testing.assert_allclose(loaded.quaternions, ps.quaternions)
        np.testing.assert_allclose(loaded.weights, ps.weights)
        self.assertAlmostEqual(loaded.visual_confidence, 0.4)
        self.assertTrue(loaded.estimate.allclose(ps.estimate))

    def test_comments_and_weights(self):
        """Comentários são ignorados e pesos normalizados."""
        self._write(
            "# estimativa\n"
            "0 0 0 0 0 0 1 0.8\n"
            "# partículas\n"
            "0.01 0 0 0 0 0 1 3\n"
            "0 0 0 0 0 0 1 1\n"
        )
        ps = load_particles(self.path)
        self.assertEqual(len(ps), 2)
        np.testing.assert_allclose(ps.weights, [0.75, 0.25])
        self.assertAlmostEqual(ps.visual_confidence, 0.8)

    def test_wrong_columns(self):
        """Número de colunas errado gera ParticleFileError."""
        self._write("0 0 0 0 0 0 1\n0 0 0 0 0 0 1\n")
        with self.assertRaises(ParticleFileError):
            load_particles(self.path)

    def test_header_only(self):
        """Arquivo sem partículas gera ParticleFileError."""
        self._write("0 0 0 0 0 0 1 1\n")
        with self.assertRaises(ParticleFileError):
            load_particles(self.path)

    def test_non_numeric(self):
        """Valor não numérico gera ParticleFileError."""
        self._write("0 0 0 0 0 0 1 1\n0 0 abc 0 0 0 1 1\n")
        with self.assertRaises(ParticleFileError):
            load_particles(self.path)

    def test_negative_weight(self):
        """Peso negativo gera ParticleFileError."""
        self._write("0 0 0 0 0 0 1 1\n0 0 0 0 0 0 1 -1\n")
        with self.assertRaises(ParticleFileError):
            load_particles(self.path)

    def test_missing_file(self):
        """Arquivo inexistente gera OSError."""
        with self.assertRaises(OSError):
            load_particles(os.path.join(self.tmp, "nao_existe.particles"))


if __name__ == '__main__':
    unittest.main()
