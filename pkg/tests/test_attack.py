"""Tests for attack generation and tampered measurement assembly."""

import numpy as np
import numpy.testing as npt
import pytest

from secfusion import (AttackSpec, ConfigurationError, InputError,
                       SensorSpec, assemble_measurement, attack_trace,
                       build_enhanced_sensor, generate_attack, inject_attack,
                       measure, none_attack)


class TestGenerate:
    def test_single_step_pulse(self):
        spec = AttackSpec(sensor_id=2, kind="pulse", start=50, end=50,
                          value=[3.0])
        rng = np.random.default_rng(0)
        npt.assert_array_equal(generate_attack(spec, 49, rng), [0.0])
        npt.assert_array_equal(generate_attack(spec, 50, rng), [3.0])
        npt.assert_array_equal(generate_attack(spec, 51, rng), [0.0])

    def test_none_kind_always_zero(self):
        spec = none_attack(1, 2)
        rng = np.random.default_rng(0)
        for k in (0, 1, 50):
            npt.assert_array_equal(generate_attack(spec, k, rng),
                                   np.zeros(2))

    def test_gaussian_sample_variance(self):
        spec = AttackSpec(sensor_id=1, kind="gaussian", cov=[[5.0]])
        rng = np.random.default_rng(3)
        draws = np.array([generate_attack(spec, k, rng)[0]
                          for k in range(1, 10_001)])
        assert abs(draws.var() - 5.0) / 5.0 < 0.1

    def test_zero_at_step_zero_for_all_generated_kinds(self):
        rng = np.random.default_rng(0)
        specs = [
            AttackSpec(sensor_id=1, kind="gaussian", cov=[[5.0]]),
            AttackSpec(sensor_id=1, kind="pulse", start=0, end=3,
                       value=[1.0]),
            AttackSpec(sensor_id=1, kind="constant", value=[2.0]),
        ]
        for spec in specs:
            npt.assert_array_equal(generate_attack(spec, 0, rng), [0.0])

    def test_constant_kind(self):
        spec = AttackSpec(sensor_id=1, kind="constant", value=[2.0, -1.0])
        rng = np.random.default_rng(0)
        npt.assert_array_equal(generate_attack(spec, 5, rng), [2.0, -1.0])

    def test_trace_matches_stepwise_generation(self):
        spec = AttackSpec(sensor_id=1, kind="gaussian", cov=[[2.0]])
        trace = attack_trace(spec, 20, np.random.default_rng(11))
        expected = [generate_attack(spec, k, np.random.default_rng(11))
                    for k in (0,)]
        npt.assert_array_equal(trace[0], expected[0])
        assert trace.shape == (21, 1)
        assert np.all(trace[1:] != 0.0)


class TestFileKind:
    def test_roundtrip_including_step_zero(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("0.5 1.5\n-1 0\n2 2\n")
        spec = AttackSpec(sensor_id=1, kind="file", path=str(path))
        assert spec.p == 2
        npt.assert_array_equal(generate_attack(spec, 0), [0.5, 1.5])
        npt.assert_array_equal(generate_attack(spec, 2), [2.0, 2.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="cannot read"):
            AttackSpec(sensor_id=1, kind="file",
                       path=str(tmp_path / "nope.txt"))

    def test_short_file(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("1\n2\n")
        spec = AttackSpec(sensor_id=1, kind="file", path=str(path))
        with pytest.raises(InputError, match="step 2"):
            generate_attack(spec, 2)

    def test_ragged_file(self, tmp_path):
        path = tmp_path / "trace.txt"
        path.write_text("1 2\n3\n")
        with pytest.raises(InputError, match="line 1"):
            AttackSpec(sensor_id=1, kind="file", path=str(path))


class TestSpecValidation:
    def test_pulse_start_after_end(self):
        with pytest.raises(ConfigurationError, match="exceeds"):
            AttackSpec(sensor_id=1, kind="pulse", start=5, end=3,
                       value=[1.0])

    def test_gaussian_requires_cov(self):
        with pytest.raises(ConfigurationError, match="cov"):
            AttackSpec(sensor_id=1, kind="gaussian")

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError, match="kind"):
            AttackSpec(sensor_id=1, kind="ramp", value=[1.0])

    def test_dimension_conflict(self):
        with pytest.raises(ConfigurationError, match="p=2"):
            AttackSpec(sensor_id=1, kind="constant", value=[1.0], p=2)

    def test_indefinite_cov(self):
        with pytest.raises(ConfigurationError):
            AttackSpec(sensor_id=1, kind="gaussian", cov=[[-1.0]])


class TestInjectAndAssemble:
    def test_additive(self):
        npt.assert_array_equal(inject_attack([1.5], [3.0]), [4.5])
        npt.assert_array_equal(inject_attack([1.0, 2.0], [-1.0, 1.0]),
                               [0.0, 3.0])

    def test_zero_attack_identity(self):
        y = np.array([0.3, -0.7])
        npt.assert_array_equal(inject_attack(y, np.zeros(2)), y)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inject_attack([1.0], [1.0, 2.0])

    def test_concatenation(self):
        npt.assert_array_equal(
            assemble_measurement([4.5], [[2.0], [1.0]]), [4.5, 2.0, 1.0])
        npt.assert_array_equal(assemble_measurement([4.5], []), [4.5])

    def test_noiseless_equals_model_output(self):
        # With zero noises and zero attack the assembled vector is exactly
        # the stacked measurement map applied to the state.
        weak = SensorSpec(id=1, C_o=[[1, 0]], R_o=[[0.0]], defense="weak")
        strong = SensorSpec(id=2, C_o=[[0, 1]], R_o=[[0.0]],
                            defense="strong")
        enh = build_enhanced_sensor(weak, [strong])
        x = np.array([2.0, -3.0])
        rng = np.random.default_rng(0)
        y = assemble_measurement(
            inject_attack(measure(weak, x, rng), [0.0]),
            [measure(strong, x, rng)])
        npt.assert_array_equal(y, enh.C.at(0) @ x)


class TestAlgebraicIdentity:
    def test_assembled_minus_signal_is_stacked_noise(self):
        # Recording each sensor's noise as reading minus clean output, the
        # assembled enhanced measurement must satisfy
        # y = C x + Phi theta + stacked noise exactly.
        rng = np.random.default_rng(123)
        weak = SensorSpec(id=1, C_o=[[1, 0, 1]], R_o=[[0.5]], defense="weak")
        strongs = [SensorSpec(id=2, C_o=[[0, 1, 0]], R_o=[[0.2]],
                              defense="strong"),
                   SensorSpec(id=3, C_o=[[1, 1, 1]], R_o=[[0.3]],
                              defense="strong")]
        enh = build_enhanced_sensor(weak, strongs)
        for _ in range(20):
            x = rng.standard_normal(3)
            theta = rng.standard_normal(1)
            readings = {s.id: measure(s, x, rng) for s in [weak] + strongs}
            noises = {sid: readings[sid]
                      - ({1: weak, 2: strongs[0], 3: strongs[1]}[sid]
                         .C_o.at(0) @ x)
                      for sid in readings}
            y = assemble_measurement(inject_attack(readings[1], theta),
                                     [readings[2], readings[3]])
            stacked_noise = np.concatenate([noises[1], noises[2], noises[3]])
            npt.assert_allclose(
                y - enh.C.at(0) @ x - enh.Phi @ theta, stacked_noise,
                rtol=0, atol=1e-14)

    def test_strong_rows_unaffected_by_attack(self):
        weak = SensorSpec(id=1, C_o=[[1.0]], R_o=[[0.1]], defense="weak")
        strong = SensorSpec(id=2, C_o=[[1.0]], R_o=[[0.1]], defense="strong")
        enh = build_enhanced_sensor(weak, [strong])
        y_strong = [0.7]
        for theta in ([0.0], [5.0], [-2.0]):
            y = assemble_measurement(inject_attack([1.0], theta), [y_strong])
            assert y[1] == 0.7
        npt.assert_array_equal(enh.Phi[1:], np.zeros((1, 1)))
