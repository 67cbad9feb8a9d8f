import math

import numpy as np
import pytest

from sagebench.array_geometry import (
    SPEED_OF_LIGHT,
    PatternSpec,
    build_cylindrical_array,
    default_cylindrical_array,
    element_gains,
    full_selection,
    select_subarray,
    ColumnScheme,
)
from sagebench.channel import (
    ChannelData,
    FrequencyGrid,
    PathLabel,
    PathParams,
    Reflector,
    ScenarioSpec,
    apply_los_dominance,
    default_grid,
    ground_truth_from_scenario,
    load_bundled_scenario,
    load_channel,
    load_scenario,
    restrict_channel,
    save_channel,
    save_scenario,
    synthesize_channel,
)

from helpers import tiny_array


def single_element_isotropic():
    return build_cylindrical_array(1, 1, 0.1, 0.04, 3.5e9, PatternSpec(model="isotropic"))


class TestFrequencyGrid:
    def test_default(self):
        g = default_grid()
        assert g.n_points == 401
        assert g.frequencies[0] == 3.3e9
        assert g.frequencies[-1] == 3.7e9
        assert g.spacing == pytest.approx(1e6)

    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencyGrid(3.7e9, 3.3e9, 401)
        with pytest.raises(ValueError):
            FrequencyGrid(3.3e9, 3.7e9, 1)


class TestGroundTruth:
    def test_canonical_scenario_angles(self):
        spec, _ = load_bundled_scenario(3)
        paths = ground_truth_from_scenario(spec)
        by_label = {p.label: p for p in paths}
        assert math.degrees(by_label[PathLabel.SCREEN].elevation) == pytest.approx(72.0, abs=1e-9)
        assert math.degrees(by_label[PathLabel.POLE].elevation) == pytest.approx(113.0, abs=1e-9)
        assert math.degrees(by_label[PathLabel.BALL].elevation) == pytest.approx(122.0, abs=1e-9)
        for p in paths:
            assert math.degrees(p.azimuth) == pytest.approx(0.0, abs=1e-9)

    def test_los_from_positive_x(self):
        spec = ScenarioSpec(
            name="t", tx_position=(4.0, 0.0, 0.0),
            reflectors=(Reflector("screen", (2.0, 0.0, 1.0), 3.0),),
            los_blocked=False,
        )
        paths = ground_truth_from_scenario(spec)
        los = [p for p in paths if p.label == PathLabel.LOS][0]
        assert los.azimuth == pytest.approx(0.0)
        assert math.degrees(los.elevation) == pytest.approx(90.0)
        assert los.delay == pytest.approx(4.0 / SPEED_OF_LIGHT)

    def test_collinear_reflector_longer_delay(self):
        spec = ScenarioSpec(
            name="t", tx_position=(3.0, 0.0, 0.0),
            reflectors=(Reflector("other", (5.0, 0.0, 0.0), 0.0),),
            los_blocked=False,
        )
        paths = ground_truth_from_scenario(spec)
        los = [p for p in paths if p.label == PathLabel.LOS][0]
        refl = [p for p in paths if p.label != PathLabel.LOS][0]
        assert refl.delay > los.delay
        # two-segment spreading: (3->5) + (5->0) = 7 m
        assert refl.delay == pytest.approx(7.0 / SPEED_OF_LIGHT)

    def test_sorted_by_delay(self):
        spec, _ = load_bundled_scenario(4)
        paths = ground_truth_from_scenario(spec)
        delays = [p.delay for p in paths]
        assert delays == sorted(delays)
        assert paths[0].label == PathLabel.LOS

    def test_amplitude_spreading_and_loss(self):
        # reflection loss scales the free-space two-segment amplitude
        spec = ScenarioSpec(
            name="t", tx_position=(4.0, 0.0, 0.0),
            reflectors=(Reflector("a", (0.0, 3.0, 0.0), 0.0),
                        Reflector("b", (0.0, -3.0, 0.0), 20.0)),
            los_blocked=True,
        )
        a, b = ground_truth_from_scenario(spec, carrier_frequency=3.5e9)
        lam = SPEED_OF_LIGHT / 3.5e9
        expected = lam / (4 * math.pi * (5.0 + 3.0))
        assert abs(a.gain) == pytest.approx(expected)
        assert abs(b.gain) == pytest.approx(expected / 10.0)

    def test_phase_deterministic_in_seed(self):
        spec, _ = load_bundled_scenario(3)
        p1 = ground_truth_from_scenario(spec)
        p2 = ground_truth_from_scenario(spec)
        p3 = ground_truth_from_scenario(spec.reseeded(99))
        assert all(a.gain == b.gain for a, b in zip(p1, p2))
        assert any(a.gain != b.gain for a, b in zip(p1, p3))


class TestLosDominance:
    def make_paths(self):
        return [
            PathParams(1e-9, 0.0, math.pi / 2, 1e-3 + 0j, PathLabel.LOS),
            PathParams(2e-9, 0.0, 1.3, 1e-3 + 0j, PathLabel.SCREEN),
            PathParams(3e-9, 0.0, 1.9, 0.5e-3 + 0j, PathLabel.POLE),
        ]

    def test_ten_db_excess(self):
        out = apply_los_dominance(self.make_paths(), 10.0)
        assert abs(out[0].gain) == pytest.approx(1e-3 * 10 ** 0.5)
        assert out[1].gain == 1e-3 + 0j
        assert out[2].gain == 0.5e-3 + 0j

    def test_zero_excess_equalizes(self):
        out = apply_los_dominance(self.make_paths(), 0.0)
        assert abs(out[0].gain) == pytest.approx(1e-3)

    def test_requires_los(self):
        with pytest.raises(LookupError):
            apply_los_dominance(self.make_paths()[1:], 10.0)


class TestSynthesis:
    def test_zero_delay_single_element_all_ones(self):
        # arrival from straight up is orthogonal to the element offset, so
        # every frequency bin sees unit response
        geom = single_element_isotropic()
        sel = full_selection(geom)
        path = PathParams(0.0, 0.0, 0.0, 1.0 + 0j)
        data = synthesize_channel(geom, sel, [path], default_grid(), None, 0)
        assert np.allclose(data.matrix, 1.0, atol=1e-12)

    def test_delay_only_row_and_ifft_peak(self):
        geom = single_element_isotropic()
        sel = full_selection(geom)
        grid = default_grid()
        tau = 20e-9
        path = PathParams(tau, 0.0, 0.0, 1.0 + 0j)
        data = synthesize_channel(geom, sel, [path], grid, None, 0)
        expected = np.exp(-2j * np.pi * grid.frequencies * tau)
        assert np.allclose(data.matrix[0], expected, atol=1e-12)
        # independent check: inverse DFT peak within one delay-resolution bin
        lag_power = np.abs(np.fft.ifft(data.matrix[0])) ** 2
        peak = int(np.argmax(lag_power))
        peak_delay = peak / (grid.n_points * grid.spacing)
        assert abs(peak_delay - tau) < 1.0 / grid.bandwidth

    def test_aggregate_snr_within_half_db(self):
        spec, geom = load_bundled_scenario(3)
        sel = full_selection(geom)
        truth = ground_truth_from_scenario(spec, geom.carrier_frequency)
        clean = synthesize_channel(geom, sel, truth, default_grid(), None, 0)
        ratios = []
        for seed in range(10):
            noisy = synthesize_channel(geom, sel, truth, default_grid(), 50.0, seed)
            noise = noisy.matrix - clean.matrix
            ratios.append(clean.total_power / float(np.sum(np.abs(noise) ** 2)))
        snr_db = 10 * np.log10(np.mean(ratios))
        assert abs(snr_db - 50.0) < 0.5

    def test_linearity(self):
        geom = tiny_array()
        sel = full_selection(geom)
        grid = FrequencyGrid(3.3e9, 3.7e9, 41)
        a = PathParams(5e-9, 0.1, 1.5, 1e-3 + 2e-4j)
        b = PathParams(9e-9, -0.2, 1.7, 5e-4 - 1e-4j)
        ab = synthesize_channel(geom, sel, [a, b], grid, None, 0)
        sa = synthesize_channel(geom, sel, [a], grid, None, 0)
        sb = synthesize_channel(geom, sel, [b], grid, None, 0)
        assert np.allclose(ab.matrix, sa.matrix + sb.matrix, rtol=1e-12, atol=0)

    def test_determinism(self):
        spec, geom = load_bundled_scenario(2)
        sel = full_selection(geom)
        truth = ground_truth_from_scenario(spec, geom.carrier_frequency)
        d1 = synthesize_channel(geom, sel, truth, default_grid(), 50.0, 7)
        d2 = synthesize_channel(geom, sel, truth, default_grid(), 50.0, 7)
        assert np.array_equal(d1.matrix, d2.matrix)

    def test_single_path_row_power(self):
        # per-row power is K * |gain * g_m|^2 for one path, no noise
        geom = tiny_array()
        sel = full_selection(geom)
        grid = FrequencyGrid(3.3e9, 3.7e9, 101)
        path = PathParams(4e-9, 0.2, 1.4, 2e-3 + 1e-3j)
        data = synthesize_channel(geom, sel, [path], grid, None, 0)
        gains = element_gains(geom, sel, path.azimuth, path.elevation)
        row_power = np.sum(np.abs(data.matrix) ** 2, axis=1)
        expected = grid.n_points * (abs(path.gain) * gains) ** 2
        assert np.allclose(row_power, expected, rtol=1e-12)

    def test_delay_shift_phasor(self):
        geom = tiny_array()
        sel = full_selection(geom)
        grid = FrequencyGrid(3.3e9, 3.7e9, 21)
        paths = [
            PathParams(5e-9, 0.1, 1.5, 1e-3 + 0j),
            PathParams(9e-9, -0.2, 1.7, 5e-4 + 2e-4j),
        ]
        delta = 3e-9
        shifted = [
            PathParams(p.delay + delta, p.azimuth, p.elevation, p.gain) for p in paths
        ]
        d0 = synthesize_channel(geom, sel, paths, grid, None, 0)
        d1 = synthesize_channel(geom, sel, shifted, grid, None, 0)
        phasor = np.exp(-2j * np.pi * grid.frequencies * delta)
        assert np.allclose(d1.matrix, d0.matrix * phasor[None, :], rtol=1e-11, atol=1e-20)

    def test_empty_paths_rejected(self):
        geom = tiny_array()
        with pytest.raises(ValueError):
            synthesize_channel(geom, full_selection(geom), [], default_grid(), None, 0)

    def test_restrict_channel(self):
        spec, geom = load_bundled_scenario(1)
        full = full_selection(geom)
        truth = ground_truth_from_scenario(spec, geom.carrier_frequency)
        data = synthesize_channel(geom, full, truth, default_grid(), 50.0, 0)
        sub = select_subarray(geom, ColumnScheme(4, 1))
        restricted = restrict_channel(data, sub)
        assert restricted.matrix.shape == (16, 401)
        assert np.array_equal(restricted.matrix, data.matrix[sub.index_array])


class TestChannelDataValidation:
    def test_shape_mismatch(self):
        geom = tiny_array()
        sel = full_selection(geom)
        with pytest.raises(ValueError):
            ChannelData(np.zeros((3, 5), complex), default_grid(), sel)

    def test_nonfinite_rejected(self):
        geom = tiny_array()
        sel = full_selection(geom)
        m = np.zeros((len(sel), 401), complex)
        m[0, 0] = np.nan
        with pytest.raises(ValueError):
            ChannelData(m, default_grid(), sel)


class TestScenarioIO:
    def test_round_trip(self, tmp_path):
        spec, geom = load_bundled_scenario(4)
        out = tmp_path / "s.yaml"
        save_scenario(out, spec, geom)
        spec2, geom2 = load_scenario(out)
        assert spec2 == spec
        assert geom2.to_dict() == geom.to_dict()

    def test_bundled_scenarios_cover_canon(self):
        # 1: screen; 2: screen+pole; 3: screen+pole+ball; 4: same with LOS
        sizes = {1: 1, 2: 2, 3: 3, 4: 3}
        for n, n_refl in sizes.items():
            spec, _ = load_bundled_scenario(n)
            assert len(spec.reflectors) == n_refl
            assert spec.los_blocked == (n != 4)

    def test_scenario_dir_env_override(self, tmp_path, monkeypatch):
        spec, _ = load_bundled_scenario(1)
        save_scenario(tmp_path / "scenario1.yaml", spec)
        monkeypatch.setenv("SAGEBENCH_SCENARIOS", str(tmp_path))
        spec2, _ = load_bundled_scenario(1)
        assert spec2 == spec


class TestChannelFileIO:
    def test_lossless_round_trip(self, tmp_path):
        spec, geom = load_bundled_scenario(3)
        sel = select_subarray(geom, ColumnScheme(8, 1))
        truth = ground_truth_from_scenario(spec, geom.carrier_frequency)
        data = synthesize_channel(geom, sel, truth, default_grid(), 50.0, 3)
        out = tmp_path / "chan.npz"
        save_channel(out, data)
        back = load_channel(out)
        assert np.array_equal(back.matrix, data.matrix)
        assert back.grid == data.grid
        assert back.selection.indices == sel.indices
        assert back.truth == data.truth

    def test_round_trip_without_truth(self, tmp_path):
        geom = tiny_array()
        sel = full_selection(geom)
        m = np.random.default_rng(0).standard_normal((len(sel), 401)) + 0j
        data = ChannelData(m, default_grid(), sel)
        out = tmp_path / "chan.npz"
        save_channel(out, data)
        back = load_channel(out)
        assert np.array_equal(back.matrix, data.matrix)
        assert back.truth is None
