import numpy as np
import pytest

from supobs.model import ConfigurationError, ParameterBox
from supobs.sampling import (
    SamplingState,
    covering_radius,
    equidistant_samples,
    grid_samples,
    zoom,
)

CASE_STUDY_SAMPLES = [3.45, 8.35, 13.25, 18.15, 23.05, 27.95, 32.85, 37.75, 42.65, 47.55]


class TestEquidistant:
    def test_case_study_grid(self):
        samples = equidistant_samples((1.0, 50.0), 10)
        # frozen against the cell-center formula lower + span/(2n) + i*span/n
        expected = 1.0 + 49.0 / 20.0 + np.arange(10) * (49.0 / 10.0)
        np.testing.assert_array_equal(samples, expected)
        np.testing.assert_allclose(samples, CASE_STUDY_SAMPLES, rtol=0, atol=1e-13)

    def test_single_cell_center(self):
        np.testing.assert_array_equal(equidistant_samples((0.0, 2.0), 1), [1.0])

    def test_rejects_bad_arguments(self):
        with pytest.raises(ConfigurationError):
            equidistant_samples((1.0, 50.0), 0)
        with pytest.raises(ConfigurationError):
            equidistant_samples((5.0, 5.0), 3)


class TestGridSamples:
    def test_matches_equidistant_in_1d(self):
        box = ParameterBox.from_interval(1.0, 50.0)
        grid = grid_samples(box, 10)
        assert grid.shape == (10, 1)
        np.testing.assert_array_equal(grid[:, 0], equidistant_samples((1.0, 50.0), 10))

    def test_single_sample_is_center(self):
        box = ParameterBox(lower=[-2.0, 0.0], upper=[4.0, 6.0])
        grid = grid_samples(box, 1)
        np.testing.assert_allclose(grid, [[1.0, 3.0]])

    def test_2d_covering_radius(self):
        box = ParameterBox.from_center([0.0, 0.0], 1.0)
        grid = grid_samples(box, 2)
        assert grid.shape == (4, 2)
        measured = covering_radius(box, grid, probes=10_000)
        assert measured <= 0.5 + 1e-12

    def test_all_samples_inside_box(self):
        box = ParameterBox(lower=[-1.0, 2.0], upper=[1.0, 8.0])
        for row in grid_samples(box, 3):
            assert box.contains(row)


class TestCoveringRadius:
    def test_zero_when_samples_cover_probes(self):
        box = ParameterBox.from_interval(0.0, 1.0)
        probes = 11
        samples = np.linspace(0.0, 1.0, probes)[:, None]
        assert covering_radius(box, samples, probes=probes) == 0.0

    def test_case_study_half_spacing(self):
        box = ParameterBox.from_interval(1.0, 50.0)
        samples = grid_samples(box, 10)
        measured = covering_radius(box, samples, probes=100_000)
        resolution = 49.0 / (100_000 - 1)
        assert abs(measured - 2.45) <= resolution

    def test_single_center_sample(self):
        box = ParameterBox.from_interval(-1.0, 1.0)
        measured = covering_radius(box, np.array([[0.0]]), probes=1001)
        assert measured == pytest.approx(1.0, abs=1e-12)

    def test_rejects_no_probes(self):
        box = ParameterBox.from_interval(0.0, 1.0)
        with pytest.raises(ConfigurationError):
            covering_radius(box, np.array([[0.5]]), probes=0)


class TestZoom:
    def make_state(self, zoom_factor=0.8, noise_inflation=0.0):
        box = ParameterBox.from_interval(1.0, 50.0)
        return SamplingState.initial(box, 10, zoom_factor, noise_inflation)

    def test_radius_chain(self):
        state = self.make_state()
        assert state.radius == 24.5
        z1 = zoom(state, state.samples[3])
        z2 = zoom(z1, z1.samples[3])
        assert z1.radius == pytest.approx(19.6, rel=1e-12)
        assert z2.radius == pytest.approx(15.68, rel=1e-12)

    def test_radius_recursion_exact_over_ten_stages(self):
        state = self.make_state()
        for m in range(1, 11):
            state = zoom(state, state.samples[state.n_samples // 2])
            assert state.radius == pytest.approx(0.8**m * 24.5, rel=1e-12)
            assert state.stage == m

    def test_containment_and_sample_count(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            state = self.make_state(
                zoom_factor=rng.uniform(0.5, 0.95),
                noise_inflation=rng.uniform(0.0, 1.0),
            )
            for _ in range(6):
                pick = state.samples[rng.integers(state.n_samples)]
                nxt = zoom(state, pick)
                assert np.all(nxt.box.lower >= state.box.lower)
                assert np.all(nxt.box.upper <= state.box.upper)
                assert nxt.n_samples == state.n_samples
                for row in nxt.samples:
                    assert nxt.box.contains(row, tol=1e-12)
                state = nxt

    def test_zoom_is_deterministic(self):
        a = zoom(self.make_state(), np.array([18.15]))
        b = zoom(self.make_state(), np.array([18.15]))
        assert a.radius == b.radius
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.box == b.box

    def test_center_pick_with_small_factor_nests_strictly(self):
        state = self.make_state(zoom_factor=0.5)
        center = state.box.center
        nxt = zoom(state, center)
        assert np.all(nxt.box.lower > state.box.lower)
        assert np.all(nxt.box.upper < state.box.upper)

    def test_rejects_outside_sample(self):
        state = self.make_state()
        with pytest.raises(ValueError):
            zoom(state, np.array([99.0]))

    def test_initial_state_validation(self):
        box = ParameterBox.from_interval(1.0, 50.0)
        with pytest.raises(ConfigurationError):
            SamplingState.initial(box, 10, zoom_factor=1.0)
        with pytest.raises(ConfigurationError):
            SamplingState.initial(box, 10, zoom_factor=0.8, noise_inflation=-0.1)
