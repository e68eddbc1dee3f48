"""Per-pixel classifier and majority-vote smoothing."""

import numpy as np
import pytest

from floodhmt.baseline import label_propagation_smooth, pixelwise_classify
from floodhmt.errors import UsageError
from floodhmt.metrics import confusion, precision_recall_f1
from floodhmt.model import ModelParams, fit_initial_params
from floodhmt.raster import SceneBundle
from floodhmt.synth import SynthConfig, generate_scene

from helpers import make_grid


def one_band_scene(band_vals, dem_vals=None, nodata=-9999.0):
    band = make_grid(band_vals, nodata=nodata)
    dem = make_grid(dem_vals if dem_vals is not None
                    else np.zeros_like(band.values), nodata=nodata)
    labels = make_grid(np.full_like(band.values, nodata), nodata=nodata)
    return SceneBundle(dem=dem, bands=[band], labels=labels)


def make_params(pi=0.5):
    return ModelParams(pi=pi, rho=0.9, mu=np.array([[0.0], [10.0]]),
                       sigma=np.array([np.eye(1), np.eye(1)]),
                       reg_epsilon=1e-9)


def avg_f1(pred, truth):
    return sum(precision_recall_f1(confusion(pred, truth, c)).f1
               for c in (0, 1)) / 2.0


class TestPixelwise:
    def test_assigns_nearer_mean(self):
        scene = one_band_scene([[0.0, 10.0, 2.0, 9.0]])
        out = pixelwise_classify(scene, make_params())
        np.testing.assert_array_equal(out.values, [[0.0, 1.0, 0.0, 1.0]])

    def test_equal_scores_break_to_dry(self):
        scene = one_band_scene([[5.0]])
        out = pixelwise_classify(scene, make_params(pi=0.5))
        assert out.values[0, 0] == 0.0

    def test_prior_shifts_the_tie(self):
        scene = one_band_scene([[5.0]])
        assert pixelwise_classify(scene, make_params(pi=0.9)).values[0, 0] == 1.0
        assert pixelwise_classify(scene, make_params(pi=0.1)).values[0, 0] == 0.0

    def test_nodata_preserved(self):
        scene = one_band_scene([[0.0, -9999.0, 10.0]],
                               dem_vals=[[0.0, 1.0, -9999.0]])
        out = pixelwise_classify(scene, make_params())
        np.testing.assert_array_equal(out.values, [[0.0, -9999.0, -9999.0]])

    def test_canopy_pixels_drop_flood_recall(self):
        # occluded flood pixels carry dry-like features, so the per-pixel
        # rule misses roughly the occluded fraction
        recalls = {}
        for frac in (0.0, 0.3):
            cfg = SynthConfig(nrows=48, ncols=48, seed=6, terrain="bumps",
                              noise_sigma=5.0, canopy_fraction=frac,
                              label_noise=0.8, bands=3)
            scene, truth, _ = generate_scene(cfg)
            mask = scene.labels.values != scene.labels.nodata
            r, c = np.nonzero(mask)
            params = fit_initial_params(scene.features(r, c),
                                        scene.labels.values[r, c].astype(int))
            pred = pixelwise_classify(scene, params)
            recalls[frac] = precision_recall_f1(confusion(pred, truth, 1)).recall
        assert recalls[0.0] >= 0.95
        assert recalls[0.3] <= recalls[0.0] - 0.2


class TestSmoothing:
    def test_lone_flip_corrected_in_one_round(self):
        vals = np.zeros((5, 5))
        vals[2, 2] = 1.0
        out = label_propagation_smooth(make_grid(vals, nrows=5, ncols=5),
                                       iterations=1)
        np.testing.assert_array_equal(out.values, np.zeros((5, 5)))

    def test_uniform_is_fixed(self):
        grid = make_grid(np.ones((4, 6)), nrows=4, ncols=6)
        out = label_propagation_smooth(grid, iterations=10)
        np.testing.assert_array_equal(out.values, grid.values)

    def test_two_by_two_blocks_are_fixed(self):
        # interior pixels tie 2-2 against their own label and keep it;
        # border pixels hold a strict majority
        blocks = np.array([[0, 0, 1, 1],
                           [0, 0, 1, 1],
                           [1, 1, 0, 0],
                           [1, 1, 0, 0]], dtype=float)
        out = label_propagation_smooth(make_grid(blocks, nrows=4, ncols=4),
                                       iterations=10)
        np.testing.assert_array_equal(out.values, blocks)

    def test_idempotent_at_convergence(self):
        rng = np.random.default_rng(17)
        vals = (rng.random((20, 20)) < 0.5).astype(float)
        grid = make_grid(vals, nrows=20, ncols=20)
        settled = label_propagation_smooth(grid, iterations=200)
        again = label_propagation_smooth(settled, iterations=5)
        np.testing.assert_array_equal(again.values, settled.values)

    def test_nodata_never_participates(self):
        rng = np.random.default_rng(3)
        vals = (rng.random((10, 10)) < 0.4).astype(float)
        vals[rng.random((10, 10)) < 0.25] = -9999.0
        grid = make_grid(vals, nrows=10, ncols=10)
        out = label_propagation_smooth(grid, iterations=10)
        hole = vals == -9999.0
        np.testing.assert_array_equal(out.values[hole], vals[hole])
        assert set(np.unique(out.values[~hole])) <= {0.0, 1.0}

    def test_votes_do_not_cross_nodata(self):
        vals = np.array([[1.0, -9999.0, 0.0, 0.0, 0.0]])
        out = label_propagation_smooth(make_grid(vals, nrows=1, ncols=5),
                                       iterations=10)
        np.testing.assert_array_equal(out.values, vals)

    def test_zero_iterations_returns_input(self):
        vals = np.array([[1.0, 0.0], [0.0, 1.0]])
        grid = make_grid(vals, nrows=2, ncols=2)
        out = label_propagation_smooth(grid, iterations=0)
        np.testing.assert_array_equal(out.values, vals)

    def test_rejects_bad_arguments(self):
        grid = make_grid([[0.0, 1.0]])
        with pytest.raises(UsageError, match=">= 0"):
            label_propagation_smooth(grid, iterations=-1)
        with pytest.raises(UsageError, match="row 0 col 1"):
            label_propagation_smooth(make_grid([[0.0, 2.0]]), iterations=1)

    def test_cleans_salt_and_pepper(self):
        cfg = SynthConfig(nrows=48, ncols=48, seed=12, terrain="bumps",
                          noise_sigma=14.0, label_noise=0.8, bands=3)
        scene, truth, _ = generate_scene(cfg)
        mask = scene.labels.values != scene.labels.nodata
        r, c = np.nonzero(mask)
        params = fit_initial_params(scene.features(r, c),
                                    scene.labels.values[r, c].astype(int))
        raw = pixelwise_classify(scene, params)
        smoothed = label_propagation_smooth(raw, iterations=10)
        assert avg_f1(smoothed, truth) > avg_f1(raw, truth)
