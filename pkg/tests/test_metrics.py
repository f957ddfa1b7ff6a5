import math

import numpy as np
import pytest

from mulog.exceptions import InvalidInputError
from mulog.metrics import comparison_map, evaluate, format_table, peak_value, psnr_q99, ssim
from mulog.scenes import make_scene, simulate


def test_identical_images(rng):
    ref = rng.uniform(0.5, 2.0, (32, 32))
    assert psnr_q99(ref, ref) == math.inf
    assert ssim(ref, ref) == pytest.approx(1.0)


def test_psnr_twenty_db():
    ref = np.ones((32, 32))
    checker = np.indices((32, 32)).sum(axis=0) % 2 * 2.0 - 1.0
    assert psnr_q99(ref + 0.1 * checker, ref) == pytest.approx(20.0, abs=1e-9)


def test_psnr_matches_formula(rng):
    ref = rng.exponential(1.0, (40, 40))
    est = ref + rng.normal(0.0, 0.2, ref.shape)
    peak = np.quantile(ref, 0.99)
    expected = 10 * np.log10(peak**2 / np.mean((est - ref) ** 2))
    assert psnr_q99(est, ref) == pytest.approx(expected, rel=1e-12)
    assert peak_value(ref) == pytest.approx(peak)


def test_psnr_decreases_with_noise(rng):
    ref = rng.uniform(0.5, 2.0, (32, 32))
    noise = rng.standard_normal(ref.shape)
    values = [psnr_q99(ref + s * noise, ref) for s in (0.1, 0.2, 0.4)]
    assert values[0] > values[1] > values[2]
    assert values[0] - values[1] == pytest.approx(20 * math.log10(2), rel=1e-9)


def test_ssim_drops_with_noise(rng):
    y, x = np.mgrid[0:64, 0:64]
    ref = 1.0 + 0.5 * np.sin(x / 5.0) * np.cos(y / 7.0)
    assert ssim(ref + rng.standard_normal(ref.shape), ref) < 0.5
    assert ssim(ref + 0.01 * rng.standard_normal(ref.shape), ref) > 0.9


def test_metric_input_errors(rng):
    with pytest.raises(InvalidInputError):
        ssim(np.ones((8, 8)), np.ones((8, 8)))
    with pytest.raises(InvalidInputError):
        psnr_q99(np.ones((4, 4)), np.ones((4, 5)))
    with pytest.raises(InvalidInputError):
        psnr_q99(np.ones((4, 4)), -np.ones((4, 4)))


def test_comparison_maps():
    d1 = np.full((2, 2, 1, 1), 4.0)
    np.testing.assert_allclose(comparison_map(d1), 2.0)
    d2 = np.tile(np.diag([1.0, 3.0]), (2, 2, 1, 1))
    np.testing.assert_allclose(comparison_map(d2), 4.0)


def test_evaluate_reports():
    truth = make_scene("mosaic", 2, 32)
    same = evaluate(truth, truth)
    assert same.psnr_db == math.inf
    assert same.residual_mad == 0.0
    record = same.to_record()
    assert record["identical"] and record["psnr_db"] is None

    noisy = evaluate(simulate(truth, 2, 0), truth)
    assert math.isfinite(noisy.psnr_db)
    assert noisy.ssim < 1.0
    assert noisy.residual_mad > 0.0
    table = format_table({"truth": same, "noisy": noisy})
    assert "inf" in table.splitlines()[1]
    assert len(table.splitlines()) == 3
