import math

import numpy as np
import pytest

import sstempo


def test_log_bin_centers():
    c = sstempo.log_bin_centers()
    assert len(c) == 146
    assert c[11] == pytest.approx(30.2, abs=0.05)
    assert c[145] == pytest.approx(308.4, abs=0.1)


def test_loss_values():
    assert sstempo.huber(0.25) == 0.03125
    assert sstempo.huber(1.0) == 0.21875
    assert sstempo.sigma_of(30.0, 240.0) == 1.0 / 120.0
    assert sstempo.total_loss(0.001, 2.0) == 12.0


def test_click_track_and_novelty():
    audio = sstempo.synth_click_track(120.0, 5.0)
    assert audio.dtype == np.float32
    assert audio.shape == (5 * 22050,)
    nov, frame_rate = sstempo.novelty(audio)
    assert frame_rate == pytest.approx(22050 / 512)
    assert len(nov) == math.ceil(audio.size / 512)
    assert nov.max() == pytest.approx(1.0)


def test_fourier_tempogram_peak():
    audio = sstempo.synth_click_track(120.0, 20.0)
    tg, centers = sstempo.tempogram(audio, kind="fourier", log_axis=True)
    assert tg.shape[1] == len(centers) == 146
    mid = tg[tg.shape[0] // 2]
    assert abs(math.log2(centers[int(np.argmax(mid))] / 120.0)) <= 1.0 / 40


def test_hybrid_is_product():
    audio = sstempo.synth_click_track(90.0, 15.0)
    ta, _ = sstempo.tempogram(audio, kind="acf", log_axis=False)
    tf, _ = sstempo.tempogram(audio, kind="fourier", log_axis=False)
    th, _ = sstempo.tempogram(audio, kind="hybrid", log_axis=False)
    np.testing.assert_array_equal(th, ta * tf)


def test_sample_tempi_deterministic():
    a = sstempo.sample_tempi("lognormal", 100, seed=3, mu=70.0)
    b = sstempo.sample_tempi("lognormal", 100, seed=3, mu=70.0)
    assert a == b
    u = sstempo.sample_tempi("loguniform", 100, seed=3)
    assert min(u) >= 30.0 and max(u) < 240.0


def test_metrics():
    x = [float(i) for i in range(12)]
    assert sstempo.spearman(x, [v * v for v in x]) == pytest.approx(1.0)
    assert sstempo.saturation_metric(x, [0.5] * 12) == 1.0
    assert sstempo.saturation_metric(x, [0.01 * v for v in x]) == 0.0


def test_errors_map_to_exceptions():
    with pytest.raises(sstempo.ConfigError):
        sstempo.tempogram(np.zeros(44100, dtype=np.float32), kind="bogus")
    with pytest.raises(sstempo.DataError):
        sstempo.novelty(np.zeros(100, dtype=np.float32))
    with pytest.raises(sstempo.Error):
        sstempo.saturation_metric([1.0, 2.0], [0.0, 0.0])
