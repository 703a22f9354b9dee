"""
Tests for log-mel extraction, random crops and the feature cache.
"""
import numpy as np
import pytest

from audio.wav import Waveform
from errors import FeatureCacheError, SampleRateMismatchError, SegmentTooShortError
from features.cache import read_feature_cache, write_feature_cache
from features.crop import crop_events, random_crop_waveform
from features.melspec import FeatureConfig, log_mel_spectrogram, mel_band_centers, mel_filterbank


@pytest.fixture
def cfg():
    return FeatureConfig()


class TestLogMel:

    def test_ten_seconds_gives_499_frames(self, cfg, rng):
        spec = log_mel_spectrogram(Waveform(0.1 * rng.standard_normal(240000), 24000), cfg)
        assert spec.values.shape == (499, 128)
        assert spec.frame_hop_s == pytest.approx(0.02)
        assert cfg.num_frames(240000) == 499

    def test_silence_hits_the_floor(self, cfg):
        spec = log_mel_spectrogram(Waveform(np.zeros(24000), 24000), cfg)
        np.testing.assert_array_equal(spec.values, np.log(1e-10))

    @pytest.mark.parametrize('band', [60, 75, 90, 100])
    def test_tone_at_band_center(self, cfg, band):
        freq = mel_band_centers(cfg)[band]
        t = np.arange(24000) / 24000
        spec = log_mel_spectrogram(Waveform(0.5 * np.sin(2 * np.pi * freq * t), 24000), cfg)
        assert np.all(np.argmax(spec.values[1:-1], axis=1) == band)

    def test_scaling_shifts_by_log_power(self, cfg, rng):
        x = 0.05 * rng.standard_normal(12000)
        c = 3.0
        a = log_mel_spectrogram(Waveform(x, 24000), cfg).values
        b = log_mel_spectrogram(Waveform(c * x, 24000), cfg).values
        above = a > np.log(cfg.log_floor)
        assert above.all()
        np.testing.assert_allclose(b - a, 2 * np.log(c), atol=1e-6)

    def test_filterbank_shape_and_support(self, cfg):
        fb = mel_filterbank(cfg.sample_rate, cfg.n_fft, cfg.n_mels, cfg.fmin, cfg.mel_fmax)
        assert fb.shape == (128, 1025)
        assert np.all(fb >= 0)
        assert np.all(fb.max(axis=1) > 0)

    def test_wrong_sample_rate(self, cfg):
        with pytest.raises(SampleRateMismatchError):
            log_mel_spectrogram(Waveform(np.zeros(16000), 16000), cfg)

    def test_shorter_than_one_window(self, cfg):
        with pytest.raises(SegmentTooShortError):
            log_mel_spectrogram(Waveform(np.zeros(959), 24000), cfg)
        assert log_mel_spectrogram(Waveform(np.zeros(960), 24000), cfg).num_frames == 1


class TestCrop:

    def test_exact_length(self, rng):
        w = Waveform(rng.standard_normal(240000), 24000)
        assert len(random_crop_waveform(w, 5.0, rng)) == 120000

    def test_short_input_is_tiled(self, rng):
        samples = rng.standard_normal(48000)
        crop = random_crop_waveform(Waveform(samples, 24000), 5.0, rng)
        assert len(crop) == 120000
        np.testing.assert_array_equal(crop.samples, np.tile(samples, 3)[:120000])

    def test_crop_is_a_window_of_the_input(self, rng):
        samples = np.arange(24000, dtype=np.float64)
        crop = random_crop_waveform(Waveform(samples, 24000), 0.5, rng)
        offset = int(crop.samples[0])
        np.testing.assert_array_equal(crop.samples, samples[offset:offset + 12000])

    def test_fixed_seed_fixed_offset(self, rng):
        w = Waveform(rng.standard_normal(240000), 24000)
        a = random_crop_waveform(w, 5.0, np.random.default_rng(3))
        b = random_crop_waveform(w, 5.0, np.random.default_rng(3))
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_event_clipped_into_window(self):
        assert crop_events([(9.0, 12.0, 4)], offset_s=10.0, crop_s=30.0, duration_s=40.0) == [(0.0, 2.0, 4)]

    def test_events_outside_window_dropped(self):
        assert crop_events([(1.0, 2.0, 0), (30.0, 31.0, 1)], offset_s=5.0, crop_s=5.0, duration_s=40.0) == []

    def test_events_repeat_in_tiled_crop(self):
        events = crop_events([(0.5, 1.0, 2)], offset_s=0.0, crop_s=5.0, duration_s=2.0)
        assert events == [(0.5, 1.0, 2), (2.5, 3.0, 2), (4.5, 5.0, 2)]


class TestFeatureCache:

    def test_write_then_read(self, tmp_path, cfg, rng):
        spec = log_mel_spectrogram(Waveform(0.1 * rng.standard_normal(24000), 24000), cfg)
        path = tmp_path / 'clip.lmel'
        write_feature_cache(path, spec)
        loaded = read_feature_cache(path)
        assert loaded.values.dtype == np.float32
        assert loaded.frame_hop_s == spec.frame_hop_s
        np.testing.assert_allclose(loaded.values, spec.values, rtol=1e-6)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'junk.lmel'
        path.write_bytes(b'XXXX' + bytes(16))
        with pytest.raises(FeatureCacheError):
            read_feature_cache(path)

    def test_truncated_payload(self, tmp_path, cfg):
        spec = log_mel_spectrogram(Waveform(np.zeros(2400), 24000), cfg)
        path = tmp_path / 'cut.lmel'
        write_feature_cache(path, spec)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FeatureCacheError):
            read_feature_cache(path)
