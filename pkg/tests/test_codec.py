"""Synth determinism, spectral contracts, codec round-trip."""

import numpy as np
import pytest

from timbremap import codec
from timbremap.config import DatasetConfig

CFG = DatasetConfig()
WIDE_CFG = DatasetConfig(pitch_lo=48, pitch_hi=72)


class TestSynth:
    @pytest.mark.parametrize("family,instrument", [(f, f * 5 + i) for f in range(4) for i in range(5)])
    def test_a440_spectral_peak_any_timbre(self, family, instrument):
        w = codec.synth_waveform(family, instrument, 69, WIDE_CFG)
        spec = np.abs(np.fft.rfft(w))
        freqs = np.fft.rfftfreq(w.size, 1.0 / WIDE_CFG.sample_rate)
        bin_width = freqs[1] - freqs[0]
        assert abs(freqs[spec.argmax()] - 440.0) <= bin_width

    def test_deterministic(self):
        a = codec.synth_waveform(1, 7, 65, CFG)
        b = codec.synth_waveform(1, 7, 65, CFG)
        np.testing.assert_array_equal(a, b)

    def test_peak_normalized(self):
        w = codec.synth_waveform(2, 11, 72, CFG)
        assert np.abs(w).max() == pytest.approx(0.7, rel=1e-9)

    def test_pitch_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="pitch"):
            codec.synth_waveform(0, 0, 90, CFG)

    def test_sibling_timbres_within_ten_percent_of_base(self):
        # recompute the seeded perturbation: every component of every
        # instrument's tuple stays within +-10% of its family base
        for fam in range(CFG.n_families):
            base = np.array(codec.FAMILY_BASE_TIMBRES[fam])
            for local in range(CFG.instruments_per_family):
                inst = fam * CFG.instruments_per_family + local
                tup = np.array(codec.instrument_timbre(fam, inst, CFG.seed))
                rel = np.abs(tup - base) / np.abs(base)
                assert np.all(rel <= 0.10 + 1e-12)

    def test_sibling_timbres_differ(self):
        t0 = codec.instrument_timbre(0, 0, CFG.seed)
        t1 = codec.instrument_timbre(0, 1, CFG.seed)
        assert t0 != t1


class TestEncode:
    def test_silence_is_all_zeros(self):
        emb = codec.encode(np.zeros(16000), CFG)
        np.testing.assert_array_equal(emb, np.zeros((32, 48)))

    def test_shape_contract(self):
        w = codec.synth_waveform(0, 3, 64, CFG)
        assert codec.encode(w, CFG).shape == (32, 48)

    def test_too_short_waveform_rejected(self):
        with pytest.raises(ValueError, match="window"):
            codec.encode(np.zeros(100), CFG)

    def test_sine_has_single_dominant_band(self):
        # derive the expected band from the filterbank response at 440 Hz
        fb = codec.build_filterbank(CFG.channels, CFG.sample_rate)
        expected_band = fb.weights[:, np.argmin(np.abs(fb.bin_hz - 440.0))].argmax()
        t = np.arange(16000) / CFG.sample_rate
        emb = codec.encode(0.5 * np.sin(2 * np.pi * 440.0 * t), CFG)
        assert np.all(emb.argmax(axis=0) == expected_band)

    def test_encode_deterministic(self):
        w = codec.synth_waveform(3, 16, 61, CFG)
        np.testing.assert_array_equal(codec.encode(w, CFG), codec.encode(w, CFG))


class TestDecode:
    def test_zeros_decode_to_silence(self):
        w = codec.decode(np.zeros((32, 48), dtype=np.float32), CFG)
        np.testing.assert_array_equal(w, np.zeros(16000))

    def test_roundtrip_band_energy_correlation(self):
        w = codec.synth_waveform(1, 5, 65, CFG)
        e0 = codec.encode(w, CFG)
        e1 = codec.encode(codec.decode(e0, CFG), CFG)
        corr = np.corrcoef(e0.reshape(-1), e1.reshape(-1))[0, 1]
        assert corr > 0.9

    def test_single_constant_band_is_steady_sinusoid(self):
        fb = codec.build_filterbank(CFG.channels, CFG.sample_rate)
        band = 10
        emb = np.zeros((32, 48), dtype=np.float32)
        emb[band, :] = 1.0
        w = codec.decode(emb, CFG)
        # steady amplitude away from the edge interpolation ramps
        mid = w[4000:12000]
        spec = np.abs(np.fft.rfft(mid))
        freqs = np.fft.rfftfreq(mid.size, 1.0 / CFG.sample_rate)
        assert abs(freqs[spec.argmax()] - fb.centers_hz[band]) < 4.0
        # amplitude envelope flat within 1%
        seg = np.abs(mid)
        assert seg.max() == pytest.approx(np.abs(w[6000:10000]).max(), rel=0.01)

    def test_nonfinite_embedding_rejected(self):
        emb = np.zeros((32, 48))
        emb[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            codec.decode(emb, CFG)


class TestWav:
    def test_roundtrip(self, tmp_path):
        w = codec.synth_waveform(0, 2, 62, CFG)
        path = tmp_path / "note.wav"
        codec.write_wav(path, w, CFG.sample_rate)
        back, rate = codec.read_wav(path)
        assert rate == CFG.sample_rate
        assert back.size == w.size
        np.testing.assert_allclose(back, np.clip(w, -1, 1), atol=1.0 / 32000)

    def test_wav_bytes_riff_header(self):
        blob = codec.wav_bytes(np.zeros(1600), 16000)
        assert blob[:4] == b"RIFF"
        assert blob[8:12] == b"WAVE"
        assert len(blob) == 44 + 1600 * 2

    def test_wav_bytes_matches_file(self, tmp_path):
        w = codec.synth_waveform(2, 10, 66, CFG)
        path = tmp_path / "x.wav"
        codec.write_wav(path, w, 16000)
        assert codec.wav_bytes(w, 16000) == path.read_bytes()
