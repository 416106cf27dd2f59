import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmvc.augment import RPConfig, partner_rate, random_prosody, stretch_segment
from pmvc.dsp import MelParams, MelSpectrogram
from pmvc.errors import ValidationError

PARAMS = MelParams()


def _spec(frames):
    return MelSpectrogram(frames=np.asarray(frames, dtype=np.float32), params=PARAMS)


def _random_spec(t, f=8, seed=0):
    rng = np.random.default_rng(seed)
    return _spec(rng.standard_normal((t, f)))


class TestPartnerRate:
    def test_identity_fixed_point(self):
        assert partner_rate(1.0) == 1.0

    def test_low_end(self):
        assert partner_rate(0.6) == pytest.approx(3.0)

    def test_high_end(self):
        assert partner_rate(2.0) == pytest.approx(2.0 / 3.0)

    @pytest.mark.parametrize("a", [0.5, 0.3, -1.0])
    def test_domain_error(self, a):
        with pytest.raises(ValidationError):
            partner_rate(a)

    def test_duration_pairing_identity(self):
        a = np.linspace(0.5001, 2.0, 1000)
        assert np.all(np.abs(1.0 / a + (2.0 * a - 1.0) / a - 2.0) < 1e-12)


class TestStretchSegment:
    def test_identity(self):
        seg = np.random.default_rng(0).standard_normal((2, 4)).astype(np.float32)
        assert np.array_equal(stretch_segment(seg, 2), seg)

    def test_midpoint_interpolation(self):
        v = np.array([1.0, 2.0], dtype=np.float32)
        w = np.array([3.0, 6.0], dtype=np.float32)
        out = stretch_segment(np.stack([v, w]), 3)
        assert np.allclose(out, np.stack([v, (v + w) / 2, w]))

    def test_shrink_to_one_keeps_left_endpoint(self):
        v = np.array([1.0, 2.0], dtype=np.float32)
        w = np.array([3.0, 6.0], dtype=np.float32)
        out = stretch_segment(np.stack([v, w]), 1)
        assert np.array_equal(out, v[None])

    def test_against_interp_oracle(self):
        rng = np.random.default_rng(7)
        for t, new_len in [(2, 3), (4, 7), (5, 2), (3, 1), (6, 6)]:
            seg = rng.standard_normal((t, 3))
            out = stretch_segment(seg, new_len)
            pos = np.linspace(0, t - 1, new_len) if new_len > 1 else np.array([0.0])
            expected = np.stack([np.interp(pos, np.arange(t), seg[:, c]) for c in range(3)], axis=1)
            assert np.allclose(out, expected, atol=1e-6)

    def test_bad_args(self):
        seg = np.zeros((2, 3), dtype=np.float32)
        with pytest.raises(ValidationError):
            stretch_segment(seg, 0)
        with pytest.raises(ValidationError):
            stretch_segment(np.zeros((0, 3)), 2)


class TestRandomProsody:
    def test_length_preserved_default_config(self):
        pair = random_prosody(_random_spec(256), RPConfig(), rng_seed=5)
        assert pair.augmented.n_frames == 256
        assert pair.original.n_frames == 256

    def test_identity_collapse(self):
        cfg = RPConfig(rate_low=1.0, rate_high=1.0)
        for seed in range(10):
            spec = _random_spec(64, seed=seed)
            pair = random_prosody(spec, cfg, rng_seed=seed)
            assert np.array_equal(pair.augmented.frames, spec.frames)

    def test_deterministic(self):
        spec = _random_spec(128)
        a = random_prosody(spec, RPConfig(), rng_seed=42)
        b = random_prosody(spec, RPConfig(), rng_seed=42)
        assert np.array_equal(a.augmented.frames, b.augmented.frames)

    def test_two_pair_case_matches_reference(self):
        # T=4, t=2: one pair, lengths round(2/a) and 4 - round(2/a)
        spec = _random_spec(4, seed=3)
        cfg = RPConfig()
        seed = 12345
        pair = random_prosody(spec, cfg, rng_seed=seed)
        # reference: replay the documented draw order
        rng = np.random.default_rng(seed)
        i_pos, j_pos = rng.choice(2, size=2, replace=False)
        a = float(rng.uniform(cfg.rate_low, cfg.rate_high))
        len_i = int(np.clip(round(2 / a), 1, 3))
        lengths = {int(i_pos): len_i, int(j_pos): 4 - len_i}
        expected = np.concatenate(
            [stretch_segment(spec.frames[k * 2 : (k + 1) * 2], lengths[k]) for k in (0, 1)]
        )
        assert pair.augmented.n_frames == 4
        assert np.array_equal(pair.augmented.frames, expected)

    def test_odd_segment_passthrough(self):
        # T=6, t=2 -> 3 segments; the unpaired one is copied verbatim
        spec = _spec(np.arange(18, dtype=np.float32).reshape(6, 3))
        pair = random_prosody(spec, RPConfig(), rng_seed=0)
        assert pair.augmented.n_frames == 6

    def test_trailing_remainder_passthrough(self):
        spec = _spec(np.arange(15, dtype=np.float32).reshape(5, 3))
        pair = random_prosody(spec, RPConfig(), rng_seed=1)
        assert pair.augmented.n_frames == 5
        assert np.array_equal(pair.augmented.frames[4:], spec.frames[4:])

    def test_order_preservation(self):
        # frames encode their own index: augmentation must stay non-decreasing
        idx = np.repeat(np.arange(64, dtype=np.float32)[:, None], 4, axis=1)
        pair = random_prosody(_spec(idx), RPConfig(), rng_seed=9)
        values = pair.augmented.frames[:, 0]
        assert np.all(np.diff(values) >= -1e-6)

    def test_piecewise_constant_segments_preserved(self):
        # each 2-frame segment constant: interpolation cannot invent values
        base = np.repeat(np.arange(32, dtype=np.float32), 2)[:, None]
        pair = random_prosody(_spec(np.repeat(base, 3, axis=1)), RPConfig(), rng_seed=4)
        assert set(np.unique(pair.augmented.frames)) <= set(np.unique(base))

    def test_too_short_rejected(self):
        with pytest.raises(ValidationError):
            random_prosody(_random_spec(1), RPConfig(split_length=2), rng_seed=0)

    @settings(max_examples=150, deadline=None)
    @given(
        t=st.sampled_from([1, 2, 4]),
        total=st.integers(min_value=4, max_value=300),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_length_preservation_property(self, t, total, seed):
        spec = _random_spec(total, f=4, seed=seed % 17)
        pair = random_prosody(spec, RPConfig(split_length=t), rng_seed=seed)
        assert pair.augmented.n_frames == total


class TestRPConfig:
    def test_rejects_rate_low_at_half(self):
        with pytest.raises(ValidationError):
            RPConfig(rate_low=0.5)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValidationError):
            RPConfig(rate_low=1.5, rate_high=1.0)
