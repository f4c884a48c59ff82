import math

import numpy as np
import pytest

from limo.errors import NumericError, ShapeMismatch
from limo.nn import Parameter, grad_check
from limo.nn import tensor as tp
from limo.nn.tensor import Tensor
from limo.portrait import (
    AudioEncoder,
    DynamicTokenProjector,
    ResponsiveInteraction,
    WindowTooLarge,
    _check_rows_normalized,
    speaker_motion_weight,
    time_dependent_tokens,
)


def motion(seed, t=20, scale=1.0):
    return np.random.default_rng(seed).normal(size=(t, 70)) * scale


class TestSpeakerMotionWeight:
    def test_constant_motion_gives_window(self):
        s = np.full((30, 70), 2.5)
        w = speaker_motion_weight(s, window=5)
        np.testing.assert_allclose(w, np.full((30, 70), 5.0), rtol=0, atol=0)

    def test_ramp_steady_state(self):
        s = np.zeros((40, 70))
        s[:, 3] = 0.1 * np.arange(40)
        w = speaker_motion_weight(s, window=5)
        want = 5.0 * math.exp(0.1)
        np.testing.assert_allclose(w[6:, 3], want, rtol=1e-12)
        # before the window fills, early rows mix exp(0) padding terms
        np.testing.assert_allclose(w[0, 3], 5.0, rtol=0)
        np.testing.assert_allclose(w[5, 3], 1.0 + 4.0 * math.exp(0.1), rtol=1e-12)

    def test_clamp_bounds_large_jumps(self):
        s = np.zeros((3, 70))
        s[1:, 0] = 50.0  # |diff| = 50 at i=1, clamped to 10
        with pytest.warns(WindowTooLarge):
            w = speaker_motion_weight(s, window=5)
        np.testing.assert_allclose(w[2, 0], 4.0 + math.exp(10.0), rtol=1e-12)
        assert np.all(np.isfinite(w))

    def test_range_invariant(self):
        w = speaker_motion_weight(motion(0, t=50, scale=30.0), window=5)
        assert np.all(w >= 5.0 - 1e-12)
        assert np.all(w <= 5.0 * math.exp(10.0) + 1e-6)

    def test_causality(self):
        s = motion(1, t=25)
        base = speaker_motion_weight(s, window=5)
        for j in (3, 10, 24):
            s2 = s.copy()
            s2[j] += 1.0
            pert = speaker_motion_weight(s2, window=5)
            np.testing.assert_array_equal(pert[: j + 1], base[: j + 1])
            if j + 1 < len(s):
                assert np.max(np.abs(pert[j + 1 :] - base[j + 1 :])) > 0

    def test_window_at_least_clip_warns(self):
        with pytest.warns(WindowTooLarge):
            speaker_motion_weight(motion(2, t=4), window=5)

    def test_bad_window(self):
        with pytest.raises(ShapeMismatch):
            speaker_motion_weight(motion(3, t=10), window=0)


class TestAudioEncoder:
    def make(self, seed=0, width=16):
        rng = np.random.default_rng(seed)
        return AudioEncoder(45, width, 2, 2, 32, rng)

    def test_zero_input_zero_output(self):
        enc = self.make()
        out = enc(np.zeros((7, 45)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-300)

    def test_shapes_including_single_frame(self):
        enc = self.make()
        assert enc(np.random.default_rng(1).normal(size=(9, 45))).shape == (9, 16)
        assert enc(np.random.default_rng(2).normal(size=(1, 45))).shape == (1, 16)

    def test_gradient_wrt_input(self):
        rng = np.random.default_rng(3)
        enc = self.make(seed=3, width=8)
        x = Parameter(rng.normal(size=(4, 45)), "x")
        proj = rng.normal(size=(4, 8))
        rep = grad_check(lambda: tp.tsum(enc(x) * Tensor(proj)), x)
        assert rep.passed, rep.max_rel_err

    def test_deterministic(self):
        enc = self.make()
        a = np.random.default_rng(4).normal(size=(6, 45))
        np.testing.assert_array_equal(enc(a).data, enc(a).data)


class TestResponsiveInteraction:
    def make(self, width=8, seed=0):
        return ResponsiveInteraction(width, np.random.default_rng(seed))

    def test_single_token_rows_are_one(self):
        ri = self.make()
        a = Tensor(np.random.default_rng(1).normal(size=(6, 8)))
        h = Tensor(np.random.default_rng(2).normal(size=(1, 8)))
        m = ri(a, h)
        np.testing.assert_allclose(m.data, np.ones((6, 1)), rtol=0, atol=0)

    def test_identical_audio_rows_identical_weights(self):
        ri = self.make()
        row = np.random.default_rng(3).normal(size=8)
        a = Tensor(np.tile(row, (5, 1)))
        h = Tensor(np.random.default_rng(4).normal(size=(3, 8)))
        m = ri(a, h).data
        for t in range(1, 5):
            np.testing.assert_allclose(m[t], m[0], rtol=0, atol=0)

    def test_brute_force_oracle(self):
        # triple-loop softmax over explicit projected dot products
        width = 8
        ri = self.make(width=width, seed=5)
        r = np.random.default_rng(6)
        a_raw, h_raw = r.normal(size=(3, width)), r.normal(size=(2, width))
        m = ri(Tensor(a_raw), Tensor(h_raw)).data

        pa = a_raw @ ri.audio_proj.w.data + ri.audio_proj.b.data
        ph = h_raw @ ri.text_proj.w.data + ri.text_proj.b.data
        want = np.zeros((3, 2))
        for t in range(3):
            logits = np.array(
                [sum(pa[t, c] * ph[i, c] for c in range(width)) for i in range(2)]
            ) / math.sqrt(width)
            e = np.exp(logits - logits.max())
            want[t] = e / e.sum()
        np.testing.assert_allclose(m, want, rtol=0, atol=1e-12)

    def test_rows_sum_to_one(self):
        ri = self.make()
        r = np.random.default_rng(7)
        m = ri(Tensor(r.normal(size=(20, 8)) * 3), Tensor(r.normal(size=(9, 8)) * 3))
        np.testing.assert_allclose(m.data.sum(axis=1), 1.0, rtol=0, atol=1e-9)

    def test_normalization_tripwire(self):
        with pytest.raises(NumericError):
            _check_rows_normalized(np.array([[0.5, 0.4]]))


class TestTimeDependentTokens:
    def test_one_hot_selects_rows(self):
        h = Tensor(np.random.default_rng(0).normal(size=(4, 6)))
        m = np.zeros((3, 4))
        m[0, 2] = m[1, 0] = m[2, 3] = 1.0
        e = time_dependent_tokens(Tensor(m), h).data
        np.testing.assert_allclose(e[0], h.data[2], atol=0)
        np.testing.assert_allclose(e[1], h.data[0], atol=0)
        np.testing.assert_allclose(e[2], h.data[3], atol=0)

    def test_uniform_weights_average(self):
        h = Tensor(np.random.default_rng(1).normal(size=(5, 6)))
        m = Tensor(np.full((2, 5), 0.2))
        e = time_dependent_tokens(m, h).data
        np.testing.assert_allclose(e, np.tile(h.data.mean(axis=0), (2, 1)), atol=1e-15)

    def test_triple_loop_oracle(self):
        r = np.random.default_rng(2)
        h = r.normal(size=(3, 5))
        logits = r.normal(size=(5, 3))
        m = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        e = time_dependent_tokens(Tensor(m), Tensor(h)).data
        want = np.zeros((5, 5))
        for t in range(5):
            for c in range(5):
                want[t, c] = sum(m[t, i] * h[i, c] for i in range(3))
        np.testing.assert_allclose(e, want, rtol=0, atol=1e-12)

    def test_convex_hull_containment(self):
        r = np.random.default_rng(3)
        for k in range(20):
            h = r.normal(size=(4, 6)) * (1 + k)
            logits = r.normal(size=(7, 4)) * 2
            m = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
            e = time_dependent_tokens(Tensor(m), Tensor(h)).data
            lo, hi = h.min(axis=0), h.max(axis=0)
            assert np.all(e >= lo - 1e-9) and np.all(e <= hi + 1e-9)


class TestDynamicTokenProjector:
    def test_identity_on_token_block(self):
        rng = np.random.default_rng(0)
        proj = DynamicTokenProjector(6, 70, rng)
        w = np.zeros((76, 6))
        w[:6, :6] = np.eye(6)
        proj.proj.w.data = w
        proj.proj.b.data = np.zeros(6)
        e = Tensor(rng.normal(size=(5, 6)))
        weight = np.abs(rng.normal(size=(5, 70)))
        np.testing.assert_allclose(proj(e, weight).data, e.data, atol=1e-15)

    def test_zero_tokens_uses_weight_block(self):
        rng = np.random.default_rng(1)
        proj = DynamicTokenProjector(6, 70, rng)
        e = Tensor(np.zeros((4, 6)))
        weight = rng.normal(size=(4, 70))
        want = weight @ proj.proj.w.data[6:] + proj.proj.b.data
        np.testing.assert_allclose(proj(e, weight).data, want, atol=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(2)
        proj = DynamicTokenProjector(4, 70, rng)
        e = Parameter(rng.normal(size=(3, 4)), "e")
        weight = np.abs(rng.normal(size=(3, 70)))
        r = rng.normal(size=(3, 4))
        rep = grad_check(lambda: tp.tsum(proj(e, weight) * Tensor(r)), e)
        assert rep.passed, rep.max_rel_err

    def test_frame_mismatch(self):
        proj = DynamicTokenProjector(4, 70, np.random.default_rng(3))
        with pytest.raises(ShapeMismatch):
            proj(Tensor(np.zeros((3, 4))), np.zeros((4, 70)))
