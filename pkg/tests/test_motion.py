import numpy as np
import pytest
from hypothesis import given, strategies as st

from motkit.data_model import BBox
from motkit.motion import (
    MotionNoiseConfig,
    bbox_to_state,
    kf_init,
    kf_predict,
    kf_update,
    state_to_bbox,
)

boxes = st.builds(
    BBox,
    x=st.floats(-200, 200),
    y=st.floats(-200, 200),
    w=st.floats(1, 300),
    h=st.floats(1, 300),
)


class TestInit:
    def test_mean_matches_box(self):
        s = kf_init(BBox(0, 0, 10, 20))
        assert np.allclose(s.mean, [5, 10, 0.5, 20, 0, 0, 0, 0])

    def test_round_trip_to_bbox(self):
        b = BBox(3, 7, 11, 13)
        out = state_to_bbox(kf_init(b).mean)
        assert out.to_list() == pytest.approx(b.to_list(), rel=1e-12)

    def test_covariance_diagonal_positive(self):
        s = kf_init(BBox(100, 50, 8, 60))
        assert np.all(np.diag(s.cov) > 0)
        assert np.allclose(s.cov, s.cov.T)

    @given(b=boxes)
    def test_state_bbox_round_trip(self, b):
        out = state_to_bbox(bbox_to_state(b))
        assert out.x == pytest.approx(b.x, rel=1e-9, abs=1e-9)
        assert out.y == pytest.approx(b.y, rel=1e-9, abs=1e-9)
        assert out.w == pytest.approx(b.w, rel=1e-9)
        assert out.h == pytest.approx(b.h, rel=1e-9)


class TestPredict:
    def test_zero_velocity_fixed_point(self):
        b = BBox(10, 20, 30, 40)
        _, predicted = kf_predict(kf_init(b))
        assert predicted.to_list() == pytest.approx(b.to_list(), rel=1e-12)

    def test_velocity_advances_center(self):
        s = kf_init(BBox(0, 0, 10, 20))
        s.mean[4] = 2.0
        out, _ = kf_predict(s)
        assert out.mean[0] == pytest.approx(7.0)

    def test_covariance_grows(self):
        s = kf_init(BBox(0, 0, 10, 20))
        out, _ = kf_predict(s)
        assert np.trace(out.cov) > np.trace(s.cov)

    def test_constant_velocity_convergence(self):
        # noiseless +3 px/frame track: after 10 predict/update cycles the
        # one-step prediction lands within half a pixel of the true center
        s = kf_init(BBox(0, 0, 10, 20))
        err = None
        for k in range(1, 11):
            s, predicted = kf_predict(s)
            true_box = BBox(3.0 * k, 0, 10, 20)
            err = abs(predicted.cx - true_box.cx)
            s = kf_update(s, true_box)
        assert err < 0.5


class TestUpdate:
    def test_zero_innovation_leaves_mean(self):
        s, predicted = kf_predict(kf_init(BBox(0, 0, 10, 20)))
        out = kf_update(s, predicted)
        assert np.allclose(out.mean, s.mean)

    def test_tiny_measurement_noise_snaps_to_observation(self):
        sharp = MotionNoiseConfig(meas_weight=1e-9)
        s, _ = kf_predict(kf_init(BBox(0, 0, 10, 20)), sharp)
        target = BBox(200, 300, 10, 20)
        out = kf_update(s, target, sharp)
        assert out.mean[0] == pytest.approx(target.cx, abs=1e-6)
        assert out.mean[1] == pytest.approx(target.cy, abs=1e-6)

    def test_position_uncertainty_shrinks(self):
        s, _ = kf_predict(kf_init(BBox(0, 0, 10, 20)))
        out = kf_update(s, BBox(2, 1, 10, 20))
        prior_pos = np.trace(s.cov[:2, :2])
        post_pos = np.trace(out.cov[:2, :2])
        assert post_pos <= prior_pos

    def test_rejects_nonfinite_state(self):
        s = kf_init(BBox(0, 0, 10, 20))
        s.mean[0] = np.nan
        with pytest.raises(ValueError):
            kf_update(s, BBox(0, 0, 10, 20))


class TestLongRun:
    def test_prediction_error_monotone_and_small(self):
        for vel, h in [(3.0, 20.0), (1.0, 40.0), (0.5, 10.0), (5.0, 60.0)]:
            s = kf_init(BBox(0, 0, h / 2, h))
            errs = []
            for k in range(1, 11):
                s, predicted = kf_predict(s)
                true_box = BBox(vel * k, 0, h / 2, h)
                errs.append(abs(predicted.cx - true_box.cx))
                s = kf_update(s, true_box)
            assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(2, len(errs) - 1))
            assert min(errs) < 1.0

    def test_covariance_spd_through_1000_cycles(self):
        rng = np.random.default_rng(7)
        s = kf_init(BBox(100, 100, 40, 50))
        for _ in range(1000):
            s, _ = kf_predict(s)
            obs = BBox(
                100 + rng.normal(0, 5),
                100 + rng.normal(0, 5),
                max(5.0, 40 + rng.normal(0, 2)),
                max(5.0, 50 + rng.normal(0, 2)),
            )
            s = kf_update(s, obs)
            assert np.allclose(s.cov, s.cov.T, atol=1e-9)
            assert np.linalg.eigvalsh(s.cov).min() > 0
        assert s.mean[3] > 0
