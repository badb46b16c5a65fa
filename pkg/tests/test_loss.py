"""Loss tests: naive loop oracles, kernel algebra, analytic gradient."""

import numpy as np
import pytest

from synthcolon.loss import (DEFAULT_WEIGHTS, KERNEL_SIZE, conv2d_replicate,
                             gaussian_taps, grad_check, gradient_maps,
                             hessian_kernels, hessian_maps, loss_c, loss_e,
                             loss_gradient, loss_z, total_loss)
from synthcolon.rawio import load_raw, save_raw


# ---------------------------------------------------------------------------
# naive reference implementations (loops + index clamping only)
# ---------------------------------------------------------------------------

def _naive_conv(img, kernel):
    h, w = img.shape
    kh, kw = kernel.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for a in range(kh):
                for b in range(kw):
                    r = min(max(i + a - 6, 0), h - 1)
                    c = min(max(j + b - 6, 0), w - 1)
                    acc += kernel[a, b] * img[r, c]
            out[i, j] = acc
    return out


def _naive_gradients(img):
    h, w = img.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            jp = min(j + 1, w - 1)
            jm = max(j - 1, 0)
            gx[i, j] = 0.5 * (img[i, jp] - img[i, jm])
            ip = min(i + 1, h - 1)
            im = max(i - 1, 0)
            gy[i, j] = 0.5 * (img[ip, j] - img[im, j])
    return gx, gy


def _naive_loss_z(pred, truth):
    return float(np.sum(np.abs(pred - truth))) / pred.size


def _naive_loss_e(pred, truth):
    pgx, pgy = _naive_gradients(pred)
    tgx, tgy = _naive_gradients(truth)
    return float(np.sum(np.abs(pgx - tgx)) + np.sum(np.abs(pgy - tgy))) / pred.size


def _naive_loss_c(pred, truth):
    k_xx, k_xy, k_yy = hessian_kernels()
    acc = 0.0
    for k, mult in ((k_xx, 1.0), (k_xy, 2.0), (k_yy, 1.0)):
        acc += mult * np.sum(np.abs(_naive_conv(pred, k) - _naive_conv(truth, k)))
    return float(acc) / pred.size


def _random_pair(rng, max_side=32):
    h = int(rng.integers(4, max_side + 1))
    w = int(rng.integers(4, max_side + 1))
    truth = rng.uniform(0.0, 1.0, size=(h, w))
    pred = truth + rng.normal(scale=0.2, size=(h, w))
    return pred, truth


class TestKernels:
    def test_tap_normalization(self):
        g, g1, g2 = gaussian_taps()
        assert g.shape == (12,)
        assert g.sum() == pytest.approx(1.0, abs=1e-15)
        assert abs(g1.sum()) < 2e-16
        assert abs(g2.sum()) < 2e-16

    def test_half_integer_offsets_have_no_center_tap(self):
        g, _, _ = gaussian_taps()
        # symmetric pairs around the half-integer center
        assert np.allclose(g, g[::-1])

    def test_kernel_shapes_and_separability(self):
        k_xx, k_xy, k_yy = hessian_kernels()
        g, g1, g2 = gaussian_taps()
        assert k_xx.shape == (KERNEL_SIZE, KERNEL_SIZE)
        assert np.allclose(k_xx, np.outer(g, g2))
        assert np.allclose(k_xy, np.outer(g1, g1))
        assert np.allclose(k_yy, k_xx.T)

    def test_constant_image_has_zero_response(self):
        img = np.full((9, 14), 3.7)
        for resp in hessian_maps(img):
            assert np.allclose(resp, 0.0, atol=1e-13)

    def test_linear_ramp_has_zero_interior_curvature(self):
        y, x = np.mgrid[0:40, 0:40].astype(np.float64)
        img = 0.3 * x + 0.7 * y
        h_xx, h_xy, h_yy = hessian_maps(img)
        interior = (slice(12, 28), slice(12, 28))
        assert np.allclose(h_xx[interior], 0.0, atol=1e-12)
        assert np.allclose(h_xy[interior], 0.0, atol=1e-12)
        assert np.allclose(h_yy[interior], 0.0, atol=1e-12)

    def test_quadratic_has_constant_positive_xx_response(self):
        y, x = np.mgrid[0:40, 0:40].astype(np.float64)
        img = 0.5 * x * x
        h_xx, _, h_yy = hessian_maps(img)
        interior = (slice(12, 28), slice(12, 28))
        vals = h_xx[interior]
        assert vals.std() < 1e-10
        # closed form: only the second moment of the g2 taps survives
        g2 = gaussian_taps()[2]
        expected = 0.5 * np.sum(g2 * (np.arange(12) - 6.0) ** 2)
        assert vals.mean() == pytest.approx(expected, rel=1e-12)
        assert expected > 0.3
        assert np.allclose(h_yy[interior], 0.0, atol=1e-10)


class TestAgainstNaiveLoops:
    def test_conv_matches_clamped_loops(self):
        rng = np.random.default_rng(7)
        k_xx, k_xy, _ = hessian_kernels()
        for k in (k_xx, k_xy):
            img = rng.uniform(-1.0, 1.0, size=(15, 19))
            assert np.allclose(conv2d_replicate(img, k), _naive_conv(img, k),
                               rtol=1e-12, atol=1e-13)

    def test_gradients_match_loops(self):
        rng = np.random.default_rng(8)
        img = rng.uniform(0.0, 1.0, size=(11, 23))
        gx, gy = gradient_maps(img)
        ngx, ngy = _naive_gradients(img)
        assert np.array_equal(gx, ngx)
        assert np.array_equal(gy, ngy)

    def test_loss_terms_match_loops(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            pred, truth = _random_pair(rng, max_side=20)
            assert loss_z(pred, truth) == pytest.approx(
                _naive_loss_z(pred, truth), rel=1e-12, abs=1e-12)
            assert loss_e(pred, truth) == pytest.approx(
                _naive_loss_e(pred, truth), rel=1e-12, abs=1e-12)
            assert loss_c(pred, truth) == pytest.approx(
                _naive_loss_c(pred, truth), rel=1e-12, abs=1e-12)


class TestLossProperties:
    def test_identical_inputs_give_zero(self):
        rng = np.random.default_rng(10)
        img = rng.uniform(0.0, 1.0, size=(12, 12))
        out = total_loss(img, img)
        assert out.loss_z == out.loss_e == out.loss_c == out.total == 0.0

    def test_symmetry_in_arguments(self):
        rng = np.random.default_rng(11)
        pred, truth = _random_pair(rng, max_side=16)
        a = total_loss(pred, truth)
        b = total_loss(truth, pred)
        assert a.total == pytest.approx(b.total, rel=1e-12)

    def test_constant_offset_only_moves_depth_term(self):
        rng = np.random.default_rng(12)
        pred, truth = _random_pair(rng, max_side=16)
        base = total_loss(pred, truth)
        off = total_loss(pred + 5.0, truth)
        assert off.loss_e == pytest.approx(base.loss_e, rel=1e-12)
        assert off.loss_c == pytest.approx(base.loss_c, rel=1e-12, abs=1e-12)
        assert off.loss_z > base.loss_z

    def test_weight_ablations_compose(self):
        rng = np.random.default_rng(13)
        pred, truth = _random_pair(rng, max_side=16)
        for w in ((1.0, 0.0, 0.0), (0.5, 0.5, 0.0), (0.5, 0.0, 0.5),
                  (0.1, 0.3, 0.6)):
            out = total_loss(pred, truth, weights=w)
            expected = (w[0] * out.loss_z + w[1] * out.loss_e
                        + w[2] * out.loss_c)
            assert out.total == pytest.approx(expected, rel=1e-15)
        assert total_loss(pred, truth).weights == DEFAULT_WEIGHTS

    def test_bad_weights_rejected(self):
        img = np.ones((4, 4))
        with pytest.raises(ValueError):
            total_loss(img, img, weights=(0.5, 0.5))
        with pytest.raises(ValueError):
            total_loss(img, img, weights=(-0.1, 0.5, 0.6))

    def test_nonfinite_rejected(self):
        img = np.ones((4, 4))
        bad = img.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            loss_z(bad, img)


class TestGradient:
    def test_matches_finite_differences_16x16(self):
        rng = np.random.default_rng(14)
        truth = rng.uniform(0.0, 1.0, size=(16, 16))
        pred = truth + rng.normal(scale=0.3, size=(16, 16))
        report = grad_check(pred, truth)
        assert report["checked_pixels"] > 50
        assert report["max_abs_error"] < 1e-4

    def test_matches_on_depth_term_alone(self):
        rng = np.random.default_rng(15)
        truth = rng.uniform(0.0, 1.0, size=(10, 10))
        pred = truth + rng.normal(scale=0.3, size=(10, 10))
        report = grad_check(pred, truth, weights=(1.0, 0.0, 0.0))
        assert report["max_abs_error"] < 1e-7

    def test_gradient_shape_and_direction(self):
        rng = np.random.default_rng(16)
        truth = rng.uniform(0.0, 1.0, size=(16, 16))
        pred = truth + rng.normal(scale=0.3, size=(16, 16))
        g = loss_gradient(pred, truth)
        assert g.shape == pred.shape
        # one explicit descent step must reduce the loss
        before = total_loss(pred, truth).total
        after = total_loss(pred - 0.05 * g / np.abs(g).max(), truth).total
        assert after < before

    def test_zero_at_optimum_interiorwise(self):
        img = np.linspace(0.0, 1.0, 64).reshape(8, 8)
        g = loss_gradient(img, img)
        # sign(0) = 0 everywhere: the subgradient choice at the optimum
        assert np.array_equal(g, np.zeros_like(g))


class TestRawExchange:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(17)
        arr = rng.uniform(0.0, 25.0, size=(19, 7)).astype(np.float32)
        path = tmp_path / "depth.raw"
        save_raw(path, arr)
        back = load_raw(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)
        assert path.stat().st_size == 8 + 4 * 19 * 7

    def test_header_layout(self, tmp_path):
        path = tmp_path / "grid.raw"
        save_raw(path, np.zeros((3, 5), dtype=np.float32))
        blob = path.read_bytes()
        assert int.from_bytes(blob[0:4], "little") == 3
        assert int.from_bytes(blob[4:8], "little") == 5

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.raw"
        save_raw(path, np.zeros((3, 5), dtype=np.float32))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ValueError):
            load_raw(path)

    def test_bad_shape_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            save_raw(tmp_path / "x.raw", np.zeros((2, 2, 2)))
