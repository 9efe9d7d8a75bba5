import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vidsum import aesthetics as ae
from vidsum.errors import InputError
from vidsum.frame_quality import sharpness
from vidsum.media_io import Frame


def rgb_frame(rgb, h=8, w=8):
    return Frame(0, np.broadcast_to(np.asarray(rgb, float), (h, w, 3)).copy())


def gray_frame(plane):
    return Frame(0, np.repeat(np.asarray(plane, float)[..., None], 3, axis=-1))


def test_aesthetic_dimensions():
    assert ae.AESTHETIC_DIM == 59 and ae.FRAME_DIM == 62
    v = ae.assemble_frame_vector(rgb_frame((0.2, 0.4, 0.6)))
    assert v.shape == (62,) and tuple(v[59:]) == (0, 0, 0)
    v = ae.assemble_frame_vector(np.zeros(59), 3, 1, 1)
    assert tuple(v[59:]) == (3, 1, 1)
    for bad in ((np.zeros(58), 0, 0, 0), (np.zeros(59), -1, 0, 0), (np.zeros(59), 0, 0, 2)):
        with pytest.raises(InputError):
            ae.assemble_frame_vector(*bad)


def test_contrast_examples():
    assert ae.contrast(rgb_frame((0.3, 0.3, 0.3))) == 0.0
    half = np.zeros((4, 4))
    half[:, 2:] = 1.0
    assert ae.contrast(gray_frame(half)) == pytest.approx(2.0)
    assert ae.contrast(rgb_frame((0, 0, 0))) == 0.0


def test_hsv_means_examples():
    assert np.allclose(ae.hsv_means(rgb_frame((1, 0, 0))), [0, 1, 1, 0, 1, 1])
    assert np.allclose(ae.hsv_means(rgb_frame((0.5, 0.5, 0.5))), [0, 0, 0.5, 0, 0, 0.5])
    img = np.zeros((8, 8, 3))
    img[..., 0] = 1.0
    img[2:6, 2:6] = (0, 1, 0)
    m = ae.hsv_means(Frame(0, img))
    assert m[3] == pytest.approx(120.0)
    assert 0.0 < m[0] < 120.0


def test_itten_examples():
    out = ae.itten(rgb_frame((0, 1, 0)))
    h = out[:12]
    assert np.count_nonzero(h) == 1
    p = np.full(12, 0.0)
    p[np.argmax(h)] = 1.0
    assert out[20] == pytest.approx(np.sqrt(np.mean((p - 1 / 12) ** 2)))
    for hist in (out[:12], out[12:17], out[17:20]):
        assert hist.sum() == pytest.approx(1.0)
    img = np.repeat(np.array([0.1, 0.5, 0.9])[None, :], 3, axis=0)
    v = ae.itten(gray_frame(img))
    assert np.allclose(v[17:20], 1 / 3) and v[22] == pytest.approx(0.0)


def test_pad_examples():
    assert np.array_equal(ae.pad_from_means(0, 0), [0, 0, 0])
    assert np.allclose(ae.pad_from_means(1, 0), ae.PAD_COEFFS[:, 0])
    assert np.allclose(ae.pad_from_means(1, 0)[:2], [0.69, -0.31])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 5))
def test_pad_linear(v, s, a):
    assert np.allclose(ae.pad_from_means(a * v, a * s), a * ae.pad_from_means(v, s))


def brute_glcm(q, dr, dc, levels):
    P = np.zeros((levels, levels))
    h, w = q.shape
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < h and 0 <= c2 < w:
                P[q[r, c], q[r2, c2]] += 1
                P[q[r2, c2], q[r, c]] += 1
    return P / P.sum()


def test_haralick_constant_and_checkerboard():
    const = ae.haralick(gray_frame(np.full((8, 8), 0.4)))
    assert const[1] == 0.0 and const[0] == pytest.approx(1.0) and const[2] == 0.0
    board = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
    q = ae.quantize(board * 255.0)
    expected = np.mean([
        ((np.subtract.outer(np.arange(32), np.arange(32)) ** 2) * brute_glcm(q, dr, dc, 32)).sum()
        for dr, dc in ((0, 1), (-1, 1), (-1, 0), (-1, -1))
    ])
    assert ae.haralick(gray_frame(board))[1] == pytest.approx(expected)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_glcm_matches_brute_force(seed):
    q = np.random.default_rng(seed).integers(0, 6, (7, 9))
    for off in ((0, 1), (-1, 1), (-1, 0), (-1, -1)):
        assert np.allclose(ae.glcm(q, off, levels=6), brute_glcm(q, *off, 6))


def test_contrast_balance_examples():
    assert ae.contrast_balance(gray_frame(np.full((4, 4), 0.5))) == 0.0
    # a two-level image 0/255 is already equalised
    two = np.zeros((4, 4))
    two[:2] = 1.0
    assert ae.contrast_balance(gray_frame(two)) == 0.0
    # levels 100 and 120, half each: equalisation maps them to 0 and 255
    g = np.zeros((4, 4)) + 100 / 255
    g[2:] = 120 / 255
    assert ae.contrast_balance(gray_frame(g)) == pytest.approx((100 + 135) / 2)


def test_exposure_quality_examples():
    bimodal = np.zeros((4, 4))
    bimodal[:, 2:] = 1.0
    assert ae.exposure_quality(gray_frame(bimodal)) == pytest.approx(0.0, abs=1e-12)
    assert ae.exposure_quality(gray_frame(np.full((4, 4), 0.2))) == 0.0
    ramp = np.exp(-np.linspace(0, 4, 64)).reshape(8, 8)
    x = ramp.ravel()
    skew = np.mean((x - x.mean()) ** 3) / np.mean((x - x.mean()) ** 2) ** 1.5
    assert ae.exposure_quality(gray_frame(ramp)) == pytest.approx(-abs(skew))


def _blocky(seed=0, n=64):
    rng = np.random.default_rng(seed)
    return np.kron(rng.random((n // 8, n // 8)), np.ones((8, 8)))


def test_jpeg_quality_guards_and_ordering():
    assert ae.jpeg_quality(gray_frame(np.full((16, 16), 0.5))) == ae.JPEG_NO_DISTORTION
    blocky = _blocky()
    yy, xx = np.mgrid[0:64, 0:64] / 63.0
    smooth = 0.5 * blocky + 0.25 * (xx + yy)
    from scipy import ndimage

    blend = ndimage.uniform_filter(blocky, size=9, mode="nearest")
    assert ae.jpeg_quality(gray_frame(blocky)) < ae.jpeg_quality(gray_frame(blend))
    assert np.isfinite(ae.jpeg_quality(gray_frame(smooth)))


def test_jpeg_quality_follows_the_8px_grid():
    rng = np.random.default_rng(1)
    img = _blocky(2, 256) * 0.8 + 0.05 * rng.random((256, 256))
    base = ae.jpeg_quality(gray_frame(img))
    by8 = ae.jpeg_quality(gray_frame(np.roll(img, (8, 8), axis=(0, 1))))
    by4 = ae.jpeg_quality(gray_frame(np.roll(img, (4, 4), axis=(0, 1))))
    assert abs(by8 - base) < 0.05 * abs(base - by4)


def test_tenengrad_is_quality_sharpness():
    rng = np.random.default_rng(3)
    for _ in range(5):
        f = Frame(0, rng.random((9, 12, 3)))
        assert ae.tenengrad(f) == sharpness(f)
        assert ae.aesthetic_features(f)[49] == pytest.approx(sharpness(f))
    assert ae.tenengrad(rgb_frame((0.5, 0.5, 0.5))) == 0.0


def test_spectral_thirds():
    dot = np.zeros((60, 60))
    dot[28:32, 28:32] = 1.0
    m = ae.spectral_thirds(gray_frame(dot))
    assert m.sum() == pytest.approx(1.0)
    assert np.argmax(m) == 4 and m[4] > np.delete(m, 4).max()
    rng = np.random.default_rng(4)
    maxima = [ae.spectral_thirds(gray_frame(rng.random((48, 48)))).max() for _ in range(10)]
    assert np.mean(maxima) < 0.5


def test_shuffle_moves_spatial_features_only():
    rng = np.random.default_rng(5)
    yy, xx = np.mgrid[0:32, 0:32]
    img = np.stack([xx / 31.0, yy / 31.0, (xx * yy) / 961.0], axis=-1)
    flat = img.reshape(-1, 3)
    shuffled = flat[rng.permutation(len(flat))].reshape(img.shape)
    a = ae.aesthetic_features(Frame(0, img))
    b = ae.aesthetic_features(Frame(0, shuffled))
    # contrast, whole-image means, Itten, PAD, contrast balance, exposure
    free = [0, 1, 2, 3, *range(7, 33), 46, 47]
    assert np.allclose(a[free], b[free], atol=1e-9)
    assert not np.allclose(a[33:46], b[33:46])
    assert not np.allclose(a[50:59], b[50:59])


@pytest.mark.parametrize("rgb", [(0, 0, 0), (1, 1, 1), (0.5, 0.5, 0.5)])
def test_degenerate_frames_finite(rgb):
    assert np.all(np.isfinite(ae.aesthetic_features(rgb_frame(rgb, 3, 3))))


def test_vectors_csv_round_trip(tmp_path):
    vecs = np.random.default_rng(6).random((3, 62))
    ae.write_vectors_csv(tmp_path / "v.csv", [0, 5, 9], vecs)
    idx, back = ae.read_vectors_csv(tmp_path / "v.csv")
    assert idx == [0, 5, 9] and np.array_equal(back, vecs)
