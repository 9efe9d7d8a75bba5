import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vidsum.errors import FormatError, InputError, UnsupportedFormatError
from vidsum.media_io import (ArraySource, Frame, downscale, open_source, subsample,
                             subsample_indices, to_grayscale, to_hsv, write_image_dir,
                             write_y4m)


def solid(rgb, h=4, w=6):
    return Frame(0, np.broadcast_to(np.asarray(rgb, float), (h, w, 3)).copy())


def test_grayscale_examples():
    assert np.allclose(to_grayscale(solid((1, 1, 1))), 1.0)
    assert np.allclose(to_grayscale(solid((1, 0, 0))), 0.2126)
    assert np.all(to_grayscale(solid((0, 0, 0)), "byte") == 0.0)
    with pytest.raises(InputError):
        to_grayscale(solid((0, 0, 0)), "percent")


@pytest.mark.parametrize("rgb,hsv", [
    ((1, 0, 0), (0, 1, 1)),
    ((0.5, 0.5, 0.5), (0, 0, 0.5)),
    ((0, 1, 0), (120, 1, 1)),
    ((0, 0, 1), (240, 1, 1)),
    ((0, 0, 0), (0, 0, 0)),
])
def test_hsv_examples(rgb, hsv):
    assert np.allclose(to_hsv(solid(rgb))[0, 0], hsv)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(0, 1)] * 3))
def test_hsv_matches_colorsys(rgb):
    import colorsys

    h, s, v = colorsys.rgb_to_hsv(*rgb)
    got = to_hsv(np.array([[rgb]]))[0, 0]
    ref_h = (h * 360.0) % 360.0 if s > 0 else 0.0
    assert got[1] == pytest.approx(s, abs=1e-12)
    assert got[2] == pytest.approx(v, abs=1e-12)
    if s > 1e-9:
        d = abs(got[0] - ref_h)
        assert min(d, 360 - d) < 1e-6
    assert 0.0 <= got[0] < 360.0


def test_frame_is_immutable_and_validated():
    f = solid((0.2, 0.3, 0.4))
    with pytest.raises(ValueError):
        f.rgb[0, 0, 0] = 1.0
    with pytest.raises(InputError):
        Frame(0, np.zeros((4, 4)))


def test_downscale_block_average():
    rgb = np.random.default_rng(0).random((8, 12, 3))
    small = downscale(Frame(3, rgb), 6)
    assert (small.height, small.width, small.index) == (4, 6, 3)
    ref = rgb.reshape(4, 2, 6, 2, 3).mean(axis=(1, 3))
    assert np.allclose(small.rgb, ref)
    assert downscale(Frame(0, rgb), 0).width == 12


def test_subsample_stride_arithmetic():
    src = ArraySource(np.zeros((100, 2, 2, 3), np.uint8), fps=24)
    frames, index_map = subsample(src, 2)
    assert len(index_map) == 9 and index_map[1] == 12
    assert [f.index for f in frames] == index_map
    assert subsample_indices(10, 24, 24) == list(range(10))
    with pytest.raises(InputError):
        subsample_indices(10, 24, 48)


def _frames(n=5, h=16, w=20, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(n, h, w, 3), dtype=np.uint8)


def test_image_dir_round_trip(tmp_path):
    frames = _frames(10)
    write_image_dir(tmp_path / "v", frames, fps=24)
    src = open_source(tmp_path / "v")
    assert (src.fps, src.n_frames, src.width, src.height) == (24, 10, 20, 16)
    assert np.array_equal(np.round(src.read(7).rgb * 255).astype(np.uint8), frames[7])


def test_image_dir_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(FormatError):
        open_source(tmp_path / "empty")
    write_image_dir(tmp_path / "v", _frames(2), fps=24)
    meta = json.loads((tmp_path / "v" / "frames.json").read_text())
    del meta["fps"]
    (tmp_path / "v" / "frames.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError):
        open_source(tmp_path / "v")


@pytest.mark.parametrize("colorspace", ["444", "420jpeg"])
def test_y4m_round_trip(tmp_path, colorspace):
    # smooth content so 4:2:0 chroma loss stays small
    yy, xx = np.mgrid[0:16, 0:20]
    base = np.stack([xx * 12, yy * 15, (xx + yy) * 6], axis=-1).astype(np.uint8)
    frames = np.stack([base, base[::-1]])
    path = tmp_path / "v.y4m"
    write_y4m(path, frames, fps=25, colorspace=colorspace)
    src = open_source(path)
    assert (src.fps, src.n_frames, src.width) == (25, 2, 20)
    got = src.read(1).rgb
    tol = 2.0 / 255 if colorspace == "444" else 12.0 / 255
    assert np.max(np.abs(got - frames[1] / 255.0)) <= tol
    src.close()


def test_y4m_header_fields(tmp_path):
    path = tmp_path / "h.y4m"
    w, h = 640, 360
    path.write_bytes(b"YUV4MPEG2 W640 H360 F24:1 C420jpeg\nFRAME\n" + bytes(w * h * 3 // 2))
    src = open_source(path)
    assert (src.fps, src.width, src.height, src.n_frames) == (24, 640, 360, 1)


def test_y4m_rejects_unsupported_and_truncated(tmp_path):
    bad = tmp_path / "422.y4m"
    bad.write_bytes(b"YUV4MPEG2 W4 H4 F24:1 C422\nFRAME\n" + bytes(32))
    with pytest.raises(UnsupportedFormatError):
        open_source(bad)
    short = tmp_path / "short.y4m"
    short.write_bytes(b"YUV4MPEG2 W4 H4 F24:1 C444\nFRAME\n" + bytes(10))
    with pytest.raises(FormatError):
        open_source(short)
    nofps = tmp_path / "nofps.y4m"
    nofps.write_bytes(b"YUV4MPEG2 W4 H4 C444\n")
    with pytest.raises(FormatError):
        open_source(nofps)


@settings(max_examples=300, deadline=None)
@given(st.tuples(*[st.integers(0, 255)] * 3), st.sampled_from(["444", "420jpeg"]))
def test_y4m_solid_colour_within_one_level(rgb, colorspace):
    import tempfile
    from pathlib import Path

    frame = np.broadcast_to(np.array(rgb, np.uint8), (4, 6, 3))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "c.y4m"
        write_y4m(path, [frame], fps=24, colorspace=colorspace)
        src = open_source(path)
        got = src.read(0).rgb
        src.close()
    assert np.max(np.abs(got * 255.0 - frame)) <= 1.0 + 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_grayscale_idempotent(seed):
    rgb = np.random.default_rng(seed).random((5, 7, 3))
    g = to_grayscale(rgb)
    assert np.allclose(to_grayscale(np.repeat(g[..., None], 3, axis=-1)), g, atol=1e-12)


def test_subsample_identity_yields_source_frames():
    data = _frames(6)
    src = ArraySource(data, fps=12)
    frames, index_map = subsample(src, 12)
    assert index_map == list(range(6))
    for f, ref in zip(frames, data):
        assert np.array_equal(f.rgb, ref / 255.0)
