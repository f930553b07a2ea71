import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from arbsr.data import (
    ASYMMETRIC_SCALES,
    SYMMETRIC_SCALES,
    bicubic_resize,
    bicubic_resize_backward,
    collate,
    cubic,
    degrade,
    hr_patch_size,
    list_images,
    load_corpus,
    make_batch,
    read_image,
    read_pgm,
    resize_matrix,
    sample_scale,
    synthetic_corpus,
    synthetic_image,
    to_image,
    to_tensor,
    write_image,
    write_pgm,
)
from arbsr.scale import ScalePair


def direct_bicubic(img, h_out, w_out, a=-0.5):
    """Scalar double sum over the 4x4 neighbourhood with clamped taps."""
    h, w = img.shape

    def k(t):
        t = abs(t)
        if t <= 1:
            return (a + 2) * t ** 3 - (a + 3) * t ** 2 + 1
        if t < 2:
            return a * t ** 3 - 5 * a * t ** 2 + 8 * a * t - 4 * a
        return 0.0

    out = np.zeros((h_out, w_out))
    for i in range(h_out):
        sy = (i + 0.5) * h / h_out - 0.5
        by = int(np.floor(sy))
        for j in range(w_out):
            sx = (j + 0.5) * w / w_out - 0.5
            bx = int(np.floor(sx))
            acc = 0.0
            for m in range(by - 1, by + 3):
                for n in range(bx - 1, bx + 3):
                    acc += (k(sy - m) * k(sx - n)
                            * img[min(max(m, 0), h - 1), min(max(n, 0), w - 1)])
            out[i, j] = acc
    return out


# --- bicubic --------------------------------------------------------------------

def test_cubic_kernel_values():
    assert cubic(0.0) == 1.0
    assert cubic(1.0) == 0.0
    assert cubic(2.0) == 0.0
    assert cubic(0.5) == pytest.approx(0.5625)
    assert cubic(1.5) == pytest.approx(-0.0625)


@pytest.mark.parametrize("out_hw", [(7, 7), (11, 23)])
def test_bicubic_matches_direct_summation(rng, out_hw):
    img = rng.uniform(size=(16, 16))
    fast = bicubic_resize(img, *out_hw)
    slow = direct_bicubic(img, *out_hw)
    assert np.max(np.abs(fast - slow)) < 1e-6


@pytest.mark.parametrize("out_hw", [(7, 7), (11, 23), (16, 16), (40, 33)])
def test_bicubic_constant_round_trip(out_hw):
    img = np.full((16, 16), 0.375)
    up = bicubic_resize(img, *out_hw)
    np.testing.assert_array_equal(bicubic_resize(up, 16, 16), img)


@given(st.integers(1, 40), st.integers(1, 80))
@settings(max_examples=60, deadline=None)
def test_resize_rows_partition_of_unity(n_in, n_out):
    m = resize_matrix(n_in, n_out)
    assert np.max(np.abs(m.sum(axis=1) - 1.0)) < 1e-9


def test_bicubic_same_size_is_identity(rng):
    img = rng.uniform(size=(3, 9, 13))
    np.testing.assert_array_equal(bicubic_resize(img, 9, 13), img)


def test_bicubic_backward_is_adjoint(rng):
    x = rng.normal(size=(2, 3, 8, 10))
    y = rng.normal(size=(2, 3, 13, 7))
    lhs = np.sum(bicubic_resize(x, 13, 7) * y)
    rhs = np.sum(x * bicubic_resize_backward(y, (8, 10)))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_resize_matrix_rejects_empty():
    with pytest.raises(ValueError):
        resize_matrix(0, 4)


# --- scale sampling -------------------------------------------------------------

def test_scale_grids():
    assert len(SYMMETRIC_SCALES) == 30
    assert SYMMETRIC_SCALES[0] == 1.1 and SYMMETRIC_SCALES[-1] == 4.0
    assert len(ASYMMETRIC_SCALES) == 30
    assert all(h != v for h, v in ASYMMETRIC_SCALES)


def test_symmetric_sampling_is_uniform():
    rng = np.random.default_rng(0)
    draws = [sample_scale(rng, "symmetric").r_h for _ in range(6000)]
    counts = np.array([draws.count(r) for r in SYMMETRIC_SCALES])
    assert counts.sum() == 6000
    assert stats.chisquare(counts).pvalue > 0.001


def test_mixed_sampling_proportions():
    rng = np.random.default_rng(1)
    draws = [sample_scale(rng, "mixed") for _ in range(4000)]
    frac_sym = np.mean([s.symmetric for s in draws])
    assert abs(frac_sym - 0.5) < 0.04


def test_integer_mode():
    rng = np.random.default_rng(2)
    assert {sample_scale(rng, "integer").r_h for _ in range(100)} == {2.0, 3.0, 4.0}


def test_unknown_mode():
    with pytest.raises(ValueError, match="unknown scale mode"):
        sample_scale(np.random.default_rng(0), "wild")


# --- batches --------------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus():
    return synthetic_corpus(3, seed=5, height=64, width=64, dtype=np.float64)


def test_batch_shapes_for_every_grid_scale(corpus):
    rng = np.random.default_rng(0)
    grid = [ScalePair(r, r) for r in SYMMETRIC_SCALES] + [ScalePair(*p) for p in ASYMMETRIC_SCALES]
    big = synthetic_corpus(1, seed=1, height=64, width=64, dtype=np.float64)
    for s in grid:
        for sample in make_batch(big, s, rng, batch=2, patch=16):
            assert sample.lr.shape == (3, 16, 16)
            assert sample.hr.shape[1:] == hr_patch_size(16, sample.scale)


def test_hr_patch_size_rounding():
    assert hr_patch_size(50, ScalePair(1.5, 3.0)) == (150, 75)
    assert hr_patch_size(50, ScalePair(1.1, 1.1)) == (55, 55)


def test_identity_scale_lr_equals_hr(corpus):
    for s in make_batch(corpus, ScalePair(1, 1), np.random.default_rng(3), batch=4, patch=20):
        np.testing.assert_array_equal(s.lr, s.hr)


def test_batch_determinism(corpus):
    a = make_batch(corpus, ScalePair(1.5, 2.5), np.random.default_rng(9), batch=4, patch=16)
    b = make_batch(corpus, ScalePair(1.5, 2.5), np.random.default_rng(9), batch=4, patch=16)
    for x, y in zip(a, b):
        assert x.lr.tobytes() == y.lr.tobytes() and x.hr.tobytes() == y.hr.tobytes()
        assert x.scale == y.scale


def test_rotation_swaps_scale(corpus):
    seen = set()
    rng = np.random.default_rng(4)
    for _ in range(20):
        batch = make_batch(corpus, ScalePair(1.5, 3.0), rng, batch=2, patch=16)
        lr, hr, scale = collate(batch)
        seen.add((scale.r_h, scale.r_v))
        assert hr.shape[2:] == hr_patch_size(16, scale)
    assert seen == {(1.5, 3.0), (3.0, 1.5)}


def test_small_images_skipped_with_warning(corpus):
    tiny = [np.zeros((3, 10, 10))]
    with pytest.warns(RuntimeWarning, match="skipped"):
        batch = make_batch(corpus + tiny, ScalePair(2, 2), np.random.default_rng(0), 2, 16)
    assert len(batch) == 2
    with pytest.warns(RuntimeWarning):
        with pytest.raises(ValueError, match="large enough"):
            make_batch(tiny, ScalePair(2, 2), np.random.default_rng(0), 2, 16)


def test_empty_corpus_rejected():
    with pytest.raises(ValueError, match="empty"):
        make_batch([], ScalePair(2, 2), np.random.default_rng(0))


def test_degrade_sizes():
    hr = np.zeros((3, 97, 101))
    lr, hr_c = degrade(hr, ScalePair(1.5, 3.0))
    assert lr.shape == (3, 32, 67)
    assert hr_c.shape == (3, 96, 101)


# --- image I/O ------------------------------------------------------------------

def test_png_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, size=(7, 9, 3), dtype=np.uint8)
    write_image(tmp_path / "a.png", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.png"), img)


def test_unknown_suffix_written_as_ppm(tmp_path, rng):
    img = rng.integers(0, 256, size=(4, 5, 3), dtype=np.uint8)
    write_image(tmp_path / "a.out", img)
    assert (tmp_path / "a.out").read_bytes().startswith(b"P6")
    np.testing.assert_array_equal(read_image(tmp_path / "a.out"), img)


def test_pgm_round_trip(tmp_path, rng):
    g = rng.integers(0, 256, size=(6, 11), dtype=np.uint8)
    write_pgm(tmp_path / "m.pgm", g)
    data = (tmp_path / "m.pgm").read_bytes()
    assert data.startswith(b"P5\n11 6\n255\n")
    np.testing.assert_array_equal(read_pgm(tmp_path / "m.pgm"), g)


def test_tensor_conversions(rng):
    img = rng.integers(0, 256, size=(5, 6, 3), dtype=np.uint8)
    t = to_tensor(img, np.float64)
    assert t.shape == (1, 3, 5, 6) and t.max() <= 1.0
    np.testing.assert_array_equal(to_image(t), img)
    assert to_image(np.full((3, 1, 1), 2.0)).max() == 255
    with pytest.raises(ValueError):
        to_tensor(np.zeros((4, 4)))


def test_corpus_loading_and_manifest(tmp_path, rng):
    for name in ("b.png", "a.png"):
        write_image(tmp_path / name, rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))
    assert [p.name for p in list_images(tmp_path)] == ["a.png", "b.png"]
    (tmp_path / "manifest.txt").write_text("# ordered\nb.png\n")
    assert [p.name for p in list_images(tmp_path)] == ["b.png"]
    assert load_corpus(tmp_path)[0].shape == (3, 8, 8)
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "missing")


def test_synthetic_corpus_deterministic():
    a = synthetic_corpus(2, seed=3, height=32, width=40)
    b = synthetic_corpus(2, seed=3, height=32, width=40)
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))
    assert a[0].shape == (3, 32, 40)
    assert 0.0 <= a[0].min() and a[0].max() <= 1.0


def test_synthetic_supersampling_softens_edges():
    sharp = synthetic_image(np.random.default_rng(0), 32, 32, supersample=1)
    soft = synthetic_image(np.random.default_rng(0), 32, 32, supersample=4)
    assert sharp.shape == soft.shape == (3, 32, 32)
    # box-averaged edges take more distinct values than hard masks
    assert len(np.unique(soft)) > len(np.unique(sharp))
    with pytest.raises(ValueError):
        synthetic_image(np.random.default_rng(0), 8, 8, supersample=0)
