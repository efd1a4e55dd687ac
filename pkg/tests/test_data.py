import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from dualpaint.data import (
    MaskBucket,
    Sample,
    classify_mask_ratio,
    load_mask,
    make_sample,
    save_image,
    save_mask,
    synth_dataset,
    to_grayscale,
)
from dualpaint.errors import InputError


def test_grayscale_white_image():
    gray = to_grayscale(torch.ones(3, 4, 4))
    assert torch.allclose(gray, torch.ones(1, 4, 4))


def test_grayscale_pure_red():
    image = torch.zeros(3, 4, 4)
    image[0] = 1.0
    gray = to_grayscale(image)
    assert torch.allclose(gray, torch.full((1, 4, 4), 0.299))


def test_grayscale_matches_per_pixel_loop():
    torch.manual_seed(0)
    image = torch.rand(3, 4, 4)
    gray = to_grayscale(image)
    for y in range(4):
        for x in range(4):
            expected = 0.299 * image[0, y, x] + 0.587 * image[1, y, x] + 0.114 * image[2, y, x]
            assert abs(float(gray[0, y, x]) - float(expected)) < 1e-6


def test_grayscale_rejects_wrong_channel_count():
    with pytest.raises(InputError):
        to_grayscale(torch.rand(1, 4, 4))


def _mask_with_hole_fraction(frac: float, size: int = 20) -> torch.Tensor:
    n = size * size
    holes = round(frac * n)
    flat = torch.ones(n)
    flat[:holes] = 0.0
    return flat.reshape(1, size, size)


def test_bucket_no_hole():
    assert classify_mask_ratio(torch.ones(1, 10, 10)) == MaskBucket(0, 10)


def test_bucket_quarter_hole():
    assert classify_mask_ratio(_mask_with_hole_fraction(0.25)) == MaskBucket(20, 30)


def test_bucket_boundary_is_half_open():
    assert classify_mask_ratio(_mask_with_hole_fraction(0.10)) == MaskBucket(10, 20)


def test_bucket_invariants_rejected():
    with pytest.raises(InputError):
        MaskBucket(5, 20)
    with pytest.raises(InputError):
        MaskBucket(95, 105)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0, max_value=99.999))
def test_buckets_partition_the_range(hole_percent):
    matches = [
        b for b in (MaskBucket(lo, lo + 10) for lo in range(0, 100, 10)) if b.contains(hole_percent)
    ]
    assert len(matches) == 1


def test_sample_invariants_hold():
    samples = synth_dataset(6, 32, seed=11)
    for s in samples:
        assert torch.equal(s.image_in, s.image_gt * s.mask)
        assert torch.equal(s.edge_in, s.edge_gt * s.mask)
        assert torch.equal(s.gray_in, s.gray_gt * s.mask)
        assert torch.all((s.mask == 0) | (s.mask == 1))
        assert torch.all((s.edge_gt == 0) | (s.edge_gt == 1))
        sizes = {t.shape[-2:] for t in (s.image_gt, s.edge_gt, s.gray_gt, s.mask)}
        assert sizes == {s.image_gt.shape[-2:]}
        # corruption is idempotent
        assert torch.equal(s.image_in * s.mask, s.image_in)


def test_sample_rejects_nonbinary_mask():
    with pytest.raises(InputError):
        Sample.create(torch.rand(3, 16, 16), torch.full((1, 16, 16), 0.5))


def test_synth_dataset_deterministic():
    a = synth_dataset(4, 32, seed=7)
    b = synth_dataset(4, 32, seed=7)
    for sa, sb in zip(a, b):
        for key in ("image_gt", "edge_gt", "gray_gt", "mask", "image_in"):
            assert torch.equal(getattr(sa, key), getattr(sb, key))


def test_synth_dataset_occupies_every_bucket():
    samples = synth_dataset(102, 32, seed=3)
    seen = {classify_mask_ratio(s.mask).lower for s in samples}
    assert {0, 10, 20, 30, 40, 50} <= seen
    assert all(s.hole_percent <= 60.0 for s in samples)
    assert all(s.hole_percent > 0.0 for s in samples)


def test_make_sample_identity_and_zero_masks(tmp_path):
    sample = synth_dataset(1, 32, seed=1)[0]
    image_path = tmp_path / "img.png"
    save_image(sample.image_gt, image_path)

    ones = torch.ones(1, 32, 32)
    s = make_sample(image_path, ones)
    assert torch.equal(s.image_in, s.image_gt)

    zeros = torch.zeros(1, 32, 32)
    s = make_sample(image_path, zeros)
    assert torch.equal(s.image_in, torch.zeros_like(s.image_in))


def test_make_sample_resizes_and_keeps_mask_binary(tmp_path):
    torch.manual_seed(5)
    image = torch.rand(3, 128, 128)
    image_path = tmp_path / "big.png"
    save_image(image, image_path)
    mask = (torch.rand(1, 128, 128) > 0.4).float()
    s = make_sample(image_path, mask, target_size=64)
    for t in (s.image_gt, s.edge_gt, s.gray_gt, s.mask):
        assert t.shape[-2:] == (64, 64)
    assert torch.all((s.mask == 0) | (s.mask == 1))


def test_make_sample_size_mismatch_raises(tmp_path):
    sample = synth_dataset(1, 32, seed=1)[0]
    image_path = tmp_path / "img.png"
    save_image(sample.image_gt, image_path)
    with pytest.raises(InputError):
        make_sample(image_path, torch.ones(1, 16, 16))


def test_make_sample_unreadable_file(tmp_path):
    bad = tmp_path / "not_an_image.png"
    bad.write_bytes(b"definitely not a png")
    with pytest.raises(InputError):
        make_sample(bad, torch.ones(1, 8, 8))


def test_mask_png_round_trip(tmp_path):
    mask = (torch.rand(1, 32, 32) > 0.5).float()
    path = tmp_path / "mask.png"
    save_mask(mask, path)
    loaded = load_mask(path)
    assert torch.equal(mask, loaded)


def test_mask_png_threshold_at_128(tmp_path):
    from PIL import Image

    arr = np.array([[0, 127, 128, 255]], dtype=np.uint8)
    path = tmp_path / "m.png"
    Image.fromarray(arr, "L").save(path)
    loaded = load_mask(path)
    assert loaded[0].tolist() == [[0.0, 0.0, 1.0, 1.0]]
