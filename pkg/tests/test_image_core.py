import numpy as np
import pytest
from PIL import Image

from albp.errors import DataError, ImageFormatError
from albp.image_core import GrayImage, load_image, rgb_to_gray, save_image, scan_dataset


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[0, 300]]))


def test_pgm_binary_identity_decode(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7]))
    img = load_image(p)
    assert (img.width, img.height) == (2, 2)
    assert img.pixels.ravel().tolist() == [0, 128, 255, 7]


def test_pgm_ascii_decode(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n# comment\n3 1\n255\n0 128 255\n")
    assert load_image(p).pixels.ravel().tolist() == [0, 128, 255]


def test_pgm_header_contract(tmp_path):
    img = GrayImage(np.arange(6, dtype=np.uint8).reshape(2, 3))
    p = tmp_path / "b.pgm"
    save_image(img, p)
    assert p.read_bytes().startswith(b"P5\n3 2\n255\n")


@pytest.mark.parametrize("ext", [".pgm", ".png"])
def test_round_trip_bit_exact(tmp_path, ext):
    rng = np.random.default_rng(0)
    img = GrayImage(rng.integers(0, 256, size=(13, 9), dtype=np.uint8))
    p = tmp_path / ("rt" + ext)
    save_image(img, p)
    assert load_image(p) == img


def test_single_pixel_round_trip(tmp_path):
    img = GrayImage(np.array([[42]], dtype=np.uint8))
    p = tmp_path / "one.png"
    save_image(img, p)
    assert load_image(p).pixels.tolist() == [[42]]


def test_png_rgb_luma(tmp_path):
    p = tmp_path / "rgb.png"
    Image.fromarray(np.full((1, 1, 3), (255, 0, 0), dtype=np.uint8), "RGB").save(p)
    assert load_image(p).pixels[0, 0] == 76  # round(0.299 * 255)


def test_luma_gray_triple_is_identity():
    v = np.arange(256, dtype=np.uint8)
    rgb = np.stack([v, v, v], axis=-1)[None]
    assert (rgb_to_gray(rgb)[0] == v).all()


def test_jpeg_decodes(tmp_path):
    px = np.full((8, 8), 100, dtype=np.uint8)
    p = tmp_path / "j.jpg"
    Image.fromarray(px, "L").save(p, quality=95)
    img = load_image(p)
    assert (img.width, img.height) == (8, 8)


def test_text_file_rejected(tmp_path):
    p = tmp_path / "notes.txt"
    p.write_text("hello")
    with pytest.raises(ImageFormatError):
        load_image(p)


def test_missing_file_reports_path(tmp_path):
    with pytest.raises(DataError, match="nope.pgm"):
        load_image(tmp_path / "nope.pgm")


def test_16bit_png_rejected(tmp_path):
    p = tmp_path / "deep.png"
    Image.fromarray(np.zeros((2, 2), dtype=np.uint16)).save(p)
    with pytest.raises(ImageFormatError):
        load_image(p)


def test_save_unwritable_path(tmp_path):
    img = GrayImage(np.array([[1]], dtype=np.uint8))
    with pytest.raises(DataError):
        save_image(img, tmp_path / "missing_dir" / "x.pgm")


def test_scan_dataset_orders_classes_and_paths(toy_dataset):
    manifest = scan_dataset(toy_dataset)
    assert manifest.class_names == ("cyst", "normal", "stone", "tumor")
    paths = [str(p) for p, _ in manifest.entries]
    assert paths == sorted(paths)
    assert len(manifest) == 40
    # same tree scanned twice -> identical manifest
    assert scan_dataset(toy_dataset) == manifest


def test_scan_dataset_duplicate_names_across_classes(tmp_path):
    for cls in ("a", "b"):
        d = tmp_path / cls
        d.mkdir()
        save_image(GrayImage(np.array([[1]], dtype=np.uint8)), d / "same.pgm")
    manifest = scan_dataset(tmp_path)
    assert len(manifest) == 2
    assert len({p for p, _ in manifest.entries}) == 2


def test_scan_dataset_single_class_rejected(tmp_path):
    d = tmp_path / "only"
    d.mkdir()
    save_image(GrayImage(np.array([[1]], dtype=np.uint8)), d / "x.pgm")
    with pytest.raises(DataError):
        scan_dataset(tmp_path)


def test_scan_dataset_empty_class_rejected(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    save_image(GrayImage(np.array([[1]], dtype=np.uint8)), tmp_path / "a" / "x.pgm")
    with pytest.raises(DataError):
        scan_dataset(tmp_path)
