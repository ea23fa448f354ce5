import numpy as np
import pytest
from PIL import Image as PILImage

from repest.core import FormatError, Image
from repest.frames import is_image_file, load_image, pil_to_luminance
from repest.io import write_pgm, write_rimg


def test_is_image_file():
    assert is_image_file("a/frame.PNG")
    assert is_image_file("x.pgm")
    assert not is_image_file("notes.txt")


def test_rgb_png_is_converted_to_luminance(tmp_path):
    rgb = np.zeros((2, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[0, 2] = (0, 0, 255)
    rgb[1, :] = 255
    path = tmp_path / "f.png"
    PILImage.fromarray(rgb).save(path)
    img = load_image(path)
    assert (img.height, img.width) == (2, 3)
    np.testing.assert_allclose(img.data[0], [0.299, 0.587, 0.114], atol=1e-6)
    np.testing.assert_allclose(img.data[1], 1.0, atol=1e-6)


def test_grayscale_and_16bit(tmp_path):
    gray = PILImage.fromarray(np.array([[0, 51]], dtype=np.uint8))
    np.testing.assert_allclose(pil_to_luminance(gray), [[0.0, 0.2]])
    wide = PILImage.fromarray(np.array([[65535, 0]], dtype=np.uint16))
    np.testing.assert_allclose(pil_to_luminance(wide), [[1.0, 0.0]])


def test_native_formats(tmp_path):
    data = np.array([[0.0, 1.0], [0.25, 0.75]], dtype=np.float32)
    (tmp_path / "a.rimg").write_bytes(write_rimg(Image(data)))
    (tmp_path / "a.pgm").write_bytes(write_pgm(Image(data)))
    np.testing.assert_array_equal(load_image(tmp_path / "a.rimg").data, data)
    np.testing.assert_allclose(load_image(tmp_path / "a.pgm").data, data, atol=1 / 255)


def test_undecodable_and_unsupported(tmp_path):
    broken = tmp_path / "broken.png"
    broken.write_bytes(b"not a png")
    with pytest.raises(FormatError):
        load_image(broken)
    with pytest.raises(FormatError, match="unsupported"):
        load_image(tmp_path / "clip.mp4")
