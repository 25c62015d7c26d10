import struct

import numpy as np
import pytest

from staged_pbr.storage.pfm import decode_pfm, encode_pfm, read_pfm, write_pfm
from staged_pbr.utils.exceptions import (
    DimensionError,
    PFMChannelError,
    PFMEndiannessError,
    PFMError,
    PFMHeaderError,
    PFMTruncatedError,
)


def test_round_trip_is_bit_exact(tmp_path):
    image = np.array(
        [[[-1.5, 0.0, 2.25], [1e-8, 3.0e4, -0.0]], [[0.5, 1.0, 7.0], [-3.0, 0.125, 100.0]]], dtype=np.float32
    )
    path = write_pfm(tmp_path / "x.pfm", image)
    back = read_pfm(path)
    assert back.dtype == np.float32
    np.testing.assert_array_equal(back.view(np.uint32), image.view(np.uint32))


def test_gray_round_trip(tmp_path):
    image = np.arange(12, dtype=np.float32).reshape(3, 4) - 5.0
    np.testing.assert_array_equal(read_pfm(write_pfm(tmp_path / "g.pfm", image)), image)


def test_single_pixel_layout():
    data = encode_pfm(np.array([[[0.25, 0.5, 1.0]]]))
    header = b"PF\n1 1\n-1.0\n"
    assert data.startswith(header)
    assert len(data) - len(header) == 12
    assert struct.unpack("<3f", data[len(header) :]) == (0.25, 0.5, 1.0)


def test_rows_stored_bottom_to_top():
    image = np.array([[1.0], [2.0]], dtype=np.float32)
    data = encode_pfm(image)
    assert struct.unpack("<2f", data[-8:]) == (2.0, 1.0)


def test_trailing_singleton_channel_is_gray():
    assert encode_pfm(np.zeros((2, 2, 1))).startswith(b"Pf\n")


def test_rejects_unsupported_shapes():
    with pytest.raises(DimensionError):
        encode_pfm(np.zeros((2, 2, 4)))


def test_bad_magic():
    with pytest.raises(PFMHeaderError):
        decode_pfm(b"P6\n1 1\n-1.0\n" + b"\0" * 12)


def test_bad_dimensions():
    with pytest.raises(PFMHeaderError):
        decode_pfm(b"Pf\n1 x\n-1.0\n" + b"\0" * 4)
    with pytest.raises(PFMHeaderError):
        decode_pfm(b"Pf\n0 1\n-1.0\n")


def test_missing_newline():
    with pytest.raises(PFMHeaderError):
        decode_pfm(b"Pf\n1 1")


def test_big_endian_rejected():
    with pytest.raises(PFMEndiannessError):
        decode_pfm(b"Pf\n1 1\n1.0\n" + b"\0" * 4)


def test_truncated_payload():
    with pytest.raises(PFMTruncatedError):
        decode_pfm(b"PF\n2 1\n-1.0\n" + b"\0" * 20)


def test_gray_header_with_color_payload():
    with pytest.raises(PFMChannelError):
        decode_pfm(b"Pf\n1 1\n-1.0\n" + b"\0" * 12)


def test_errors_share_a_base():
    with pytest.raises(PFMError):
        decode_pfm(b"")


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_pfm(tmp_path / "absent.pfm")
