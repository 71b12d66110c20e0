import numpy as np
import pytest

from deepvocoder.bitstream import (EncodedFile, pack_indices, read_container, unpack_indices,
                                   write_container)
from deepvocoder.errors import FormatError

BITS_2400 = (12,) * 6
BITS_1200 = (9,) * 6


class TestPackIndices:
    def test_zero_superframe_2400(self):
        out = pack_indices([(0, 0, 0, 0, 0, 0)], BITS_2400)
        assert out == bytes(9)

    def test_zero_superframe_1200_padding(self):
        out = pack_indices([(0, 0, 0, 0, 0, 0)], BITS_1200)
        assert len(out) == 7  # ceil(54/8), last 2 bits zero
        assert out == bytes(7)

    def test_msb_first_layout(self):
        out = pack_indices([(4095, 0, 0, 0, 0, 0)], BITS_2400)
        assert out[0] == 0xFF and out[1] == 0xF0
        assert out[2:] == bytes(7)

    def test_overflow_rejected(self):
        with pytest.raises(ValueError):
            pack_indices([(4096, 0, 0, 0, 0, 0)], BITS_2400)
        with pytest.raises(ValueError):
            pack_indices([(-1, 0, 0, 0, 0, 0)], BITS_2400)

    def test_wrong_tuple_length_rejected(self):
        with pytest.raises(ValueError):
            pack_indices([(0, 0)], BITS_2400)


class TestUnpackIndices:
    @pytest.mark.parametrize("bits", [BITS_2400, BITS_1200, (3, 5, 7)])
    def test_round_trip_random_sequences(self, bits):
        rng = np.random.default_rng(hash(bits) % 2 ** 31)
        for _ in range(20):
            count = int(rng.integers(1, 20))
            tuples = [
                tuple(int(rng.integers(0, 1 << b)) for b in bits) for _ in range(count)
            ]
            packed = pack_indices(tuples, bits)
            assert unpack_indices(packed, count, bits) == tuples

    def test_bulk_round_trip(self):
        rng = np.random.default_rng(0)
        for bits in (BITS_2400, BITS_1200):
            tuples = [tuple(int(rng.integers(0, 1 << b)) for b in bits) for _ in range(500)]
            assert unpack_indices(pack_indices(tuples, bits), 500, bits) == tuples

    def test_empty(self):
        assert pack_indices([], BITS_2400) == b""
        assert unpack_indices(b"", 0, BITS_2400) == []

    def test_short_buffer_rejected(self):
        packed = pack_indices([(1, 2, 3, 4, 5, 6)], BITS_2400)
        with pytest.raises(FormatError):
            unpack_indices(packed[:-1], 1, BITS_2400)
        with pytest.raises(FormatError):
            unpack_indices(packed, 2, BITS_2400)


def sample_file(payload=b"\x00" * 9, count=1, tag=0):
    return EncodedFile(
        mode_tag=tag,
        sample_rate=8000,
        original_len=256,
        superframe_count=count,
        model_hash=0xDEADBEEF,
        codebook_hash=0x12345678,
        payload=payload,
    )


class TestContainer:
    def test_round_trip(self):
        enc = sample_file()
        back = read_container(write_container(enc))
        assert back == enc

    def test_deterministic_serialization(self):
        enc = sample_file()
        assert write_container(enc) == write_container(sample_file())

    def test_ten_second_2400_payload_size(self):
        # 10 s at 8 kHz: M = ceil((80000-256)/120)+1 frames, T=2 super-frames
        m = int(np.ceil((80000 - 256) / 120)) + 1
        assert m == 666
        count = -(-m // 2)
        assert count == 333
        payload = pack_indices([(0,) * 6] * count, BITS_2400)
        assert len(payload) == 333 * 9 == 2997
        enc = sample_file(payload=payload, count=count)
        enc.original_len = 80000
        back = read_container(write_container(enc))
        assert back.superframe_count == 333
        # header-excluded rate within 1% of nominal
        rate = len(payload) * 8 / 10.0
        assert abs(rate - 2400) / 2400 < 0.01

    def test_bad_magic(self):
        blob = bytearray(write_container(sample_file()))
        blob[:4] = b"JUNK"
        with pytest.raises(FormatError, match="magic"):
            read_container(bytes(blob))

    def test_bad_version(self):
        blob = bytearray(write_container(sample_file()))
        blob[4] = 9
        with pytest.raises(FormatError, match="version"):
            read_container(bytes(blob))

    def test_bad_mode_tag(self):
        blob = bytearray(write_container(sample_file()))
        blob[5] = 7
        with pytest.raises(FormatError, match="mode"):
            read_container(bytes(blob))

    def test_tampered_count_rejected(self):
        enc = sample_file(payload=pack_indices([(0,) * 6] * 4, BITS_2400), count=4)
        blob = bytearray(write_container(enc))
        blob[18] = 9  # superframe_count little-endian low byte
        with pytest.raises(FormatError):
            read_container(bytes(blob))

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            read_container(b"DVOC\x01")
