import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beatvae.errors import DataError, WfdbFormatError
import wfdb
import wfdb.io._signal as wfdb_signal
from beatvae.wfdb import (
    Annotation,
    BeatLabel,
    decode_212,
    encode_212,
    encode_annotations,
    parse_annotations,
    parse_header,
    read_record,
    read_signal_212,
    select_beats,
    to_physical,
)

MITBIH_101_HEADER = """101 2 360 650000
101.dat 212 200 11 1024 1051 -4432 0 MLII
101.dat 212 200 11 1024 1011 -1043 0 V1
# 75 F 1011 654 x1
# Diapres
"""


def test_parse_header_mitbih_convention():
    h = parse_header(MITBIH_101_HEADER)
    assert (h.record_name, h.channel_count, h.sampling_rate_hz, h.sample_count) == ("101", 2, 360.0, 650000)
    ch = h.channels[0]
    assert ch.storage_format == 212
    assert ch.adc_gain == 200.0
    assert ch.adc_baseline == 1024  # no "(baseline)": falls back to adc zero
    assert ch.description == "MLII"
    assert h.comments[0].startswith("75 F")


def test_parse_header_explicit_baseline_and_units():
    h = parse_header("rec 1 250 10\nrec.dat 212 100(-12)/uV 12 0 0 0 0 lead I\n")
    ch = h.channels[0]
    assert ch.adc_gain == 100.0 and ch.adc_baseline == -12 and ch.units == "uV"
    assert ch.description == "lead I"


def test_parse_header_missing_gain_defaults_to_200():
    h = parse_header("rec 1 360 5\nrec.dat 212\n")
    assert h.channels[0].adc_gain == 200.0
    assert h.channels[0].adc_baseline == 0


def test_parse_header_zero_channels():
    with pytest.raises(WfdbFormatError, match="no channels"):
        parse_header("rec 0 360 100\n")


def test_parse_header_trailing_comments_ignored():
    h = parse_header(MITBIH_101_HEADER + "# one more\n\n# and another\n")
    assert h.channel_count == 2


@pytest.mark.parametrize(
    "text, match",
    [
        ("rec\n", "malformed record line"),
        ("rec two 360\n", "signal count"),
        ("rec 2 360 10\nrec.dat 212\n", "channel count mismatch"),
        ("rec 2 360 10\nrec.dat 212\nrec.dat 16\n", "channel 1: unsupported storage format 16"),
    ],
)
def test_parse_header_errors(text, match):
    with pytest.raises(WfdbFormatError, match=match):
        parse_header(text)


def test_decode_212_examples():
    assert list(decode_212(bytes([0x00, 0x00, 0x00]))) == [0, 0]
    assert list(decode_212(bytes([0xFF, 0x0F, 0x00]))) == [-1, 0]
    # high nibble of byte 1 belongs to the second sample
    assert list(decode_212(bytes([0x01, 0x80, 0x02]))) == [1, -2048 + 2]


def test_decode_212_matches_reference_reader():
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=3 * 500, dtype=np.uint8)
    expected = wfdb_signal._blocks_to_samples(raw, 1000, "212")
    expected = np.where(expected > 2047, expected - 4096, expected)
    np.testing.assert_array_equal(decode_212(raw.tobytes()), expected)


def test_decode_212_truncated():
    with pytest.raises(WfdbFormatError, match="truncated"):
        decode_212(bytes(3), count=3)


def test_212_round_trip_random_samples():
    rng = np.random.default_rng(42)
    s = rng.integers(-2048, 2048, size=10_000)
    assert np.array_equal(decode_212(encode_212(s)), s)


def test_212_round_trip_odd_count():
    s = np.array([-2048, 2047, 5])
    b = encode_212(s)
    assert len(b) == 5
    assert list(decode_212(b)) == list(s)


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=0, max_size=300).map(lambda b: b[: len(b) - len(b) % 3]))
def test_212_bytes_round_trip(b):
    assert encode_212(decode_212(b)) == b


def test_read_signal_212_deinterleaves():
    ch0 = np.array([1, 2, 3, -4])
    ch1 = np.array([-10, 20, -30, 40])
    data = encode_212(np.column_stack([ch0, ch1]).reshape(-1))
    h = parse_header("r 2 360 4\nr.dat 212\nr.dat 212\n")
    out = read_signal_212(data, h)
    assert list(out[0]) == list(ch0) and list(out[1]) == list(ch1)


def test_read_signal_212_truncated_file():
    h = parse_header("r 2 360 10\nr.dat 212\nr.dat 212\n")
    with pytest.raises(WfdbFormatError, match="truncated"):
        read_signal_212(encode_212(np.zeros(12, dtype=int)), h)


def test_to_physical():
    assert to_physical([1024], 200.0, 1024)[0] == 0.0
    assert to_physical([1224], 200.0, 1024)[0] == 1.0
    with pytest.raises(ValueError):
        to_physical([1], 0.0, 0)


def test_parse_annotations_terminator_only():
    assert parse_annotations(b"\x00\x00") == []


def test_parse_annotations_single_beat():
    word = (1 << 10) | 100
    anns = parse_annotations(bytes([word & 0xFF, word >> 8, 0, 0]))
    assert len(anns) == 1
    assert (anns[0].code, anns[0].sample_index) == (1, 100)


def test_parse_annotations_unterminated():
    word = (1 << 10) | 100
    with pytest.raises(WfdbFormatError, match="not terminated"):
        parse_annotations(bytes([word & 0xFF, word >> 8]))


def test_parse_annotations_aux_overrun():
    word = (63 << 10) | 40
    with pytest.raises(WfdbFormatError, match="overruns"):
        parse_annotations(bytes([0x64, 0x04, word & 0xFF, word >> 8]) + b"abc")


def test_annotation_modifiers_round_trip():
    anns = [
        Annotation(5, 28, aux="(AFIB"),
        Annotation(10, 1, subtype=2, channel=1, num=3),
        Annotation(5000, 12, channel=1, num=3),  # gap > 1023 forces SKIP
        Annotation(5001, 5, channel=0, num=0, aux="odd"),
    ]
    assert parse_annotations(encode_annotations(anns)) == anns


def test_select_beats_filters_codes():
    anns = [Annotation(i * 10, c) for i, c in enumerate([1, 12, 38, 1])]
    assert [lab for _, lab in select_beats(anns)] == [BeatLabel.NORMAL, BeatLabel.PACED, BeatLabel.NORMAL]
    assert [s for s, _ in select_beats(anns)] == [0, 10, 30]
    assert select_beats([]) == []


def test_read_record_matches_reference(wfdb_dir):
    for name in ("101", "107"):
        rec = read_record(wfdb_dir, name)
        ref = wfdb.rdrecord(str(wfdb_dir / name), physical=False)
        ann = wfdb.rdann(str(wfdb_dir / name), "atr", return_label_elements=["label_store"])
        assert rec.header.sample_count == ref.sig_len
        assert rec.header.sampling_rate_hz == ref.fs
        for i in range(2):
            expected = (ref.d_signal[:, i].astype(float) - ref.baseline[i]) / ref.adc_gain[i]
            np.testing.assert_allclose(rec.channels[i], expected, rtol=0, atol=1e-9)
        assert [a.sample_index for a in rec.annotations] == list(ann.sample)
        assert [a.code for a in rec.annotations] == list(ann.label_store)
        assert [a.aux or "" for a in rec.annotations] == list(ann.aux_note)


def test_annotation_times_increase_among_beats(wfdb_dir):
    rec = read_record(wfdb_dir, "102")
    times = [a.sample_index for a in rec.annotations]
    assert times == sorted(times)
    beats = [s for s, _ in select_beats(rec.annotations)]
    assert all(b > a for a, b in zip(beats, beats[1:]))


def test_paced_record_selects_only_paced(wfdb_dir):
    rec = read_record(wfdb_dir, "107")
    beats = select_beats(rec.annotations)
    ann = wfdb.rdann(str(wfdb_dir / "107"), "atr", return_label_elements=["label_store"])
    assert {lab for _, lab in beats} == {BeatLabel.PACED}
    assert len(beats) == int(np.sum(ann.label_store == 12))


def test_read_record_missing_file(tmp_path):
    with pytest.raises(DataError, match="217"):
        read_record(tmp_path, "217")


def test_real_mitbih_records_match_reference(mitbih_dir):
    for name in ("101", "102", "107"):
        rec = read_record(mitbih_dir, name)
        ref = wfdb.rdrecord(f"{mitbih_dir}/{name}")
        assert rec.header.sample_count == ref.sig_len == 650000
        np.testing.assert_allclose(rec.channels[0][:1000], ref.p_signal[:1000, 0], atol=1e-9)
