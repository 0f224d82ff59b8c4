"""Readers for PhysioNet WFDB records: header (.hea), format-212 signals (.dat)
and MIT annotation files (.atr).

Only what MIT-BIH needs is supported: single-segment records whose signals are
all stored in format 212.
"""
import enum
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, WfdbFormatError

DEFAULT_GAIN = 200.0  # adu/mV, used when the header leaves the gain out or zero
DEFAULT_FS = 250.0

# MIT annotation pseudo-codes
SKIP, NUM, SUB, CHN, AUX = 59, 60, 61, 62, 63
NOTE = 22


@dataclass
class ChannelInfo:
    file_name: str
    storage_format: int
    adc_gain: float = DEFAULT_GAIN
    adc_baseline: int = 0
    units: str = "mV"
    adc_resolution: int = 12
    adc_zero: int = 0
    initial_value: int = 0
    checksum: int = 0
    block_size: int = 0
    description: str = ""
    byte_offset: int = 0


@dataclass
class RecordHeader:
    record_name: str
    channel_count: int
    sampling_rate_hz: float
    sample_count: int
    channels: list = field(default_factory=list)
    comments: list = field(default_factory=list)


@dataclass
class Annotation:
    sample_index: int
    code: int
    subtype: int = 0
    channel: int = 0
    num: int = 0
    aux: str = None


@dataclass
class Record:
    header: RecordHeader
    channels: list  # per-channel float arrays in physical units
    annotations: list

    @property
    def name(self):
        return self.header.record_name


class BeatLabel(enum.Enum):
    NORMAL = "N"
    PACED = "P"

    @property
    def code(self):
        return BEAT_CODES_BY_LABEL[self]


BEAT_LABELS = {1: BeatLabel.NORMAL, 12: BeatLabel.PACED}
BEAT_CODES_BY_LABEL = {v: k for k, v in BEAT_LABELS.items()}


# --- header -------------------------------------------------------------------

def _parse_record_line(line):
    parts = line.split()
    if len(parts) < 2:
        raise WfdbFormatError(f"malformed record line: {line!r}")
    name = parts[0]
    if "/" in name:
        raise WfdbFormatError(f"multi-segment record {name!r} is not supported")
    try:
        nsig = int(parts[1])
    except ValueError:
        raise WfdbFormatError(f"malformed record line, bad signal count: {line!r}") from None
    fs = DEFAULT_FS
    nsamp = 0
    try:
        if len(parts) > 2:
            # "360", "360/1", "360/1(0)"
            fs = float(parts[2].split("/")[0])
        if len(parts) > 3:
            nsamp = int(parts[3])
    except ValueError:
        raise WfdbFormatError(f"malformed record line: {line!r}") from None
    if fs <= 0:
        raise WfdbFormatError(f"sampling rate must be positive, got {fs}")
    if nsamp < 0:
        raise WfdbFormatError(f"negative sample count {nsamp}")
    return name, nsig, fs, nsamp


def _parse_signal_line(line, index):
    parts = line.split(maxsplit=8)
    if len(parts) < 2:
        raise WfdbFormatError(f"channel {index}: malformed signal line {line!r}")
    file_name, fmt_field = parts[0], parts[1]

    fmt_text = fmt_field
    offset = 0
    if "+" in fmt_text:
        fmt_text, off_text = fmt_text.split("+", 1)
        offset = int(off_text)
    fmt_text = fmt_text.split(":", 1)[0].split("x", 1)[0]
    try:
        fmt = int(fmt_text)
    except ValueError:
        raise WfdbFormatError(f"channel {index}: bad format field {fmt_field!r}") from None
    if fmt != 212:
        raise WfdbFormatError(f"channel {index}: unsupported storage format {fmt} (only 212)")

    ch = ChannelInfo(file_name, fmt, byte_offset=offset)
    baseline = None
    try:
        if len(parts) > 2:
            gain_text = parts[2]
            if "/" in gain_text:
                gain_text, ch.units = gain_text.split("/", 1)
            if "(" in gain_text:
                gain_text, base_text = gain_text.split("(", 1)
                baseline = int(base_text.rstrip(")"))
            gain = float(gain_text)
            ch.adc_gain = gain if gain != 0 else DEFAULT_GAIN
        if len(parts) > 3:
            ch.adc_resolution = int(parts[3])
        if len(parts) > 4:
            ch.adc_zero = int(parts[4])
        if len(parts) > 5:
            ch.initial_value = int(parts[5])
        if len(parts) > 6:
            ch.checksum = int(parts[6])
        if len(parts) > 7:
            ch.block_size = int(parts[7])
        if len(parts) > 8:
            ch.description = parts[8].strip()
    except ValueError:
        raise WfdbFormatError(f"channel {index}: malformed signal line {line!r}") from None
    ch.adc_baseline = ch.adc_zero if baseline is None else baseline
    return ch


def parse_header(text):
    """Parse the contents of a ``.hea`` file into a :class:`RecordHeader`."""
    lines = []
    comments = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
            continue
        lines.append(line.split("#", 1)[0].strip())
    if not lines:
        raise WfdbFormatError("empty header: no record line")
    name, nsig, fs, nsamp = _parse_record_line(lines[0])
    if nsig < 1:
        raise WfdbFormatError("no channels")
    signal_lines = lines[1:]
    if len(signal_lines) != nsig:
        raise WfdbFormatError(
            f"channel count mismatch: record line declares {nsig}, found {len(signal_lines)} signal lines"
        )
    channels = [_parse_signal_line(line, i) for i, line in enumerate(signal_lines)]
    return RecordHeader(name, nsig, fs, nsamp, channels, comments)


# --- format 212 ---------------------------------------------------------------

def decode_212(data, count=None):
    """Unpack format-212 bytes into a flat int array of 12-bit signed values.

    Each 3-byte group ``b0 b1 b2`` holds ``A = (b1 & 0x0F) << 8 | b0`` and
    ``B = (b1 & 0xF0) << 4 | b2``. A trailing 2-byte group carries one value.
    """
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    available = (len(buf) // 3) * 2 + (1 if len(buf) % 3 == 2 else 0)
    if count is None:
        count = available
    if count > available:
        raise WfdbFormatError(
            f"truncated format-212 data: {count} samples declared, {available} available"
        )
    n_groups = (count + 1) // 2
    padded = np.zeros(n_groups * 3, dtype=np.uint8)
    take = min(len(buf), n_groups * 3)
    padded[:take] = buf[:take]
    g = padded.reshape(-1, 3).astype(np.int32)
    out = np.empty(n_groups * 2, dtype=np.int32)
    out[0::2] = ((g[:, 1] & 0x0F) << 8) | g[:, 0]
    out[1::2] = ((g[:, 1] & 0xF0) << 4) | g[:, 2]
    out = out[:count]
    out[out > 2047] -= 4096
    return out


def encode_212(samples):
    """Pack 12-bit signed values into format-212 bytes (inverse of :func:`decode_212`)."""
    s = np.asarray(samples, dtype=np.int64)
    if np.any(s < -2048) or np.any(s > 2047):
        raise ValueError("format 212 holds 12-bit signed values in [-2048, 2047]")
    count = len(s)
    u = (s & 0xFFF).astype(np.int64)
    if count % 2:
        u = np.append(u, 0)
    a, b = u[0::2], u[1::2]
    g = np.empty((len(a), 3), dtype=np.uint8)
    g[:, 0] = a & 0xFF
    g[:, 1] = ((a >> 8) & 0x0F) | (((b >> 8) & 0x0F) << 4)
    g[:, 2] = b & 0xFF
    out = g.reshape(-1).tobytes()
    return out[:-1] if count % 2 else out


def read_signal_212(data, header):
    """Decode an interleaved format-212 file into one adu array per channel."""
    nch = header.channel_count
    offset = header.channels[0].byte_offset if header.channels else 0
    data = bytes(data)[offset:]
    if header.sample_count:
        total = header.sample_count * nch
    else:
        total = ((len(data) // 3) * 2 + (1 if len(data) % 3 == 2 else 0)) // nch * nch
    flat = decode_212(data, total)
    frames = flat.reshape(-1, nch)
    return [frames[:, i].copy() for i in range(nch)]


def to_physical(adu, gain, baseline):
    if gain == 0:
        raise ValueError("ADC gain must be nonzero")
    return (np.asarray(adu, dtype=np.float64) - baseline) / gain


# --- annotations --------------------------------------------------------------

def parse_annotations(data):
    """Decode an MIT-format annotation stream.

    Modifier words (SUB, CHN, NUM, AUX) apply to the annotation they follow.
    As in the WFDB library, ``channel`` and ``num`` carry over to later
    annotations while ``subtype`` and ``aux`` reset. Code-0 placeholders and
    the "## ..." definition notes some writers put at sample 0 are discarded.
    """
    buf = bytes(data)
    n = len(buf)
    pos = 0
    t = 0
    chan = 0
    num = 0
    out = []
    terminated = False
    while pos + 2 <= n:
        word = buf[pos] | (buf[pos + 1] << 8)
        pos += 2
        code, inc = word >> 10, word & 0x3FF
        if code == 0 and inc == 0:
            terminated = True
            break
        if code == SKIP:
            if pos + 4 > n:
                raise WfdbFormatError("SKIP word truncated")
            hi = buf[pos] | (buf[pos + 1] << 8)
            lo = buf[pos + 2] | (buf[pos + 3] << 8)
            skip = (hi << 16) | lo
            if skip >= 1 << 31:
                skip -= 1 << 32
            t += skip
            pos += 4
        elif code == NUM:
            num = inc
            if out:
                out[-1].num = num
        elif code == SUB:
            if out:
                out[-1].subtype = inc
        elif code == CHN:
            chan = inc
            if out:
                out[-1].channel = chan
        elif code == AUX:
            if pos + inc > n:
                raise WfdbFormatError(f"AUX length {inc} overruns annotation buffer at byte {pos}")
            text = buf[pos:pos + inc].split(b"\0", 1)[0].decode("latin-1")
            if out:
                out[-1].aux = text
            pos += inc + (inc & 1)
        else:
            t += inc
            out.append(Annotation(t, code, 0, chan, num, None))
    if not terminated:
        raise WfdbFormatError("annotation stream is not terminated by a zero word")
    out = [a for a in out if a.code != 0 and not _is_definition(a)]
    out.sort(key=lambda a: a.sample_index)
    return out


def _is_definition(a):
    return a.sample_index == 0 and a.code == NOTE and (a.aux or "").startswith("## ")


def encode_annotations(annotations):
    """Write annotations in MIT format (test helper; supports SKIP/SUB/CHN/NUM/AUX)."""
    words = bytearray()

    def put(code, inc):
        w = (code << 10) | (inc & 0x3FF)
        words.extend((w & 0xFF, w >> 8))

    t = 0
    chan = 0
    num = 0
    for a in sorted(annotations, key=lambda a: a.sample_index):
        diff = a.sample_index - t
        if diff < 0 or diff > 1023:
            put(SKIP, 0)
            d = diff & 0xFFFFFFFF
            hi, lo = d >> 16, d & 0xFFFF
            words.extend((hi & 0xFF, hi >> 8, lo & 0xFF, lo >> 8))
            diff = 0
        put(a.code, diff)
        t = a.sample_index
        if a.subtype:
            put(SUB, a.subtype)
        if a.channel != chan:
            put(CHN, a.channel)
            chan = a.channel
        if a.num != num:
            put(NUM, a.num)
            num = a.num
        if a.aux:
            raw = a.aux.encode("latin-1")
            put(AUX, len(raw))
            words.extend(raw)
            if len(raw) & 1:
                words.append(0)
    put(0, 0)
    return bytes(words)


def select_beats(annotations):
    """Keep normal (code 1) and paced (code 12) beats as ``(sample_index, BeatLabel)``."""
    return [(a.sample_index, BEAT_LABELS[a.code]) for a in annotations if a.code in BEAT_LABELS]


def read_record(directory, name):
    """Load ``<name>.hea``, its format-212 signal file(s) and ``<name>.atr``."""
    base = os.path.join(directory, str(name))
    for ext in (".hea", ".atr"):
        if not os.path.exists(base + ext):
            raise DataError(f"record {name}: missing {name}{ext}")
    with open(base + ".hea") as f:
        header = parse_header(f.read())
    files = {ch.file_name for ch in header.channels}
    if len(files) != 1:
        raise WfdbFormatError(f"record {name}: channels spread over several signal files")
    dat_path = os.path.join(directory, header.channels[0].file_name)
    if not os.path.exists(dat_path):
        raise DataError(f"record {name}: missing {header.channels[0].file_name}")
    with open(dat_path, "rb") as f:
        adu = read_signal_212(f.read(), header)
    if not header.sample_count:
        header.sample_count = len(adu[0])
    channels = [to_physical(a, ch.adc_gain, ch.adc_baseline) for a, ch in zip(adu, header.channels)]
    with open(base + ".atr", "rb") as f:
        annotations = parse_annotations(f.read())
    annotations = [a for a in annotations if 0 <= a.sample_index < header.sample_count]
    return Record(header, channels, annotations)
