"""Beat epochs: extraction from records, the fixed patient split, CSV I/O and
synthetic two-class beats."""
import csv
import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .dsp import design_butter_bandpass, design_butter_lowpass, filter_forward, resample_to_60hz
from .errors import DataError
from .wfdb import BeatLabel, select_beats, read_record

EPOCH_RATE_HZ = 60
WINDOW = 60  # 1 s at 60 Hz
N_SAMPLES = 30  # centre 0.5 s
CROP_START = (WINDOW - N_SAMPLES) // 2

TRAIN_PATIENTS = ("101", "106", "102", "104")
TEST_PATIENTS = ("103", "105", "107", "217")
SPLITS = {"train": TRAIN_PATIENTS, "test": TEST_PATIENTS}


@dataclass
class BeatEpoch:
    samples: np.ndarray
    label: BeatLabel
    patient_id: str = ""
    beat_index: int = 0


@dataclass
class Dataset:
    epochs: list
    split: str

    def __len__(self):
        return len(self.epochs)

    @property
    def X(self):
        if not self.epochs:
            return np.zeros((0, N_SAMPLES))
        return np.vstack([e.samples for e in self.epochs])

    @property
    def labels(self):
        return [e.label for e in self.epochs]

    @property
    def y(self):
        """1 for paced, 0 for normal."""
        return np.array([e.label is BeatLabel.PACED for e in self.epochs], dtype=int)

    @property
    def patients(self):
        return sorted({e.patient_id for e in self.epochs})


@dataclass
class PreprocessConfig:
    channel: int = 0
    filter_order: int = 5
    f_low: float = 1.0
    f_high: float = 60.0
    extra_lowpass_hz: float = None  # optional anti-alias stage before decimation

    def digest(self):
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# --- per-beat steps ----------------------------------------------------------

def extract_epoch(signal60, beat_index_60):
    """1 s window centred on the beat, or ``None`` when it runs off either edge."""
    start = beat_index_60 - WINDOW // 2
    stop = beat_index_60 + WINDOW // 2
    if start < 0 or stop > len(signal60):
        return None
    return np.asarray(signal60[start:stop], dtype=np.float64)


def normalize_epoch(window):
    """Min-max map onto [-1, 1]."""
    window = np.asarray(window, dtype=np.float64)
    lo, hi = window.min(), window.max()
    if hi - lo <= 0:
        raise DataError("constant window cannot be normalized")
    return 2.0 * (window - lo) / (hi - lo) - 1.0


def crop_center(window):
    window = np.asarray(window)
    if len(window) != WINDOW:
        raise ValueError(f"expected a {WINDOW}-sample window, got {len(window)}")
    return window[CROP_START:CROP_START + N_SAMPLES]


# --- records -> datasets -------------------------------------------------------

def preprocess_signal(signal, fs, config=None):
    """Bandpass at the native rate, then decimate to 60 Hz."""
    config = config or PreprocessConfig()
    sos = design_butter_bandpass(config.filter_order, config.f_low, config.f_high, fs)
    y = filter_forward(sos, signal)
    if config.extra_lowpass_hz:
        y = filter_forward(design_butter_lowpass(config.filter_order, config.extra_lowpass_hz, fs), y)
    return resample_to_60hz(y, fs, EPOCH_RATE_HZ)


def record_epochs(record, config=None):
    """All usable normal/paced epochs of one record, in time order."""
    config = config or PreprocessConfig()
    fs = record.header.sampling_rate_hz
    if not 0 <= config.channel < len(record.channels):
        raise DataError(f"record {record.name} has no channel {config.channel}")
    sig60 = preprocess_signal(record.channels[config.channel], fs, config)
    factor = int(fs // EPOCH_RATE_HZ)
    out = []
    for i, (sample_index, label) in enumerate(select_beats(record.annotations)):
        window = extract_epoch(sig60, sample_index // factor)
        if window is None:
            continue
        try:
            normed = normalize_epoch(window)
        except DataError:
            continue
        out.append(BeatEpoch(crop_center(normed), label, record.name, i))
    return out


def build_datasets(records, config=None):
    """Assemble the train and test sets in the fixed patient order.

    ``records`` maps record name to :class:`Record` (or is a list of them).
    """
    if not isinstance(records, dict):
        records = {r.name: r for r in records}
    missing = [p for p in TRAIN_PATIENTS + TEST_PATIENTS if p not in records]
    if missing:
        raise DataError(f"missing records: {', '.join(missing)}")
    result = {}
    for split, patients in SPLITS.items():
        epochs = []
        for p in patients:
            eps = record_epochs(records[p], config)
            if not eps:
                raise DataError(f"record {p} yielded no usable beats")
            epochs.extend(eps)
        result[split] = Dataset(epochs, split)
    return result["train"], result["test"]


def load_mitbih(data_dir, config=None):
    """Read the eight split records from a WFDB directory and build both sets."""
    missing = []
    records = {}
    for p in TRAIN_PATIENTS + TEST_PATIENTS:
        try:
            records[p] = read_record(data_dir, p)
        except DataError:
            missing.append(p)
    if missing:
        raise DataError(f"missing records: {', '.join(missing)}")
    return records, build_datasets(records, config)


# --- synthetic beats -----------------------------------------------------------

@dataclass
class SynthSpec:
    label: BeatLabel
    count: int
    noise_sd: float = 0.05
    seed: int = 0
    jitter: float = 0.1  # relative per-beat spread of amplitude, width and timing

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be positive")
        if self.noise_sd < 0 or self.jitter < 0:
            raise ValueError("noise_sd and jitter must be nonnegative")


def _bump(t, centre, width):
    return np.exp(-0.5 * ((t - centre) / width) ** 2)


def _synthetic_beat(label, amp, width, shift):
    t = np.arange(N_SAMPLES, dtype=np.float64)
    if label is BeatLabel.NORMAL:
        # narrow R wave at the centre, small Q dip and T wave
        return (
            amp[0] * _bump(t, 15 + shift, 1.5 * width)
            - 0.15 * _bump(t, 12.5 + shift, 1.0)
            + 0.25 * amp[1] * _bump(t, 24 + shift, 3.0)
        )
    # wide biphasic paced complex: downstroke then upstroke
    return -0.8 * amp[0] * _bump(t, 13 + shift, 3.0 * width) + amp[1] * _bump(t, 19 + shift, 3.5)


def generate_synthetic(spec):
    """Deterministic two-class beats (see :class:`SynthSpec`), normalized to [-1, 1]."""
    rng = np.random.default_rng([spec.seed, spec.label.code])
    out = []
    for i in range(spec.count):
        amp = 1.0 + spec.jitter * rng.standard_normal(2)
        width = 1.0 + spec.jitter * rng.standard_normal()
        shift = spec.jitter * rng.standard_normal()
        beat = _synthetic_beat(spec.label, amp, max(width, 0.2), shift)
        beat = beat + spec.noise_sd * rng.standard_normal(N_SAMPLES)
        out.append(BeatEpoch(normalize_epoch(beat), spec.label, f"synth-{spec.label.value}", i))
    return out


def synthetic_datasets(count, noise_sd=0.05, seed=0, jitter=0.1):
    """Train/test sets of ``count`` beats per class each, with disjoint seeds."""
    sets = []
    for split, s in (("train", seed), ("test", seed + 1)):
        epochs = []
        for label in (BeatLabel.NORMAL, BeatLabel.PACED):
            epochs.extend(generate_synthetic(SynthSpec(label, count, noise_sd, s, jitter)))
        for e in epochs:
            e.patient_id = f"{e.patient_id}-{split}"
        sets.append(Dataset(epochs, split))
    return tuple(sets)


# --- CSV ---------------------------------------------------------------------------

CSV_HEADER = ["patient", "label"] + [f"s{i}" for i in range(N_SAMPLES)]


def write_epochs_csv(dataset, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for e in dataset.epochs:
            w.writerow([e.patient_id, e.label.value] + [f"{v:.9g}" for v in e.samples])


def read_epochs_csv(path, split=""):
    epochs = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise DataError(f"{path}:1: unexpected header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                label = BeatLabel(row[1])
                samples = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(samples)):
                raise DataError(f"{path}:{lineno}: non-finite sample")
            epochs.append(BeatEpoch(samples, label, row[0], lineno - 2))
    return Dataset(epochs, split)


def dataset_digest(*paths):
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as f:
            h.update(f.read())
    return h.hexdigest()


def write_manifest(path, config, counts, digest, source):
    """Small text manifest: config hash, dataset digest and per-record beat counts."""
    lines = [
        f"source: {source}",
        f"config_hash: {config.digest()}",
        f"config: {json.dumps(asdict(config), sort_keys=True)}",
        f"dataset_sha256: {digest}",
    ]
    for name, c in counts.items():
        lines.append(f"record {name}: N={c.get('N', 0)} P={c.get('P', 0)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_manifest_digest(path):
    with open(path) as f:
        for line in f:
            if line.startswith("dataset_sha256:"):
                return line.split(":", 1)[1].strip()
    return ""


def label_counts(dataset):
    counts = {}
    for e in dataset.epochs:
        c = counts.setdefault(e.patient_id, {})
        c[e.label.value] = c.get(e.label.value, 0) + 1
    return counts

