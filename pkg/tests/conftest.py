import os

import numpy as np
import pytest
import wfdb

from beatvae.dataset import TEST_PATIENTS, TRAIN_PATIENTS, synthetic_datasets
from beatvae.pipeline import TrainConfig, train

FS = 360
PACED_RECORDS = {"102", "104", "107", "217"}


def _beat_shape(t, paced):
    """Crude ECG complex sampled at offsets t (seconds) from the annotation."""
    if paced:
        return -0.9 * np.exp(-0.5 * (t / 0.03) ** 2) + 1.2 * np.exp(-0.5 * ((t - 0.05) / 0.035) ** 2)
    return (1.5 * np.exp(-0.5 * (t / 0.012) ** 2)
            - 0.2 * np.exp(-0.5 * ((t + 0.03) / 0.01) ** 2)
            + 0.3 * np.exp(-0.5 * ((t - 0.25) / 0.04) ** 2))


def synth_record(name, seconds=90, seed=0):
    """Two-channel signal in mV plus annotation (samples, symbols, aux)."""
    rng = np.random.default_rng([seed, int(name)])
    n = seconds * FS
    t = np.arange(n) / FS
    paced = name in PACED_RECORDS
    sig = 0.1 * np.sin(2 * np.pi * 0.3 * t) + 0.02 * rng.standard_normal(n)
    samples, symbols = [], []
    pos = int(0.05 * FS)  # first beat close to the edge, must be skipped
    while pos < n - 10:
        sym = "/" if paced else "N"
        if paced and rng.random() < 0.05:
            sym = "f"  # fusion of paced and normal, excluded
        win = np.arange(max(0, pos - FS // 2), min(n, pos + FS // 2))
        sig[win] += _beat_shape((win - pos) / FS, sym != "N")
        samples.append(pos)
        symbols.append(sym)
        gap = int(FS * (0.8 + 0.1 * rng.standard_normal()))
        if len(samples) == 20:
            gap = 4 * FS  # > 1023 samples forces a SKIP word
        pos += max(gap, FS // 3)
    # a rhythm annotation with aux text, sharing no time with beats
    samples.insert(1, samples[0] + 7)
    symbols.insert(1, "+")
    aux = [""] * len(samples)
    aux[1] = "(N" if not paced else "(P"
    ch2 = 0.5 * sig + 0.01 * rng.standard_normal(n)
    return np.column_stack([sig, ch2]), np.array(samples), symbols, aux


def write_wfdb_record(directory, name, seconds=90, seed=0):
    p_signal, samples, symbols, aux = synth_record(name, seconds, seed)
    wfdb.wrsamp(
        name, fs=FS, units=["mV", "mV"], sig_name=["MLII", "V1"], p_signal=p_signal,
        fmt=["212", "212"], adc_gain=[200.0, 200.0], baseline=[1024, 1024],
        write_dir=str(directory),
    )
    wfdb.wrann(name, "atr", samples, symbol=symbols, aux_note=aux, write_dir=str(directory), fs=FS)
    return p_signal, samples, symbols


@pytest.fixture(scope="session")
def wfdb_dir(tmp_path_factory):
    """Directory with all eight split records as synthetic WFDB triples."""
    d = tmp_path_factory.mktemp("mitbih_fixture")
    for name in TRAIN_PATIENTS + TEST_PATIENTS:
        write_wfdb_record(d, name)
    return d


@pytest.fixture(scope="session")
def mitbih_dir():
    """Real MIT-BIH directory from $MITBIH_DIR, or skip."""
    d = os.environ.get("MITBIH_DIR")
    if not d or not all(os.path.exists(os.path.join(d, f"{p}.dat")) for p in TRAIN_PATIENTS + TEST_PATIENTS):
        pytest.skip("MIT-BIH records not available (set MITBIH_DIR)")
    return d


@pytest.fixture(scope="session")
def synth_sets():
    return synthetic_datasets(1700, noise_sd=0.05, seed=0)


@pytest.fixture(scope="session")
def small_sets():
    return synthetic_datasets(200, noise_sd=0.05, seed=3)


@pytest.fixture(scope="session")
def trained_vae(small_sets):
    tr, te = small_sets
    model, _ = train(tr.X, te.X, TrainConfig("beta-vae", beta=0.1, epochs=15, seed=1))
    return model


@pytest.fixture(scope="session")
def trained_ae(small_sets):
    tr, te = small_sets
    model, _ = train(tr.X, te.X, TrainConfig("ae", epochs=15, seed=1))
    return model


@pytest.fixture(scope="session")
def converged_vae(synth_sets):
    tr, te = synth_sets
    model, _ = train(tr.X, te.X, TrainConfig("beta-vae", beta=0.1, epochs=50, seed=1))
    return model


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    """Log one acceptance verdict; the lines are echoed in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
