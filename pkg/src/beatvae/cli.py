"""``beatvae`` command line: ingest -> train -> analyze / report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
import argparse
import csv
import logging
import os
import sys
import tempfile
import warnings

import numpy as np

from . import analysis
from .dataset import (
    PreprocessConfig,
    dataset_digest,
    label_counts,
    load_mitbih,
    read_epochs_csv,
    read_manifest_digest,
    synthetic_datasets,
    write_epochs_csv,
    write_manifest,
)
from .errors import ArtifactError, DataError, NumericalError, WfdbFormatError
from .pipeline import BETA_SWEEP, TrainConfig, load_model, save_model, train
from .svg import Panel, SvgFigure

log = logging.getLogger("beatvae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return f"{v:.9g}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _atomic_write(final_dir, writers):
    """Run every ``(name, fn(path))`` into a temp dir, then move all files in place."""
    os.makedirs(final_dir, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=final_dir) as tmp:
        for name, fn in writers:
            fn(os.path.join(tmp, name))
        for name, _ in writers:
            os.replace(os.path.join(tmp, name), os.path.join(final_dir, name))


# --- ingest ----------------------------------------------------------------------

def cmd_ingest(args):
    config = PreprocessConfig(channel=args.channel, extra_lowpass_hz=args.extra_lowpass)
    if args.synthetic:
        train_set, test_set = synthetic_datasets(args.synthetic, args.noise_sd, args.seed)
        source = f"synthetic count={args.synthetic} noise_sd={args.noise_sd} seed={args.seed}"
    else:
        if not args.data_dir:
            raise UsageError("ingest needs --data-dir or --synthetic N")
        if not os.path.isdir(args.data_dir):
            raise DataError(f"data directory {args.data_dir} does not exist")
        _, (train_set, test_set) = load_mitbih(args.data_dir, config)
        source = "mitbih"

    def manifest(path):
        digest = dataset_digest(os.path.join(os.path.dirname(path), "train.csv"),
                                os.path.join(os.path.dirname(path), "test.csv"))
        counts = {**label_counts(train_set), **label_counts(test_set)}
        write_manifest(path, config, counts, digest, source)

    _atomic_write(args.out, [
        ("train.csv", lambda p: write_epochs_csv(train_set, p)),
        ("test.csv", lambda p: write_epochs_csv(test_set, p)),
        ("manifest.txt", manifest),
    ])
    print(f"train: {len(train_set)} epochs from {', '.join(train_set.patients)}")
    print(f"test:  {len(test_set)} epochs from {', '.join(test_set.patients)}")
    return EXIT_OK


# --- train -------------------------------------------------------------------------

def _dataset_hash(train_csv, test_csv):
    manifest = os.path.join(os.path.dirname(os.path.abspath(train_csv)), "manifest.txt")
    if os.path.exists(manifest):
        digest = read_manifest_digest(manifest)
        if digest:
            return digest
    return dataset_digest(train_csv, test_csv)


def _train_one(config, x_train, x_test, out_dir, stem, dataset_hash):
    model, history = train(x_train, x_test, config)
    save_model(model, config, os.path.join(out_dir, f"{stem}.bin"), dataset_hash)
    history.write_csv(os.path.join(out_dir, f"{stem}_history.csv"), config.model_kind)
    return model, history


def cmd_train(args):
    train_set = read_epochs_csv(args.train, "train")
    test_set = read_epochs_csv(args.test, "test") if args.test else None
    if len(train_set) == 0:
        raise DataError(f"{args.train}: no epochs")
    x_test = test_set.X if test_set is not None else None
    digest = _dataset_hash(args.train, args.test) if args.test else dataset_digest(args.train)
    os.makedirs(args.out, exist_ok=True)

    if args.beta_sweep:
        rows = []
        for beta in BETA_SWEEP:
            config = TrainConfig("beta-vae", beta, args.epochs, args.batch_size, args.rho, args.epsilon, args.seed)
            model, history = _train_one(config, train_set.X, x_test, args.out, f"model_beta{beta:g}", digest)
            _, stats = analysis.embed_dataset(model, train_set.X)
            sig = analysis.significant_dims(stats, args.tau)
            final = history.records[-1]
            rows.append([_fmt(beta), _fmt(final.l_r), _fmt(final.d_kl), len(sig),
                         " ".join(str(d) for d in sig)])
            print(f"beta={beta:g}: l_r={final.l_r:.4f} d_kl={final.d_kl:.4f} significant={sig}")
        _write_rows(os.path.join(args.out, "beta_sweep.csv"),
                    ["beta", "l_r", "d_kl", "n_significant", "significant_dims"], rows)
        return EXIT_OK

    config = TrainConfig(args.model, args.beta, args.epochs, args.batch_size, args.rho, args.epsilon, args.seed)
    _, history = _train_one(config, train_set.X, x_test, args.out, "model", digest)
    final = history.records[-1]
    print(f"{config.model_kind}: {len(history)} epochs, final loss {final.loss:.6f}, test {final.test_loss:.6f}")
    return EXIT_OK


# --- analyze -------------------------------------------------------------------

def _load(args):
    art = load_model(args.model)
    data_csv = getattr(args, "epochs_csv", None)
    if data_csv and art.dataset_hash:
        manifest = os.path.join(os.path.dirname(os.path.abspath(data_csv)), "manifest.txt")
        if os.path.exists(manifest) and read_manifest_digest(manifest) != art.dataset_hash:
            msg = f"model was trained on dataset {art.dataset_hash[:12]}, {manifest} describes another"
            warnings.warn(msg)
            print(f"warning: {msg}", file=sys.stderr)
    return art


def _epoch_panels(decoded, titles):
    return [Panel(t, [("decoded", row)]) for t, row in zip(titles, decoded)]


def cmd_stats(args):
    art = _load(args)
    ds = read_epochs_csv(args.epochs_csv)
    _, stats = analysis.embed_dataset(art.model, ds.X)
    is_vae = art.model_kind == "beta-vae"
    sig = analysis.significant_dims(stats, args.tau) if is_vae else None
    rows = []
    for d in range(len(stats.std)):
        mark = ("yes" if d in sig else "no") if is_vae else "n/a (AE)"
        rows.append([d, _fmt(stats.mean[d]), _fmt(stats.std[d]),
                     _fmt(stats.mean_sigma[d]) if is_vae else "", mark])
    os.makedirs(args.out, exist_ok=True)
    _write_rows(os.path.join(args.out, "stats.csv"), ["dim", "mean_mu", "std_mu", "mean_sigma", "significant"], rows)
    print("dim  std(mu)   significant")
    for d, s in stats.spectrum:
        mark = ("*" if d in sig else "") if is_vae else "n/a (AE)"
        print(f"{d:3d}  {s:8.4f}  {mark}")
    if is_vae:
        print(f"significant dims (tau={args.tau}): {sig}")
    return EXIT_OK


def _parse_grid(text):
    lo, hi, n = text.split(",")
    return np.linspace(float(lo), float(hi), int(n))


def cmd_sweep(args):
    art = _load(args)
    ds = read_epochs_csv(args.epochs_csv)
    if not 0 <= args.epoch_index < len(ds):
        raise IndexError(f"epoch index {args.epoch_index} out of range [0, {len(ds)})")
    epoch = ds.epochs[args.epoch_index]
    res = analysis.perturb_sweep(art.model, epoch, args.dim, _parse_grid(args.grid), args.from_origin)
    stem = f"sweep_dim{args.dim}_epoch{args.epoch_index}"
    os.makedirs(args.out, exist_ok=True)
    header = ["value"] + [f"s{i}" for i in range(res.decoded.shape[1])]
    _write_rows(os.path.join(args.out, stem + ".csv"), header,
                [[_fmt(v)] + [_fmt(x) for x in row] for v, row in zip(res.grid, res.decoded)])
    panels = [Panel("input", [("input", res.base)])]
    panels += _epoch_panels(res.decoded, [f"dim {args.dim} = {v:g}" for v in res.grid])
    title = f"{art.model_kind}: {epoch.label.name.lower()} beat, dimension {args.dim}"
    SvgFigure(panels, title=title).save(os.path.join(args.out, stem + ".svg"))
    print(f"wrote {stem}.csv and {stem}.svg")
    return EXIT_OK


def cmd_corners(args):
    art = _load(args)
    if args.dims:
        dims = tuple(int(d) for d in args.dims.split(","))
        if len(dims) != 2:
            raise UsageError("--dims takes two comma-separated indices")
    else:
        if not args.epochs_csv:
            raise UsageError("corners needs --dims or --epochs-csv to pick significant dims")
        _, stats = analysis.embed_dataset(art.model, read_epochs_csv(args.epochs_csv).X)
        dims = tuple(d for d, _ in stats.spectrum[:2])
    res = analysis.corner_decode(art.model, dims, args.value)
    stem = f"corners_{dims[0]}_{dims[1]}"
    os.makedirs(args.out, exist_ok=True)
    header = ["corner", f"z{dims[0]}", f"z{dims[1]}"] + [f"s{i}" for i in range(res.decoded.shape[1])]
    rows = [[lab, _fmt(c[dims[0]]), _fmt(c[dims[1]])] + [_fmt(x) for x in row]
            for lab, c, row in zip(res.labels, res.corners, res.decoded)]
    _write_rows(os.path.join(args.out, stem + ".csv"), header, rows)
    fig = SvgFigure(_epoch_panels(res.decoded, [f"embedding = {lab}" for lab in res.labels]),
                    columns=4, title=f"decoded corners, dims {dims[0]} and {dims[1]}")
    fig.save(os.path.join(args.out, stem + ".svg"))
    print(f"wrote {stem}.csv and {stem}.svg")
    return EXIT_OK


def cmd_report(args):
    art = load_model(args.model)
    sets = [read_epochs_csv(args.train, "train")]
    if args.test:
        sets.append(read_epochs_csv(args.test, "test"))
    rows = analysis.reconstruction_report(art.model, sets)
    os.makedirs(args.out, exist_ok=True)
    _write_rows(os.path.join(args.out, "report.csv"), ["split", "class", "count", "l_r"],
                [[s, c, n, _fmt(v)] for s, c, n, v in rows])
    for s, c, n, v in rows:
        print(f"{s:5s} {c:3s} n={n:6d} L_R={v:.5f}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="beatvae", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", help="build train/test epoch CSVs")
    ing.add_argument("--data-dir", help="directory with MIT-BIH .hea/.dat/.atr files")
    ing.add_argument("--out", required=True)
    ing.add_argument("--channel", type=int, default=0)
    ing.add_argument("--extra-lowpass", type=float, default=None, metavar="HZ",
                     help="extra Butterworth lowpass before decimation (off by default)")
    ing.add_argument("--synthetic", type=int, default=0, metavar="N",
                     help="generate N synthetic beats per class and split instead of reading records")
    ing.add_argument("--noise-sd", type=float, default=0.05)
    ing.add_argument("--seed", type=int, default=0)
    ing.set_defaults(func=cmd_ingest)

    tr = sub.add_parser("train", help="train an AE or beta-VAE")
    tr.add_argument("--train", required=True)
    tr.add_argument("--test")
    tr.add_argument("--out", required=True)
    tr.add_argument("--model", choices=("ae", "beta-vae"), default="beta-vae")
    tr.add_argument("--beta", type=float, default=0.5)
    tr.add_argument("--epochs", type=int, default=50)
    tr.add_argument("--batch-size", type=int, default=128)
    tr.add_argument("--rho", type=float, default=0.95)
    tr.add_argument("--epsilon", type=float, default=1e-6)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--beta-sweep", action="store_true", help=f"train one beta-VAE per beta in {BETA_SWEEP}")
    tr.add_argument("--tau", type=float, default=analysis.DEFAULT_TAU)
    tr.set_defaults(func=cmd_train)

    an = sub.add_parser("analyze", help="embedding statistics, sweeps and corner decoding")
    asub = an.add_subparsers(dest="analysis", required=True, parser_class=_Parser)

    st = asub.add_parser("stats")
    st.add_argument("--model", required=True)
    st.add_argument("--epochs-csv", required=True)
    st.add_argument("--tau", type=float, default=analysis.DEFAULT_TAU)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_stats)

    sw = asub.add_parser("sweep")
    sw.add_argument("--model", required=True)
    sw.add_argument("--epochs-csv", required=True)
    sw.add_argument("--dim", type=int, required=True)
    sw.add_argument("--epoch-index", type=int, default=0)
    sw.add_argument("--grid", default="-3,3,7", help="lo,hi,count; write as --grid=-2,2,5 when lo is negative (default -3,3,7)")
    sw.add_argument("--from-origin", action="store_true", help="zero the other dimensions")
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=cmd_sweep)

    co = asub.add_parser("corners")
    co.add_argument("--model", required=True)
    co.add_argument("--dims", help="two comma-separated dimensions, e.g. 0,9")
    co.add_argument("--epochs-csv", help="pick the two highest-std dims from this data when --dims is absent")
    co.add_argument("--value", type=float, default=2.0)
    co.add_argument("--out", required=True)
    co.set_defaults(func=cmd_corners)

    rp = sub.add_parser("report", help="per-class reconstruction error")
    rp.add_argument("--model", required=True)
    rp.add_argument("--train", required=True)
    rp.add_argument("--test")
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"beatvae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, WfdbFormatError, ArtifactError, IndexError, FileNotFoundError) as exc:
        print(f"beatvae: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"beatvae: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"beatvae: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
