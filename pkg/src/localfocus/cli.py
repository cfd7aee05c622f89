"""Command line interface.

Subcommands: gen-data, train, eval, infer, bench. Every option can also
be supplied through a plain-text config file (``--config``) holding
``key = value`` lines with ``#`` comments; explicit flags override file
values, which override defaults. Unknown config keys are fatal.

Exit codes: 0 success, 1 usage error (bad flag, missing required
option), 2 data error (malformed or unreadable file, out-of-range
config value).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (DatasetManifest, gen_fake, gen_real, load_dataset,
                   read_manifest, write_manifest)
from .errors import ConfigError, DomainError, ParseError, ShapeError, StateError
from .model import LfmModel
from .npr import NprConfig
from .pooling import TkpConfig
from .ppm import load_ppm, save_ppm
from .snet import SNetConfig
from .train import (TrainConfig, bench, build_model, evaluate,
                    save_loss_curve, train, worker_count_from_env)

PROG = "localfocus"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route to exit code 1 instead of argparse's 2
        raise _UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class Field:
    """One CLI option that doubles as a config-file key."""

    name: str
    ftype: str  # int | float | bool | str | intlist
    default: object
    help: str
    required: bool = False


def _parse_value(raw: str, ftype: str, key: str):
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype == "intlist":
            return tuple(int(tok) for tok in raw.split(",") if tok.strip() != "")
        return raw
    except ValueError:
        raise ParseError(f"config key {key!r}: cannot parse {raw!r} as {ftype}") from None


def _format_value(value, ftype: str) -> str:
    if ftype == "bool":
        return "true" if value else "false"
    if ftype == "intlist":
        return ",".join(str(v) for v in value)
    if ftype == "float":
        return repr(float(value))
    return str(value)


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments skipped."""
    entries: dict[str, str] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read config file {path!r}: {e.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'", offset=lineno)
            key, _, val = stripped.partition("=")
            key, val = key.strip(), val.strip()
            if not key:
                raise ParseError(f"{path}:{lineno}: empty key", offset=lineno)
            if key in entries:
                raise ParseError(f"{path}:{lineno}: duplicate key {key!r}", offset=lineno)
            entries[key] = val
    return entries


def _add_arguments(parser: argparse.ArgumentParser, fields: list[Field]) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="config file with 'key = value' lines; flags override it")
    for f in fields:
        flag = "--" + f.name.replace("_", "-")
        if f.ftype == "bool":
            parser.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction,
                                default=None, help=f.help)
        elif f.ftype == "intlist":
            parser.add_argument(flag, dest=f.name, default=None, metavar="N,N,...",
                                type=lambda s: tuple(int(t) for t in s.split(",") if t.strip()),
                                help=f.help)
        else:
            ptype = {"int": int, "float": float, "str": str}[f.ftype]
            parser.add_argument(flag, dest=f.name, default=None, type=ptype, help=f.help)


def _merge(fields: list[Field], ns: argparse.Namespace, prog: str) -> dict:
    file_cfg = read_config_file(ns.config) if ns.config else {}
    known = {f.name for f in fields}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise ParseError(f"unknown config key {unknown[0]!r} (valid keys: {', '.join(sorted(known))})")
    resolved = {}
    for f in fields:
        value = getattr(ns, f.name)
        if value is None and f.name in file_cfg:
            value = _parse_value(file_cfg[f.name], f.ftype, f.name)
        if value is None:
            value = f.default
        if f.required and value is None:
            raise _UsageError(f"{prog}: missing required option --{f.name.replace('_', '-')}")
        resolved[f.name] = value
    return resolved


def emit_config(fields: list[Field], resolved: dict) -> str:
    """Render the effective configuration as a re-ingestable file."""
    lines = []
    for f in sorted(fields, key=lambda f: f.name):
        value = resolved[f.name]
        if value is None:
            continue
        lines.append(f"{f.name} = {_format_value(value, f.ftype)}\n")
    return "".join(lines)


# -- field registries ----------------------------------------------------------

_MODEL_FIELDS = [
    Field("window", "int", 2, "residual grid pitch (pixels)"),
    Field("anchor_index", "int", 0, "row-major anchor position inside each window"),
    Field("take_abs", "bool", True, "feed |residual| instead of the signed residual"),
    Field("num_conv_layers", "int", 5, "conv layers in the salience net"),
    Field("channel_plan", "intlist", None, "output channels per conv layer (must end in 64)"),
    Field("pool_after", "intlist", (1, 2, 3), "1-based conv indices followed by a 2x2 max-pool"),
    Field("activation", "str", "relu", "nonlinearity between conv layers"),
    Field("bias", "bool", True, "per-channel conv bias"),
    Field("pooling", "str", "tkp", "pooling variant: tkp, gap, or gmp"),
    Field("k", "int", 16, "activations kept per channel by top-k pooling"),
    Field("p_min", "float", 0.1, "dropout probability at the lowest kept rank"),
    Field("p_max", "float", 0.3, "dropout probability at the highest kept rank"),
    Field("rbld", "bool", None, "rank-based dropout during training (default: on for tkp)"),
    Field("rks", "bool", None, "random-sample auxiliary vector during training (default: on for tkp)"),
    Field("decision_threshold", "float", 0.5, "probability cutoff for the fake label"),
    Field("alpha", "float", 0.1, "weight of the auxiliary loss term"),
]

_TRAIN_FIELDS = [
    Field("manifest", "str", None, "training manifest (path<TAB>label<TAB>tag)", required=True),
    Field("out", "str", None, "output directory for checkpoints and logs", required=True),
    Field("lr", "float", 1e-4, "Adam learning rate"),
    Field("batch_size", "int", 32, "samples per optimizer step"),
    Field("epochs", "int", 1, "passes over the training set"),
    Field("seed", "int", 0, "run seed; fixes init, shuffles, and dropout"),
] + _MODEL_FIELDS

_GEN_FIELDS = [
    Field("out", "str", None, "output directory for images and manifests", required=True),
    Field("n_train", "int", 2000, "total training samples (half real, half fake)"),
    Field("n_test", "int", 500, "total test samples (half real, half fake)"),
    Field("size", "int", 64, "image side length in pixels"),
    Field("seed", "int", 0, "generator seed"),
]

_EVAL_FIELDS = [
    Field("checkpoint", "str", None, "model checkpoint to evaluate", required=True),
    Field("manifest", "str", None, "evaluation manifest", required=True),
    Field("out", "str", None, "also write the JSON report here"),
]

_INFER_FIELDS = [
    Field("checkpoint", "str", None, "model checkpoint", required=True),
    Field("image", "str", None, "PPM image to score", required=True),
]

_BENCH_FIELDS = [
    Field("checkpoint", "str", None, "model checkpoint", required=True),
    Field("manifest", "str", None, "manifest supplying bench images", required=True),
    Field("batch_size", "int", 32, "images per worker task"),
    Field("workers", "int", None, "worker threads (default: $LOCALFOCUS_WORKERS or 1)"),
]


# -- subcommands ---------------------------------------------------------------


def _cmd_gen_data(opts: dict) -> int:
    import numpy as np

    for key in ("n_train", "n_test"):
        if opts[key] < 2 or opts[key] % 2 != 0:
            raise ConfigError(f"{key} must be an even count >= 2, got {opts[key]}")
    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    seed, size = opts["seed"], opts["size"]

    splits = []
    for split, total, tag in (("train", opts["n_train"], 10), ("test", opts["n_test"], 20)):
        reals = gen_real(total // 2, size, np.random.default_rng((seed, tag)))
        fakes = gen_fake(reals, np.random.default_rng((seed, tag + 1)))
        entries = []
        for i, (r, f) in enumerate(zip(reals, fakes)):
            rname = f"{split}_real_{i:05d}.ppm"
            fname = f"{split}_fake_{i:05d}.ppm"
            save_ppm(r.image, os.path.join(out_dir, rname))
            save_ppm(f.image, os.path.join(out_dir, fname))
            entries.append((rname, r.label, r.source_tag))
            entries.append((fname, f.label, f.source_tag))
        manifest = DatasetManifest(root=out_dir, entries=entries)
        manifest.validate()
        write_manifest(manifest, os.path.join(out_dir, f"{split}_manifest.tsv"))
        splits.append((split, total))

    with open(os.path.join(out_dir, "config_used.cfg"), "w", encoding="utf-8") as fh:
        fh.write(emit_config(_GEN_FIELDS, opts))
    for split, total in splits:
        print(f"wrote {total} {split} samples ({total // 2} real + {total // 2} fake)")
    print(f"manifests and images under {out_dir}")
    return 0


def _configs_from_opts(opts: dict):
    npr_cfg = NprConfig(window=opts["window"], anchor_index=opts["anchor_index"],
                        take_abs=opts["take_abs"])
    snet_cfg = SNetConfig(num_conv_layers=opts["num_conv_layers"],
                          channel_plan=opts["channel_plan"],
                          pool_after=frozenset(opts["pool_after"]),
                          activation=opts["activation"], bias=opts["bias"])
    train_cfg = TrainConfig(lr=opts["lr"], batch_size=opts["batch_size"], epochs=opts["epochs"],
                            seed=opts["seed"], pooling=opts["pooling"],
                            rbld=opts["rbld"], rks=opts["rks"])
    tkp_cfg = TkpConfig(k=opts["k"], p_min=opts["p_min"], p_max=opts["p_max"],
                        rbld_enabled=train_cfg.effective_rbld(),
                        rks_enabled=train_cfg.effective_rks())
    return npr_cfg, snet_cfg, tkp_cfg, train_cfg


def _cmd_train(opts: dict) -> int:
    manifest = read_manifest(opts["manifest"])
    dataset = load_dataset(manifest)
    npr_cfg, snet_cfg, tkp_cfg, train_cfg = _configs_from_opts(opts)
    model = build_model(train_cfg, npr_cfg=npr_cfg, snet_cfg=snet_cfg, tkp_cfg=tkp_cfg,
                        decision_threshold=opts["decision_threshold"], alpha=opts["alpha"])
    result = train(model, dataset, train_cfg)

    out_dir = opts["out"]
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(result.model, os.path.join(out_dir, "checkpoint_last.lfm"))
    save_checkpoint(result.best_model, os.path.join(out_dir, "checkpoint_best.lfm"))
    save_loss_curve(result.epoch_losses, os.path.join(out_dir, "loss_curve.tsv"))

    resolved = dict(opts)
    resolved["rbld"] = train_cfg.effective_rbld()
    resolved["rks"] = train_cfg.effective_rks()
    resolved["channel_plan"] = snet_cfg.channel_plan
    resolved["pool_after"] = tuple(sorted(snet_cfg.pool_after))
    with open(os.path.join(out_dir, "config_used.cfg"), "w", encoding="utf-8") as fh:
        fh.write(emit_config(_TRAIN_FIELDS, resolved))

    for epoch, loss in enumerate(result.epoch_losses):
        print(f"epoch {epoch}: loss {loss!r}")
    print(f"best epoch {result.best_epoch}; artifacts under {out_dir}")
    return 0


def _cmd_eval(opts: dict) -> int:
    model = load_checkpoint(opts["checkpoint"])
    dataset = load_dataset(read_manifest(opts["manifest"]))
    report = evaluate(model, dataset)
    text = report.to_json()
    sys.stdout.write(text)
    if opts["out"]:
        with open(opts["out"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return 0


def _cmd_infer(opts: dict) -> int:
    model = load_checkpoint(opts["checkpoint"])
    image = load_ppm(opts["image"])
    prob, label = model.infer(image)
    print(f"{opts['image']}\t{prob!r}\t{label}")
    return 0


def _cmd_bench(opts: dict) -> int:
    model = load_checkpoint(opts["checkpoint"])
    dataset = load_dataset(read_manifest(opts["manifest"]))
    workers = worker_count_from_env(opts["workers"])
    report = bench(model, [rec.image for rec in dataset],
                   batch_size=opts["batch_size"], workers=workers)
    print(json.dumps(dataclasses.asdict(report), indent=2))
    return 0


_COMMANDS = [
    ("gen-data", _GEN_FIELDS, _cmd_gen_data, "generate a synthetic real/fake dataset"),
    ("train", _TRAIN_FIELDS, _cmd_train, "train a detector and write checkpoints"),
    ("eval", _EVAL_FIELDS, _cmd_eval, "score a manifest and report accuracy / average precision"),
    ("infer", _INFER_FIELDS, _cmd_infer, "score one image"),
    ("bench", _BENCH_FIELDS, _cmd_bench, "measure inference throughput"),
]


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description="local-artifact deepfake detector")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, fields, _fn, help_text in _COMMANDS:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.__class__ = _Parser  # subparsers must also map usage errors to exit 1
        _add_arguments(p, fields)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            return 1
        for name, fields, fn, _help in _COMMANDS:
            if name == ns.command:
                opts = _merge(fields, ns, f"{PROG} {name}")
                return fn(opts)
        raise _UsageError(f"{PROG}: unknown command {ns.command!r}")
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    except (ParseError, ConfigError, DomainError, ShapeError, StateError, OSError) as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
