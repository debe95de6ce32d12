"""Command-line driver: synth, ingest, align, evaluate and report.

Every run writes ``config.json`` into its output directory. Passing that
file back with ``--config`` repeats the run exactly. Exit codes: 0 on
success, 1 for invalid configuration, 2 for data or runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .align import align_in_record
from .classify import EvalReport, FeatureSchema, FrequencySource, evaluate_pipeline, prepare_record
from .io import IngestError, ingest_csv, write_audit, write_csv, write_paln1, write_window_csvs
from .segmentation import DatasetManifest, OnsetMode, SplitSpec, WindowingSpec, WindowStack, split_files, window_stack
from .spectral import batch_phases
from .synth import PRESETS, RotorModel, generate_benchmark
from .types import AlignmentMode, AxisId

log = logging.getLogger("vibphase")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 1, 2
COMMANDS = ("synth", "ingest", "align", "evaluate", "report")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    command: str = ""
    out: str = "out"
    seed: int = 0
    # data source
    preset: str | None = None
    files_per_class: int = 16
    n_samples: int = 40000
    noise_sigma: float | None = None
    manifest: str | None = None
    inputs: list[str] = field(default_factory=list)
    sample_rate_hz: float | None = None
    report: str | None = None
    # protocol
    dominant_freq: float | None = None
    detect_band: list[float] | None = None
    window_len: int = 512
    skip_len: int = 32
    onset: str = "arbitrary"
    trim: int = 30000
    keep: int | None = 10000
    split: str = "11:1:4"
    # alignment and evaluation
    modes: list[str] = field(default_factory=lambda: ["none", "independent", "reference:x"])
    target_phi: float = 0.0
    schema: str = "spectral:16"
    k_grid: list[int] = field(default_factory=lambda: [1, 3, 5, 7, 9])
    repetitions: int = 5
    format: str = "paln1"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def frequency(self) -> FrequencySource:
        if self.dominant_freq is not None and self.detect_band is not None:
            raise ConfigError("give either --dominant-freq or --detect-band, not both")
        if self.detect_band is not None:
            lo, hi = self.detect_band
            return FrequencySource(None, (float(lo), float(hi)))
        return FrequencySource(20.0 if self.dominant_freq is None else float(self.dominant_freq))

    def windowing(self) -> WindowingSpec:
        return WindowingSpec(self.window_len, self.skip_len, OnsetMode.parse(self.onset))

    def alignment_modes(self) -> list[AlignmentMode]:
        if not self.modes:
            raise ConfigError("at least one --mode is required")
        return [AlignmentMode.parse(m) for m in self.modes]

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        try:
            self.frequency()
            self.windowing()
            self.alignment_modes()
            FeatureSchema.parse(self.schema)
            SplitSpec.parse(self.split, self.seed)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.k_grid or any(k < 1 or k % 2 == 0 for k in self.k_grid):
            raise ConfigError(f"k grid must hold positive odd integers, got {self.k_grid}")
        if self.format not in ("csv", "paln1"):
            raise ConfigError(f"unknown store format {self.format!r}")
        if self.trim < 0 or (self.keep is not None and self.keep < 1):
            raise ConfigError("trim must be >= 0 and keep >= 1")

        needs_source = {"synth": "preset", "ingest": "inputs", "align": "manifest", "report": "report"}
        if self.command == "evaluate":
            if (self.preset is None) == (self.manifest is None):
                raise ConfigError("evaluate needs exactly one data source: --preset or --manifest")
        elif self.command in needs_source and not getattr(self, needs_source[self.command]):
            raise ConfigError(f"{self.command} needs --{needs_source[self.command]}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.command in ("synth", "evaluate") and self.preset is not None and self.files_per_class < 1:
            raise ConfigError(f"files-per-class must be >= 1, got {self.files_per_class}")
        for name in ("manifest", "report"):
            p = getattr(self, name)
            if p is not None and self.command != "synth" and not Path(p).is_file():
                raise ConfigError(f"{name} file not found: {p}")
        for p in self.inputs:
            if not Path(p).exists():
                raise ConfigError(f"input not found: {p}")


def _band(text: str) -> list[float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LOW:HIGH, got {text!r}") from None
    return [lo, hi]


def _k_grid(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"k grid must be comma-separated integers, got {text!r}") from None


def _keep(text: str) -> int | None:
    return None if text.lower() in ("all", "none") else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibphase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run configuration; flags override its values")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("-v", "--verbose", action="store_true", default=False)

    source = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    source.add_argument("--preset", help="synthetic preset: " + ", ".join(sorted(PRESETS)))
    source.add_argument("--files-per-class", dest="files_per_class", type=int)
    source.add_argument("--n-samples", dest="n_samples", type=int)
    source.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    source.add_argument("--split", help="train:val:test file ratio, default 11:1:4")

    protocol = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    protocol.add_argument("--manifest", help="dataset manifest JSON")
    protocol.add_argument("--dominant-freq", dest="dominant_freq", type=float, help="fixed f_d in Hz")
    protocol.add_argument("--detect-band", dest="detect_band", type=_band, help="detect f_d in LOW:HIGH Hz")
    protocol.add_argument("--window-len", dest="window_len", type=int)
    protocol.add_argument("--skip-len", dest="skip_len", type=int)
    protocol.add_argument("--onset", help="arbitrary | phase[:axis[:target]]")
    protocol.add_argument("--trim", type=int)
    protocol.add_argument("--keep", type=_keep, help="samples kept after trimming, or 'all'")
    protocol.add_argument("--mode", dest="modes", action="append",
                          help="none | independent | reference:x|y|z (repeatable)")
    protocol.add_argument("--target-phi", dest="target_phi", type=float)

    sub.add_parser("synth", parents=[common, source], help="write a synthetic benchmark corpus")

    p = sub.add_parser("ingest", parents=[common], help="validate CSV records and write a manifest")
    p.add_argument("inputs", nargs="+", help="CSV files or directories")
    p.add_argument("--sample-rate", dest="sample_rate_hz", type=float, default=argparse.SUPPRESS)
    p.add_argument("--split", default=argparse.SUPPRESS)

    p = sub.add_parser("align", parents=[common, protocol], help="segment and align into window stores")
    p.add_argument("--format", choices=("csv", "paln1"), default=argparse.SUPPRESS)

    p = sub.add_parser("evaluate", parents=[common, source, protocol], help="compare alignment modes")
    p.add_argument("--schema", default=argparse.SUPPRESS, help="raw | spectral:N")
    p.add_argument("--k-grid", dest="k_grid", type=_k_grid, default=argparse.SUPPRESS)
    p.add_argument("--repetitions", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("report", parents=[common], help="re-render tables and figures from report.json")
    p.add_argument("report", help="report.json written by evaluate")
    return parser


def resolve_config(argv: list[str] | None = None) -> tuple[RunConfig, bool]:
    ns = vars(build_parser().parse_args(argv))
    verbose = ns.pop("verbose", False)
    base: dict = {}
    cfg_path = ns.pop("config", None)
    if cfg_path:
        try:
            base = json.loads(Path(cfg_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {cfg_path}: {exc}") from None
        if base.get("command") not in (None, ns["command"]):
            raise ConfigError(f"config was written by {base['command']!r}, not {ns['command']!r}")
    base.update(ns)
    if "modes" in ns and ns["modes"]:
        base["modes"] = ns["modes"]
    cfg = RunConfig.from_dict(base)
    if cfg.command == "ingest":
        cfg.inputs = [str(p) for p in cfg.inputs]
    cfg.validate()
    return cfg, verbose


def _write_config(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")


def _model(cfg: RunConfig) -> RotorModel:
    kw = {"n_samples": cfg.n_samples}
    if cfg.noise_sigma is not None:
        kw["noise_sigma"] = cfg.noise_sigma
    if cfg.dominant_freq is not None:
        kw["f_d"] = cfg.dominant_freq
    return RotorModel.from_preset(cfg.preset, **kw)


def cmd_synth(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    _write_config(cfg, out)
    records = generate_benchmark(_model(cfg), cfg.files_per_class, cfg.seed)
    data_dir = out / "records"
    data_dir.mkdir(exist_ok=True)
    entries = []
    for rec in records:
        path = data_dir / f"{rec.source_id}.csv"
        write_csv(rec, path, {"preset": cfg.preset})
        entries.append((str(path.relative_to(out)), rec.label))
    manifest = split_files(
        entries,
        SplitSpec.parse(cfg.split, cfg.seed),
        cfg.windowing(),
        trim=cfg.trim,
        keep=cfg.keep,
        provenance={"source": f"synthetic:{cfg.preset}", "files_per_class": cfg.files_per_class},
    )
    manifest.save(out / "manifest.json")
    print(f"wrote {len(records)} records and manifest.json to {out}")
    return EXIT_OK


def _expand_inputs(inputs: list[str]) -> list[Path]:
    paths: list[Path] = []
    for p in map(Path, inputs):
        paths.extend(sorted(p.rglob("*.csv")) if p.is_dir() else [p])
    return paths


def cmd_ingest(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    _write_config(cfg, out)
    ok, rows = [], []
    for path in _expand_inputs(cfg.inputs):
        try:
            rec = ingest_csv(path, cfg.sample_rate_hz)
        except (IngestError, OSError) as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        if rec.label is None:
            log.warning("skipping %s: no class label in header", path)
            continue
        ok.append((str(path.resolve()), rec.label))
        rows.append(f"{path},{rec.label.tag},{rec.spec.sample_rate_hz!r},{rec.spec.n_samples}")
    if not ok:
        log.error("no input file could be ingested")
        return EXIT_DATA
    (out / "ingest.csv").write_text("path,label,sample_rate_hz,n_samples\n" + "\n".join(rows) + "\n")
    manifest = split_files(
        ok, SplitSpec.parse(cfg.split, cfg.seed), cfg.windowing(), trim=cfg.trim, keep=cfg.keep,
        provenance={"source": "ingest"},
    )
    manifest.save(out / "manifest.json")
    print(f"ingested {len(ok)} files; manifest.json written to {out}")
    return EXIT_OK


def _mode_dir(mode: AlignmentMode) -> str:
    return mode.key.replace(":", "-")


def cmd_align(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    _write_config(cfg, out)
    manifest = DatasetManifest.load(cfg.manifest).with_windowing(cfg.windowing())
    manifest = dataclasses.replace(manifest, trim=cfg.trim, keep=cfg.keep)
    modes = cfg.alignment_modes()
    freq = cfg.frequency()
    audits: dict[str, list[dict]] = {m.key: [] for m in modes}
    done = 0
    for entry in manifest.entries:
        try:
            rec = prepare_record(ingest_csv(manifest.resolve(entry)), manifest)
            f_d = freq.resolve(rec)
            stack = window_stack(rec, manifest.windowing, f_d)
        except (IngestError, OSError, ValueError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            continue
        fs = rec.spec.sample_rate_hz
        positions = stack.origins + stack.residual_s * fs
        for mode in modes:
            aligned, pre, dt = align_in_record(
                rec.data, positions, manifest.windowing.window_len, mode, f_d, fs, cfg.target_phi
            )
            post, _, _ = batch_phases(aligned, f_d, fs)
            out_stack = WindowStack(aligned, stack.origins, fs, stack.residual_s, rec.label, rec.source_id)
            mdir = out / _mode_dir(mode)
            mdir.mkdir(exist_ok=True)
            if cfg.format == "paln1":
                write_paln1(out_stack, mode.key, mdir / f"{rec.source_id}.paln1")
            else:
                write_window_csvs(out_stack, mode.key, mdir / rec.source_id)
            for i, origin in enumerate(stack.origins):
                audits[mode.key].append({
                    "source_id": rec.source_id,
                    "window": i,
                    "origin_index": int(origin),
                    "freq_hz": float(f_d),
                    **{f"pre_phase_{a}": float(pre[i, j]) for j, a in enumerate("xyz")},
                    **{f"post_phase_{a}": float(post[i, j]) for j, a in enumerate("xyz")},
                    **{f"dt_{a}": float(dt[i, j]) for j, a in enumerate("xyz")},
                })
        done += 1
    if done == 0:
        log.error("every file failed; nothing aligned")
        return EXIT_DATA
    from .report import plot_phase_audit

    for mode in modes:
        mdir = out / _mode_dir(mode)
        write_audit(audits[mode.key], mdir / "audit.csv")
        plot_phase_audit(audits[mode.key], mdir / "audit.png")
    print(f"aligned {done}/{len(manifest.entries)} files in {len(modes)} mode(s) into {out}")
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig) -> int:
    from .report import format_table, render_report

    out = Path(cfg.out)
    _write_config(cfg, out)
    windowing = cfg.windowing()
    records = None
    if cfg.preset is not None:
        recs = generate_benchmark(_model(cfg), cfg.files_per_class, cfg.seed)
        records = {r.source_id: r for r in recs}
        manifest = split_files(
            [(r.source_id, r.label) for r in recs], SplitSpec.parse(cfg.split, cfg.seed), windowing,
            trim=cfg.trim, keep=cfg.keep, provenance={"source": f"synthetic:{cfg.preset}"},
        )
    else:
        manifest = DatasetManifest.load(cfg.manifest).with_windowing(windowing)
        manifest = dataclasses.replace(manifest, trim=cfg.trim, keep=cfg.keep)
    report = evaluate_pipeline(
        manifest,
        cfg.alignment_modes(),
        FeatureSchema.parse(cfg.schema),
        cfg.k_grid,
        cfg.repetitions,
        cfg.seed,
        cfg.frequency(),
        records=records,
        target_phi=cfg.target_phi,
    )
    if cfg.preset is not None:
        report = EvalReport(report.rows, {**report.config, "preset": cfg.preset}, report.note)
    render_report(report, out)
    sys.stdout.write(format_table(report))
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    from .report import format_table, render_report

    try:
        report = EvalReport.from_dict(json.loads(Path(cfg.report).read_text()))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        log.error("cannot read report %s: %s", cfg.report, exc)
        return EXIT_DATA
    out = Path(cfg.out)
    _write_config(cfg, out)
    render_report(report, out)
    sys.stdout.write(format_table(report))
    return EXIT_OK


HANDLERS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "align": cmd_align,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg, verbose = resolve_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors and --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return HANDLERS[cfg.command](cfg)
    except (IngestError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
