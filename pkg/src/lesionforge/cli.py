"""Batch command-line front-end.

Subcommands: ``augment`` (apply a configured pipeline to studies listed
in a CSV manifest), ``preview`` (render original/global/local gamma
slices as PGM), ``sample-gamma`` (stream gamma draws for external
statistical checks), ``metrics`` (image-level sensitivity/specificity
from a prediction manifest).

Augment runs are reproducible by construction: every (study, sample)
pair gets the sub-seed ``derive_seed(master_seed, study_id,
sample_index)``, so its outputs depend only on the config and seed,
never on batch composition or worker count.  NIfTI and sidecar writers
are byte-deterministic, which makes reruns diffable at the file level.

The manifest for ``augment`` is long-form CSV with columns
``study_id,channel,path``; a row whose channel is ``mask`` carries the
study's lesion mask.  Relative paths are resolved against the
manifest's own directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DuplicateIdError, LesionForgeError
from .gamma import DEFAULT_GAMMA_SPEC, make_sampler, spec_from_dict
from .metrics import (
    ImageLevelOutcome,
    confusion,
    image_level_positive,
    read_metrics_manifest,
    render_report,
    render_report_csv,
)
from .nifti import read_volume, write_volume
from .pipeline import PipelineConfig, apply_pipeline_recorded
from .preview import generate_previews
from .rng import derive_seed
from .volume import Mask3D, Study, Volume3D, _wrap, validate_mask

SCHEMA_VERSION = 1
MASK_CHANNEL = "mask"

log = logging.getLogger("lesionforge")


def _setup_logging() -> None:
    level_name = os.environ.get("LESIONFORGE_LOG", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@dataclass(frozen=True)
class RunConfig:
    """Augment-run document: manifest, output dir, pipeline, seed, workers."""

    manifest: str
    out_dir: str
    pipeline: PipelineConfig
    master_seed: int
    workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int):
            raise ConfigError(
                f"config error: master_seed must be an integer, got {self.master_seed!r}"
            )
        if int(self.workers) < 1:
            raise ConfigError(f"config error: workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "workers", int(self.workers))
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(
                f"config error: unsupported schema_version {self.schema_version!r}; "
                f"this build reads version {SCHEMA_VERSION}"
            )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "manifest": self.manifest,
            "out_dir": self.out_dir,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "pipeline": self.pipeline.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError(f"config error: run config must be an object, got {doc!r}")
        known = {"schema_version", "manifest", "out_dir", "master_seed", "workers", "pipeline"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"config error: unknown run config field(s) {sorted(unknown)}")
        for required in ("manifest", "out_dir", "pipeline"):
            if required not in doc:
                raise ConfigError(f"config error: run config is missing {required!r}")
        return cls(
            manifest=str(doc["manifest"]),
            out_dir=str(doc["out_dir"]),
            pipeline=PipelineConfig.from_dict(doc["pipeline"]),
            master_seed=doc.get("master_seed", 0),
            workers=doc.get("workers", 1),
            schema_version=doc.get("schema_version", SCHEMA_VERSION),
        )


def load_run_config(path) -> RunConfig:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config error: {path} is not valid JSON ({e})") from e
    return RunConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# augment


def read_study_manifest(path) -> dict[str, list[tuple[str, str]]]:
    """Read the long-form study manifest; returns {study_id: [(channel, path)]}.

    Studies keep first-appearance order; duplicate (study_id, channel)
    pairs are rejected.
    """
    path = Path(path)
    studies: dict[str, list[tuple[str, str]]] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"study_id", "channel", "path"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigError(
                f"config error: manifest {path} must have columns study_id, channel, path"
            )
        for row in reader:
            sid = row["study_id"].strip()
            channel = row["channel"].strip()
            file_path = row["path"].strip()
            if not sid or not channel or not file_path:
                raise ConfigError(f"config error: blank field in manifest row {row!r}")
            entries = studies.setdefault(sid, [])
            if any(c == channel for c, _ in entries):
                raise DuplicateIdError(
                    f"duplicate id: study {sid!r} lists channel {channel!r} twice"
                )
            entries.append((channel, file_path))
    for sid, entries in studies.items():
        if all(c == MASK_CHANNEL for c, _ in entries):
            raise ConfigError(f"config error: study {sid!r} has a mask but no channels")
    return studies


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def _load_study(entries, base_dir: Path):
    """Load one study's channels and optional mask; returns (Study, headers).

    A study with no mask row gets an all-zero stand-in so local gamma
    falls back to the global transform (the sidecar records this); the
    stand-in never appears among the outputs, which is what the missing
    key in ``headers`` signals to the writer.
    """
    channels: dict[str, Volume3D] = {}
    headers: dict[str, object] = {}
    mask = None
    for channel, p in entries:
        vol, header = read_volume(_resolve(base_dir, p))
        if channel == MASK_CHANNEL:
            mask = validate_mask(vol)
            headers[MASK_CHANNEL] = header
        else:
            channels[channel] = vol
            headers[channel] = header
    if mask is None:
        dims = next(iter(channels.values())).dims
        mask = Mask3D(np.zeros(dims, dtype=np.uint8))
    return Study(channels, mask), headers


def _augment_study_job(payload: dict) -> dict:
    """Worker entry: augment one study end to end.

    Takes only JSON-native values so the job pickles cleanly; owns all
    its file reads and writes, so concurrent jobs never share state.
    """
    sid = payload["study_id"]
    try:
        pipeline = PipelineConfig.from_dict(payload["pipeline"])
        base_dir = Path(payload["manifest_dir"])
        out_dir = Path(payload["out_dir"])
        master_seed = payload["master_seed"]
        study, headers = _load_study(payload["entries"], base_dir)

        files: list[str] = []
        for k in range(pipeline.samples_per_study):
            sub_seed = derive_seed(master_seed, sid, k)
            out_study, records = apply_pipeline_recorded(
                study, pipeline.with_master_seed(sub_seed), sample_index=0
            )
            sample_files: list[str] = []
            for name in out_study.channel_names:
                out_path = out_dir / f"{sid}_aug{k}_{name}.nii.gz"
                write_volume(
                    out_study.channels[name],
                    out_path,
                    datatype="float32",
                    header=headers.get(name),
                )
                sample_files.append(out_path.name)
            if MASK_CHANNEL in headers:
                out_path = out_dir / f"{sid}_aug{k}_{MASK_CHANNEL}.nii.gz"
                mask_vol = _wrap(
                    out_study.mask.data.astype("float64"), out_study.spacing
                )
                write_volume(
                    mask_vol, out_path, datatype="float32",
                    header=headers[MASK_CHANNEL],
                )
                sample_files.append(out_path.name)
            sidecar = {
                "schema_version": SCHEMA_VERSION,
                "study_id": sid,
                "sample_index": k,
                "master_seed": master_seed,
                "sub_seed": sub_seed,
                "pipeline": pipeline.with_master_seed(sub_seed).to_dict(),
                "ops": records,
                "outputs": sample_files,
            }
            sidecar_path = out_dir / f"{sid}_aug{k}.json"
            with open(sidecar_path, "w") as f:
                json.dump(sidecar, f, sort_keys=True, indent=2)
                f.write("\n")
            files.extend(sample_files)
            files.append(sidecar_path.name)
        return {"study_id": sid, "ok": True, "files": files}
    except (LesionForgeError, OSError) as e:
        return {"study_id": sid, "ok": False, "error": f"{type(e).__name__}: {e}"}


def cmd_augment(config_path, seed=None, workers=None, out=None) -> int:
    config = load_run_config(config_path)
    if seed is not None:
        config = RunConfig.from_dict({**config.to_dict(), "master_seed": int(seed)})
    if workers is not None:
        config = RunConfig.from_dict({**config.to_dict(), "workers": int(workers)})
    if out is not None:
        config = RunConfig.from_dict({**config.to_dict(), "out_dir": str(out)})

    config_dir = Path(config_path).resolve().parent
    manifest_path = _resolve(config_dir, config.manifest)
    out_dir = _resolve(config_dir, config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    studies = read_study_manifest(manifest_path)
    jobs = [
        {
            "study_id": sid,
            "entries": entries,
            "manifest_dir": str(manifest_path.parent),
            "out_dir": str(out_dir),
            "pipeline": config.pipeline.to_dict(),
            "master_seed": config.master_seed,
        }
        for sid, entries in studies.items()
    ]

    if config.workers == 1 or len(jobs) <= 1:
        results = [_augment_study_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_augment_study_job, jobs))

    failures = [r for r in results if not r["ok"]]
    for r in results:
        if r["ok"]:
            log.info("study %s: wrote %d files", r["study_id"], len(r["files"]))
        else:
            log.error("study %s failed: %s", r["study_id"], r["error"])
            print(f"study {r['study_id']} failed: {r['error']}", file=sys.stderr)
    print(
        f"augment: {len(results) - len(failures)}/{len(results)} studies ok, "
        f"outputs in {out_dir}"
    )
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# preview


def cmd_preview(study_path, mask_path, gammas, out, stem=None) -> int:
    vol, _ = read_volume(study_path)
    mask = None
    if mask_path is not None:
        mask_vol, _ = read_volume(mask_path)
        mask = validate_mask(mask_vol)
    if stem is None:
        stem = Path(study_path).name.split(".")[0]
    meta = generate_previews(vol, mask, gammas, out, stem)
    if meta["used_midpoint_fallback"]:
        print(f"note: no foreground voxels; centered on volume midpoint z={meta['z']}")
    else:
        print(f"slice z={meta['z']} (most foreground voxels)")
    for f in meta["files"]:
        print(f)
    return 0


# ---------------------------------------------------------------------------
# sample-gamma


def cmd_sample_gamma(spec_path, n, seed) -> int:
    n = int(n)
    if n < 1:
        raise ConfigError(f"config error: n must be >= 1, got {n}")
    if spec_path is None:
        spec = DEFAULT_GAMMA_SPEC
    else:
        with open(spec_path) as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config error: {spec_path} is not valid JSON ({e})") from e
        spec = spec_from_dict(doc)
    sampler = make_sampler(spec, int(seed))
    out = sys.stdout
    for g in sampler.sample_many(n):
        out.write(repr(float(g)) + "\n")
    return 0


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(manifest_path, threshold=0.5, out=None) -> int:
    rows = read_metrics_manifest(manifest_path)
    base_dir = Path(manifest_path).resolve().parent
    outcomes: list[ImageLevelOutcome] = []
    offenders: list[str] = []
    for row in rows:
        try:
            vol, _ = read_volume(_resolve(base_dir, row.prediction_path))
        except (LesionForgeError, OSError) as e:
            offenders.append(f"{row.study_id}: {row.prediction_path} ({e})")
            continue
        outcomes.append(
            ImageLevelOutcome(
                study_id=row.study_id,
                predicted=image_level_positive(vol, threshold),
                actual=bool(row.actual_label),
            )
        )
    if offenders:
        print("unreadable prediction volume(s):", file=sys.stderr)
        for line in offenders:
            print(f"  {line}", file=sys.stderr)
        return 1

    counts = confusion(outcomes)
    report = render_report(counts)
    print(report, end="")
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.txt").write_text(report)
        (out_dir / "metrics.csv").write_text(render_report_csv(counts))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionforge",
        description="Deterministic mask-aware 3D intensity augmentation for MRI studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="augment studies listed in a manifest")
    p.add_argument("--config", required=True, help="run config JSON path")
    p.add_argument("--seed", type=int, default=None, help="override the config master seed")
    p.add_argument("--workers", type=int, default=None, help="override the worker count")
    p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("preview", help="render gamma-transform slice previews")
    p.add_argument("--study", required=True, help="volume NIfTI path")
    p.add_argument("--mask", default=None, help="mask NIfTI path")
    p.add_argument(
        "--gammas", default="0.7,1.5",
        help="comma-separated gamma values (default 0.7,1.5)",
    )
    p.add_argument("--out", default=".", help="output directory for PGM files")
    p.add_argument("--stem", default=None, help="output filename stem")

    p = sub.add_parser("sample-gamma", help="print gamma draws, one per line")
    p.add_argument("--spec", default=None, help="sampler spec JSON path (default: built-in mixture)")
    p.add_argument("-n", "--count", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=int, default=0, help="stream seed")

    p = sub.add_parser("metrics", help="image-level sensitivity/specificity from a manifest")
    p.add_argument("--manifest", required=True, help="CSV manifest path")
    p.add_argument("--threshold", type=float, default=0.5, help="positivity threshold (default 0.5)")
    p.add_argument("--out", default=None, help="directory for metrics.txt/metrics.csv")

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "augment":
            return cmd_augment(args.config, seed=args.seed, workers=args.workers, out=args.out)
        if args.command == "preview":
            gammas = [float(g) for g in args.gammas.split(",") if g.strip()]
            return cmd_preview(args.study, args.mask, gammas, args.out, stem=args.stem)
        if args.command == "sample-gamma":
            return cmd_sample_gamma(args.spec, args.count, args.seed)
        if args.command == "metrics":
            return cmd_metrics(args.manifest, threshold=args.threshold, out=args.out)
        raise AssertionError(f"unhandled command {args.command!r}")
    except (LesionForgeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
