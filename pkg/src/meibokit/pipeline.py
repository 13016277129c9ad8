"""End-to-end batch pipeline: quantify, ingest, join, knowledge, assemble, split, emit.

All stage outputs are written to a staging area inside the output directory
and promoted only after every stage has succeeded, so re-runs never mix
stale and fresh artifacts. Given an identical config and seed the promoted
outputs are bit-identical.
"""

import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from meibokit.assemble import AblationConfig, Grouping, assemble, emit_jsonl, split
from meibokit.clinical import join_morphology, parse_clinical_table
from meibokit.errors import ConfigError, MaskError, MeibokitError
from meibokit.evaluate import ScoringPolicy
from meibokit.knowledge import cases_to_qa, criteria_to_qa, ingest_trial_criteria, load_clinician_cases
from meibokit.llm_client import EndpointConfig, llm_render_batch
from meibokit.morphometry import load_intensity_image, load_labeled_mask, quantify

log = logging.getLogger("meibokit.pipeline")

STAGE_ORDER = ("quantify", "ingest", "join", "knowledge", "assemble", "split", "emit")


@dataclass
class PipelineConfig:
    clinical_table: Path
    output_dir: Path
    masks_dir: Path | None = None
    images_dir: Path | None = None
    criteria_csv: Path | None = None
    cases_json: Path | None = None
    offline: bool = True
    endpoint: EndpointConfig | None = None
    ablation: AblationConfig = field(default_factory=AblationConfig)
    ratio: float = 0.9
    seed: int = 0
    grouping: Grouping = Grouping.BY_SUBJECT
    unknown_policy: ScoringPolicy = ScoringPolicy.COUNT_AS_WRONG
    jobs: int = 4

    def to_dict(self) -> dict:
        return {
            "paths": {
                "clinical_table": str(self.clinical_table),
                "output_dir": str(self.output_dir),
                "masks_dir": None if self.masks_dir is None else str(self.masks_dir),
                "images_dir": None if self.images_dir is None else str(self.images_dir),
                "criteria_csv": None if self.criteria_csv is None else str(self.criteria_csv),
                "cases_json": None if self.cases_json is None else str(self.cases_json),
            },
            "offline": self.offline,
            "endpoint": None if self.endpoint is None else self.endpoint.to_dict(),
            "ablation": self.ablation.to_dict(),
            "split": {
                "ratio": self.ratio,
                "seed": self.seed,
                "grouping": self.grouping.value,
            },
            "unknown_policy": self.unknown_policy.value,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        paths = d.get("paths") or {}
        if not paths.get("clinical_table"):
            raise ConfigError("config missing required field: paths.clinical_table")
        if not paths.get("output_dir"):
            raise ConfigError("config missing required field: paths.output_dir")

        def opt_path(key):
            v = paths.get(key)
            return None if v in (None, "") else Path(v)

        split_cfg = d.get("split") or {}
        endpoint = d.get("endpoint")
        return cls(
            clinical_table=Path(paths["clinical_table"]),
            output_dir=Path(paths["output_dir"]),
            masks_dir=opt_path("masks_dir"),
            images_dir=opt_path("images_dir"),
            criteria_csv=opt_path("criteria_csv"),
            cases_json=opt_path("cases_json"),
            offline=bool(d.get("offline", True)),
            endpoint=None if endpoint is None else EndpointConfig.from_dict(endpoint),
            ablation=AblationConfig.from_dict(d.get("ablation") or {}),
            ratio=float(split_cfg.get("ratio", 0.9)),
            seed=int(split_cfg.get("seed", 0)),
            grouping=Grouping(split_cfg.get("grouping", "by_subject")),
            unknown_policy=ScoringPolicy(d.get("unknown_policy", "count_as_wrong")),
            jobs=int(d.get("jobs", 4)),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        return cls.from_dict(data)

    def validate(self) -> None:
        """Fail fast: every referenced input path must exist before any stage runs."""
        checks = [
            ("clinical_table", self.clinical_table),
            ("masks_dir", self.masks_dir),
            ("images_dir", self.images_dir),
            ("criteria_csv", self.criteria_csv),
            ("cases_json", self.cases_json),
        ]
        for name, path in checks:
            if path is not None and not Path(path).exists():
                raise ConfigError(f"config field {name}: path does not exist: {path}")
        if not 0 < self.ratio < 1:
            raise ConfigError(f"config field split.ratio: must be in (0, 1), got {self.ratio}")
        if not self.offline and self.endpoint is None:
            raise ConfigError("config field endpoint: required unless offline is true")
        self.ablation.validate()


class StageFailure(MeibokitError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def _mask_sidecar_pairs(masks_dir: Path):
    pngs = sorted(masks_dir.glob("*.png"))
    return [(png, png.with_suffix(".json")) for png in pngs]


def quantify_directory(masks_dir, out_dir, images_dir=None, jobs: int = 4):
    """Quantify every mask/sidecar pair in a directory.

    Per-file failures do not stop the batch; they are collected into a
    failure manifest. Returns (morphologies, failures, written_paths).
    """
    masks_dir = Path(masks_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = _mask_sidecar_pairs(masks_dir)
    if not pairs:
        raise MaskError(f"no inputs: no .png masks in {masks_dir}")

    def run_one(item):
        png, sidecar = item
        mask = load_labeled_mask(png, sidecar)
        image = None
        if images_dir is not None:
            image_path = Path(images_dir) / png.name
            if image_path.exists():
                image = load_intensity_image(image_path)
        return quantify(mask, image)

    morphologies, failures, written = [], [], []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = pool.map(lambda it: _safe(run_one, it), pairs)
        for (png, sidecar), (morph, error) in zip(pairs, results):
            if error is not None:
                failures.append({"mask": str(png), "error": error})
                continue
            out_path = out_dir / f"{morph.subject_eye_id}.json"
            morph.write_json(out_path)
            morphologies.append(morph)
            written.append(out_path)
    manifest = out_dir / "failures.json"
    manifest.write_text(json.dumps(failures, indent=2, sort_keys=True) + "\n")
    return morphologies, failures, written


def _safe(fn, item):
    try:
        return fn(item), None
    except MeibokitError as exc:
        return None, str(exc)


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run all stages and atomically promote outputs into cfg.output_dir.

    Returns the promoted output paths keyed by artifact name. Any stage's
    fatal error aborts with the stage name and cause, leaving previous
    promoted outputs untouched.
    """
    cfg.validate()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = out_dir / ".staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir()
    stage_log = []

    def record_stage(stage, **detail):
        log.info("stage %s: %s", stage, detail)
        stage_log.append({"stage": stage, **detail})

    try:
        # quantify
        morphologies = []
        if cfg.masks_dir is not None:
            try:
                morphologies, failures, _ = quantify_directory(
                    cfg.masks_dir, staging / "morphology",
                    images_dir=cfg.images_dir, jobs=cfg.jobs,
                )
            except MeibokitError as exc:
                raise StageFailure("quantify", exc) from exc
            record_stage("quantify", quantified=len(morphologies), failed=len(failures))
        else:
            record_stage("quantify", skipped=True)

        # ingest
        try:
            table = parse_clinical_table(cfg.clinical_table)
        except MeibokitError as exc:
            raise StageFailure("ingest", exc) from exc
        record_stage(
            "ingest",
            records=len(table.records),
            rejected=[[issue.row, issue.reason] for issue in table.rejected],
            warnings=table.warnings,
        )

        # join
        records, join_report = join_morphology(table.records, morphologies)
        (staging / "join_report.json").write_text(
            json.dumps(join_report.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )
        record_stage(
            "join",
            joined=len(join_report.joined),
            metadata_only=len(join_report.metadata_only),
            orphan_morphologies=len(join_report.orphan_morphologies),
        )

        # knowledge
        knowledge_pairs = []
        criteria_rejected = []
        if cfg.criteria_csv is not None:
            try:
                ingest = ingest_trial_criteria(cfg.criteria_csv)
            except MeibokitError as exc:
                raise StageFailure("knowledge", exc) from exc
            criteria_rejected = ingest.rejected
            if ingest.criteria:
                knowledge_pairs.extend(criteria_to_qa(ingest.criteria))
        if cfg.cases_json is not None:
            try:
                knowledge_pairs.extend(cases_to_qa(load_clinician_cases(cfg.cases_json)))
            except MeibokitError as exc:
                raise StageFailure("knowledge", exc) from exc
        record_stage(
            "knowledge",
            pairs=len(knowledge_pairs),
            criteria_rejected=[[row, reason] for row, reason in criteria_rejected],
        )

        # assemble
        render_batch = None
        if not cfg.offline:
            render_batch = llm_render_batch(cfg.endpoint)
        try:
            assembled = assemble(
                records, knowledge_pairs, cfg=cfg.ablation, render_batch=render_batch
            )
        except MeibokitError as exc:
            raise StageFailure("assemble", exc) from exc
        record_stage(
            "assemble",
            pairs=len(assembled.pairs),
            rejected=[[sid, reason] for sid, reason in assembled.rejected],
            renderer="deterministic" if cfg.offline else "llm",
        )

        # split
        try:
            dataset = split(assembled.pairs, cfg.ratio, cfg.seed, cfg.grouping)
        except MeibokitError as exc:
            raise StageFailure("split", exc) from exc
        record_stage("split", train=len(dataset.train), test=len(dataset.test))

        # emit
        emit_jsonl(dataset, staging)
        record_stage("emit", files=["train.jsonl", "test.jsonl", "split_manifest.json"])
        (staging / "stage_log.json").write_text(
            json.dumps(stage_log, indent=2, sort_keys=True) + "\n"
        )
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    # promote atomically: replace each artifact only after the full run succeeded
    promoted = {}
    for entry in sorted(staging.iterdir()):
        target = out_dir / entry.name
        if target.exists():
            if target.is_dir():
                shutil.rmtree(target)
            else:
                target.unlink()
        entry.replace(target)
        promoted[entry.name] = target
    staging.rmdir()
    return promoted
