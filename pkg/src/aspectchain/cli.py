"""Command-line entry point.

Exit codes: 0 run completed (possibly with exclusions), 2 configuration
error, 3 backend or run failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .baselines import (
    RULE_METRICS,
    ingest_external_scores,
    llmscore,
    llmscore_cot,
    rule_metric_table,
)
from .converters import CONVERTERS, convert
from .correlation import CorrelationReport, dataset_level_correlations
from .datasets import (
    Dataset,
    DatasetManifest,
    aspect_spec,
    load_dataset,
    validate_dataset,
)
from .errors import (
    AspectChainError,
    ConfigError,
    DatasetError,
    InstanceFailure,
    LLMError,
    StageOneFailure,
)
from .llm import BackendConfig, JudgeClient, build_client
from .model import AspectSpec, ScoreTable, Stage
from .pipeline import (
    VARIANTS,
    PipelineConfig,
    _failure,
    _map_instances,
    evaluate_dataset,
    generate_relevant_aspects,
    run_stage_two,
)
from .prompts import default_template, template_digest
from .report import (
    chain_digest,
    read_score_file,
    render_markdown,
    score_path,
    write_json,
    write_report,
    write_score_file,
)

log = logging.getLogger("aspectchain")

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 2, 3
LLM_METRICS = ("llmscore", "llmscore_cot", "coascore")
FORMATS = ("markdown", "csv")


@dataclass(frozen=True)
class MetricSpec:
    """``name[:key=value,...]``, e.g. ``coascore:variant=random,m=10,seed=3``."""

    name: str
    options: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, text: str) -> MetricSpec:
        name, _, rest = text.strip().partition(":")
        opts = []
        for part in filter(None, rest.split(",")):
            key, eq, value = part.partition("=")
            if not eq:
                raise ConfigError(f"metric option {part!r} is not key=value")
            opts.append((key.strip(), value.strip()))
        if name == "meteor":
            name = "meteor_lite"
        known = set(LLM_METRICS) | set(RULE_METRICS) | {"rouge", "ingest"}
        if name not in known:
            raise ConfigError(f"unknown metric {name!r}; choose from {sorted(known)}")
        return cls(name, tuple(opts))

    def get(self, key: str, default=None):
        return dict(self.options).get(key, default)

    def __str__(self) -> str:
        if not self.options:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v}" for k, v in self.options)


@dataclass
class RunConfig:
    dataset: str
    aspect: str
    out: str
    metrics: list[MetricSpec] = field(default_factory=list)
    backend: BackendConfig = field(default_factory=lambda: BackendConfig(kind="scripted"))
    formats: tuple[str, ...] = ("markdown",)
    seed: int = 0
    m: int = 5
    max_concurrency: int | None = None
    record: str | None = None
    replay: str | None = None

    def validate(self, *, require_metrics: bool = True) -> None:
        if require_metrics and not self.metrics:
            raise ConfigError("at least one metric is required")
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ConfigError(f"unknown report format {fmt!r}")
        out = Path(self.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            probe = out / ".write-probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc}") from None


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else base / p)


def load_run_config(path: str | Path) -> RunConfig:
    """Read a JSON run config; relative paths are taken relative to the file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    base = path.parent
    backend = dict(data.get("backend", {"kind": "scripted"}))
    for key in ("script", "transcript", "cache_dir"):
        backend[key] = _resolve(base, backend.get(key))
    try:
        return RunConfig(
            dataset=_resolve(base, data["dataset"]),
            aspect=data["aspect"],
            out=_resolve(base, data.get("out", "out")),
            metrics=[MetricSpec.parse(m) for m in data.get("metrics", [])],
            backend=BackendConfig.from_dict(backend),
            formats=tuple(data.get("formats", ["markdown"])),
            seed=int(data.get("seed", 0)),
            m=int(data.get("m", 5)),
            max_concurrency=data.get("max_concurrency"),
        )
    except KeyError as exc:
        raise ConfigError(f"config {path} is missing {exc}") from None


@dataclass
class RunResult:
    tables: list[ScoreTable]
    client: JudgeClient | None
    manifest: dict
    report: CorrelationReport | None = None


def _target(dataset: Dataset, name: str) -> AspectSpec:
    try:
        decl = dataset.manifest.aspect(name)
    except DatasetError as exc:
        raise ConfigError(str(exc)) from None
    return aspect_spec(dataset.task, name, decl)


def _client(config: RunConfig, client: JudgeClient | None) -> JudgeClient:
    if client is not None:
        return client
    backend = config.backend
    if backend.cache_dir is None:
        backend = replace(backend, cache_dir=str(Path(config.out) / ".cache"))
    return build_client(backend, record=config.record, replay=config.replay,
                        max_concurrency=config.max_concurrency)


def _llm_table(dataset: Dataset, metric: str, aspect: AspectSpec, client: JudgeClient, workers: int) -> ScoreTable:
    fn = llmscore if metric == "llmscore" else llmscore_cot
    table = ScoreTable(dataset.id, metric, aspect.name)

    def one(inst):
        try:
            return fn(inst, aspect, client)
        except (InstanceFailure, LLMError) as exc:
            return _failure(exc)

    for inst, res in zip(dataset.instances, _map_instances(one, dataset, workers)):
        if isinstance(res, str):
            table.exclusions.append((inst.id, res))
        else:
            table.rows[inst.id] = res
    return table


def _pipeline_config(spec: MetricSpec, aspect: AspectSpec, config: RunConfig) -> PipelineConfig:
    variant = spec.get("variant", "full")
    if variant not in VARIANTS:
        raise ConfigError(f"unknown coascore variant {variant!r}")
    try:
        return PipelineConfig(
            aspect=aspect,
            variant=variant,
            m=int(spec.get("m", config.m)),
            seed=int(spec.get("seed", config.seed)),
            reuse_chain_per_dataset=spec.get("reuse", "true").lower() != "false",
        )
    except ValueError as exc:
        raise ConfigError(f"bad coascore options {spec}: {exc}") from None


def _manifest_base(config: RunConfig, dataset: Dataset, client: JudgeClient | None) -> dict:
    return {
        "dataset": {"id": dataset.id, "task": dataset.task, "size": len(dataset)},
        "aspect": config.aspect,
        "model": client.model if client else None,
        "templates": {
            stage.value: template_digest(default_template(stage, dataset.task)) for stage in Stage
        },
        "chains": {},
        "metrics": [],
    }


def _metric_entry(table: ScoreTable, spec: str, out: Path, **extra) -> dict:
    entry = {
        "metric": table.metric_name,
        "spec": spec,
        "score_file": score_path(out, table.metric_name).name,
        "rows": len(table.rows),
        "exclusions": [list(e) for e in table.exclusions],
        "warnings": list(table.warnings),
    }
    entry.update({k: v for k, v in extra.items() if v is not None})
    return entry


def _record_chain(manifest: dict, table: ScoreTable) -> str | None:
    if table.chain is None:
        return None
    digest = chain_digest(table.chain)
    manifest["chains"][digest] = table.chain.as_text()
    return digest


def cmd_evaluate(config: RunConfig, client: JudgeClient | None = None) -> RunResult:
    """Run every requested metric and persist score files plus a run manifest."""
    config.validate()
    dataset = load_dataset(DatasetManifest.from_file(config.dataset))
    aspect = _target(dataset, config.aspect)
    needs_llm = any(m.name in LLM_METRICS for m in config.metrics)
    client = _client(config, client) if needs_llm else client
    workers = config.max_concurrency or (client.max_concurrency if client else 1)
    out = Path(config.out)
    manifest = _manifest_base(config, dataset, client)
    tables: list[ScoreTable] = []

    for spec in config.metrics:
        produced: list[tuple[ScoreTable, dict]] = []
        if spec.name == "coascore":
            pconf = _pipeline_config(spec, aspect, config)
            table = evaluate_dataset(dataset, pconf, client, workers=workers)
            produced.append((table, {"variant": pconf.variant, "m": pconf.m,
                                     "seed": pconf.seed if pconf.variant == "random" else None}))
        elif spec.name in ("llmscore", "llmscore_cot"):
            produced.append((_llm_table(dataset, spec.name, aspect, client, workers), {}))
        elif spec.name == "rouge":
            for variant in ("rougeL", "rouge1", "rouge2"):
                produced.append((rule_metric_table(dataset, variant, aspect.name), {}))
        elif spec.name == "ingest":
            path, name = spec.get("path"), spec.get("name")
            if not path or not name:
                raise ConfigError("ingest needs name=<metric> and path=<file>")
            produced.append((ingest_external_scores(path, name, dataset, aspect.name), {}))
        else:
            produced.append((rule_metric_table(dataset, spec.name, aspect.name), {}))

        for table, extra in produced:
            write_score_file(table, score_path(out, table.metric_name))
            digest = _record_chain(manifest, table)
            manifest["metrics"].append(_metric_entry(table, str(spec), out, chain_digest=digest, **extra))
            tables.append(table)

    write_json(manifest, out / "manifest.json")
    return RunResult(tables, client, manifest)


def cmd_ablate(config: RunConfig, client: JudgeClient | None = None) -> RunResult:
    """All five variants at one ``m``, sharing one chain and one set of stage-2 scores."""
    config.validate(require_metrics=False)
    dataset = load_dataset(DatasetManifest.from_file(config.dataset))
    aspect = _target(dataset, config.aspect)
    client = _client(config, client)
    workers = config.max_concurrency or client.max_concurrency
    out = Path(config.out)
    manifest = _manifest_base(config, dataset, client)

    chain = generate_relevant_aspects(aspect, dataset.task, config.m, client)
    stage_two = run_stage_two(dataset, chain, client, workers=workers)
    tables = []
    for variant in VARIANTS:
        pconf = PipelineConfig(aspect, variant, config.m, config.seed)
        shared = {} if variant == "inter" else {"chain": chain, "stage_two": stage_two}
        table = evaluate_dataset(dataset, pconf, client, workers=workers, **shared)
        write_score_file(table, score_path(out, table.metric_name))
        digest = _record_chain(manifest, table)
        manifest["metrics"].append(_metric_entry(
            table, f"coascore:variant={variant}", out, variant=variant, m=config.m,
            seed=config.seed if variant == "random" else None, chain_digest=digest,
        ))
        tables.append(table)
    write_json(manifest, out / "manifest.json")
    report = dataset_level_correlations(tables, dataset)
    write_report(report, out, config.formats)
    return RunResult(tables, client, manifest, report)


def cmd_correlate(
    score_files: list[str | Path],
    dataset_manifest: str | Path,
    aspect: str,
    out: str | Path,
    formats=("markdown",),
) -> CorrelationReport:
    dataset = load_dataset(DatasetManifest.from_file(dataset_manifest))
    tables = []
    for path in score_files:
        path = Path(path)
        run_manifest = path.parent / "manifest.json"
        if run_manifest.exists():
            recorded = json.loads(run_manifest.read_text(encoding="utf-8"))["dataset"]["id"]
            if recorded != dataset.id:
                raise ConfigError(f"{path} was produced for dataset {recorded!r}, not {dataset.id!r}")
        tables.append(read_score_file(path, dataset, aspect))
    report = dataset_level_correlations(tables, dataset)
    Path(out).mkdir(parents=True, exist_ok=True)
    write_report(report, out, formats)
    return report


# --------------------------------------------------------------------------


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config:
        config = load_run_config(args.config)
    else:
        if not (args.dataset and args.aspect and args.out):
            raise ConfigError("without --config, --dataset, --aspect and --out are required")
        config = RunConfig(dataset=args.dataset, aspect=args.aspect, out=args.out)
    if args.dataset:
        config.dataset = args.dataset
    if args.aspect:
        config.aspect = args.aspect
    if args.out:
        config.out = args.out
    if args.metric:
        config.metrics = [MetricSpec.parse(m) for m in args.metric]
    if args.format:
        config.formats = tuple(args.format)
    if args.max_concurrency:
        config.max_concurrency = args.max_concurrency
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "m", None):
        config.m = args.m
    if args.backend_script:
        config.backend = replace(config.backend, kind="scripted", script=args.backend_script)
    config.record = args.record
    config.replay = args.replay
    return config


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--dataset", help="dataset manifest (JSON)")
    p.add_argument("--aspect", help="target aspect name")
    p.add_argument("--metric", action="append", help="metric spec, repeatable (e.g. coascore:m=10)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", action="append", choices=FORMATS)
    p.add_argument("--max-concurrency", type=int)
    p.add_argument("--record", help="write a transcript of every judge completion")
    p.add_argument("--replay", help="serve judge completions from a transcript")
    p.add_argument("--seed", type=int)
    p.add_argument("--backend-script", help="use the scripted backend with this rules file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aspectchain", description="Aspect-aware LLM evaluation of generated text.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a dataset with one or more metrics")
    _add_run_flags(p)

    p = sub.add_parser("ablate", help="run all chain-of-aspects variants at one aspect count")
    _add_run_flags(p)
    p.add_argument("--m", type=int, help="number of relevant aspects")

    p = sub.add_parser("correlate", help="correlate score files with human judgments")
    p.add_argument("scores", nargs="+", help="score files (instance_id,value,provenance)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--aspect", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", action="append", choices=FORMATS)

    p = sub.add_parser("convert", help="convert an upstream corpus to the normalized format")
    p.add_argument("corpus", choices=sorted(CONVERTERS))
    p.add_argument("upstream")
    p.add_argument("--out", required=True)

    p = sub.add_parser("validate", help="check a normalized dataset against its manifest")
    p.add_argument("--dataset", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("evaluate", "ablate"):
            config = _run_config_from_args(args)
            result = (cmd_evaluate if args.command == "evaluate" else cmd_ablate)(config)
            for table in result.tables:
                print(f"{table.metric_name}: {len(table.rows)} scored, {len(table.exclusions)} excluded")
            if any(t.rows for t in result.tables) or not any(t.exclusions for t in result.tables):
                return EXIT_OK
            print("every instance was excluded", file=sys.stderr)
            return EXIT_RUN
        if args.command == "correlate":
            report = cmd_correlate(args.scores, args.dataset, args.aspect, args.out, tuple(args.format or ["markdown"]))
            print(render_markdown(report), end="")
            return EXIT_OK
        if args.command == "convert":
            print(convert(args.corpus, args.upstream, args.out))
            return EXIT_OK
        if args.command == "validate":
            manifest = DatasetManifest.from_file(args.dataset)
            dataset = load_dataset(manifest)
            problems = validate_dataset(dataset, manifest)
            for v in problems:
                print(f"{v.kind}\t{v.instance_id}\t{v.detail}")
            print(f"{len(dataset)} instances, {len(problems)} violations")
            return EXIT_OK if not problems else EXIT_CONFIG
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageOneFailure, LLMError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    except AspectChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
