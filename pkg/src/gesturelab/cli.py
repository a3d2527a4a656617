"""Command-line entry points: serve, recommend, corpus tools, eval runner."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import Config
from .corpus import (
    augment_sample,
    load_database,
    load_samples,
    precompute_embeddings,
    save_samples,
)
from .embedding import EmbeddingCache, build_provider
from .evaluation import (
    EvalSample,
    load_predictions,
    match_direct,
    match_semantic,
    report,
    score,
)
from .proposal import propose_regions
from .providers import build_completion_provider
from .retrieval import recommend_chunk
from .script import Chunk, Span, parse_script, span_text, tokenize


def _load_config(path: str | None) -> Config:
    return Config.load(path) if path else Config()


@click.group()
def main():
    """Gesture rehearsal toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path: str, host: str, port: int):
    """Run the rehearsal HTTP/WebSocket service."""
    import uvicorn

    from .service import create_app

    app = create_app(Config.load(config_path))
    uvicorn.run(app, host=host, port=port)


@main.command()
@click.argument("script_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def recommend(script_path: str, config_path: str | None, out_path: str | None):
    """Run the offline pipeline (propose -> filter -> retrieve -> select)."""
    config = _load_config(config_path)
    if not config.database_path:
        raise click.ClickException("config must set database_path")
    cache = EmbeddingCache(config.embedding_cache)
    embedder = build_provider(config.embedding_provider)
    emphasis = build_completion_provider(config.emphasis_provider)
    selection = build_completion_provider(config.selection_provider)
    db = precompute_embeddings(load_database(config.database_path), embedder, cache)

    script = parse_script(
        Path(script_path).read_text(), target_words=config.chunk_target_words
    )
    out = {"chunks": []}
    for chunk in script.chunks():
        regions = propose_regions(
            chunk, emphasis, embedder, threshold=config.filter_threshold, cache=cache
        )
        recs = recommend_chunk(
            chunk, regions, db, embedder, selection, k=config.knn_k, cache=cache
        )
        rec_by_region = {r.region_id: r for r in recs}
        out["chunks"].append(
            {
                "chunk_id": chunk.chunk_id,
                "slide_id": chunk.slide_id,
                "regions": [
                    {
                        "region_id": r.region_id,
                        "start": r.span.start,
                        "end": r.span.end,
                        "text": span_text(chunk, r.span),
                        "source": r.source,
                        "match_similarity": r.match_similarity,
                        "recommendation": {
                            "selected_rank": rec_by_region[r.region_id].selected_rank,
                            "selection_source": rec_by_region[
                                r.region_id
                            ].selection_source,
                            "candidates": [
                                {
                                    "entry_id": c.entry_id,
                                    "rank": c.rank,
                                    "similarity": round(c.similarity, 9),
                                    "clip_uri": db.entry(c.entry_id).clip_uri,
                                }
                                for c in rec_by_region[r.region_id].candidates
                            ],
                        },
                    }
                    for r in sorted(regions, key=lambda r: r.span.start)
                    if r.region_id in rec_by_region
                ],
            }
        )
    rendered = json.dumps(out, sort_keys=True, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(rendered)
    else:
        click.echo(rendered, nl=False)


@main.group()
def corpus():
    """Gesture database tools."""


@corpus.command("validate")
@click.argument("path", type=click.Path(exists=True))
def corpus_validate(path: str):
    db = load_database(path)
    click.echo(f"{len(db.entries)} entries loaded")
    for w in db.warnings:
        click.echo(f"warning: {w}")
    for e in db.errors:
        click.echo(f"error: {e}")
    if db.errors:
        sys.exit(1)


@corpus.command("embed")
@click.argument("path", type=click.Path(exists=True))
@click.option("--provider", default="stub", show_default=True)
@click.option("--cache", "cache_path", type=click.Path(), default=None)
def corpus_embed(path: str, provider: str, cache_path: str | None):
    db = load_database(path)
    embedder = build_provider(provider)
    cache = EmbeddingCache(cache_path)
    precompute_embeddings(db, embedder, cache)
    click.echo(
        f"indexed {db.manifest['entry_count']} entries with model {db.manifest['model']}"
    )


@corpus.command("augment")
@click.argument("path", type=click.Path(exists=True))
@click.option("--count", default=5, show_default=True)
@click.option("--provider", required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def corpus_augment(path: str, count: int, provider: str, out_path: str | None):
    completion_provider = build_completion_provider(provider)
    samples = load_samples(path)
    synthetic = []
    for sample in samples:
        if sample.origin != "human":
            continue
        synthetic.extend(augment_sample(sample, completion_provider, count=count))
    click.echo(f"generated {len(synthetic)} synthetic samples")
    if out_path:
        save_samples(synthetic, out_path)


@main.group("eval")
def eval_group():
    """Span-matching evaluation."""


def _load_gold(path: str) -> list[tuple[str, Chunk, tuple[Span, ...]]]:
    """Gold file: {"sample_id", "text", "gold_spans": [[start, end], ...]} per line."""
    out = []
    with Path(path).open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            chunk = Chunk(
                chunk_id=rec["sample_id"],
                slide_id=rec["sample_id"],
                raw_text=rec["text"],
                tokens=tuple(tokenize(rec["text"])),
            )
            spans = tuple(
                Span(chunk.chunk_id, s, e) for s, e in rec["gold_spans"]
            )
            out.append((rec["sample_id"], chunk, spans))
    return out


@eval_group.command("run")
@click.option("--gold", "gold_path", type=click.Path(exists=True), required=True)
@click.option("--pred", "pred_path", type=click.Path(exists=True), required=True)
@click.option(
    "--scheme", type=click.Choice(["dm", "sm", "both"]), default="both", show_default=True
)
@click.option("--embedder", default="stub", show_default=True)
@click.option("--model-name", default="model", show_default=True)
@click.option("--report-out", "report_path", type=click.Path(), default=None)
def eval_run(
    gold_path: str,
    pred_path: str,
    scheme: str,
    embedder: str,
    model_name: str,
    report_path: str | None,
):
    predictions = load_predictions(pred_path)
    samples = [
        EvalSample(
            sample_id=sid,
            chunk=chunk,
            gold_spans=spans,
            predictions=tuple(predictions.get(sid, [])),
        )
        for sid, chunk, spans in _load_gold(gold_path)
    ]
    if not samples:
        raise click.ClickException("gold file is empty")
    provider = build_provider(embedder)
    schemes = {}
    if scheme in ("dm", "both"):
        schemes["dm"] = score(samples, match_direct)
    if scheme in ("sm", "both"):
        schemes["sm"] = score(
            samples,
            lambda pred, golds, chunk: match_semantic(pred, golds, chunk, provider),
        )
    if "dm" not in schemes:
        schemes["dm"] = schemes["sm"]
    if "sm" not in schemes:
        schemes["sm"] = schemes["dm"]
    table, machine = report({model_name: schemes})
    click.echo(table, nl=False)
    if report_path:
        Path(report_path).write_text(json.dumps(machine, indent=2, sort_keys=True) + "\n")
