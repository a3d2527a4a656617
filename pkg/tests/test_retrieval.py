import pytest

from gesturelab.embedding import stub_embed
from gesturelab.proposal import GestureRegion, mark_deleted
from gesturelab.retrieval import (
    SELECTION_SYSTEM_PROMPT,
    SOURCE_FALLBACK,
    SOURCE_LLM,
    build_selection_prompt,
    recommend_chunk,
    retrieve_candidates,
    select_gesture,
)
from gesturelab.providers import FailingCompletionProvider, MockCompletionProvider
from gesturelab.script import Span, span_text
from gesturelab.textmetrics import cosine_similarity

from conftest import make_chunk


def region_at(chunk, start, end, region_id="r1"):
    return GestureRegion(
        region_id=region_id,
        span=Span(chunk.chunk_id, start, end),
        source="verbatim-match",
        match_similarity=1.0,
    )


class TestRetrieveCandidates:
    def test_self_retrieval_rank1(self, indexed_db, stub):
        cands = retrieve_candidates("one key reason", indexed_db, stub)
        assert cands[0].entry_id == "g001"
        assert cands[0].similarity == pytest.approx(1.0)
        assert [c.rank for c in cands] == [1, 2, 3]

    def test_similarity_non_increasing(self, indexed_db, stub):
        cands = retrieve_candidates("rising prices", indexed_db, stub)
        sims = [c.similarity for c in cands]
        assert sims == sorted(sims, reverse=True)

    def test_matches_exhaustive_scan(self, indexed_db, stub):
        query = stub_embed("rising prices").as_array()
        scored = sorted(
            (
                (-cosine_similarity(query, stub_embed(e.region_text).as_array()), e.entry_id)
                for e in indexed_db.entries
            )
        )
        expected = [eid for _, eid in scored[:3]]
        cands = retrieve_candidates("rising prices", indexed_db, stub)
        assert [c.entry_id for c in cands] == expected

    def test_k_clamped_to_db_size(self, indexed_db, stub):
        cands = retrieve_candidates("rising prices", indexed_db, stub, k=100)
        assert len(cands) == len(indexed_db.entries)

    def test_empty_text_rejected(self, indexed_db, stub):
        with pytest.raises(ValueError):
            retrieve_candidates("  ", indexed_db, stub)

    def test_unindexed_db_rejected(self, db, stub):
        with pytest.raises(ValueError):
            retrieve_candidates("rising prices", db, stub)


class TestBuildSelectionPrompt:
    # Inputs mirroring the documented selection example; the rendered prompt
    # must follow the exact inline format the selector model expects.
    def test_example_prompt_shape(self, indexed_db, stub):
        cands = retrieve_candidates("there's nothing", indexed_db, stub, k=3)
        prompt = build_selection_prompt("Some chunk text.", "nothing", cands, indexed_db)
        assert prompt.startswith(SELECTION_SYSTEM_PROMPT + " TEXT: Some chunk text.; ")
        assert "; QUERY: nothing; CANDIDATES: 1) " in prompt
        assert prompt.endswith(". Give only the candidate as output.")

    def test_two_candidates_two_items(self, indexed_db, stub):
        cands = retrieve_candidates("rising prices", indexed_db, stub, k=2)
        prompt = build_selection_prompt("T", "rising prices", cands, indexed_db)
        body = prompt.split("CANDIDATES: ")[1]
        assert body.count(") ") >= 2
        assert " 3) " not in body

    def test_no_candidates_rejected(self, indexed_db):
        with pytest.raises(ValueError):
            build_selection_prompt("T", "q", [], indexed_db)


class TestSelectGesture:
    def _setup(self, indexed_db, stub):
        chunk = make_chunk("there is one key reason why rising prices matter.")
        region = region_at(chunk, 2, 4)
        text = span_text(chunk, region.span)
        cands = retrieve_candidates(text, indexed_db, stub)
        prompt = build_selection_prompt(chunk.raw_text, text, cands, indexed_db)
        return chunk, region, text, cands, prompt

    def test_leading_index(self, indexed_db, stub):
        chunk, region, text, cands, prompt = self._setup(indexed_db, stub)
        provider = MockCompletionProvider()
        provider.add(prompt, "1) one key reason")
        rec = select_gesture(region, cands, chunk.raw_text, text, provider, indexed_db)
        assert rec.selected_rank == 1
        assert rec.selection_source == SOURCE_LLM

    def test_index_mentioned_in_prose(self, indexed_db, stub):
        chunk, region, text, cands, prompt = self._setup(indexed_db, stub)
        provider = MockCompletionProvider()
        provider.add(prompt, "the best choice is option 3")
        rec = select_gesture(region, cands, chunk.raw_text, text, provider, indexed_db)
        assert rec.selected_rank == 3
        assert rec.selection_source == SOURCE_LLM

    def test_verbatim_candidate_text(self, indexed_db, stub):
        chunk, region, text, cands, prompt = self._setup(indexed_db, stub)
        rank2_text = indexed_db.entry(cands[1].entry_id).region_text
        provider = MockCompletionProvider()
        provider.add(prompt, f"I would pick {rank2_text}")
        rec = select_gesture(region, cands, chunk.raw_text, text, provider, indexed_db)
        assert rec.selected_rank == 2
        assert rec.selection_source == SOURCE_LLM

    def test_out_of_list_falls_back(self, indexed_db, stub):
        chunk, region, text, cands, prompt = self._setup(indexed_db, stub)
        provider = MockCompletionProvider()
        provider.add(prompt, "none of these fit")
        rec = select_gesture(region, cands, chunk.raw_text, text, provider, indexed_db)
        assert rec.selected_rank == 1
        assert rec.selection_source == SOURCE_FALLBACK

    def test_transport_failure_falls_back(self, indexed_db, stub):
        chunk, region, text, cands, _ = self._setup(indexed_db, stub)
        rec = select_gesture(
            region, cands, chunk.raw_text, text, FailingCompletionProvider(), indexed_db
        )
        assert rec.selected_rank == 1
        assert rec.selection_source == SOURCE_FALLBACK


class TestRecommendChunk:
    def _chunk_and_regions(self, chunk_text, spans):
        chunk = make_chunk(chunk_text)
        regions = [
            region_at(chunk, s, e, region_id=f"r{i}") for i, (s, e) in enumerate(spans)
        ]
        return chunk, regions

    def test_one_per_region_in_span_order(self, indexed_db, stub):
        chunk, regions = self._chunk_and_regions(
            "there is one key reason why rising prices hit people under stress.",
            [(9, 10), (2, 4), (6, 7)],
        )
        recs = recommend_chunk(
            chunk, regions, indexed_db, stub, MockCompletionProvider(default="1")
        )
        assert [r.region_id for r in recs] == ["r1", "r2", "r0"]

    def test_empty_regions(self, indexed_db, stub):
        chunk = make_chunk("no regions here at all.")
        assert recommend_chunk(chunk, [], indexed_db, stub, MockCompletionProvider()) == []

    def test_deleted_regions_skipped(self, indexed_db, stub):
        chunk, regions = self._chunk_and_regions(
            "one key reason and rising prices both matter.", [(0, 2), (4, 5)]
        )
        regions[0] = mark_deleted(regions[0])
        recs = recommend_chunk(
            chunk, regions, indexed_db, stub, MockCompletionProvider(default="1")
        )
        assert [r.region_id for r in recs] == ["r1"]

    def test_always_answering_2_selects_rank_2(self, indexed_db, stub):
        chunk, regions = self._chunk_and_regions(
            "one key reason and rising prices both matter.", [(0, 2), (4, 5)]
        )
        recs = recommend_chunk(
            chunk, regions, indexed_db, stub, MockCompletionProvider(default="2")
        )
        assert all(r.selected_rank == 2 for r in recs)
        assert all(r.selection_source == SOURCE_LLM for r in recs)

    def test_bit_reproducible(self, indexed_db, stub):
        chunk, regions = self._chunk_and_regions(
            "one key reason and rising prices both matter.", [(0, 2), (4, 5)]
        )
        run = lambda: recommend_chunk(
            chunk, regions, indexed_db, stub, MockCompletionProvider(default="2")
        )
        assert run() == run()
