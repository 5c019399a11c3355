"""Category labeling: passthrough truncation, lexicon scan, remote stub."""

from __future__ import annotations

import json

import pytest

from phenolog.errors import LabelingError
from phenolog.taxonomy import CategoryLabel, Lexicon, label_event, label_timeline

from conftest import make_event, make_timeline


class TestPassthrough:
    def test_root_truncation(self):
        event = make_event(category="/News/Sports")
        assert label_event(event, "passthrough").root == "News"

    def test_plain_root_kept(self):
        assert label_event(make_event(category="Music"), "passthrough").root == "Music"

    def test_unlabeled_event_error(self):
        with pytest.raises(LabelingError, match="unlabeled"):
            label_event(make_event(category=None), "passthrough")

    def test_never_contains_slash(self):
        for raw in ("/A/B/C", "A/B", "/A", "A"):
            assert "/" not in label_event(make_event(category=raw), "passthrough").root


class TestLexicon:
    def test_first_matching_token_wins(self):
        lex = Lexicon(entries={"nba": "Sports", "highlights": "Arts"})
        event = make_event(category=None, text="nba playoff highlights")
        label = label_event(event, "lexicon", lexicon=lex)
        assert label.root == "Sports"
        assert label.confidence == 1.0

    def test_default_for_unknown_words(self):
        lex = Lexicon(entries={"nba": "Sports"}, default_category="Other")
        label = label_event(make_event(category=None, text="baking bread"), "lexicon", lexicon=lex)
        assert (label.root, label.confidence) == ("Other", 0.5)

    def test_requires_lexicon(self):
        with pytest.raises(LabelingError, match="requires a lexicon"):
            label_event(make_event(), "lexicon")

    def test_keywords_must_be_lowercase(self):
        with pytest.raises(ValueError, match="lowercase"):
            Lexicon(entries={"NBA": "Sports"})

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "lex.json"
        path.write_text(json.dumps({"default": "Misc", "entries": {"cat": "Pets"}}))
        lex = Lexicon.from_file(path)
        assert lex.default_category == "Misc"
        assert lex.entries == {"cat": "Pets"}


class TestRemoteStub:
    def test_not_configured(self):
        with pytest.raises(LabelingError, match="not configured"):
            label_event(make_event(), "remote-stub")

    def test_injected_callback(self):
        label = label_event(
            make_event(), "remote-stub", remote=lambda e: CategoryLabel("Injected", 0.9)
        )
        assert label.root == "Injected"


class TestInvariants:
    def test_deterministic(self):
        event = make_event(category="/Science/Space", text="mars rover")
        lex = Lexicon(entries={"mars": "Science"})
        for labeler, kwargs in (("passthrough", {}), ("lexicon", {"lexicon": lex})):
            first = label_event(event, labeler, **kwargs)
            assert all(label_event(event, labeler, **kwargs) == first for _ in range(5))

    def test_synthetic_passthrough_matches_generator(self):
        # 200 events whose categories the generator assigned directly.
        import numpy as np

        rng = np.random.default_rng(0)
        cats = ["News", "Sports", "Music", "Games", "Food"]
        events = [
            make_event(day=int(i // 24), hour=int(i % 24), category=cats[int(c)], text=f"e{i}")
            for i, c in enumerate(rng.integers(0, len(cats), size=200))
        ]
        tl = make_timeline(events)
        labels = label_timeline(tl, "passthrough")
        assert [lab.root for lab in labels] == [e.category for e in tl.events]

    def test_category_label_validation(self):
        with pytest.raises(ValueError, match="nonempty"):
            CategoryLabel("")
        with pytest.raises(ValueError, match="confidence"):
            CategoryLabel("News", 1.5)
